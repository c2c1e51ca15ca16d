#include "oracles/oracles.hpp"

#include <gtest/gtest.h>

using namespace planspace;

namespace {

// Two binary variables, a -> b chain with unit costs.
OspTask chain_task()
{
    OspTask t;
    t.variables = {{0, "a", {"false", "true"}}, {1, "b", {"false", "true"}}};
    t.initial = {0, 0};
    Action first;
    first.id = 0;
    first.name = "(first)";
    first.effect.set({0, 1});
    Action second;
    second.id = 1;
    second.name = "(second)";
    second.precondition.set({0, 1});
    second.effect.set({1, 1});
    t.actions = {first, second};
    t.hard_goal.set({1, 1});
    return t;
}

Project project_file(const std::string& name)
{
    return cli_detail::load_project_file(oracle::data_path("nomystery/" + name));
}

Project with_problem(Project p, const std::string& problem_file)
{
    p.problem_pddl = oracle::read_file(oracle::data_path("nomystery/" + problem_file));
    return p;
}

ActionId action_named(const OspTask& t, const std::string& name)
{
    for (const Action& a : t.actions)
        if (a.name == name)
            return a.id;
    throw std::runtime_error("no action " + name);
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::Validation;
}

} // namespace

// ---------------------------------------------------------------------------
// task core

TEST(Task, ApplySequenceAndCost)
{
    const OspTask t = chain_task();
    const std::vector<ActionId> steps = {0, 1};
    EXPECT_EQ(apply_sequence(t, t.initial, steps), (State{1, 1}));
    EXPECT_EQ(plan_cost(t, steps), 2);
    EXPECT_EQ(state_trace(t, steps).size(), 3U);
}

TEST(Task, NotApplicableAction)
{
    const OspTask t = chain_task();
    const std::vector<ActionId> steps = {1};
    EXPECT_EQ(code_of([&] { apply_sequence(t, t.initial, steps); }), ErrorCode::NotApplicable);
}

TEST(Task, ValidatePlanReasons)
{
    OspTask t = chain_task();
    t.soft_goal.set({0, 1});
    ValidationReport ok = validate_plan(t, make_plan(t, {0, 1}));
    EXPECT_TRUE(ok.valid);
    EXPECT_EQ(ok.cost, 2);
    EXPECT_EQ(ok.satisfied_soft_facts, (std::vector<Fact>{{0, 1}}));
    EXPECT_EQ(validate_plan(t, make_plan(t, {0})).violated_reason, Violation::HardGoalUnsatisfied);
    EXPECT_EQ(validate_plan(t, make_plan(t, {1})).violated_reason, Violation::NotApplicable);
    t.bound = 1;
    EXPECT_EQ(validate_plan(t, make_plan(t, {0, 1})).violated_reason, Violation::CostExceeded);
    t.bound = 2;
    EXPECT_TRUE(validate_plan(t, make_plan(t, {0, 1})).valid);
}

TEST(Task, ConditionalEffectsReadThePreState)
{
    OspTask t = chain_task();
    ConditionalEffect ce;
    ce.condition.set({0, 0});
    ce.effect.set({1, 1});
    t.actions[0].conditional_effects.push_back(ce);
    const std::vector<ActionId> steps = {0};
    EXPECT_EQ(apply_sequence(t, t.initial, steps), (State{1, 1}));
    EXPECT_EQ(apply_sequence(t, State{1, 0}, steps), (State{1, 0}));
}

TEST(Task, RejectsMalformedTasks)
{
    OspTask t = chain_task();
    t.actions[1].cost = -1;
    EXPECT_EQ(code_of([&] { validate_task(t); }), ErrorCode::InvalidTask);
    t = chain_task();
    t.initial = {0};
    EXPECT_EQ(code_of([&] { validate_task(t); }), ErrorCode::InvalidTask);
}

TEST(Task, JsonRoundTrip)
{
    OspTask t = chain_task();
    t.bound = 7;
    const OspTask back = task_from_json(to_json(t));
    EXPECT_EQ(to_json(back), to_json(t));
    EXPECT_EQ(back.bound, 7);
}

TEST(Task, CostArithmeticSaturates)
{
    EXPECT_EQ(add_cost(INFINITE_COST, 3), INFINITE_COST);
    EXPECT_EQ(add_cost(2, 3), 5);
}

// ---------------------------------------------------------------------------
// PDDL frontend

TEST(Pddl, DomainRoundTrip)
{
    const auto d = pddl::parse_domain(oracle::read_file(oracle::data_path("nomystery/domain.pddl")));
    EXPECT_EQ(pddl::parse_domain(pddl::unparse(d)), d);
    const auto p = pddl::parse_problem(oracle::read_file(oracle::data_path("nomystery/problem.pddl")), d);
    EXPECT_EQ(pddl::parse_problem(pddl::unparse(p), d), p);
}

TEST(Pddl, ErrorsCarryCodes)
{
    EXPECT_EQ(code_of([] { pddl::parse_domain("(define (domain x)"); }), ErrorCode::SyntaxError);
    EXPECT_EQ(code_of([] {
                  pddl::parse_domain("(define (domain x) (:requirements :strips :conditional-effects))");
              }),
              ErrorCode::UnsupportedFeature);
    EXPECT_EQ(code_of([] {
                  pddl::parse_domain("(define (domain x) (:requirements :strips :typing) (:types a)"
                                     " (:predicates (p ?x - a))"
                                     " (:action go :parameters (?x - b) :precondition (p ?x) :effect (not (p ?x))))");
              }),
              ErrorCode::TypeError);
}

TEST(Pddl, OneParameterOverThreeObjects)
{
    const std::string domain = "(define (domain d) (:requirements :strips :typing) (:types obj)"
                               " (:predicates (done ?x - obj))"
                               " (:action finish :parameters (?x - obj) :precondition () :effect (done ?x)))";
    const std::string problem = "(define (problem q) (:domain d) (:objects a b c - obj) (:init))";
    const auto d = pddl::parse_domain(domain);
    const GroundedTask g = ground(d, pddl::parse_problem(problem, d));
    EXPECT_EQ(g.task.actions.size(), 3U);
    EXPECT_EQ(g.report.objects, 3U);
}

TEST(Pddl, MicroGrounding)
{
    const auto model = load_project(project_file("micro.json"));
    EXPECT_EQ(model->grounded.report.actions_before_pruning, 6U);
    EXPECT_EQ(model->grounded.report.actions_per_schema.at("drive"), 2U);
    EXPECT_EQ(model->grounded.report.actions_per_schema.at("load"), 2U);
    EXPECT_EQ(model->grounded.report.actions_per_schema.at("unload"), 2U);
    // with fuel 1 the truck can never drive back, so p1 is never at l1 after unloading there
    EXPECT_LE(model->grounded.report.actions_after_pruning, 6U);
}

TEST(Pddl, PruningDropsRelaxedUnreachableAtoms)
{
    const std::string domain = "(define (domain d) (:requirements :strips) (:predicates (p) (q) (r))"
                               " (:action a :parameters () :precondition (p) :effect (q))"
                               " (:action b :parameters () :precondition (r) :effect (p))"
                               " (:action c :parameters () :precondition (q) :effect (not (r))))";
    const auto d = pddl::parse_domain(domain);
    const GroundedTask g = ground(d, pddl::parse_problem("(define (problem x) (:domain d) (:init (p)))", d));
    EXPECT_EQ(g.atoms.resolve("(r)").kind, AtomRef::Kind::AlwaysFalse);
    EXPECT_EQ(g.atoms.resolve("(q)").kind, AtomRef::Kind::Variable);
    EXPECT_EQ(g.task.actions.size(), 2U);
    EXPECT_EQ(g.report.actions_before_pruning, 3U);
}

TEST(Pddl, StaticAtoms)
{
    const auto model = load_project(project_file("micro.json"));
    EXPECT_TRUE(model->statics.count("(connected l1 l2)"));
    EXPECT_FALSE(model->statics.count("(at t1 l1)"));
}

TEST(Pddl, ReconstructedTown)
{
    const auto model = load_project(project_file("project.json"));
    const auto& types = model->grounded.object_types;
    std::map<std::string, int> per_type;
    for (const auto& [obj, type] : types)
        ++per_type[type];
    EXPECT_EQ(per_type["truck"] + per_type["package"] + per_type["location"], 13);
    EXPECT_EQ(per_type["fuellevel"], 4);
    std::size_t connected = 0;
    std::set<std::set<std::string>> roads;
    for (const pddl::Atom& a : model->problem.init)
        if (a.predicate == "connected") {
            ++connected;
            roads.insert({a.args[0], a.args[1]});
        }
    EXPECT_EQ(connected, 2 * roads.size());
    for (const auto& road : roads)
        EXPECT_TRUE(model->statics.count("(connected " + *road.begin() + " " + *road.rbegin() + ")"));
}

TEST(Pddl, MicroStateSpace)
{
    // truck at l1 or l2, package at l1, in the truck, or at l2 once the truck has left
    const auto model = load_project(project_file("micro.json"));
    EXPECT_EQ(oracle::reachable_states(model->grounded.task, INFINITE_COST).size(), 5U);
}

// ---------------------------------------------------------------------------
// properties

TEST(Properties, ActionSetBasics)
{
    const auto model = load_project(project_file("micro.json"));
    const OspTask& t = model->grounded.task;
    PlanProperty avoid{"avoid", "never drives", PropertyKind::ActionSet, "(not (used d))",
                       {{"d", {"(drive * * * * *)"}}}, 1, false};
    PlanProperty both{"both", "loads and drives", PropertyKind::ActionSet, "(and (used l) (used d))",
                      {{"l", {"(load * * *)"}}, {"d", {"(drive * * * * *)"}}}, 1, false};
    const CompiledTask c = compile_properties(*model->context, {avoid, both});
    const Plan load_only = make_plan(t, {action_named(t, "(load p1 t1 l1)")});
    const State s = *oracle::run(c.task, load_only.steps);
    EXPECT_TRUE(c.goal("avoid").evaluate(s));
    EXPECT_FALSE(c.goal("both").evaluate(s));
    EXPECT_TRUE(evaluate_on_trace(avoid, *model->context, load_only));
    EXPECT_FALSE(evaluate_on_trace(both, *model->context, load_only));
}

TEST(Properties, PatternMatching)
{
    const auto model = load_project(project_file("micro.json"));
    EXPECT_EQ(model->context->match_actions({"(drive t1 * * * *)"}).size(), 2U);
    EXPECT_EQ(model->context->match_actions({"(load * * l1)", "(unload * * l1)"}).size(), 2U);
    EXPECT_TRUE(model->context->match_actions({"(fly *)"}).empty());
}

TEST(Properties, SameTruckDifferential)
{
    Project p = with_problem(project_file("project.json"), "small.pddl");
    const PlanProperty eight = *p.find_property("8");
    p.properties = {eight};
    const auto model = load_project(p);
    std::mt19937 rng(8);
    int agree = 0, satisfied = 0;
    for (int i = 0; i < 20; ++i) {
        const Plan plan = oracle::random_plan(rng, model->grounded.task, 8);
        const bool compiled = model->compiled.goal("8").evaluate(*oracle::run(model->compiled.task, plan.steps));
        const bool semantic = evaluate_on_trace(eight, *model->context, plan);
        agree += compiled == semantic;
        satisfied += semantic;
        EXPECT_EQ(semantic, oracle::property_holds(eight, *model->context, plan));
    }
    EXPECT_EQ(agree, 20);
    // a plan where the red truck carries both packages
    const OspTask& t = model->grounded.task;
    const Plan same = make_plan(t, {action_named(t, "(load p0 red depot)"), action_named(t, "(drive red depot market f2 f1)"),
                                    action_named(t, "(drive red market harbor f1 f0)"),
                                    action_named(t, "(load p2 red harbor)")});
    EXPECT_TRUE(evaluate_on_trace(eight, *model->context, same));
    EXPECT_TRUE(model->compiled.goal("8").evaluate(*oracle::run(model->compiled.task, same.steps)));
}

TEST(Properties, LtlfTrivialCases)
{
    const auto model = load_project(project_file("micro.json"));
    PlanProperty always{"always", "always true", PropertyKind::Ltlf, "(always true)", {}, 1, false};
    PlanProperty never{"never", "eventually unreachable", PropertyKind::Ltlf, "(eventually (at p1 t1))", {}, 1, false};
    const CompiledTask c = compile_properties(*model->context, {always, never});
    EXPECT_EQ((*c.monitors)[0].automaton_states, 1U);
    std::mt19937 rng(3);
    for (int i = 0; i < 10; ++i) {
        const Plan plan = oracle::random_plan(rng, model->grounded.task, 4);
        const State s = *oracle::run(c.task, plan.steps);
        EXPECT_TRUE(c.goal("always").evaluate(s));
        EXPECT_FALSE(c.goal("never").evaluate(s));
    }
}

TEST(Properties, DeliveredBeforeAutomaton)
{
    Project p = project_file("project.json");
    const PlanProperty eleven = *p.find_property("11");
    const auto model = load_project(p);
    const PropertyMonitor* monitor = nullptr;
    for (const PropertyMonitor& m : *model->compiled.monitors)
        if (m.property_id == "11")
            monitor = &m;
    ASSERT_NE(monitor, nullptr);
    EXPECT_EQ(monitor->automaton_states, 3U);
    std::mt19937 rng(11);
    int agree = 0;
    for (int i = 0; i < 100; ++i) {
        const Plan plan = oracle::random_plan(rng, model->grounded.task, 14);
        const bool compiled = model->compiled.goal("11").evaluate(*oracle::run(model->compiled.task, plan.steps));
        agree += compiled == evaluate_on_trace(eleven, *model->context, plan);
    }
    EXPECT_EQ(agree, 100);
}

TEST(Properties, FormulaTooLarge)
{
    const auto model = load_project(project_file("micro.json"));
    PlanProperty p{"big", "big", PropertyKind::Ltlf,
                   "(and (eventually (at p1 l2)) (eventually (in p1 t1)) (always (next (at t1 l1))))", {}, 1, false};
    CompileOptions tiny;
    tiny.dfa.max_states = 1;
    EXPECT_EQ(code_of([&] { compile_properties(*model->context, {p}, tiny); }), ErrorCode::FormulaTooLarge);
}

TEST(Properties, SelectionPartition)
{
    const auto model = load_project(project_file("project.json"));
    std::vector<std::string> soft;
    for (int i = 2; i <= 11; ++i)
        soft.push_back(std::to_string(i));
    const CompiledTask c = with_selection(model->compiled, {"1"}, soft);
    EXPECT_EQ(c.hard_ids, std::vector<std::string>{"1"});
    EXPECT_EQ(c.soft_ids.size(), 10U);
    EXPECT_EQ(c.hard_conditions().size(), 1U);
    EXPECT_EQ(c.task.hard_goal.size(), 1U);
    EXPECT_EQ(code_of([&] { with_selection(model->compiled, {"2"}, {}); }), ErrorCode::MissingGlobalHard);
    EXPECT_EQ(code_of([&] { with_selection(model->compiled, {"1", "2"}, {"2"}); }), ErrorCode::Validation);

    const auto micro = load_project(project_file("micro.json"));
    const CompiledTask m = with_selection(micro->compiled, {}, {"delivered"});
    EXPECT_TRUE(m.task.hard_goal.empty());
    EXPECT_EQ(m.task.soft_goal.size(), 1U);
}

TEST(Properties, MonitorsNeverGuardOriginalActions)
{
    const auto model = load_project(project_file("project.json"));
    const auto base = static_cast<VariableId>(model->compiled.base_variable_count);
    for (const Action& a : model->compiled.task.actions)
        for (const Fact& f : a.precondition)
            EXPECT_LT(f.var, base) << a.name;
}

TEST(Properties, TemplateSentences)
{
    const Project p = project_file("project.json");
    const auto model = load_project(p);
    auto find = [&](const std::string& id) {
        for (const PropertyTemplate& t : p.templates)
            if (t.id == id)
                return t;
        throw std::runtime_error("no template " + id);
    };
    const PlanProperty road = instantiate_template(
        find("avoid-road"), {{"L_i", "cafe"}, {"L_j", "packing-station"}, {"T_i", "red"}}, model->template_context());
    EXPECT_EQ(road.nl_text, p.find_property("7")->nl_text);
    EXPECT_EQ(road.action_sets, p.find_property("7")->action_sets);
    const PlanProperty same =
        instantiate_template(find("same-truck"), {{"P_a", "p2"}, {"P_b", "p3"}}, model->template_context());
    EXPECT_EQ(same.nl_text, p.find_property("9")->nl_text);
    EXPECT_EQ(same.formula, p.find_property("9")->formula);
    EXPECT_NE(road.id, same.id);
    EXPECT_EQ(code_of([&] {
                  instantiate_template(find("avoid-road"), {{"L_i", "cafe"}, {"L_j", "blue-house"}, {"T_i", "red"}},
                                       model->template_context());
              }),
              ErrorCode::ConstraintViolated);
    EXPECT_EQ(code_of([&] {
                  instantiate_template(find("visits"), {{"T", "p0"}, {"L", "cafe"}}, model->template_context());
              }),
              ErrorCode::TypeMismatch);
}

TEST(Properties, RandomSoundnessSample)
{
    std::mt19937 rng(99);
    for (int i = 0; i < 30; ++i) {
        oracle::RandomTask t = oracle::random_transport(rng, {});
        PlanProperty p = oracle::random_property(rng, t, "x");
        t.project.properties = {p};
        const auto model = load_project(t.project);
        for (int k = 0; k < 5; ++k) {
            const Plan plan = oracle::random_plan(rng, model->grounded.task, 8);
            const bool compiled = model->compiled.goal("x").evaluate(*oracle::run(model->compiled.task, plan.steps));
            EXPECT_EQ(compiled, oracle::property_holds(p, *model->context, plan)) << p.formula;
        }
    }
}

// ---------------------------------------------------------------------------
// planner

TEST(Planner, HmaxValues)
{
    const OspTask t = chain_task();
    EXPECT_EQ(hmax(t.initial, t), 2);
    EXPECT_EQ(hmax(State{1, 1}, t), 0);
    OspTask dead = t;
    dead.actions.pop_back();
    EXPECT_EQ(hmax(dead.initial, dead), INFINITE_COST);
}

TEST(Planner, HmaxIsAdmissibleOnMicroTasks)
{
    std::mt19937 rng(5);
    for (int i = 0; i < 5; ++i) {
        oracle::RandomTask t = oracle::random_transport(rng, {});
        t.project.properties = {oracle::random_goal_fact(rng, t, "g")};
        const auto model = load_project(t.project);
        const CompiledTask c = with_selection(model->compiled, {"g"}, {});
        for (const State& s : oracle::reachable_states(c.task, INFINITE_COST)) {
            OspTask from = c.task;
            from.initial = s;
            const auto truth = oracle::cheapest(from, [&](const State& x) { return c.goal("g").evaluate(x); },
                                                INFINITE_COST);
            const Cost h = Hmax(c.task, c.hard_conditions())(s);
            if (truth) {
                EXPECT_LE(h, *truth);
            }
        }
    }
}

TEST(Planner, MicroDelivery)
{
    const auto model = load_project(project_file("micro.json"));
    const SearchResult r = solve_selection(model->compiled, {"delivered"});
    ASSERT_EQ(r.status, SearchStatus::Solved);
    EXPECT_EQ(r.plan->cost, 3);
    CompiledTask bounded = model->compiled;
    bounded.task.bound = 2;
    EXPECT_EQ(solve_selection(bounded, {"delivered"}).status, SearchStatus::Unsolvable);
    bounded.task.bound = 3;
    EXPECT_EQ(solve_selection(bounded, {"delivered"}).status, SearchStatus::Solved);
}

TEST(Planner, PlansValidateAndAreDeterministic)
{
    const auto model = load_project(project_file("micro.json"));
    const CompiledTask c = with_selection(model->compiled, {"delivered"}, {});
    const SearchResult a = solve_bounded(c);
    const SearchResult b = solve_bounded(c, {HeuristicKind::Hmax, 1000, 10});
    ASSERT_EQ(a.status, SearchStatus::Solved);
    EXPECT_EQ(a.plan, b.plan);
    EXPECT_TRUE(validate_plan(c.task, *a.plan).valid);
}

TEST(Planner, ResourceLimitAndConfig)
{
    const auto model = load_project(project_file("project.json"));
    SearchConfig tiny;
    tiny.max_expansions = 1;
    EXPECT_EQ(solve_selection(model->compiled, {"2", "3", "4"}, tiny).status, SearchStatus::ResourceLimit);
    SearchConfig bad;
    bad.max_seconds = 0;
    EXPECT_EQ(code_of([&] { solve_selection(model->compiled, {}, bad); }), ErrorCode::ConfigError);
}

TEST(Planner, SatisfiedProperties)
{
    const auto model = load_project(project_file("project.json"));
    const SearchResult r = solve_selection(model->compiled, {});
    ASSERT_EQ(r.status, SearchStatus::Solved);
    const auto sat = satisfied_properties(model->compiled, *r.plan);
    EXPECT_NE(std::find(sat.begin(), sat.end(), "1"), sat.end());
}
