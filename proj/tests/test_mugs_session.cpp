#include "oracles/oracles.hpp"

#include <gtest/gtest.h>

using namespace planspace;

namespace {

using Sets = std::vector<std::vector<std::string>>;

// Solvable iff the query contains none of `conflicts`.
struct ConflictOracle {
    std::vector<GoalMask> conflicts;
    std::size_t calls = 0;

    OracleAnswer operator()(GoalMask m)
    {
        ++calls;
        for (GoalMask c : conflicts)
            if ((c & ~m) == 0)
                return {Solvability::Unsolvable, 0};
        return {Solvability::Solvable, m};
    }
};

MugsCatalog reference_catalog()
{
    MugsCatalog c;
    for (int i = 2; i <= 11; ++i)
        c.universe.push_back(std::to_string(i));
    c.mugs = {{"2", "4", "9"}, {"2", "6"}, {"3", "6", "9"}, {"3", "8"}, {"4", "6", "9", "10"},
              {"4", "7", "9"}, {"5", "6"}, {"5", "7"}, {"6", "8", "10"}, {"7", "8"}};
    return c;
}

Project project_file(const std::string& name)
{
    return cli_detail::load_project_file(oracle::data_path("nomystery/" + name));
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

struct Ticker {
    double t = 100;
};

Clock ticking(std::shared_ptr<Ticker> ticker, double step = 1)
{
    return [ticker, step] { return ticker->t += step; };
}

// A tiny demo on the micro task: "delivered" conflicts with "stay" (no driving).
Demo micro_demo()
{
    Project p = project_file("micro.json");
    p.properties.push_back({"stay", "The truck never drives.", PropertyKind::ActionSet, "(not (used d))",
                            {{"d", {"(drive * * * * *)"}}}, 2, false});
    p.properties.push_back({"loaded", "The package is loaded.", PropertyKind::ActionSet, "(used l)",
                            {{"l", {"(load * * *)"}}}, 1, false});
    return build_demo(p, "micro-demo", {{}, OracleKind::Search, {}});
}

} // namespace

// ---------------------------------------------------------------------------
// MUGS engine

TEST(Mugs, SyntheticConflicts)
{
    const std::vector<std::string> u = {"a", "b", "c", "d"};
    ConflictOracle o{{0b0011, 0b1100, 0b0110}};
    const MugsCatalog c = compute_mugs(u, o);
    EXPECT_EQ(c.mugs, (Sets{{"a", "b"}, {"b", "c"}, {"c", "d"}}));
    EXPECT_EQ(c.stats.oracle_calls, o.calls);
    EXPECT_GT(c.stats.unsolvable_calls, 0U);
}

TEST(Mugs, EverythingSolvable)
{
    ConflictOracle o;
    const MugsCatalog c = compute_mugs(std::vector<std::string>{"a", "b", "c"}, o);
    EXPECT_TRUE(c.mugs.empty());
    EXPECT_LE(o.calls, 2U);
}

TEST(Mugs, EmptyUniverseAndUnsolvableRoot)
{
    ConflictOracle none;
    EXPECT_TRUE(compute_mugs(std::vector<std::string>{}, none).mugs.empty());
    ConflictOracle always{{0}};
    EXPECT_EQ(code_of([&] { compute_mugs(std::vector<std::string>{"a"}, always); }),
              ErrorCode::GlobalHardUnsolvable);
}

TEST(Mugs, UnknownVerdictIsAnError)
{
    auto unknown = [](GoalMask) { return OracleAnswer{Solvability::Unknown, 0}; };
    EXPECT_EQ(code_of([&] { compute_mugs(std::vector<std::string>{"a", "b"}, unknown); }),
              ErrorCode::OracleUnknown);
}

TEST(Mugs, RandomConflictsMatchBruteForce)
{
    std::mt19937 rng(1);
    for (int round = 0; round < 40; ++round) {
        const int n = 3 + static_cast<int>(rng() % 6);
        ConflictOracle o;
        const int k = static_cast<int>(rng() % 4);
        for (int i = 0; i < k; ++i)
            o.conflicts.push_back((rng() % ((1U << n) - 1)) + 1);
        std::vector<std::string> u;
        for (int i = 0; i < n; ++i)
            u.push_back("p" + std::to_string(i));
        const auto expected =
            oracle::brute_mugs(n, [&](std::uint64_t m) { return o(m).verdict == Solvability::Solvable; });
        const MugsCatalog c = compute_mugs(u, o);
        std::set<std::uint64_t> got;
        for (const auto& m : c.mugs)
            got.insert(c.mask_of(m));
        EXPECT_EQ(got, expected);
    }
}

TEST(Mugs, MicroDemoCatalog)
{
    const Demo d = micro_demo();
    EXPECT_EQ(d.catalog.mugs, (Sets{{"delivered", "stay"}}));
    const auto model = load_project(d.project);
    EXPECT_TRUE(certify(d.catalog, model->compiled).ok);
    const MugsCatalog r = compute_mugs(model->compiled, model->selectable_ids(), {}, OracleKind::Reachability);
    EXPECT_EQ(r.mugs, d.catalog.mugs);
}

TEST(Mugs, CertifyRejectsWrongCatalogs)
{
    const Demo d = micro_demo();
    const auto model = load_project(d.project);
    MugsCatalog wrong = d.catalog;
    wrong.mugs = {{"delivered", "loaded"}};
    const CertificationReport r = certify(wrong, model->compiled);
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.failures.empty());
    MugsCatalog nested = d.catalog;
    nested.mugs = {{"delivered", "stay"}, {"delivered", "stay", "loaded"}};
    EXPECT_FALSE(certify(nested, model->compiled).ok);
}

TEST(Mugs, GlobalHardUnsolvableTask)
{
    Project p = project_file("micro.json");
    p.properties[0].global_hard = true;
    p.properties.push_back({"stay", "The truck never drives.", PropertyKind::ActionSet, "(not (used d))",
                            {{"d", {"(drive * * * * *)"}}}, 1, true});
    p.properties.push_back({"loaded", "loaded", PropertyKind::ActionSet, "(used l)", {{"l", {"(load * * *)"}}}, 1, false});
    const auto model = load_project(p);
    for (OracleKind k : {OracleKind::Search, OracleKind::Reachability})
        EXPECT_EQ(code_of([&] { compute_mugs(model->compiled, model->selectable_ids(), {}, k); }),
                  ErrorCode::GlobalHardUnsolvable);
    EXPECT_EQ(code_of([&] { compute_mugs(model->compiled, {"stay"}); }), ErrorCode::Validation);
}

TEST(Mugs, CatalogJsonRoundTrip)
{
    // loading normalises the order: by size, then by member positions
    const MugsCatalog c = catalog_from_json(to_json(reference_catalog()));
    EXPECT_EQ(c.mugs.front(), (std::vector<std::string>{"2", "6"}));
    EXPECT_EQ(c.mugs.back(), (std::vector<std::string>{"4", "6", "9", "10"}));
    const MugsCatalog original = reference_catalog();
    EXPECT_EQ(std::set(c.mugs.begin(), c.mugs.end()), std::set(original.mugs.begin(), original.mugs.end()));
    EXPECT_EQ(to_json(catalog_from_json(to_json(c))).dump(), to_json(c).dump());
}

TEST(Mugs, QuestionAnswers)
{
    const MugsCatalog c = reference_catalog();
    const Answer a = answer_question({{"7"}, {"1", "8"}}, c);
    ASSERT_EQ(a.entries.size(), 2U);
    // {5,7} and {4,7,9} leave nothing satisfied to give up
    EXPECT_TRUE(a.entries[0].empty_tradeoff);
    EXPECT_EQ(a.entries[0].source_mugs, (Sets{{"4", "7", "9"}, {"5", "7"}}));
    EXPECT_EQ(a.entries[1].tradeoff, std::vector<std::string>{"8"});

    const Answer b = answer_question({{"10"}, {"1", "4", "9"}}, c);
    ASSERT_EQ(b.entries.size(), 2U);
    EXPECT_TRUE(b.entries[0].empty_tradeoff);
    EXPECT_EQ(b.entries[0].source_mugs, (Sets{{"6", "8", "10"}}));
    EXPECT_EQ(b.entries[1].tradeoff, (std::vector<std::string>{"4", "9"}));

    EXPECT_TRUE(answer_question({{"11"}, {}}, c).entries.empty());
    EXPECT_EQ(code_of([&] { answer_question({{}, {}}, c); }), ErrorCode::Validation);
    EXPECT_EQ(code_of([&] { answer_question({{"7", "8"}, {}}, c, 1); }), ErrorCode::QuestionTooLarge);
    EXPECT_EQ(code_of([&] { answer_question({{"8"}, {"8"}}, c); }), ErrorCode::Validation);
    EXPECT_EQ(code_of([&] { answer_question({{"42"}, {}}, c); }), ErrorCode::UnknownProperty);
}

TEST(Mugs, UnsolvableExplanations)
{
    const MugsCatalog c = reference_catalog();
    EXPECT_EQ(explain_unsolvable({"5", "6"}, std::nullopt, c).focused, (Sets{{"5", "6"}}));
    const auto e = explain_unsolvable({"5", "6", "7"}, std::vector<std::string>{"5", "6"}, c);
    EXPECT_EQ(e.focused, (Sets{{"5", "7"}}));
    EXPECT_EQ(e.all, (Sets{{"5", "6"}, {"5", "7"}}));
    EXPECT_TRUE(explain_unsolvable({"2", "3"}, std::nullopt, c).all.empty());
}

TEST(Mugs, ExclusionDependencies)
{
    MugsCatalog c;
    c.universe = {"a", "b", "c"};
    c.mugs = {{"a", "b", "c"}};
    const auto deps = derive_exclusion_dependencies(c);
    ASSERT_EQ(deps.size(), 3U);
    EXPECT_EQ(deps[0].x, (std::vector<std::string>{"b", "c"}));
    EXPECT_EQ(deps[0].y, std::vector<std::string>{"a"});
    EXPECT_EQ(derive_exclusion_dependencies(c, std::nullopt).size(), 6U);
}

TEST(Mugs, NoMysteryReachabilityMatchesSearchOnSmallUniverse)
{
    const auto model = load_project(project_file("project.json"));
    const std::vector<std::string> u = {"5", "6", "7", "10"};
    const MugsCatalog s = compute_mugs(model->compiled, u, {}, OracleKind::Search);
    const MugsCatalog r = compute_mugs(model->compiled, u, {}, OracleKind::Reachability);
    EXPECT_EQ(s.mugs, r.mugs);
    EXPECT_NE(std::find(s.mugs.begin(), s.mugs.end(), std::vector<std::string>{"5", "6"}), s.mugs.end());
}

// ---------------------------------------------------------------------------
// demos and sessions

TEST(Demo, EmptyPropertyList)
{
    Project p = project_file("micro.json");
    p.properties.clear();
    const Demo d = build_demo(p, "empty");
    EXPECT_TRUE(d.catalog.universe.empty());
    EXPECT_TRUE(d.catalog.mugs.empty());
}

TEST(Demo, JsonRoundTripAndKey)
{
    const Demo d = micro_demo();
    const Demo back = demo_from_json(to_json(d));
    EXPECT_EQ(back.catalog, d.catalog);
    EXPECT_EQ(to_json(back.project), to_json(d.project));
    Project changed = d.project;
    changed.properties.pop_back();
    EXPECT_NE(project_catalog_key(changed, OracleKind::Search), project_catalog_key(d.project, OracleKind::Search));
    EXPECT_NE(project_catalog_key(d.project, OracleKind::Reachability),
              project_catalog_key(d.project, OracleKind::Search));
}

TEST(Session, IterationFlow)
{
    const Demo d = micro_demo();
    const auto model = load_project(d.project);
    Session s("s1", model, d.catalog, {}, ticking(std::make_shared<Ticker>()));
    EXPECT_EQ(code_of([&] { s.ask_question({"delivered"}); }), ErrorCode::NoCurrentPlan);

    const Iteration first = s.submit_iteration({"stay"});
    ASSERT_EQ(first.status, IterationStatus::Solved);
    EXPECT_EQ(first.unsatisfied, (std::vector<std::string>{"delivered", "loaded"}));
    EXPECT_EQ(*first.utility, 2);
    const Answer a = s.ask_question({"delivered"});
    ASSERT_EQ(a.entries.size(), 1U);
    EXPECT_EQ(a.entries[0].tradeoff, std::vector<std::string>{"stay"});
    EXPECT_EQ(code_of([&] { s.ask_question({"stay"}); }), ErrorCode::NotUnsatisfied);
    EXPECT_EQ(code_of([&] { s.ask_why_unsolvable(); }), ErrorCode::NotUnsolvable);

    const Iteration second = s.submit_iteration({"stay", "delivered"});
    EXPECT_EQ(second.status, IterationStatus::Unsolvable);
    EXPECT_FALSE(second.utility);
    EXPECT_EQ(s.ask_why_unsolvable().focused, (Sets{{"delivered", "stay"}}));
    // questions about an unsolvable selection are answered against the rest of it
    EXPECT_EQ(s.ask_question({"delivered"}).entries.at(0).tradeoff, std::vector<std::string>{"stay"});

    const Iteration third = s.submit_iteration({"delivered"});
    ASSERT_EQ(third.status, IterationStatus::Solved);
    EXPECT_EQ(third.plan->cost, 3);
    EXPECT_EQ(third.by_chance, std::vector<std::string>{"loaded"});
    EXPECT_EQ(*third.utility, 2);
    EXPECT_EQ(code_of([&] { s.submit_iteration({"nope"}); }), ErrorCode::UnknownProperty);
}

TEST(Session, ConfiguredLimits)
{
    const Demo d = micro_demo();
    const auto model = load_project(d.project);
    StudyConfig cfg;
    cfg.max_iterations = 2;
    cfg.max_question_size = 1;
    Session s("s", model, d.catalog, cfg, ticking(std::make_shared<Ticker>()));
    s.submit_iteration({});
    EXPECT_EQ(code_of([&] { s.ask_question({"delivered", "loaded"}); }), ErrorCode::QuestionTooLarge);
    s.submit_iteration({});
    EXPECT_EQ(code_of([&] { s.submit_iteration({}); }), ErrorCode::IterationLimit);

    StudyConfig closed;
    closed.questions_enabled = false;
    Session q("q", model, d.catalog, closed, ticking(std::make_shared<Ticker>()));
    q.submit_iteration({"stay"});
    EXPECT_EQ(code_of([&] { q.ask_question({"delivered"}); }), ErrorCode::QuestionsDisabled);

    StudyConfig timed;
    timed.time_limit_seconds = 10;
    auto ticker = std::make_shared<Ticker>();
    Session t("t", model, d.catalog, timed, ticking(ticker));
    t.submit_iteration({});
    ticker->t += 60;
    EXPECT_EQ(code_of([&] { t.submit_iteration({}); }), ErrorCode::TimeLimit);

    StudyConfig bad;
    bad.max_iterations = 0;
    EXPECT_EQ(code_of([&] { Session("b", model, d.catalog, bad); }), ErrorCode::ConfigError);
}

TEST(Session, UtilityNeedsAssignments)
{
    const Project p = project_file("project.json");
    std::vector<std::string> all;
    for (int i = 2; i <= 11; ++i)
        all.push_back(std::to_string(i));
    EXPECT_EQ(compute_utility(all, p.properties), 14);
    EXPECT_EQ(compute_utility({"1"}, p.properties), 0);
    std::vector<PlanProperty> props = p.properties;
    props[1].utility.reset();
    EXPECT_EQ(code_of([&] { compute_utility({"2"}, props); }), ErrorCode::UtilityUnassigned);
}

TEST(Session, EventsAndDwellTimes)
{
    const Demo d = micro_demo();
    const auto model = load_project(d.project);
    auto ticker = std::make_shared<Ticker>();
    Session s("s", model, d.catalog, {}, ticking(ticker, 2));
    s.record_event({0, "view-entered", "selection", {}});
    s.record_event({0, "view-entered", "plan", {}});
    s.record_event({0, "session-ended", "", {}});
    const auto dwell = s.dwell_times();
    EXPECT_DOUBLE_EQ(dwell.at("selection"), 2);
    EXPECT_DOUBLE_EQ(dwell.at("plan"), 2);
    EXPECT_EQ(code_of([&] { s.record_event({1, "late", "", {}}, false); }), ErrorCode::Validation);
    EXPECT_EQ(code_of([&] { s.record_event({0, "", "", {}}); }), ErrorCode::Validation);
}

TEST(Session, ReplayAndCsv)
{
    const Demo d = micro_demo();
    const auto model = load_project(d.project);
    StudyConfig cfg;
    cfg.max_iterations = 3;
    Session s("s", model, d.catalog, cfg, ticking(std::make_shared<Ticker>()));
    s.record_event({0, "view-entered", "selection", {}});
    s.submit_iteration({"stay"});
    s.ask_question({"delivered"});
    s.submit_iteration({"stay", "delivered"});
    s.ask_why_unsolvable();
    s.submit_iteration({"delivered"});
    const nlohmann::json record = s.export_log();
    EXPECT_EQ(record.at("utility_series"), (nlohmann::json{2, nullptr, 2}));
    EXPECT_EQ(replay(record, model, d.catalog)->export_log(), record);
    const std::string csv = export_csv(record);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Session, ProjectSessionComputesCatalogLazily)
{
    const Demo d = micro_demo();
    const auto model = load_project(d.project);
    Session s("s", model, std::nullopt, {}, ticking(std::make_shared<Ticker>()));
    EXPECT_EQ(s.submit_iteration({"stay", "delivered"}).explanation->all, (Sets{{"delivered", "stay"}}));
}

TEST(Session, CatalogShortcutAgreesWithSearch)
{
    const Project p = project_file("project.json");
    const auto model = load_project(p);
    const MugsCatalog c = reference_catalog();
    Session with("a", model, c, {}, ticking(std::make_shared<Ticker>()));
    // {2,3} contains no MUGS of the catalog, so the planner runs
    EXPECT_EQ(with.submit_iteration({"2", "3"}).status, IterationStatus::Solved);
    EXPECT_EQ(with.submit_iteration({"5", "6"}).status, IterationStatus::Unsolvable);
}
