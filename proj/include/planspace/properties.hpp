#pragma once

// Plan properties: goal facts, action-set properties and LTLf formulas,
// natural-language templates, the trace semantics used as the reference
// oracle, and compilation into goal conditions on an augmented task.

#include "planspace/condition.hpp"
#include "planspace/error.hpp"
#include "planspace/grounding.hpp"
#include "planspace/ltlf.hpp"
#include "planspace/sexpr.hpp"
#include "planspace/task.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace planspace {

enum class PropertyKind { GoalFact, ActionSet, Ltlf };

inline std::string_view to_string(PropertyKind k)
{
    switch (k) {
    case PropertyKind::GoalFact: return "GOAL_FACT";
    case PropertyKind::ActionSet: return "ACTION_SET";
    case PropertyKind::Ltlf: return "LTLF";
    }
    return "";
}

inline PropertyKind property_kind_from_string(const std::string& s)
{
    if (s == "GOAL_FACT")
        return PropertyKind::GoalFact;
    if (s == "ACTION_SET")
        return PropertyKind::ActionSet;
    if (s == "LTLF")
        return PropertyKind::Ltlf;
    throw Error(ErrorCode::Validation, "unknown property kind '" + s + "'");
}

/// Named sets of ground action patterns, e.g. {"A": ["(drive red cafe * * *)"]}.
using ActionSetPatterns = std::map<std::string, std::vector<std::string>>;

struct PlanProperty {
    std::string id;
    std::string nl_text;
    PropertyKind kind = PropertyKind::GoalFact;
    /// s-expression; a ground atom, a formula over (used A), or an LTLf formula
    std::string formula;
    ActionSetPatterns action_sets;
    std::optional<std::int64_t> utility;
    bool global_hard = false;

    bool operator==(const PlanProperty&) const = default;
};

struct TemplateVariable {
    std::string name;
    std::string type;

    bool operator==(const TemplateVariable&) const = default;
};

/// A property with `{NAME}` placeholders in its sentence, formula, action
/// sets and constraints.
struct PropertyTemplate {
    std::string id;
    std::string nl_pattern;
    PropertyKind kind = PropertyKind::ActionSet;
    std::string formula;
    ActionSetPatterns action_sets;
    std::vector<TemplateVariable> variables;
    /// static atoms that must hold for the bound objects, e.g. "(connected {L_i} {L_j})"
    std::vector<std::string> constraints;
    std::optional<std::int64_t> utility;

    bool operator==(const PropertyTemplate&) const = default;
};

// ---------------------------------------------------------------------------
// Action patterns

namespace detail {

inline std::vector<std::string> pattern_tokens(const std::string& text)
{
    SExpr e = parse_sexpr(text);
    if (!e.is_list || e.items.empty())
        syntax_error(e.pos, "an action pattern '(schema arg...)'");
    std::vector<std::string> out;
    for (const SExpr& item : e.items) {
        if (!item.is_atom())
            syntax_error(item.pos, "an object name or '*' in action pattern");
        out.push_back(item.atom);
    }
    return out;
}

inline bool pattern_matches(const std::vector<std::string>& pattern,
                            const std::vector<std::string>& action)
{
    if (pattern.size() != action.size())
        return false;
    for (std::size_t i = 0; i < pattern.size(); ++i)
        if (pattern[i] != "*" && pattern[i] != action[i])
            return false;
    return true;
}

} // namespace detail

/// Ground vocabulary needed to resolve property atoms and action patterns.
class PropertyContext {
public:
    explicit PropertyContext(const GroundedTask& grounded) : grounded_(&grounded)
    {
        for (const Action& a : grounded.task.actions)
            action_tokens_.push_back(detail::pattern_tokens(a.name));
    }

    const GroundedTask& grounded() const { return *grounded_; }
    const OspTask& task() const { return grounded_->task; }

    /// Sorted ids of the ground actions matching any of the patterns.
    std::vector<ActionId> match_actions(const std::vector<std::string>& patterns) const
    {
        std::vector<ActionId> out;
        std::vector<std::vector<std::string>> parsed;
        for (const std::string& p : patterns)
            parsed.push_back(detail::pattern_tokens(p));
        for (std::size_t a = 0; a < action_tokens_.size(); ++a)
            for (const auto& p : parsed)
                if (detail::pattern_matches(p, action_tokens_[a])) {
                    out.push_back(static_cast<ActionId>(a));
                    break;
                }
        return out;
    }

    Condition atom_condition(const std::string& atom_text) const
    {
        SExpr e = parse_sexpr(atom_text);
        if (!e.is_list || e.items.empty())
            syntax_error(e.pos, "a ground atom");
        for (const SExpr& item : e.items)
            if (!item.is_atom())
                syntax_error(item.pos, "an object name in ground atom");
        return grounded_->atoms.resolve(e.to_string()).holds();
    }

private:
    const GroundedTask* grounded_;
    std::vector<std::vector<std::string>> action_tokens_;
};

// ---------------------------------------------------------------------------
// Resolution

/// A property with atoms and action patterns bound to the ground task.
struct ResolvedProperty {
    std::string id;
    PropertyKind kind = PropertyKind::GoalFact;
    /// GOAL_FACT: the goal condition over task variables.
    Condition goal;
    /// ACTION_SET: member actions per set and a formula whose facts {i, 1}
    /// stand for "some action of set i was used".
    std::vector<std::string> set_names;
    std::vector<std::vector<ActionId>> sets;
    Condition set_formula;
    /// LTLF
    ltlf::Formula ltl;
    ltlf::AtomIndex ltl_atoms;
    std::vector<Condition> state_atom_conditions;
    /// membership[atom][action]
    std::vector<std::vector<bool>> action_atom_members;
};

namespace detail {

inline Condition parse_set_formula(const SExpr& e, const std::vector<std::string>& names)
{
    if (e.is_atom()) {
        if (e.atom == "true")
            return Condition::truth();
        if (e.atom == "false")
            return Condition::falsity();
        syntax_error(e.pos, "an action-set formula");
    }
    if (e.items.empty() || !e[0].is_atom())
        syntax_error(e.pos, "an operator");
    const std::string& head = e[0].atom;
    if (head == "used") {
        if (e.size() != 2 || !e[1].is_atom())
            syntax_error(e.pos, "(used <set name>)");
        auto it = std::find(names.begin(), names.end(), e[1].atom);
        if (it == names.end())
            throw Error(ErrorCode::Validation, "formula mentions undeclared action set '" +
                                                   e[1].atom + "'");
        return Condition::fact({static_cast<VariableId>(it - names.begin()), 1});
    }
    if (head == "not") {
        if (e.size() != 2)
            syntax_error(e.pos, "one argument to 'not'");
        return Condition::negation(parse_set_formula(e[1], names));
    }
    if (head == "implies" || head == "imply") {
        if (e.size() != 3)
            syntax_error(e.pos, "two arguments to 'implies'");
        return Condition::disjunction({Condition::negation(parse_set_formula(e[1], names)),
                                       parse_set_formula(e[2], names)});
    }
    if (head == "and" || head == "or") {
        std::vector<Condition> parts;
        for (std::size_t i = 1; i < e.size(); ++i)
            parts.push_back(parse_set_formula(e[i], names));
        return head == "and" ? Condition::conjunction(std::move(parts))
                             : Condition::disjunction(std::move(parts));
    }
    syntax_error(e.pos, "used, not, and, or or implies");
}

} // namespace detail

inline ResolvedProperty resolve_property(const PlanProperty& p, const PropertyContext& ctx)
{
    ResolvedProperty r;
    r.id = p.id;
    r.kind = p.kind;
    switch (p.kind) {
    case PropertyKind::GoalFact:
        r.goal = ctx.atom_condition(p.formula);
        break;
    case PropertyKind::ActionSet: {
        if (p.action_sets.empty())
            throw Error(ErrorCode::Validation, "action-set property " + p.id + " declares no sets");
        for (const auto& [name, patterns] : p.action_sets) {
            if (patterns.empty())
                throw Error(ErrorCode::Validation,
                            "action set '" + name + "' of " + p.id + " is empty");
            r.set_names.push_back(name);
            r.sets.push_back(ctx.match_actions(patterns));
        }
        r.set_formula = detail::parse_set_formula(parse_sexpr(p.formula), r.set_names);
        break;
    }
    case PropertyKind::Ltlf: {
        r.ltl = ltlf::parse_formula(p.formula, r.ltl_atoms);
        for (const std::string& atom : r.ltl_atoms.state_atoms)
            r.state_atom_conditions.push_back(ctx.atom_condition(atom));
        const std::size_t num_actions = ctx.task().actions.size();
        for (const std::string& pattern : r.ltl_atoms.action_atoms) {
            std::vector<bool> members(num_actions, false);
            for (ActionId a : ctx.match_actions({pattern}))
                members[static_cast<std::size_t>(a)] = true;
            r.action_atom_members.push_back(std::move(members));
        }
        break;
    }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Trace semantics (reference oracle, independent of compilation)

inline std::vector<ltlf::Letter> trace_letters(const ResolvedProperty& r,
                                               const std::vector<State>& states,
                                               std::span<const ActionId> steps)
{
    std::vector<ltlf::Letter> letters;
    for (std::size_t i = 0; i < states.size(); ++i) {
        ltlf::Letter l;
        for (const Condition& c : r.state_atom_conditions)
            l.state.push_back(c.evaluate(states[i]));
        for (const auto& members : r.action_atom_members)
            l.action.push_back(i > 0 && members[static_cast<std::size_t>(steps[i - 1])]);
        letters.push_back(std::move(l));
    }
    return letters;
}

inline bool evaluate_on_trace(const ResolvedProperty& r, const OspTask& task, const Plan& plan)
{
    const std::vector<State> states = state_trace(task, plan.steps);
    switch (r.kind) {
    case PropertyKind::GoalFact: return r.goal.evaluate(states.back());
    case PropertyKind::ActionSet: {
        State used(r.sets.size(), 0);
        for (std::size_t i = 0; i < r.sets.size(); ++i)
            for (ActionId a : plan.steps)
                if (std::binary_search(r.sets[i].begin(), r.sets[i].end(), a)) {
                    used[i] = 1;
                    break;
                }
        return r.set_formula.evaluate(used);
    }
    case PropertyKind::Ltlf: return ltlf::evaluate(r.ltl, trace_letters(r, states, plan.steps));
    }
    return false;
}

inline bool evaluate_on_trace(const PlanProperty& p, const PropertyContext& ctx, const Plan& plan)
{
    return evaluate_on_trace(resolve_property(p, ctx), ctx.task(), plan);
}

// ---------------------------------------------------------------------------
// Compilation

struct CompileOptions {
    ltlf::DfaOptions dfa;
};

/// Monitor for one property, expressed relative to the base task. Facts on
/// AUTOMATON_VAR / ACCEPT_VAR refer to the monitor's own variables.
struct PropertyMonitor {
    static constexpr VariableId AUTOMATON_VAR = -1;
    static constexpr VariableId ACCEPT_VAR = -2;

    std::string property_id;
    PropertyKind kind = PropertyKind::GoalFact;
    Condition goal;
    // ACTION_SET
    std::vector<std::string> set_names;
    std::vector<std::vector<ActionId>> sets;
    // LTLF
    std::size_t automaton_states = 0;
    int automaton_initial = 0;
    int accept_initial = 0;
    /// conditional effects to add, per base action
    std::vector<std::vector<ConditionalEffect>> effects;
};

namespace detail {

inline PropertyMonitor build_ltlf_monitor(const ResolvedProperty& r, const OspTask& base,
                                          const CompileOptions& options)
{
    PropertyMonitor m;
    m.property_id = r.id;
    m.kind = PropertyKind::Ltlf;

    const std::size_t num_actions = base.actions.size();
    const std::size_t num_action_atoms = r.action_atom_members.size();
    std::vector<std::vector<bool>> action_valuation(num_actions,
                                                    std::vector<bool>(num_action_atoms, false));
    for (std::size_t j = 0; j < num_action_atoms; ++j)
        for (std::size_t a = 0; a < num_actions; ++a)
            action_valuation[a][j] = r.action_atom_members[j][a];
    std::vector<std::vector<bool>> alphabet_actions = action_valuation;
    alphabet_actions.push_back(std::vector<bool>(num_action_atoms, false));

    const ltlf::Dfa dfa = ltlf::build_dfa(r.ltl, r.ltl_atoms, alphabet_actions, options.dfa);
    m.automaton_states = dfa.num_states();

    ltlf::Letter first;
    for (const Condition& c : r.state_atom_conditions)
        first.state.push_back(c.evaluate(base.initial));
    first.action.assign(num_action_atoms, false);
    const auto l0 = static_cast<std::size_t>(dfa.letter_index(first));
    const auto q_init = static_cast<std::size_t>(dfa.initial);
    m.automaton_initial = dfa.transition[q_init][l0];
    m.accept_initial = dfa.accept_at_end[q_init][l0] ? 1 : 0;

    m.effects.resize(num_actions);
    for (std::size_t a = 0; a < num_actions; ++a) {
        const Action& action = base.actions[a];
        // State atoms read at the successor: fixed by the action's effect, or
        // carried over from the current state.
        std::vector<std::optional<bool>> fixed(r.state_atom_conditions.size());
        std::vector<VariableId> open_vars;
        for (std::size_t j = 0; j < r.state_atom_conditions.size(); ++j) {
            const Condition& c = r.state_atom_conditions[j];
            if (c.is_constant()) {
                fixed[j] = c.kind() == Condition::Kind::True;
                continue;
            }
            const Fact f = c.get_fact();
            for (const ConditionalEffect& ce : action.conditional_effects)
                if (ce.effect.value_of(f.var))
                    throw Error(ErrorCode::Validation,
                                "LTLf atom " + r.ltl_atoms.state_atoms[j] +
                                    " is changed by a conditional effect of " + action.name);
            if (auto v = action.effect.value_of(f.var)) {
                fixed[j] = *v == f.value;
                continue;
            }
            if (std::find(open_vars.begin(), open_vars.end(), f.var) == open_vars.end())
                open_vars.push_back(f.var);
        }
        std::sort(open_vars.begin(), open_vars.end());

        std::vector<std::vector<int>> combos{{}};
        for (VariableId v : open_vars) {
            std::vector<std::vector<int>> next;
            const auto domain_size = static_cast<int>(base.variables[v].domain.size());
            for (const auto& c : combos)
                for (int d = 0; d < domain_size; ++d) {
                    auto extended = c;
                    extended.push_back(d);
                    next.push_back(std::move(extended));
                }
            combos = std::move(next);
        }

        for (std::size_t q = 0; q < dfa.num_states(); ++q) {
            std::vector<std::pair<int, int>> outcomes;
            for (const auto& combo : combos) {
                State probe(base.variables.size(), 0);
                for (std::size_t i = 0; i < open_vars.size(); ++i)
                    probe[open_vars[i]] = combo[i];
                ltlf::Letter letter;
                letter.action = action_valuation[a];
                for (std::size_t j = 0; j < r.state_atom_conditions.size(); ++j)
                    letter.state.push_back(fixed[j] ? *fixed[j]
                                                    : r.state_atom_conditions[j].evaluate(probe));
                const auto l = static_cast<std::size_t>(dfa.letter_index(letter));
                outcomes.emplace_back(dfa.transition[q][l], dfa.accept_at_end[q][l] ? 1 : 0);
            }
            const bool uniform = std::all_of(outcomes.begin(), outcomes.end(),
                                             [&](const auto& o) { return o == outcomes.front(); });
            const auto qi = static_cast<int>(q);
            if (uniform) {
                m.effects[a].push_back(
                    {PartialAssignment{{PropertyMonitor::AUTOMATON_VAR, qi}},
                     PartialAssignment{{PropertyMonitor::AUTOMATON_VAR, outcomes.front().first},
                                       {PropertyMonitor::ACCEPT_VAR, outcomes.front().second}}});
                continue;
            }
            for (std::size_t k = 0; k < combos.size(); ++k) {
                PartialAssignment cond{{PropertyMonitor::AUTOMATON_VAR, qi}};
                for (std::size_t i = 0; i < open_vars.size(); ++i)
                    cond.set({open_vars[i], combos[k][i]});
                m.effects[a].push_back(
                    {cond, PartialAssignment{{PropertyMonitor::AUTOMATON_VAR, outcomes[k].first},
                                             {PropertyMonitor::ACCEPT_VAR, outcomes[k].second}}});
            }
        }
    }
    m.goal = Condition::fact({PropertyMonitor::ACCEPT_VAR, 1});
    return m;
}

} // namespace detail

inline PropertyMonitor build_monitor(const ResolvedProperty& r, const OspTask& base,
                                     const CompileOptions& options = {})
{
    switch (r.kind) {
    case PropertyKind::GoalFact: {
        PropertyMonitor m;
        m.property_id = r.id;
        m.kind = r.kind;
        m.goal = r.goal;
        return m;
    }
    case PropertyKind::ActionSet: {
        PropertyMonitor m;
        m.property_id = r.id;
        m.kind = r.kind;
        m.goal = r.set_formula;
        m.set_names = r.set_names;
        m.sets = r.sets;
        return m;
    }
    case PropertyKind::Ltlf: return detail::build_ltlf_monitor(r, base, options);
    }
    throw Error(ErrorCode::Validation, "unknown property kind");
}

/// Base task augmented with monitor variables so that each property p has a
/// goal condition g_p. Action ids are shared with the base task, so a
/// compiled plan projects onto the identical original plan.
struct CompiledTask {
    OspTask task;
    std::vector<std::string> property_ids;
    std::map<std::string, Condition> goals;
    std::vector<std::string> global_hard_ids;
    std::vector<std::string> hard_ids;
    std::vector<std::string> soft_ids;
    std::size_t base_variable_count = 0;
    std::shared_ptr<const OspTask> base;
    std::shared_ptr<const std::vector<PropertyMonitor>> monitors;

    bool has_property(const std::string& id) const { return goals.count(id) > 0; }

    const Condition& goal(const std::string& id) const
    {
        auto it = goals.find(id);
        if (it == goals.end())
            throw Error(ErrorCode::UnknownProperty, "unknown property '" + id + "'", {{"id", id}});
        return it->second;
    }

    /// Goal conditions of the hard partition, including hard goal facts
    /// already present on the task.
    std::vector<Condition> hard_conditions() const
    {
        std::vector<Condition> out;
        for (const Fact& f : task.hard_goal)
            out.push_back(Condition::fact(f));
        for (const std::string& id : hard_ids)
            if (!goal(id).is_fact() || !task.hard_goal.contains(goal(id).get_fact()))
                out.push_back(goal(id));
        return out;
    }

    std::vector<std::string> satisfied_in(const State& final_state) const
    {
        std::vector<std::string> out;
        for (const std::string& id : property_ids)
            if (goal(id).evaluate(final_state))
                out.push_back(id);
        return out;
    }

    /// Compiled plans and original plans coincide step for step.
    Plan project(const Plan& compiled_plan) const { return compiled_plan; }

    /// The same compilation restricted to the monitors of `ids`.
    CompiledTask restricted(const std::vector<std::string>& ids) const;
};

namespace detail {

inline CompiledTask assemble(std::shared_ptr<const OspTask> base,
                             std::shared_ptr<const std::vector<PropertyMonitor>> monitors,
                             const std::vector<std::size_t>& which)
{
    CompiledTask c;
    c.task = *base;
    c.base_variable_count = base->variables.size();
    std::map<std::vector<ActionId>, VariableId> flag_of_set;
    for (std::size_t mi : which) {
        const PropertyMonitor& m = (*monitors)[mi];
        c.property_ids.push_back(m.property_id);
        switch (m.kind) {
        case PropertyKind::GoalFact: c.goals[m.property_id] = m.goal; break;
        case PropertyKind::ActionSet: {
            std::vector<VariableId> flags;
            for (std::size_t s = 0; s < m.sets.size(); ++s) {
                auto [it, inserted] = flag_of_set.emplace(
                    m.sets[s], static_cast<VariableId>(c.task.variables.size()));
                if (inserted) {
                    c.task.variables.push_back({it->second,
                                                "used(" + m.property_id + "." + m.set_names[s] + ")",
                                                {"false", "true"}});
                    c.task.initial.push_back(0);
                    for (ActionId a : m.sets[s])
                        c.task.actions[static_cast<std::size_t>(a)].effect.set({it->second, 1});
                }
                flags.push_back(it->second);
            }
            c.goals[m.property_id] =
                m.goal.remap([&](Fact f) { return Fact{flags[static_cast<std::size_t>(f.var)], f.value}; });
            break;
        }
        case PropertyKind::Ltlf: {
            const auto q_var = static_cast<VariableId>(c.task.variables.size());
            const VariableId acc_var = q_var + 1;
            std::vector<std::string> q_domain;
            for (std::size_t q = 0; q < m.automaton_states; ++q)
                q_domain.push_back("q" + std::to_string(q));
            c.task.variables.push_back({q_var, "automaton(" + m.property_id + ")", q_domain});
            c.task.variables.push_back({acc_var, "accepting(" + m.property_id + ")", {"false", "true"}});
            c.task.initial.push_back(m.automaton_initial);
            c.task.initial.push_back(m.accept_initial);
            auto local = [&](Fact f) {
                if (f.var == PropertyMonitor::AUTOMATON_VAR)
                    return Fact{q_var, f.value};
                if (f.var == PropertyMonitor::ACCEPT_VAR)
                    return Fact{acc_var, f.value};
                return f;
            };
            for (std::size_t a = 0; a < m.effects.size(); ++a)
                for (const ConditionalEffect& ce : m.effects[a]) {
                    ConditionalEffect mapped;
                    for (const Fact& f : ce.condition)
                        mapped.condition.set(local(f));
                    for (const Fact& f : ce.effect)
                        mapped.effect.set(local(f));
                    c.task.actions[a].conditional_effects.push_back(std::move(mapped));
                }
            c.goals[m.property_id] = m.goal.remap(local);
            break;
        }
        }
    }
    c.base = std::move(base);
    c.monitors = std::move(monitors);
    return c;
}

} // namespace detail

inline CompiledTask CompiledTask::restricted(const std::vector<std::string>& ids) const
{
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < monitors->size(); ++i)
        if (std::find(ids.begin(), ids.end(), (*monitors)[i].property_id) != ids.end())
            which.push_back(i);
    for (const std::string& id : ids)
        goal(id);
    CompiledTask c = detail::assemble(base, monitors, which);
    auto keep = [&](const std::vector<std::string>& from) {
        std::vector<std::string> out;
        for (const std::string& id : from)
            if (std::find(ids.begin(), ids.end(), id) != ids.end())
                out.push_back(id);
        return out;
    };
    c.global_hard_ids = keep(global_hard_ids);
    c.hard_ids = keep(hard_ids);
    c.soft_ids = keep(soft_ids);
    c.task.bound = task.bound;
    for (const std::string& id : c.hard_ids)
        if (c.goals.at(id).is_fact())
            c.task.hard_goal.set(c.goals.at(id).get_fact());
    for (const std::string& id : c.soft_ids)
        if (c.goals.at(id).is_fact() && !c.task.hard_goal.value_of(c.goals.at(id).get_fact().var))
            c.task.soft_goal.set(c.goals.at(id).get_fact());
    return c;
}

/// Compiles every property; the result has an empty goal partition.
inline CompiledTask compile_properties(const PropertyContext& ctx,
                                       const std::vector<PlanProperty>& properties,
                                       const CompileOptions& options = {})
{
    std::set<std::string> seen;
    auto base = std::make_shared<const OspTask>(ctx.task());
    auto monitors = std::make_shared<std::vector<PropertyMonitor>>();
    std::vector<std::string> globals;
    for (const PlanProperty& p : properties) {
        if (p.id.empty())
            throw Error(ErrorCode::Validation, "property without id");
        if (!seen.insert(p.id).second)
            throw Error(ErrorCode::Validation, "duplicate property id '" + p.id + "'");
        monitors->push_back(build_monitor(resolve_property(p, ctx), *base, options));
        if (p.global_hard)
            globals.push_back(p.id);
    }
    std::vector<std::size_t> all(monitors->size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    CompiledTask c = detail::assemble(base, monitors, all);
    c.global_hard_ids = globals;
    c.task.hard_goal = base->hard_goal;
    c.task.soft_goal = base->soft_goal;
    return c;
}

/// Compiles action-set (and plain goal-fact) properties.
inline CompiledTask compile_action_set(const PropertyContext& ctx,
                                       const std::vector<PlanProperty>& properties)
{
    for (const PlanProperty& p : properties)
        if (p.kind != PropertyKind::ActionSet)
            throw Error(ErrorCode::Validation, "property " + p.id + " is not an action-set property");
    return compile_properties(ctx, properties);
}

inline CompiledTask compile_ltlf(const PropertyContext& ctx, const PlanProperty& p,
                                 const CompileOptions& options = {})
{
    if (p.kind != PropertyKind::Ltlf)
        throw Error(ErrorCode::Validation, "property " + p.id + " is not an LTLf property");
    return compile_properties(ctx, {p}, options);
}

/// Re-partitions an already compiled task into hard and soft goals.
inline CompiledTask with_selection(const CompiledTask& compiled, const std::vector<std::string>& hard_ids,
                                   const std::vector<std::string>& soft_ids)
{
    for (const std::string& id : hard_ids)
        compiled.goal(id);
    for (const std::string& id : soft_ids)
        compiled.goal(id);
    for (const std::string& g : compiled.global_hard_ids)
        if (std::find(hard_ids.begin(), hard_ids.end(), g) == hard_ids.end())
            throw Error(ErrorCode::MissingGlobalHard, "global hard property " + g + " is not selected",
                        {{"id", g}});
    for (const std::string& id : hard_ids)
        if (std::find(soft_ids.begin(), soft_ids.end(), id) != soft_ids.end())
            throw Error(ErrorCode::Validation, "property " + id + " is both hard and soft", {{"id", id}});
    CompiledTask c = compiled;
    c.hard_ids = hard_ids;
    c.soft_ids = soft_ids;
    c.task.hard_goal = c.base->hard_goal;
    c.task.soft_goal = c.base->soft_goal;
    for (const std::string& id : hard_ids)
        if (c.goal(id).is_fact())
            c.task.hard_goal.set(c.goal(id).get_fact());
    for (const std::string& id : soft_ids)
        if (c.goal(id).is_fact() && !c.task.hard_goal.value_of(c.goal(id).get_fact().var))
            c.task.soft_goal.set(c.goal(id).get_fact());
    return c;
}

inline CompiledTask compile_selection(const PropertyContext& ctx,
                                      const std::vector<PlanProperty>& properties,
                                      const std::vector<std::string>& hard_ids,
                                      const std::vector<std::string>& soft_ids,
                                      const CompileOptions& options = {})
{
    return with_selection(compile_properties(ctx, properties, options), hard_ids, soft_ids);
}

// ---------------------------------------------------------------------------
// Templates

struct TemplateContext {
    const pddl::ParsedDomain* domain = nullptr;
    const std::map<std::string, std::string>* object_types = nullptr;
    const std::set<std::string>* static_atoms = nullptr;
    /// object -> phrase used in sentences; defaults to the name with '-' as space
    const std::map<std::string, std::string>* display_names = nullptr;
};

namespace detail {

inline std::set<std::string> placeholders_in(const std::string& text)
{
    std::set<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        auto end = text.find('}', pos);
        if (end == std::string::npos)
            throw Error(ErrorCode::Validation, "unterminated placeholder in '" + text + "'");
        out.insert(text.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return out;
}

inline std::string substitute(const std::string& text, const std::map<std::string, std::string>& values)
{
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = text.find('{', pos);
        if (open == std::string::npos) {
            out += text.substr(pos);
            return out;
        }
        auto close = text.find('}', open);
        out += text.substr(pos, open - pos);
        out += values.at(text.substr(open + 1, close - open - 1));
        pos = close + 1;
    }
}

inline std::string default_display_name(const std::string& object)
{
    std::string out = object;
    std::replace(out.begin(), out.end(), '-', ' ');
    return out;
}

} // namespace detail

/// Checks that every placeholder used by the template is a declared variable.
inline void validate_template(const PropertyTemplate& t)
{
    std::set<std::string> declared;
    for (const TemplateVariable& v : t.variables)
        if (!declared.insert(v.name).second)
            throw Error(ErrorCode::Validation, "template " + t.id + " declares " + v.name + " twice");
    std::vector<std::string> texts = {t.nl_pattern, t.formula};
    for (const auto& [name, patterns] : t.action_sets)
        texts.insert(texts.end(), patterns.begin(), patterns.end());
    texts.insert(texts.end(), t.constraints.begin(), t.constraints.end());
    for (const std::string& text : texts)
        for (const std::string& ph : detail::placeholders_in(text))
            if (!declared.count(ph))
                throw Error(ErrorCode::Validation,
                            "template " + t.id + " uses undeclared placeholder {" + ph + "}");
}

inline PlanProperty instantiate_template(const PropertyTemplate& t,
                                         const std::map<std::string, std::string>& bindings,
                                         const TemplateContext& ctx)
{
    validate_template(t);
    std::map<std::string, std::string> objects;
    std::map<std::string, std::string> phrases;
    for (const TemplateVariable& v : t.variables) {
        auto it = bindings.find(v.name);
        if (it == bindings.end())
            throw Error(ErrorCode::TypeMismatch, "no binding for {" + v.name + "}",
                        {{"variable", v.name}});
        const std::string& obj = it->second;
        auto type_it = ctx.object_types->find(obj);
        if (type_it == ctx.object_types->end())
            throw Error(ErrorCode::TypeMismatch, "unknown object '" + obj + "'", {{"object", obj}});
        if (!ctx.domain->is_subtype(type_it->second, v.type))
            throw Error(ErrorCode::TypeMismatch,
                        "object " + obj + " of type " + type_it->second + " cannot bind {" +
                            v.name + "} of type " + v.type,
                        {{"variable", v.name}, {"object", obj}});
        objects[v.name] = obj;
        std::string phrase = detail::default_display_name(obj);
        if (ctx.display_names)
            if (auto d = ctx.display_names->find(obj); d != ctx.display_names->end())
                phrase = d->second;
        phrases[v.name] = phrase;
    }
    for (const auto& [name, obj] : bindings)
        if (!objects.count(name))
            throw Error(ErrorCode::TypeMismatch, "template " + t.id + " has no variable {" + name + "}");
    for (const std::string& constraint : t.constraints) {
        std::string ground = detail::substitute(constraint, objects);
        SExpr e = parse_sexpr(ground);
        bool negated = e.has_head("not");
        std::string atom = negated ? e[1].to_string() : e.to_string();
        if ((ctx.static_atoms->count(atom) > 0) == negated)
            throw Error(ErrorCode::ConstraintViolated, "constraint " + ground + " does not hold",
                        {{"constraint", ground}});
    }
    PlanProperty p;
    std::string suffix;
    for (const TemplateVariable& v : t.variables)
        suffix += (suffix.empty() ? "" : ",") + objects[v.name];
    p.id = t.id + "(" + suffix + ")";
    p.nl_text = detail::substitute(t.nl_pattern, phrases);
    p.kind = t.kind;
    p.formula = detail::substitute(t.formula, objects);
    for (const auto& [name, patterns] : t.action_sets)
        for (const std::string& pattern : patterns)
            p.action_sets[name].push_back(detail::substitute(pattern, objects));
    p.utility = t.utility;
    return p;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const PlanProperty& p)
{
    nlohmann::json j = {{"id", p.id},
                        {"nl_text", p.nl_text},
                        {"kind", std::string(to_string(p.kind))},
                        {"formula", p.formula},
                        {"action_sets", p.action_sets},
                        {"global_hard", p.global_hard}};
    j["utility"] = p.utility ? nlohmann::json(*p.utility) : nlohmann::json(nullptr);
    return j;
}

inline PlanProperty property_from_json(const nlohmann::json& j)
{
    PlanProperty p;
    try {
        p.id = j.at("id").get<std::string>();
        p.nl_text = j.value("nl_text", std::string());
        p.kind = property_kind_from_string(j.at("kind").get<std::string>());
        p.formula = j.at("formula").get<std::string>();
        if (j.contains("action_sets"))
            p.action_sets = j.at("action_sets").get<ActionSetPatterns>();
        if (j.contains("utility") && !j.at("utility").is_null()) {
            p.utility = j.at("utility").get<std::int64_t>();
            if (*p.utility < 0)
                throw Error(ErrorCode::Validation, "negative utility for " + p.id);
        }
        p.global_hard = j.value("global_hard", false);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("malformed property: ") + e.what());
    }
    return p;
}

inline std::vector<PlanProperty> properties_from_json(const nlohmann::json& j)
{
    const nlohmann::json& list = j.is_object() ? j.at("properties") : j;
    std::vector<PlanProperty> out;
    for (const auto& item : list)
        out.push_back(property_from_json(item));
    return out;
}

inline nlohmann::json to_json(const PropertyTemplate& t)
{
    nlohmann::json vars = nlohmann::json::array();
    for (const TemplateVariable& v : t.variables)
        vars.push_back({{"name", v.name}, {"type", v.type}});
    nlohmann::json j = {{"id", t.id},
                        {"nl_pattern", t.nl_pattern},
                        {"kind", std::string(to_string(t.kind))},
                        {"formula", t.formula},
                        {"action_sets", t.action_sets},
                        {"variables", vars},
                        {"constraints", t.constraints}};
    j["utility"] = t.utility ? nlohmann::json(*t.utility) : nlohmann::json(nullptr);
    return j;
}

inline PropertyTemplate template_from_json(const nlohmann::json& j)
{
    PropertyTemplate t;
    try {
        t.id = j.at("id").get<std::string>();
        t.nl_pattern = j.at("nl_pattern").get<std::string>();
        t.kind = property_kind_from_string(j.at("kind").get<std::string>());
        t.formula = j.at("formula").get<std::string>();
        if (j.contains("action_sets"))
            t.action_sets = j.at("action_sets").get<ActionSetPatterns>();
        for (const auto& v : j.at("variables"))
            t.variables.push_back({v.at("name").get<std::string>(), v.at("type").get<std::string>()});
        if (j.contains("constraints"))
            t.constraints = j.at("constraints").get<std::vector<std::string>>();
        if (j.contains("utility") && !j.at("utility").is_null())
            t.utility = j.at("utility").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("malformed template: ") + e.what());
    }
    validate_template(t);
    return t;
}

} // namespace planspace
