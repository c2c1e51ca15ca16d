#pragma once

#include "planspace/error.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace planspace {

using Cost = std::int64_t;
inline constexpr Cost INFINITE_COST = std::numeric_limits<Cost>::max();

inline Cost add_cost(Cost a, Cost b)
{
    if (a == INFINITE_COST || b == INFINITE_COST)
        return INFINITE_COST;
    if (a > INFINITE_COST - b)
        return INFINITE_COST;
    return a + b;
}

using VariableId = int;
using ActionId = int;

struct Variable {
    VariableId id = 0;
    std::string name;
    std::vector<std::string> domain;
};

struct Fact {
    VariableId var = 0;
    int value = 0;

    auto operator<=>(const Fact&) const = default;
};

/// Complete assignment, one value index per variable.
using State = std::vector<int>;

/// A set of facts with at most one value per variable, kept sorted by
/// variable id.
class PartialAssignment {
public:
    PartialAssignment() = default;
    PartialAssignment(std::initializer_list<Fact> facts)
    {
        for (const Fact& f : facts)
            set(f);
    }
    explicit PartialAssignment(const std::vector<Fact>& facts)
    {
        for (const Fact& f : facts)
            set(f);
    }

    /// Adds a fact. Throws if the variable is already bound to another value.
    void set(Fact fact)
    {
        auto it = std::lower_bound(
            facts_.begin(), facts_.end(), fact,
            [](const Fact& a, const Fact& b) { return a.var < b.var; });
        if (it != facts_.end() && it->var == fact.var) {
            if (it->value != fact.value)
                throw Error(ErrorCode::InvalidTask,
                            "conflicting values for variable " +
                                std::to_string(fact.var),
                            {{"variable", fact.var}});
            return;
        }
        facts_.insert(it, fact);
    }

    std::optional<int> value_of(VariableId var) const
    {
        auto it = std::lower_bound(
            facts_.begin(), facts_.end(), Fact{var, 0},
            [](const Fact& a, const Fact& b) { return a.var < b.var; });
        if (it != facts_.end() && it->var == var)
            return it->value;
        return std::nullopt;
    }

    bool contains(Fact fact) const { return value_of(fact.var) == fact.value; }

    bool satisfied_by(const State& state) const
    {
        return std::all_of(facts_.begin(), facts_.end(), [&](const Fact& f) {
            return state[f.var] == f.value;
        });
    }

    bool empty() const { return facts_.empty(); }
    std::size_t size() const { return facts_.size(); }
    auto begin() const { return facts_.begin(); }
    auto end() const { return facts_.end(); }
    const std::vector<Fact>& facts() const { return facts_; }

    bool operator==(const PartialAssignment&) const = default;

private:
    std::vector<Fact> facts_;
};

struct ConditionalEffect {
    PartialAssignment condition;
    PartialAssignment effect;
};

struct Action {
    ActionId id = 0;
    std::string name;
    PartialAssignment precondition;
    PartialAssignment effect;
    std::vector<ConditionalEffect> conditional_effects;
    Cost cost = 1;
};

struct OspTask {
    std::vector<Variable> variables;
    std::vector<Action> actions;
    State initial;
    PartialAssignment hard_goal;
    PartialAssignment soft_goal;
    Cost bound = INFINITE_COST;

    const Action& action(ActionId id) const { return actions.at(static_cast<std::size_t>(id)); }
    std::string fact_name(Fact f) const
    {
        const Variable& v = variables.at(static_cast<std::size_t>(f.var));
        return v.name + "=" + v.domain.at(static_cast<std::size_t>(f.value));
    }
};

struct Plan {
    std::vector<ActionId> steps;
    Cost cost = 0;

    bool operator==(const Plan&) const = default;
};

inline Cost plan_cost(const OspTask& task, std::span<const ActionId> steps)
{
    Cost total = 0;
    for (ActionId a : steps)
        total = add_cost(total, task.action(a).cost);
    return total;
}

inline Plan make_plan(const OspTask& task, std::vector<ActionId> steps)
{
    Plan plan;
    plan.cost = plan_cost(task, steps);
    plan.steps = std::move(steps);
    return plan;
}

/// Checks the structural invariants of a task; throws InvalidTask.
inline void validate_task(const OspTask& task)
{
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidTask, msg); };
    const auto num_vars = task.variables.size();
    for (std::size_t i = 0; i < num_vars; ++i) {
        const Variable& v = task.variables[i];
        if (v.id != static_cast<VariableId>(i))
            fail("variable ids must be dense, found " + std::to_string(v.id) + " at " +
                 std::to_string(i));
        if (v.domain.empty())
            fail("variable " + v.name + " has an empty domain");
        std::vector<std::string> sorted = v.domain;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            fail("variable " + v.name + " has duplicate domain values");
    }
    auto check_fact = [&](const Fact& f) {
        if (f.var < 0 || static_cast<std::size_t>(f.var) >= num_vars)
            fail("fact refers to unknown variable " + std::to_string(f.var));
        if (f.value < 0 ||
            static_cast<std::size_t>(f.value) >= task.variables[f.var].domain.size())
            fail("fact value out of range for variable " + task.variables[f.var].name);
    };
    auto check_assignment = [&](const PartialAssignment& pa) {
        for (const Fact& f : pa)
            check_fact(f);
    };
    if (task.initial.size() != num_vars)
        fail("initial state is not total");
    for (std::size_t i = 0; i < num_vars; ++i)
        check_fact({static_cast<VariableId>(i), task.initial[i]});
    for (std::size_t i = 0; i < task.actions.size(); ++i) {
        const Action& a = task.actions[i];
        if (a.id != static_cast<ActionId>(i))
            fail("action ids must be dense");
        if (a.cost < 0)
            fail("action " + a.name + " has negative cost");
        check_assignment(a.precondition);
        check_assignment(a.effect);
        for (const ConditionalEffect& ce : a.conditional_effects) {
            check_assignment(ce.condition);
            check_assignment(ce.effect);
        }
    }
    check_assignment(task.hard_goal);
    check_assignment(task.soft_goal);
    for (const Fact& f : task.hard_goal)
        if (task.soft_goal.value_of(f.var))
            fail("hard and soft goal share variable " + task.variables[f.var].name);
    if (task.bound < 0)
        fail("negative cost bound");
}

inline bool is_applicable(const State& s, const Action& a)
{
    return a.precondition.satisfied_by(s);
}

/// Successor state. Conditional effect conditions are evaluated on `s`.
inline State apply_action(const State& s, const Action& a)
{
    if (!is_applicable(s, a))
        throw Error(ErrorCode::NotApplicable, "action " + a.name + " is not applicable",
                    {{"action", a.name}});
    State next = s;
    for (const Fact& f : a.effect)
        next[f.var] = f.value;
    for (const ConditionalEffect& ce : a.conditional_effects) {
        if (ce.condition.satisfied_by(s)) {
            for (const Fact& f : ce.effect)
                next[f.var] = f.value;
        }
    }
    return next;
}

inline State apply_sequence(const OspTask& task, const State& s, std::span<const ActionId> steps)
{
    State current = s;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const Action& a = task.action(steps[i]);
        if (!is_applicable(current, a))
            throw Error(ErrorCode::NotApplicable,
                        "step " + std::to_string(i) + " (" + a.name + ") is not applicable",
                        {{"step", i}, {"action", a.name}});
        current = apply_action(current, a);
    }
    return current;
}

/// All states s0..sn visited by an applicable sequence.
inline std::vector<State> state_trace(const OspTask& task, std::span<const ActionId> steps)
{
    std::vector<State> trace;
    trace.reserve(steps.size() + 1);
    trace.push_back(task.initial);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const Action& a = task.action(steps[i]);
        if (!is_applicable(trace.back(), a))
            throw Error(ErrorCode::NotApplicable,
                        "step " + std::to_string(i) + " (" + a.name + ") is not applicable",
                        {{"step", i}, {"action", a.name}});
        trace.push_back(apply_action(trace.back(), a));
    }
    return trace;
}

enum class Violation { None, NotApplicable, CostExceeded, HardGoalUnsatisfied };

inline std::string_view to_string(Violation v)
{
    switch (v) {
    case Violation::None: return "NONE";
    case Violation::NotApplicable: return "NOT_APPLICABLE";
    case Violation::CostExceeded: return "COST_EXCEEDED";
    case Violation::HardGoalUnsatisfied: return "HARD_GOAL_UNSATISFIED";
    }
    return "NONE";
}

struct ValidationReport {
    bool valid = false;
    Cost cost = 0;
    std::vector<Fact> satisfied_soft_facts;
    Violation violated_reason = Violation::None;
    std::optional<std::size_t> failed_step;
};

inline ValidationReport validate_plan(const OspTask& task, const Plan& plan)
{
    ValidationReport report;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        ActionId a = plan.steps[i];
        if (a < 0 || static_cast<std::size_t>(a) >= task.actions.size()) {
            report.violated_reason = Violation::NotApplicable;
            report.failed_step = i;
            return report;
        }
    }
    report.cost = plan_cost(task, plan.steps);
    State current = task.initial;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const Action& a = task.action(plan.steps[i]);
        if (!is_applicable(current, a)) {
            report.violated_reason = Violation::NotApplicable;
            report.failed_step = i;
            return report;
        }
        current = apply_action(current, a);
    }
    for (const Fact& f : task.soft_goal)
        if (current[f.var] == f.value)
            report.satisfied_soft_facts.push_back(f);
    if (task.bound != INFINITE_COST && report.cost > task.bound) {
        report.violated_reason = Violation::CostExceeded;
        return report;
    }
    if (!task.hard_goal.satisfied_by(current)) {
        report.violated_reason = Violation::HardGoalUnsatisfied;
        return report;
    }
    report.valid = true;
    return report;
}

} // namespace planspace
