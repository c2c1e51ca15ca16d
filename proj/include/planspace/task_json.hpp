#pragma once

// Canonical JSON for tasks and plans. nlohmann::json objects keep keys
// sorted, so dump() of the same task is byte-stable.

#include "planspace/task.hpp"

#include <json.hpp>

namespace planspace {

inline constexpr int TASK_SCHEMA_VERSION = 1;

inline nlohmann::json assignment_to_json(const PartialAssignment& pa)
{
    nlohmann::json out = nlohmann::json::array();
    for (const Fact& f : pa)
        out.push_back({f.var, f.value});
    return out;
}

inline PartialAssignment assignment_from_json(const nlohmann::json& j)
{
    PartialAssignment pa;
    for (const auto& f : j)
        pa.set({f.at(0).get<int>(), f.at(1).get<int>()});
    return pa;
}

inline nlohmann::json to_json(const OspTask& task)
{
    nlohmann::json vars = nlohmann::json::array();
    for (const Variable& v : task.variables)
        vars.push_back({{"id", v.id}, {"name", v.name}, {"domain", v.domain}});
    nlohmann::json actions = nlohmann::json::array();
    for (const Action& a : task.actions) {
        nlohmann::json ces = nlohmann::json::array();
        for (const ConditionalEffect& ce : a.conditional_effects)
            ces.push_back({{"condition", assignment_to_json(ce.condition)},
                           {"effect", assignment_to_json(ce.effect)}});
        actions.push_back({{"id", a.id},
                           {"name", a.name},
                           {"precondition", assignment_to_json(a.precondition)},
                           {"effect", assignment_to_json(a.effect)},
                           {"conditional_effects", ces},
                           {"cost", a.cost}});
    }
    nlohmann::json bound = nullptr;
    if (task.bound != INFINITE_COST)
        bound = task.bound;
    return {{"schema_version", TASK_SCHEMA_VERSION},
            {"variables", vars},
            {"actions", actions},
            {"initial", task.initial},
            {"hard_goal", assignment_to_json(task.hard_goal)},
            {"soft_goal", assignment_to_json(task.soft_goal)},
            {"bound", bound}};
}

inline OspTask task_from_json(const nlohmann::json& j)
{
    OspTask task;
    for (const auto& v : j.at("variables"))
        task.variables.push_back({v.at("id").get<int>(), v.at("name").get<std::string>(),
                                  v.at("domain").get<std::vector<std::string>>()});
    for (const auto& a : j.at("actions")) {
        Action action;
        action.id = a.at("id").get<int>();
        action.name = a.at("name").get<std::string>();
        action.precondition = assignment_from_json(a.at("precondition"));
        action.effect = assignment_from_json(a.at("effect"));
        for (const auto& ce : a.value("conditional_effects", nlohmann::json::array()))
            action.conditional_effects.push_back(
                {assignment_from_json(ce.at("condition")), assignment_from_json(ce.at("effect"))});
        action.cost = a.at("cost").get<Cost>();
        task.actions.push_back(std::move(action));
    }
    task.initial = j.at("initial").get<State>();
    task.hard_goal = assignment_from_json(j.at("hard_goal"));
    task.soft_goal = assignment_from_json(j.at("soft_goal"));
    task.bound = j.at("bound").is_null() ? INFINITE_COST : j.at("bound").get<Cost>();
    validate_task(task);
    return task;
}

inline nlohmann::json to_json(const Plan& plan, const OspTask* task = nullptr)
{
    nlohmann::json out = {{"steps", plan.steps}, {"cost", plan.cost}};
    if (task) {
        std::vector<std::string> names;
        for (ActionId a : plan.steps)
            names.push_back(task->action(a).name);
        out["actions"] = names;
    }
    return out;
}

inline Plan plan_from_json(const nlohmann::json& j)
{
    return {j.at("steps").get<std::vector<ActionId>>(), j.at("cost").get<Cost>()};
}

inline nlohmann::json to_json(const ValidationReport& r)
{
    nlohmann::json soft = nlohmann::json::array();
    for (const Fact& f : r.satisfied_soft_facts)
        soft.push_back({f.var, f.value});
    nlohmann::json out = {{"valid", r.valid},
                          {"cost", r.cost},
                          {"satisfied_soft_facts", soft},
                          {"violated_reason", std::string(to_string(r.violated_reason))}};
    if (r.failed_step)
        out["failed_step"] = *r.failed_step;
    return out;
}

} // namespace planspace
