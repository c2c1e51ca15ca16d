#pragma once

#include "planspace/condition.hpp"
#include "planspace/pddl.hpp"
#include "planspace/task.hpp"

#include <json.hpp>

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace planspace {

/// How a ground atom is represented in the grounded task: as a binary
/// variable, or as a constant (static atoms hold forever, atoms that are
/// unreachable under the delete relaxation never hold).
struct AtomRef {
    enum class Kind { Variable, AlwaysTrue, AlwaysFalse };
    Kind kind = Kind::AlwaysFalse;
    VariableId var = -1;

    Condition holds() const
    {
        switch (kind) {
        case Kind::Variable: return Condition::fact({var, 1});
        case Kind::AlwaysTrue: return Condition::truth();
        case Kind::AlwaysFalse: return Condition::falsity();
        }
        return Condition::falsity();
    }
};

struct GroundAtomTable {
    /// variable id -> atom text, e.g. "(at p0 cafe)"
    std::vector<std::string> atoms;
    std::map<std::string, VariableId> variable_of;
    /// Atoms of predicates that no action changes, taken from the initial state.
    std::set<std::string> static_atoms;

    AtomRef resolve(const std::string& atom) const
    {
        if (auto it = variable_of.find(atom); it != variable_of.end())
            return {AtomRef::Kind::Variable, it->second};
        if (static_atoms.count(atom))
            return {AtomRef::Kind::AlwaysTrue, -1};
        return {AtomRef::Kind::AlwaysFalse, -1};
    }
};

struct GroundActionInfo {
    std::string schema;
    std::vector<std::string> args;
};

struct GroundingOptions {
    std::size_t max_ground_actions = 200000;
};

struct GroundingReport {
    std::size_t objects = 0;
    std::size_t static_atoms = 0;
    std::size_t fluent_atoms = 0;
    std::size_t pruned_atoms = 0;
    std::size_t actions_before_pruning = 0;
    std::size_t actions_after_pruning = 0;
    std::map<std::string, std::size_t> actions_per_schema;

    nlohmann::json to_json() const
    {
        return {{"objects", objects},
                {"static_atoms", static_atoms},
                {"fluent_atoms", fluent_atoms},
                {"pruned_atoms", pruned_atoms},
                {"actions_before_pruning", actions_before_pruning},
                {"actions_after_pruning", actions_after_pruning},
                {"actions_per_schema", actions_per_schema}};
    }
};

struct GroundedTask {
    OspTask task;
    GroundAtomTable atoms;
    std::vector<GroundActionInfo> action_info;
    /// object name -> declared type
    std::map<std::string, std::string> object_types;
    GroundingReport report;
};

namespace detail {

inline std::set<std::string> fluent_predicates(const pddl::ParsedDomain& domain)
{
    std::set<std::string> out;
    for (const pddl::ActionSchema& a : domain.actions) {
        for (const pddl::Atom& at : a.add_effects)
            out.insert(at.predicate);
        for (const pddl::Atom& at : a.delete_effects)
            out.insert(at.predicate);
    }
    return out;
}

struct CandidateAction {
    std::size_t schema = 0;
    std::vector<std::string> args;
    std::vector<std::string> positive_pre;
    std::vector<std::string> negative_pre;
    std::vector<std::string> adds;
    std::vector<std::string> deletes;
    Cost cost = 0;
};

inline std::string instantiate(const pddl::Atom& atom, const std::map<std::string, std::string>& sub)
{
    std::string out = "(" + atom.predicate;
    for (const std::string& t : atom.args) {
        auto it = sub.find(t);
        out += " " + (it == sub.end() ? t : it->second);
    }
    return out + ")";
}

inline std::vector<std::string> instantiate_args(const pddl::Atom& atom,
                                                 const std::map<std::string, std::string>& sub)
{
    std::vector<std::string> out;
    for (const std::string& t : atom.args) {
        auto it = sub.find(t);
        out.push_back(it == sub.end() ? t : it->second);
    }
    return out;
}

} // namespace detail

/// Atoms of predicates never occurring in any effect, as listed in the
/// initial state.
inline std::set<std::string> static_atoms(const pddl::ParsedDomain& domain,
                                          const pddl::ParsedProblem& problem)
{
    const std::set<std::string> fluent = detail::fluent_predicates(domain);
    std::set<std::string> out;
    for (const pddl::Atom& a : problem.init)
        if (!fluent.count(a.predicate))
            out.insert(a.to_string());
    return out;
}

inline GroundedTask ground(const pddl::ParsedDomain& domain, const pddl::ParsedProblem& problem,
                           const GroundingOptions& options = {})
{
    using detail::CandidateAction;
    GroundedTask out;
    const std::set<std::string> fluent = detail::fluent_predicates(domain);
    const std::set<std::string> statics = static_atoms(domain, problem);

    std::vector<std::pair<std::string, std::string>> objects;
    for (const pddl::TypedName& c : domain.constants)
        if (out.object_types.emplace(c.name, c.type).second)
            objects.emplace_back(c.name, c.type);
    for (const pddl::TypedName& o : problem.objects)
        if (out.object_types.emplace(o.name, o.type).second)
            objects.emplace_back(o.name, o.type);
    out.report.objects = out.object_types.size();

    std::set<std::string> initial_fluents;
    for (const pddl::Atom& a : problem.init)
        if (fluent.count(a.predicate))
            initial_fluents.insert(a.to_string());

    std::map<std::string, std::int64_t> numeric;
    for (const pddl::NumericFact& nf : problem.numeric_init)
        numeric[nf.function.to_string()] = nf.value;

    const bool costs_declared = domain.has_requirement(":action-costs");
    std::vector<CandidateAction> candidates;

    for (std::size_t si = 0; si < domain.actions.size(); ++si) {
        const pddl::ActionSchema& schema = domain.actions[si];
        const std::size_t arity = schema.parameters.size();
        std::vector<std::vector<std::string>> domains(arity);
        for (std::size_t k = 0; k < arity; ++k)
            for (const auto& [name, type] : objects)
                if (domain.is_subtype(type, schema.parameters[k].type))
                    domains[k].push_back(name);

        // Static literals are checked as soon as all their variables are bound.
        std::vector<std::vector<const pddl::Literal*>> checks_at(arity + 1);
        for (const pddl::Literal& l : schema.precondition) {
            if (fluent.count(l.atom.predicate))
                continue;
            std::size_t last = 0;
            for (const std::string& t : l.atom.args)
                for (std::size_t k = 0; k < arity; ++k)
                    if (schema.parameters[k].name == t)
                        last = std::max(last, k + 1);
            checks_at[last].push_back(&l);
        }

        std::map<std::string, std::string> sub;
        auto static_ok = [&](std::size_t level) {
            for (const pddl::Literal* l : checks_at[level]) {
                bool holds = statics.count(detail::instantiate(l->atom, sub)) > 0;
                if (holds != l->positive)
                    return false;
            }
            return true;
        };

        std::size_t schema_count = 0;
        auto emit = [&]() {
            CandidateAction c;
            c.schema = si;
            for (const pddl::TypedName& p : schema.parameters)
                c.args.push_back(sub.at(p.name));
            for (const pddl::Literal& l : schema.precondition) {
                if (!fluent.count(l.atom.predicate))
                    continue;
                (l.positive ? c.positive_pre : c.negative_pre)
                    .push_back(detail::instantiate(l.atom, sub));
            }
            for (const pddl::Atom& a : schema.add_effects)
                c.adds.push_back(detail::instantiate(a, sub));
            for (const pddl::Atom& a : schema.delete_effects)
                c.deletes.push_back(detail::instantiate(a, sub));
            if (!costs_declared) {
                c.cost = 1;
            } else {
                for (const pddl::CostTerm& t : schema.cost) {
                    if (t.constant) {
                        c.cost = add_cost(c.cost, *t.constant);
                        continue;
                    }
                    pddl::Atom f{t.function.predicate, detail::instantiate_args(t.function, sub)};
                    auto it = numeric.find(f.to_string());
                    if (it == numeric.end())
                        throw Error(ErrorCode::TypeError,
                                    "undefined numeric value " + f.to_string() + " in " +
                                        schema.name);
                    if (it->second < 0)
                        throw Error(ErrorCode::TypeError, "negative action cost " + f.to_string());
                    c.cost = add_cost(c.cost, it->second);
                }
            }
            candidates.push_back(std::move(c));
            ++schema_count;
            if (candidates.size() > options.max_ground_actions)
                throw Error(ErrorCode::GroundingBlowup,
                            "more than " + std::to_string(options.max_ground_actions) +
                                " ground actions",
                            {{"cap", options.max_ground_actions}, {"schema", schema.name}});
        };

        std::function<void(std::size_t)> bind = [&](std::size_t level) {
            if (level == arity) {
                emit();
                return;
            }
            for (const std::string& obj : domains[level]) {
                sub[schema.parameters[level].name] = obj;
                if (static_ok(level + 1))
                    bind(level + 1);
            }
            sub.erase(schema.parameters[level].name);
        };
        if (static_ok(0))
            bind(0);
        out.report.actions_per_schema[schema.name] = schema_count;
    }
    out.report.actions_before_pruning = candidates.size();

    // Relaxed reachability: positive fluent preconditions only, no deletes.
    std::set<std::string> reachable = initial_fluents;
    std::map<std::string, std::vector<std::size_t>> waiting;
    std::vector<std::size_t> missing(candidates.size(), 0);
    std::vector<bool> applicable(candidates.size(), false);
    std::deque<std::string> queue(initial_fluents.begin(), initial_fluents.end());
    std::set<std::string> all_candidate_atoms;
    auto fire = [&](std::size_t i) {
        applicable[i] = true;
        for (const std::string& a : candidates[i].adds)
            if (reachable.insert(a).second)
                queue.push_back(a);
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        std::set<std::string> pre(candidates[i].positive_pre.begin(),
                                  candidates[i].positive_pre.end());
        for (const std::string& a : candidates[i].positive_pre)
            all_candidate_atoms.insert(a);
        for (const std::string& a : candidates[i].adds)
            all_candidate_atoms.insert(a);
        for (const std::string& a : candidates[i].deletes)
            all_candidate_atoms.insert(a);
        missing[i] = pre.size();
        for (const std::string& a : pre)
            waiting[a].push_back(i);
        if (missing[i] == 0)
            fire(i);
    }
    while (!queue.empty()) {
        std::string atom = queue.front();
        queue.pop_front();
        auto it = waiting.find(atom);
        if (it == waiting.end())
            continue;
        for (std::size_t i : it->second)
            if (--missing[i] == 0)
                fire(i);
    }

    // Variables: every relaxed-reachable fluent atom, in lexicographic order.
    for (const std::string& atom : reachable) {
        const auto id = static_cast<VariableId>(out.atoms.atoms.size());
        out.atoms.atoms.push_back(atom);
        out.atoms.variable_of[atom] = id;
        out.task.variables.push_back({id, atom, {"false", "true"}});
        out.task.initial.push_back(initial_fluents.count(atom) ? 1 : 0);
    }
    out.atoms.static_atoms = statics;
    for (const std::string& a : all_candidate_atoms)
        if (!reachable.count(a))
            ++out.report.pruned_atoms;

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!applicable[i])
            continue;
        const CandidateAction& c = candidates[i];
        Action a;
        a.id = static_cast<ActionId>(out.task.actions.size());
        a.name = "(" + domain.actions[c.schema].name;
        for (const std::string& arg : c.args)
            a.name += " " + arg;
        a.name += ")";
        a.cost = c.cost;
        for (const std::string& p : c.positive_pre)
            a.precondition.set({out.atoms.variable_of.at(p), 1});
        bool contradictory = false;
        for (const std::string& p : c.negative_pre) {
            auto it = out.atoms.variable_of.find(p);
            if (it == out.atoms.variable_of.end())
                continue;
            if (a.precondition.value_of(it->second) == 1) {
                contradictory = true;
                break;
            }
            a.precondition.set({it->second, 0});
        }
        if (contradictory)
            continue;
        std::set<std::string> adds(c.adds.begin(), c.adds.end());
        for (const std::string& d : c.deletes) {
            auto it = out.atoms.variable_of.find(d);
            if (it != out.atoms.variable_of.end() && !adds.count(d))
                a.effect.set({it->second, 0});
        }
        for (const std::string& ad : adds)
            a.effect.set({out.atoms.variable_of.at(ad), 1});
        out.action_info.push_back({domain.actions[c.schema].name, c.args});
        out.task.actions.push_back(std::move(a));
    }
    out.report.actions_after_pruning = out.task.actions.size();
    out.report.static_atoms = statics.size();
    out.report.fluent_atoms = out.task.variables.size();
    validate_task(out.task);
    return out;
}

} // namespace planspace
