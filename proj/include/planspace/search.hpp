#pragma once

// Cost-bounded A* used both to produce plans and as the solvability oracle.

#include "planspace/condition.hpp"
#include "planspace/hmax.hpp"
#include "planspace/properties.hpp"
#include "planspace/task.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <queue>
#include <tuple>
#include <unordered_set>
#include <vector>

namespace planspace {

enum class HeuristicKind { Blind, Hmax };
enum class SearchStatus { Solved, Unsolvable, ResourceLimit };
enum class Solvability { Solvable, Unsolvable, Unknown };

inline std::string_view to_string(SearchStatus s)
{
    switch (s) {
    case SearchStatus::Solved: return "SOLVED";
    case SearchStatus::Unsolvable: return "UNSOLVABLE";
    case SearchStatus::ResourceLimit: return "RESOURCE_LIMIT";
    }
    return "";
}

inline std::string_view to_string(Solvability s)
{
    switch (s) {
    case Solvability::Solvable: return "SOLVABLE";
    case Solvability::Unsolvable: return "UNSOLVABLE";
    case Solvability::Unknown: return "UNKNOWN";
    }
    return "";
}

struct SearchConfig {
    HeuristicKind heuristic = HeuristicKind::Hmax;
    std::size_t max_expansions = 20'000'000;
    double max_seconds = 600.0;
};

inline void validate_config(const SearchConfig& c)
{
    if (c.max_expansions == 0 || !(c.max_seconds > 0))
        throw Error(ErrorCode::ConfigError, "search caps must be positive");
}

struct SearchResult {
    SearchStatus status = SearchStatus::Unsolvable;
    std::optional<Plan> plan;
    std::size_t expanded = 0;
    std::size_t generated = 0;
    double elapsed_seconds = 0;
};

/// Dense storage of states packed into 64-bit words.
class StateRegistry {
public:
    explicit StateRegistry(const std::vector<Variable>& variables)
    {
        std::size_t bit = 0;
        for (const Variable& v : variables) {
            unsigned width = 1;
            while ((std::size_t{1} << width) < v.domain.size())
                ++width;
            if (bit / 64 != (bit + width - 1) / 64)
                bit = (bit / 64 + 1) * 64;
            layout_.push_back({bit / 64, static_cast<unsigned>(bit % 64), width});
            bit += width;
        }
        words_ = std::max<std::size_t>(1, (bit + 63) / 64);
    }

    /// Returns (id, inserted).
    std::pair<std::uint32_t, bool> insert(const State& s)
    {
        const auto id = static_cast<std::uint32_t>(count());
        pack(s, pool_);
        auto [it, inserted] = index_.insert(id);
        if (!inserted)
            pool_.resize(pool_.size() - words_);
        return {*it, inserted};
    }

    State lookup(std::uint32_t id) const
    {
        State s(layout_.size());
        const std::uint64_t* w = &pool_[id * words_];
        for (std::size_t v = 0; v < layout_.size(); ++v) {
            const Slot& sl = layout_[v];
            s[v] = static_cast<int>((w[sl.word] >> sl.shift) & ((std::uint64_t{1} << sl.width) - 1));
        }
        return s;
    }

    std::size_t count() const { return pool_.size() / words_; }

private:
    struct Slot {
        std::size_t word;
        unsigned shift;
        unsigned width;
    };

    void pack(const State& s, std::vector<std::uint64_t>& out) const
    {
        const std::size_t base = out.size();
        out.resize(base + words_, 0);
        for (std::size_t v = 0; v < layout_.size(); ++v) {
            const Slot& sl = layout_[v];
            out[base + sl.word] |= static_cast<std::uint64_t>(s[v]) << sl.shift;
        }
    }

    struct Hash {
        const StateRegistry* r;
        std::size_t operator()(std::uint32_t id) const
        {
            std::uint64_t h = 1469598103934665603ULL;
            const std::uint64_t* w = &r->pool_[id * r->words_];
            for (std::size_t i = 0; i < r->words_; ++i) {
                h ^= w[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            }
            return static_cast<std::size_t>(h);
        }
    };
    struct Eq {
        const StateRegistry* r;
        bool operator()(std::uint32_t a, std::uint32_t b) const
        {
            return std::equal(&r->pool_[a * r->words_], &r->pool_[a * r->words_] + r->words_,
                              &r->pool_[b * r->words_]);
        }
    };

    std::vector<Slot> layout_;
    std::size_t words_ = 1;
    std::vector<std::uint64_t> pool_;
    std::unordered_set<std::uint32_t, Hash, Eq> index_{16, Hash{this}, Eq{this}};
};

namespace detail {

/// Actions grouped by their first precondition fact, for successor generation.
class SuccessorGenerator {
public:
    explicit SuccessorGenerator(const OspTask& task) : task_(&task)
    {
        offset_.resize(task.variables.size() + 1, 0);
        for (std::size_t v = 0; v < task.variables.size(); ++v)
            offset_[v + 1] = offset_[v] + task.variables[v].domain.size();
        by_fact_.resize(offset_.back());
        for (const Action& a : task.actions) {
            if (a.precondition.empty()) {
                free_.push_back(a.id);
                continue;
            }
            const Fact f = *a.precondition.begin();
            by_fact_[offset_[static_cast<std::size_t>(f.var)] + static_cast<std::size_t>(f.value)].push_back(a.id);
        }
    }

    /// Applicable actions in increasing id order.
    void applicable(const State& s, std::vector<ActionId>& out) const
    {
        out.clear();
        out.insert(out.end(), free_.begin(), free_.end());
        for (std::size_t v = 0; v < s.size(); ++v)
            for (ActionId a : by_fact_[offset_[v] + static_cast<std::size_t>(s[v])])
                if (task_->actions[static_cast<std::size_t>(a)].precondition.satisfied_by(s))
                    out.push_back(a);
        std::sort(out.begin(), out.end());
    }

private:
    const OspTask* task_;
    std::vector<std::size_t> offset_;
    std::vector<std::vector<ActionId>> by_fact_;
    std::vector<ActionId> free_;
};

inline void apply_unchecked(const State& s, const Action& a, State& out)
{
    out = s;
    for (const Fact& f : a.effect)
        out[f.var] = f.value;
    for (const ConditionalEffect& ce : a.conditional_effects)
        if (ce.condition.satisfied_by(s))
            for (const Fact& f : ce.effect)
                out[f.var] = f.value;
}

} // namespace detail

/// Least-cost plan from the initial state satisfying every goal condition
/// within the task's cost bound.
inline SearchResult solve_bounded(const OspTask& task, const std::vector<Condition>& goals,
                                  const SearchConfig& config = {})
{
    validate_config(config);
    const auto start = std::chrono::steady_clock::now();
    SearchResult result;
    auto finish = [&](SearchStatus status) {
        result.status = status;
        result.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return result;
    };

    std::vector<Condition> all_goals = goals;
    for (const Fact& f : task.hard_goal)
        all_goals.push_back(Condition::fact(f));
    auto is_goal = [&](const State& s) {
        return std::all_of(all_goals.begin(), all_goals.end(),
                           [&](const Condition& c) { return c.evaluate(s); });
    };

    std::optional<Hmax> hmax_h;
    if (config.heuristic == HeuristicKind::Hmax)
        hmax_h.emplace(task, all_goals);
    auto heuristic = [&](const State& s) -> Cost {
        if (hmax_h)
            return (*hmax_h)(s);
        (void)s;
        return 0;
    };

    struct NodeInfo {
        Cost g = INFINITE_COST;
        Cost h = 0;
        std::uint32_t parent = 0;
        ActionId action = -1;
        bool closed = false;
    };
    // (f, h, generating action, insertion order, state id, g)
    using Entry = std::tuple<Cost, Cost, ActionId, std::uint64_t, std::uint32_t, Cost>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    StateRegistry registry(task.variables);
    std::vector<NodeInfo> nodes;
    std::uint64_t order = 0;

    const Cost h0 = heuristic(task.initial);
    if (h0 == INFINITE_COST || h0 > task.bound)
        return finish(SearchStatus::Unsolvable);
    {
        auto [id, inserted] = registry.insert(task.initial);
        nodes.push_back({0, h0, id, -1, false});
        open.push({h0, h0, -1, order++, id, 0});
    }
    result.generated = 1;

    detail::SuccessorGenerator successors(task);
    std::vector<ActionId> applicable;
    State succ;
    while (!open.empty()) {
        auto [f, h, via, seq, id, g] = open.top();
        open.pop();
        NodeInfo& node = nodes[id];
        if (g != node.g || node.closed)
            continue;
        node.closed = true;
        const State s = registry.lookup(id);
        if (is_goal(s)) {
            Plan plan;
            for (std::uint32_t cur = id; nodes[cur].action >= 0; cur = nodes[cur].parent)
                plan.steps.push_back(nodes[cur].action);
            std::reverse(plan.steps.begin(), plan.steps.end());
            plan.cost = node.g;
            result.plan = std::move(plan);
            return finish(SearchStatus::Solved);
        }
        ++result.expanded;
        if (result.expanded > config.max_expansions)
            return finish(SearchStatus::ResourceLimit);
        if ((result.expanded & 1023U) == 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
                config.max_seconds)
            return finish(SearchStatus::ResourceLimit);

        const Cost g_here = node.g;
        successors.applicable(s, applicable);
        for (ActionId a : applicable) {
            const Action& action = task.actions[static_cast<std::size_t>(a)];
            const Cost g_new = add_cost(g_here, action.cost);
            if (g_new > task.bound)
                continue;
            detail::apply_unchecked(s, action, succ);
            auto [sid, inserted] = registry.insert(succ);
            ++result.generated;
            if (inserted) {
                const Cost hs = heuristic(succ);
                nodes.push_back({INFINITE_COST, hs, 0, -1, false});
            }
            NodeInfo& child = nodes[sid];
            if (child.h == INFINITE_COST || add_cost(g_new, child.h) > task.bound)
                continue;
            if (g_new >= child.g)
                continue;
            child.g = g_new;
            child.parent = id;
            child.action = a;
            child.closed = false;
            open.push({add_cost(g_new, child.h), child.h, a, order++, sid, g_new});
        }
    }
    return finish(SearchStatus::Unsolvable);
}

inline SearchResult solve_bounded(const CompiledTask& compiled, const SearchConfig& config = {})
{
    return solve_bounded(compiled.task, compiled.hard_conditions(), config);
}

/// Solvability of the global hard goals together with `goal_subset`,
/// using only the monitors those properties need.
struct OracleResult {
    Solvability verdict = Solvability::Unknown;
    std::optional<Plan> plan;
    SearchResult search;
};

/// Searches for a plan achieving the global hard properties plus `hard_ids`.
/// Only the monitors of those properties are kept, which keeps the state
/// space small; plans carry over unchanged to the full compiled task.
inline SearchResult solve_selection(const CompiledTask& compiled, const std::vector<std::string>& hard_ids,
                                    const SearchConfig& config = {})
{
    std::vector<std::string> ids = compiled.global_hard_ids;
    for (const std::string& id : hard_ids)
        if (std::find(ids.begin(), ids.end(), id) == ids.end())
            ids.push_back(id);
    return solve_bounded(with_selection(compiled.restricted(ids), ids, {}), config);
}

inline OracleResult check_solvable_detailed(const CompiledTask& compiled,
                                            const std::vector<std::string>& goal_subset,
                                            const SearchConfig& config = {})
{
    OracleResult out;
    out.search = solve_selection(compiled, goal_subset, config);
    switch (out.search.status) {
    case SearchStatus::Solved:
        out.verdict = Solvability::Solvable;
        out.plan = out.search.plan;
        break;
    case SearchStatus::Unsolvable: out.verdict = Solvability::Unsolvable; break;
    case SearchStatus::ResourceLimit: out.verdict = Solvability::Unknown; break;
    }
    return out;
}

inline Solvability check_solvable(const CompiledTask& compiled, const std::vector<std::string>& goal_subset,
                                  const SearchConfig& config = {})
{
    return check_solvable_detailed(compiled, goal_subset, config).verdict;
}

/// Properties of `compiled` satisfied by a plan, by simulation on the full
/// compiled task.
inline std::vector<std::string> satisfied_properties(const CompiledTask& compiled, const Plan& plan)
{
    return compiled.satisfied_in(apply_sequence(compiled.task, compiled.task.initial, plan.steps));
}

inline nlohmann::json to_json(const SearchResult& r, const OspTask* task = nullptr)
{
    nlohmann::json j = {{"status", std::string(to_string(r.status))},
                        {"expanded", r.expanded},
                        {"generated", r.generated},
                        {"elapsed_seconds", r.elapsed_seconds}};
    if (r.plan) {
        nlohmann::json steps = nlohmann::json::array();
        nlohmann::json names = nlohmann::json::array();
        for (ActionId a : r.plan->steps) {
            steps.push_back(a);
            if (task)
                names.push_back(task->action(a).name);
        }
        j["plan"] = {{"steps", steps}, {"cost", r.plan->cost}};
        if (task)
            j["plan"]["actions"] = names;
    } else {
        j["plan"] = nullptr;
    }
    return j;
}

} // namespace planspace
