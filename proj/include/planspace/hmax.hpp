#pragma once

#include "planspace/condition.hpp"
#include "planspace/task.hpp"

#include <algorithm>
#include <queue>
#include <vector>

namespace planspace {

/// Delete-relaxation max heuristic. Conditional effects become separate
/// relaxed operators whose precondition also includes the effect condition.
/// Goal formulas are read in positive normal form: a conjunction costs the
/// max of its parts, a disjunction the min.
class Hmax {
public:
    Hmax(const OspTask& task, const std::vector<Condition>& goals)
    {
        offset_.resize(task.variables.size() + 1, 0);
        for (std::size_t v = 0; v < task.variables.size(); ++v)
            offset_[v + 1] = offset_[v] + task.variables[v].domain.size();
        const std::size_t num_facts = offset_.back();
        pre_of_.resize(num_facts);

        auto add_op = [&](const PartialAssignment& pre, const PartialAssignment* extra,
                          const PartialAssignment& eff, Cost cost) {
            Op op;
            op.cost = cost;
            std::vector<std::size_t> pres;
            for (const Fact& f : pre)
                pres.push_back(index(f));
            if (extra)
                for (const Fact& f : *extra)
                    pres.push_back(index(f));
            std::sort(pres.begin(), pres.end());
            pres.erase(std::unique(pres.begin(), pres.end()), pres.end());
            op.num_pre = pres.size();
            for (const Fact& f : eff)
                op.effects.push_back(index(f));
            const std::size_t id = ops_.size();
            for (std::size_t p : pres)
                pre_of_[p].push_back(id);
            if (pres.empty())
                no_pre_.push_back(id);
            ops_.push_back(std::move(op));
        };
        for (const Action& a : task.actions) {
            add_op(a.precondition, nullptr, a.effect, a.cost);
            for (const ConditionalEffect& ce : a.conditional_effects)
                add_op(a.precondition, &ce.condition, ce.effect, a.cost);
        }
        for (const Condition& g : goals) {
            goals_.push_back(g.positive_normal_form(task.variables));
            collect_goal_facts(goals_.back());
        }
        std::sort(goal_facts_.begin(), goal_facts_.end());
        goal_facts_.erase(std::unique(goal_facts_.begin(), goal_facts_.end()), goal_facts_.end());
        is_goal_fact_.assign(num_facts, 0);
        for (std::size_t f : goal_facts_)
            is_goal_fact_[f] = 1;
        cost_.resize(num_facts);
        unsatisfied_.resize(ops_.size());
        op_cost_.resize(ops_.size());
    }

    /// INFINITE_COST iff the goal is unreachable under the relaxation.
    Cost operator()(const State& s)
    {
        std::fill(cost_.begin(), cost_.end(), INFINITE_COST);
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            unsatisfied_[i] = ops_[i].num_pre;
            op_cost_[i] = 0;
        }
        // Dial's algorithm: costs are integers, so a bucket per cost value.
        for (auto& b : buckets_)
            b.clear();
        auto push = [&](Cost c, std::size_t f) {
            if (c >= static_cast<Cost>(MAX_BUCKETS)) {
                overflow_.push({c, f});
                return;
            }
            if (static_cast<std::size_t>(c) >= buckets_.size())
                buckets_.resize(static_cast<std::size_t>(c) + 1);
            buckets_[static_cast<std::size_t>(c)].push_back(f);
        };
        for (std::size_t v = 0; v < s.size(); ++v) {
            const std::size_t f = offset_[v] + static_cast<std::size_t>(s[v]);
            cost_[f] = 0;
            push(0, f);
        }
        auto fire = [&](std::size_t op_id) {
            const Op& op = ops_[op_id];
            const Cost c = add_cost(op_cost_[op_id], op.cost);
            for (std::size_t e : op.effects)
                if (c < cost_[e]) {
                    cost_[e] = c;
                    push(c, e);
                }
        };
        for (std::size_t op_id : no_pre_)
            fire(op_id);
        std::size_t goals_left = goal_facts_.size();
        auto settle = [&](Cost c, std::size_t f) {
            if (c > cost_[f])
                return;
            if (is_goal_fact_[f] && --goals_left == 0)
                return;
            for (std::size_t op_id : pre_of_[f]) {
                op_cost_[op_id] = std::max(op_cost_[op_id], c);
                if (--unsatisfied_[op_id] == 0)
                    fire(op_id);
            }
        };
        for (std::size_t c = 0; c < buckets_.size() && goals_left > 0; ++c)
            for (std::size_t i = 0; i < buckets_[c].size() && goals_left > 0; ++i)
                settle(static_cast<Cost>(c), buckets_[c][i]);
        while (!overflow_.empty()) {
            auto [c, f] = overflow_.top();
            overflow_.pop();
            if (goals_left > 0)
                settle(c, f);
        }
        Cost h = 0;
        for (const Condition& g : goals_) {
            h = std::max(h, evaluate(g));
            if (h == INFINITE_COST)
                break;
        }
        return h;
    }

private:
    struct Op {
        Cost cost = 0;
        std::size_t num_pre = 0;
        std::vector<std::size_t> effects;
    };

    static constexpr std::size_t MAX_BUCKETS = 1 << 16;

    void collect_goal_facts(const Condition& c)
    {
        if (c.is_fact())
            goal_facts_.push_back(index(c.get_fact()));
        for (const Condition& part : c.children())
            collect_goal_facts(part);
    }

    std::size_t index(Fact f) const { return offset_[static_cast<std::size_t>(f.var)] + static_cast<std::size_t>(f.value); }

    Cost evaluate(const Condition& c) const
    {
        switch (c.kind()) {
        case Condition::Kind::True: return 0;
        case Condition::Kind::False: return INFINITE_COST;
        case Condition::Kind::Fact: return cost_[index(c.get_fact())];
        case Condition::Kind::And: {
            Cost h = 0;
            for (const Condition& part : c.children())
                h = std::max(h, evaluate(part));
            return h;
        }
        case Condition::Kind::Or: {
            Cost h = INFINITE_COST;
            for (const Condition& part : c.children())
                h = std::min(h, evaluate(part));
            return h;
        }
        case Condition::Kind::Not: break;
        }
        return 0; // not reached after positive normal form
    }

    std::vector<std::size_t> offset_;
    std::vector<Op> ops_;
    std::vector<std::vector<std::size_t>> pre_of_;
    std::vector<std::size_t> no_pre_;
    std::vector<Condition> goals_;
    std::vector<std::size_t> goal_facts_;
    std::vector<char> is_goal_fact_;
    std::vector<std::vector<std::size_t>> buckets_;
    std::priority_queue<std::pair<Cost, std::size_t>, std::vector<std::pair<Cost, std::size_t>>, std::greater<>>
        overflow_;
    std::vector<Cost> cost_;
    std::vector<std::size_t> unsatisfied_;
    std::vector<Cost> op_cost_;
};

/// Convenience wrapper; hard goal facts of `task` are included.
inline Cost hmax(const State& s, const OspTask& task, const std::vector<Condition>& extra_goals = {})
{
    std::vector<Condition> goals = extra_goals;
    for (const Fact& f : task.hard_goal)
        goals.push_back(Condition::fact(f));
    return Hmax(task, goals)(s);
}

} // namespace planspace
