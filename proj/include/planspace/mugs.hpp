#pragma once

// Minimal unsolvable goal subsets over a property universe, and the
// question answering built on top of them.

#include "planspace/properties.hpp"
#include "planspace/search.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace planspace {

inline constexpr int CATALOG_SCHEMA_VERSION = 1;

using GoalMask = std::uint64_t;

struct OracleAnswer {
    Solvability verdict = Solvability::Unknown;
    /// For SOLVABLE: every universe member satisfied by the witness plan
    /// (always a superset of the query).
    GoalMask witness = 0;
};

struct MugsStats {
    std::size_t oracle_calls = 0;
    std::size_t solvable_calls = 0;
    std::size_t unsolvable_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t nodes_expanded = 0;

    bool operator==(const MugsStats&) const = default;
};

struct MugsCatalog {
    std::vector<std::string> universe;
    /// Each MUGS lists its members in universe order; the list is sorted by
    /// size, then by member positions.
    std::vector<std::vector<std::string>> mugs;
    MugsStats stats;
    /// Verdicts obtained from the oracle, keyed by subset.
    std::map<std::vector<std::string>, Solvability> cache;

    std::size_t position(const std::string& id) const
    {
        auto it = std::find(universe.begin(), universe.end(), id);
        if (it == universe.end())
            throw Error(ErrorCode::UnknownProperty, "property '" + id + "' is not in the catalog universe",
                        {{"id", id}});
        return static_cast<std::size_t>(it - universe.begin());
    }

    GoalMask mask_of(const std::vector<std::string>& ids) const
    {
        GoalMask m = 0;
        for (const std::string& id : ids)
            m |= GoalMask{1} << position(id);
        return m;
    }

    std::vector<std::string> ids_of(GoalMask m) const
    {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < universe.size(); ++i)
            if (m >> i & 1U)
                out.push_back(universe[i]);
        return out;
    }

    bool operator==(const MugsCatalog& o) const { return universe == o.universe && mugs == o.mugs; }
};

namespace detail {

inline bool mask_less(GoalMask a, GoalMask b)
{
    const int ca = std::popcount(a), cb = std::popcount(b);
    if (ca != cb)
        return ca < cb;
    // lexicographic on member positions
    while (a != 0 && b != 0) {
        const int ia = std::countr_zero(a), ib = std::countr_zero(b);
        if (ia != ib)
            return ia < ib;
        a &= a - 1;
        b &= b - 1;
    }
    return a == 0 && b != 0;
}

inline std::vector<std::string> order_by(const std::vector<std::string>& ids,
                                         const std::vector<std::string>& universe)
{
    std::vector<std::string> out = ids;
    std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
        auto pa = std::find(universe.begin(), universe.end(), a) - universe.begin();
        auto pb = std::find(universe.begin(), universe.end(), b) - universe.begin();
        return pa != pb ? pa < pb : a < b;
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace detail

/// Top-down search of the subset lattice. `oracle(mask)` decides whether the
/// goals in `mask` (plus whatever the oracle bakes in) are jointly solvable.
/// Known-solvable witnesses close their down-sets; known MUGS close their
/// up-sets.
template <class Oracle>
MugsCatalog compute_mugs(const std::vector<std::string>& universe, Oracle&& oracle)
{
    if (universe.size() > 64)
        throw Error(ErrorCode::Validation, "MUGS universe is limited to 64 properties");
    {
        std::set<std::string> unique(universe.begin(), universe.end());
        if (unique.size() != universe.size())
            throw Error(ErrorCode::Validation, "duplicate ids in MUGS universe");
    }
    MugsCatalog catalog;
    catalog.universe = universe;
    const GoalMask full = universe.size() == 64 ? ~GoalMask{0} : (GoalMask{1} << universe.size()) - 1;

    std::vector<GoalMask> witnesses;
    std::vector<GoalMask> unsolvable_known;
    auto solvable = [&](GoalMask m) -> bool {
        for (GoalMask w : witnesses)
            if ((m & ~w) == 0) {
                ++catalog.stats.cache_hits;
                return true;
            }
        for (GoalMask u : unsolvable_known)
            if ((u & ~m) == 0) {
                ++catalog.stats.cache_hits;
                return false;
            }
        ++catalog.stats.oracle_calls;
        const OracleAnswer a = oracle(m);
        switch (a.verdict) {
        case Solvability::Solvable:
            ++catalog.stats.solvable_calls;
            witnesses.push_back(a.witness | m);
            catalog.cache[catalog.ids_of(m)] = Solvability::Solvable;
            return true;
        case Solvability::Unsolvable:
            ++catalog.stats.unsolvable_calls;
            catalog.cache[catalog.ids_of(m)] = Solvability::Unsolvable;
            return false;
        case Solvability::Unknown: break;
        }
        throw Error(ErrorCode::OracleUnknown, "solvability oracle gave no verdict",
                    {{"subset", catalog.ids_of(m)}});
    };

    if (!solvable(0))
        throw Error(ErrorCode::GlobalHardUnsolvable, "the global hard goals alone are unsolvable");

    std::vector<GoalMask> found;
    if (!solvable(full)) {
        std::deque<GoalMask> frontier{full};
        std::unordered_set<GoalMask> seen{full};
        while (!frontier.empty()) {
            const GoalMask g = frontier.front();
            frontier.pop_front();
            ++catalog.stats.nodes_expanded;
            bool minimal = true;
            for (GoalMask rest = g; rest != 0; rest &= rest - 1) {
                const GoalMask child = g & ~(rest & -rest);
                if (solvable(child))
                    continue;
                minimal = false;
                if (seen.insert(child).second)
                    frontier.push_back(child);
            }
            if (minimal) {
                found.push_back(g);
                unsolvable_known.push_back(g);
            }
        }
    }
    std::sort(found.begin(), found.end(), detail::mask_less);
    for (GoalMask m : found)
        catalog.mugs.push_back(catalog.ids_of(m));
    return catalog;
}

/// Search-based oracle: one bounded A* call per query.
class SearchOracle {
public:
    SearchOracle(const CompiledTask& compiled, std::vector<std::string> universe, SearchConfig config = {})
        : compiled_(&compiled), universe_(std::move(universe)), config_(config)
    {
    }

    OracleAnswer operator()(GoalMask m) const
    {
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < universe_.size(); ++i)
            if (m >> i & 1U)
                ids.push_back(universe_[i]);
        const OracleResult r = check_solvable_detailed(*compiled_, ids, config_);
        OracleAnswer a;
        a.verdict = r.verdict;
        if (r.plan) {
            const auto sat = satisfied_properties(*compiled_, *r.plan);
            for (std::size_t i = 0; i < universe_.size(); ++i)
                if (std::find(sat.begin(), sat.end(), universe_[i]) != sat.end())
                    a.witness |= GoalMask{1} << i;
        }
        return a;
    }

private:
    const CompiledTask* compiled_;
    std::vector<std::string> universe_;
    SearchConfig config_;
};

/// Exact oracle from one exhaustive exploration of the compiled task: every
/// state reachable within the bound in which the global hard goals hold
/// contributes the set of universe goals it satisfies. A subset is solvable
/// iff it is contained in one of the maximal such sets.
class ReachabilityOracle {
public:
    ReachabilityOracle(const CompiledTask& compiled, const std::vector<std::string>& universe,
                       const SearchConfig& config = {})
    {
        validate_config(config);
        const auto start = std::chrono::steady_clock::now();
        std::vector<Condition> goals;
        for (const std::string& id : universe)
            goals.push_back(compiled.goal(id));
        std::vector<Condition> global;
        for (const Fact& f : compiled.base->hard_goal)
            global.push_back(Condition::fact(f));
        for (const std::string& id : compiled.global_hard_ids)
            global.push_back(compiled.goal(id));

        const OspTask& task = compiled.task;
        StateRegistry registry(task.variables);
        std::vector<Cost> g_of;
        using Entry = std::pair<Cost, std::uint32_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
        registry.insert(task.initial);
        g_of.push_back(0);
        open.push({0, 0});
        detail::SuccessorGenerator successors(task);
        std::vector<ActionId> applicable;
        std::set<GoalMask> masks;
        State succ;
        while (!open.empty()) {
            auto [g, id] = open.top();
            open.pop();
            if (g != g_of[id])
                continue;
            if (++expanded_ > config.max_expansions)
                throw Error(ErrorCode::OracleUnknown, "state space exceeds the expansion cap",
                            {{"cap", config.max_expansions}});
            if ((expanded_ & 1023U) == 0 &&
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
                    config.max_seconds)
                throw Error(ErrorCode::OracleUnknown, "state space exploration exceeded the time cap");
            const State s = registry.lookup(id);
            if (std::all_of(global.begin(), global.end(), [&](const Condition& c) { return c.evaluate(s); })) {
                GoalMask m = 0;
                for (std::size_t i = 0; i < goals.size(); ++i)
                    if (goals[i].evaluate(s))
                        m |= GoalMask{1} << i;
                masks.insert(m);
            }
            successors.applicable(s, applicable);
            for (ActionId a : applicable) {
                const Action& action = task.actions[static_cast<std::size_t>(a)];
                const Cost g_new = add_cost(g, action.cost);
                if (g_new > task.bound)
                    continue;
                detail::apply_unchecked(s, action, succ);
                auto [sid, inserted] = registry.insert(succ);
                if (inserted)
                    g_of.push_back(INFINITE_COST);
                if (g_new < g_of[sid]) {
                    g_of[sid] = g_new;
                    open.push({g_new, sid});
                }
            }
        }
        for (auto it = masks.rbegin(); it != masks.rend(); ++it) {
            const GoalMask m = *it;
            const bool dominated = std::any_of(maximal_.begin(), maximal_.end(),
                                               [&](GoalMask w) { return w != m && (m & ~w) == 0; });
            if (!dominated)
                maximal_.push_back(m);
        }
        // a superset has a larger numeric value, so reverse order visits
        // supersets first and the filter above is exact
        std::sort(maximal_.begin(), maximal_.end());
    }

    OracleAnswer operator()(GoalMask m) const
    {
        for (GoalMask w : maximal_)
            if ((m & ~w) == 0)
                return {Solvability::Solvable, w};
        return {Solvability::Unsolvable, 0};
    }

    const std::vector<GoalMask>& maximal_sets() const { return maximal_; }
    std::size_t states_expanded() const { return expanded_; }

private:
    std::vector<GoalMask> maximal_;
    std::size_t expanded_ = 0;
};

enum class OracleKind { Search, Reachability };

inline std::string_view to_string(OracleKind k) { return k == OracleKind::Search ? "search" : "reachability"; }

inline OracleKind oracle_kind_from_string(const std::string& s)
{
    if (s == "search")
        return OracleKind::Search;
    if (s == "reachability")
        return OracleKind::Reachability;
    throw Error(ErrorCode::Validation, "unknown oracle '" + s + "'");
}

/// Default universe: every compiled property that is not global hard.
inline std::vector<std::string> soft_universe(const CompiledTask& compiled)
{
    std::vector<std::string> out;
    for (const std::string& id : compiled.property_ids)
        if (std::find(compiled.global_hard_ids.begin(), compiled.global_hard_ids.end(), id) ==
            compiled.global_hard_ids.end())
            out.push_back(id);
    return out;
}

inline MugsCatalog compute_mugs(const CompiledTask& compiled, const std::vector<std::string>& universe,
                                const SearchConfig& config = {}, OracleKind kind = OracleKind::Search)
{
    for (const std::string& id : universe) {
        compiled.goal(id);
        if (std::find(compiled.global_hard_ids.begin(), compiled.global_hard_ids.end(), id) !=
            compiled.global_hard_ids.end())
            throw Error(ErrorCode::Validation, "global hard property " + id + " cannot be in the MUGS universe",
                        {{"id", id}});
    }
    if (kind == OracleKind::Reachability) {
        ReachabilityOracle oracle(compiled, universe, config);
        return compute_mugs(universe, oracle);
    }
    SearchOracle oracle(compiled, universe, config);
    return compute_mugs(universe, oracle);
}

struct CertificationReport {
    bool ok = true;
    std::vector<std::string> failures;
    std::size_t oracle_calls = 0;
};

/// Re-checks each MUGS with fresh search calls: the set itself must be
/// unsolvable and every set with one member removed solvable.
inline CertificationReport certify(const MugsCatalog& catalog, const CompiledTask& compiled,
                                   const SearchConfig& config = {})
{
    CertificationReport report;
    auto name = [](const std::vector<std::string>& ids) {
        std::string s = "{";
        for (std::size_t i = 0; i < ids.size(); ++i)
            s += (i ? "," : "") + ids[i];
        return s + "}";
    };
    for (const auto& m : catalog.mugs) {
        ++report.oracle_calls;
        const Solvability v = check_solvable(compiled, m, config);
        if (v != Solvability::Unsolvable) {
            report.ok = false;
            report.failures.push_back(name(m) + " is " + std::string(to_string(v)));
        }
        for (std::size_t i = 0; i < m.size(); ++i) {
            std::vector<std::string> child = m;
            child.erase(child.begin() + static_cast<std::ptrdiff_t>(i));
            ++report.oracle_calls;
            const Solvability c = check_solvable(compiled, child, config);
            if (c != Solvability::Solvable) {
                report.ok = false;
                report.failures.push_back(name(child) + " (subset of " + name(m) + ") is " +
                                          std::string(to_string(c)));
            }
        }
    }
    for (std::size_t i = 0; i < catalog.mugs.size(); ++i)
        for (std::size_t j = 0; j < catalog.mugs.size(); ++j)
            if (i != j && std::includes(catalog.mugs[j].begin(), catalog.mugs[j].end(),
                                        catalog.mugs[i].begin(), catalog.mugs[i].end(),
                                        [&](const std::string& a, const std::string& b) {
                                            return catalog.position(a) < catalog.position(b);
                                        })) {
                report.ok = false;
                report.failures.push_back(name(catalog.mugs[i]) + " is contained in " + name(catalog.mugs[j]));
            }
    return report;
}

// ---------------------------------------------------------------------------
// Questions and explanations

struct Question {
    std::vector<std::string> asked;
    std::vector<std::string> satisfied;
};

struct AnswerEntry {
    std::vector<std::vector<std::string>> source_mugs;
    std::vector<std::string> tradeoff;
    std::vector<std::string> unsatisfied_members;
    bool empty_tradeoff = false;

    bool operator==(const AnswerEntry&) const = default;
};

struct Answer {
    std::vector<AnswerEntry> entries;
};

/// For every MUGS that meets the question, the satisfied members outside the
/// question are what achieving the question would cost.
inline Answer answer_question(const Question& q, const MugsCatalog& catalog,
                              std::optional<std::size_t> max_question_size = std::nullopt)
{
    for (const std::string& id : q.asked)
        catalog.position(id);
    const std::vector<std::string> asked = detail::order_by(q.asked, catalog.universe);
    if (asked.empty())
        throw Error(ErrorCode::Validation, "a question needs at least one property");
    if (max_question_size && asked.size() > *max_question_size)
        throw Error(ErrorCode::QuestionTooLarge,
                    "question has " + std::to_string(asked.size()) + " properties, limit is " +
                        std::to_string(*max_question_size),
                    {{"size", asked.size()}, {"limit", *max_question_size}});
    const std::set<std::string> asked_set(asked.begin(), asked.end());
    const std::set<std::string> sat(q.satisfied.begin(), q.satisfied.end());
    for (const std::string& id : asked)
        if (sat.count(id))
            throw Error(ErrorCode::Validation, "property " + id + " is both asked about and satisfied",
                        {{"id", id}});

    std::map<std::vector<std::string>, AnswerEntry> by_tradeoff;
    for (const auto& m : catalog.mugs) {
        if (std::none_of(m.begin(), m.end(), [&](const std::string& id) { return asked_set.count(id) > 0; }))
            continue;
        std::vector<std::string> tradeoff;
        std::vector<std::string> unsatisfied;
        for (const std::string& id : m) {
            if (!asked_set.count(id) && sat.count(id))
                tradeoff.push_back(id);
            if (!sat.count(id))
                unsatisfied.push_back(id);
        }
        AnswerEntry& e = by_tradeoff[tradeoff];
        e.tradeoff = tradeoff;
        e.empty_tradeoff = tradeoff.empty();
        e.source_mugs.push_back(m);
        e.unsatisfied_members.insert(e.unsatisfied_members.end(), unsatisfied.begin(), unsatisfied.end());
        e.unsatisfied_members = detail::order_by(e.unsatisfied_members, catalog.universe);
    }
    Answer answer;
    for (auto& [key, e] : by_tradeoff)
        answer.entries.push_back(std::move(e));
    std::sort(answer.entries.begin(), answer.entries.end(), [&](const AnswerEntry& a, const AnswerEntry& b) {
        return detail::mask_less(catalog.mask_of(a.tradeoff), catalog.mask_of(b.tradeoff));
    });
    return answer;
}

struct UnsolvableExplanation {
    /// MUGS inside the hard set that involve a property added since the
    /// previous selection (all of them without a previous selection).
    std::vector<std::vector<std::string>> focused;
    std::vector<std::vector<std::string>> all;
};

inline UnsolvableExplanation explain_unsolvable(const std::vector<std::string>& hard_now,
                                                const std::optional<std::vector<std::string>>& hard_prev,
                                                const MugsCatalog& catalog)
{
    const std::set<std::string> now(hard_now.begin(), hard_now.end());
    std::set<std::string> added = now;
    if (hard_prev)
        for (const std::string& id : *hard_prev)
            added.erase(id);
    UnsolvableExplanation out;
    for (const auto& m : catalog.mugs) {
        if (!std::all_of(m.begin(), m.end(), [&](const std::string& id) { return now.count(id) > 0; }))
            continue;
        out.all.push_back(m);
        if (!hard_prev || std::any_of(m.begin(), m.end(), [&](const std::string& id) { return added.count(id) > 0; }))
            out.focused.push_back(m);
    }
    return out;
}

struct ExclusionDependency {
    std::vector<std::string> x;
    std::vector<std::string> y;

    bool operator==(const ExclusionDependency&) const = default;
};

/// (M \ Y) implies not Y for each MUGS M and nonempty proper Y, with
/// |Y| <= max_y (all sizes when max_y is empty).
inline std::vector<ExclusionDependency> derive_exclusion_dependencies(const MugsCatalog& catalog,
                                                                      std::optional<std::size_t> max_y = 1)
{
    std::vector<ExclusionDependency> out;
    for (const auto& m : catalog.mugs) {
        if (m.size() > 20)
            throw Error(ErrorCode::Validation, "MUGS too large to enumerate dependencies");
        const std::uint32_t n = static_cast<std::uint32_t>(m.size());
        std::vector<std::uint32_t> ys;
        for (std::uint32_t y = 1; y + 1 < (1U << n); ++y)
            if (!max_y || static_cast<std::size_t>(std::popcount(y)) <= *max_y)
                ys.push_back(y);
        std::stable_sort(ys.begin(), ys.end(),
                         [](std::uint32_t a, std::uint32_t b) { return detail::mask_less(a, b); });
        for (std::uint32_t y : ys) {
            ExclusionDependency d;
            for (std::uint32_t i = 0; i < n; ++i)
                ((y >> i & 1U) ? d.y : d.x).push_back(m[i]);
            out.push_back(std::move(d));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const MugsStats& s)
{
    return {{"oracle_calls", s.oracle_calls},
            {"solvable_calls", s.solvable_calls},
            {"unsolvable_calls", s.unsolvable_calls},
            {"cache_hits", s.cache_hits},
            {"nodes_expanded", s.nodes_expanded}};
}

inline nlohmann::json to_json(const MugsCatalog& c)
{
    nlohmann::json cache = nlohmann::json::array();
    for (const auto& [subset, verdict] : c.cache)
        cache.push_back({{"subset", subset}, {"verdict", std::string(to_string(verdict))}});
    nlohmann::json mugs = nlohmann::json::array();
    for (const auto& m : c.mugs)
        mugs.push_back(m);
    return {{"schema_version", CATALOG_SCHEMA_VERSION},
            {"universe", c.universe},
            {"mugs", mugs},
            {"stats", to_json(c.stats)},
            {"cache", cache}};
}

inline MugsCatalog catalog_from_json(const nlohmann::json& j)
{
    MugsCatalog c;
    try {
        if (j.contains("schema_version") && j.at("schema_version").get<int>() != CATALOG_SCHEMA_VERSION)
            throw Error(ErrorCode::Validation, "unsupported catalog schema version");
        c.universe = j.at("universe").get<std::vector<std::string>>();
        for (const auto& m : j.at("mugs"))
            c.mugs.push_back(detail::order_by(m.get<std::vector<std::string>>(), c.universe));
        for (const auto& m : c.mugs)
            for (const std::string& id : m)
                c.position(id);
        if (j.contains("stats")) {
            const auto& s = j.at("stats");
            c.stats.oracle_calls = s.value("oracle_calls", std::size_t{0});
            c.stats.solvable_calls = s.value("solvable_calls", std::size_t{0});
            c.stats.unsolvable_calls = s.value("unsolvable_calls", std::size_t{0});
            c.stats.cache_hits = s.value("cache_hits", std::size_t{0});
            c.stats.nodes_expanded = s.value("nodes_expanded", std::size_t{0});
        }
        if (j.contains("cache"))
            for (const auto& e : j.at("cache"))
                c.cache[e.at("subset").get<std::vector<std::string>>()] =
                    e.at("verdict").get<std::string>() == "SOLVABLE" ? Solvability::Solvable
                                                                     : Solvability::Unsolvable;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("malformed catalog: ") + e.what());
    }
    std::sort(c.mugs.begin(), c.mugs.end(), [&](const auto& a, const auto& b) {
        return detail::mask_less(c.mask_of(a), c.mask_of(b));
    });
    return c;
}

inline nlohmann::json to_json(const Answer& a)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const AnswerEntry& e : a.entries)
        entries.push_back({{"source_mugs", e.source_mugs},
                           {"tradeoff", e.tradeoff},
                           {"unsatisfied_members", e.unsatisfied_members},
                           {"empty_tradeoff", e.empty_tradeoff}});
    return {{"entries", entries}};
}

inline nlohmann::json to_json(const UnsolvableExplanation& e)
{
    nlohmann::json focused = nlohmann::json::array();
    nlohmann::json all = nlohmann::json::array();
    for (const auto& m : e.focused)
        focused.push_back(m);
    for (const auto& m : e.all)
        all.push_back(m);
    return {{"focused", focused}, {"all", all}};
}

} // namespace planspace
