#pragma once

// The iterative planning loop: select hard goals, get a plan or an
// unsolvability explanation, ask questions, repeat.

#include "planspace/mugs.hpp"
#include "planspace/project.hpp"
#include "planspace/search.hpp"

#include <json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace planspace {

inline constexpr int STUDY_RECORD_SCHEMA_VERSION = 1;

/// Seconds since the epoch. Injected so tests and replays control time.
using Clock = std::function<double()>;

inline Clock system_clock()
{
    return [] {
        return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
    };
}

/// Sum of utilities; every satisfied property must carry one.
inline std::int64_t compute_utility(const std::vector<std::string>& satisfied_ids,
                                    const std::vector<PlanProperty>& properties)
{
    std::int64_t total = 0;
    for (const std::string& id : satisfied_ids) {
        auto it = std::find_if(properties.begin(), properties.end(),
                               [&](const PlanProperty& p) { return p.id == id; });
        if (it == properties.end())
            throw Error(ErrorCode::UnknownProperty, "unknown property '" + id + "'", {{"id", id}});
        if (!it->utility)
            throw Error(ErrorCode::UtilityUnassigned, "property " + id + " has no utility", {{"id", id}});
        total += *it->utility;
    }
    return total;
}

enum class IterationStatus { Solved, Unsolvable };

struct QuestionRecord {
    std::string kind; // "why-not" or "why-unsolvable"
    std::vector<std::string> asked;
    std::optional<Answer> answer;
    std::optional<UnsolvableExplanation> explanation;
    double at = 0;
};

struct Iteration {
    int index = 0;
    std::vector<std::string> selected;
    std::vector<std::string> hard;
    IterationStatus status = IterationStatus::Solved;
    std::optional<Plan> plan;
    std::vector<std::string> plan_actions;
    std::vector<std::string> plan_text;
    std::vector<std::string> satisfied;
    std::vector<std::string> by_chance;
    std::vector<std::string> unsatisfied;
    std::optional<std::int64_t> utility;
    std::optional<UnsolvableExplanation> explanation;
    std::vector<QuestionRecord> questions;
    double submitted_at = 0;
    double completed_at = 0;
};

struct Event {
    double at = 0;
    std::string type;
    std::string part;
    nlohmann::json data = nlohmann::json::object();
};

inline nlohmann::json to_json(const QuestionRecord& q)
{
    nlohmann::json j = {{"kind", q.kind}, {"asked", q.asked}, {"at", q.at}};
    j["answer"] = q.answer ? to_json(*q.answer) : nlohmann::json(nullptr);
    j["explanation"] = q.explanation ? to_json(*q.explanation) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const Iteration& it)
{
    nlohmann::json j = {{"index", it.index},
                        {"selected", it.selected},
                        {"hard", it.hard},
                        {"status", it.status == IterationStatus::Solved ? "SOLVED" : "UNSOLVABLE"},
                        {"plan_actions", it.plan_actions},
                        {"plan_text", it.plan_text},
                        {"satisfied", it.satisfied},
                        {"by_chance", it.by_chance},
                        {"unsatisfied", it.unsatisfied},
                        {"submitted_at", it.submitted_at},
                        {"completed_at", it.completed_at}};
    if (it.plan)
        j["plan"] = {{"steps", it.plan->steps}, {"cost", it.plan->cost}};
    else
        j["plan"] = nullptr;
    j["utility"] = it.utility ? nlohmann::json(*it.utility) : nlohmann::json(nullptr);
    j["explanation"] = it.explanation ? to_json(*it.explanation) : nlohmann::json(nullptr);
    nlohmann::json qs = nlohmann::json::array();
    for (const QuestionRecord& q : it.questions)
        qs.push_back(to_json(q));
    j["questions"] = qs;
    return j;
}

inline nlohmann::json to_json(const Event& e)
{
    return {{"at", e.at}, {"type", e.type}, {"part", e.part}, {"data", e.data}};
}

class Session {
public:
    /// Demo sessions use the precomputed catalog; project sessions compute
    /// MUGS on first use.
    Session(std::string id, std::shared_ptr<const ProjectModel> model, std::optional<MugsCatalog> catalog,
            StudyConfig config, Clock clock = system_clock(), SearchConfig search = {},
            std::string demo_id = {})
        : id_(std::move(id))
        , demo_id_(std::move(demo_id))
        , model_(std::move(model))
        , catalog_(std::move(catalog))
        , config_(config)
        , clock_(std::move(clock))
        , search_(search)
    {
        validate(config_);
        started_at_ = clock_();
    }

    const std::string& id() const { return id_; }
    const std::string& demo_id() const { return demo_id_; }
    const StudyConfig& config() const { return config_; }
    const std::vector<Iteration>& iterations() const { return iterations_; }
    const std::vector<Event>& events() const { return events_; }
    const ProjectModel& model() const { return *model_; }
    double started_at() const { return started_at_; }

    Iteration submit_iteration(const std::vector<std::string>& selected_ids)
    {
        std::lock_guard lock(mutex_);
        if (config_.max_iterations && static_cast<int>(iterations_.size()) >= *config_.max_iterations)
            throw Error(ErrorCode::IterationLimit,
                        "iteration limit of " + std::to_string(*config_.max_iterations) + " reached",
                        {{"limit", *config_.max_iterations}});
        check_time();
        const std::vector<std::string> selectable = model_->selectable_ids();
        const std::vector<std::string> globals = model_->compiled.global_hard_ids;
        std::set<std::string> chosen;
        for (const std::string& id : selected_ids) {
            model_->compiled.goal(id);
            if (std::find(globals.begin(), globals.end(), id) == globals.end())
                chosen.insert(id);
        }
        Iteration it;
        it.index = static_cast<int>(iterations_.size()) + 1;
        it.submitted_at = clock_();
        for (const std::string& id : model_->compiled.property_ids) {
            if (chosen.count(id))
                it.selected.push_back(id);
            if (chosen.count(id) || std::find(globals.begin(), globals.end(), id) != globals.end())
                it.hard.push_back(id);
        }
        // A demo's catalog is certified, so a selection containing one of its
        // MUGS is known to be unsolvable without searching.
        bool known_unsolvable = false;
        if (catalog_) {
            const GoalMask mask = catalog_->mask_of(it.selected);
            known_unsolvable = std::any_of(catalog_->mugs.begin(), catalog_->mugs.end(), [&](const auto& m) {
                return (catalog_->mask_of(m) & ~mask) == 0;
            });
        }
        SearchResult r;
        r.status = SearchStatus::Unsolvable;
        if (!known_unsolvable)
            r = solve_selection(model_->compiled, it.hard, search_);
        if (r.status == SearchStatus::ResourceLimit)
            throw Error(ErrorCode::PlannerResourceLimit, "planner hit its resource limit",
                        {{"expanded", r.expanded}});
        if (r.status == SearchStatus::Solved) {
            it.status = IterationStatus::Solved;
            it.plan = r.plan;
            for (ActionId a : r.plan->steps) {
                it.plan_actions.push_back(model_->compiled.task.action(a).name);
                it.plan_text.push_back(model_->action_text(a));
            }
            it.satisfied = satisfied_properties(model_->compiled, *r.plan);
            for (const std::string& id : model_->compiled.property_ids) {
                const bool sat = std::find(it.satisfied.begin(), it.satisfied.end(), id) != it.satisfied.end();
                const bool hard = std::find(it.hard.begin(), it.hard.end(), id) != it.hard.end();
                if (!sat)
                    it.unsatisfied.push_back(id);
                else if (!hard)
                    it.by_chance.push_back(id);
            }
            it.utility = utility_or_null(it.satisfied);
        } else {
            it.status = IterationStatus::Unsolvable;
            std::optional<std::vector<std::string>> prev;
            if (!iterations_.empty())
                prev = iterations_.back().hard;
            it.explanation = explain_unsolvable(it.hard, prev, catalog());
        }
        it.completed_at = clock_();
        iterations_.push_back(it);
        return it;
    }

    Answer ask_question(const std::vector<std::string>& asked_ids)
    {
        std::lock_guard lock(mutex_);
        if (!config_.questions_enabled)
            throw Error(ErrorCode::QuestionsDisabled, "questions are disabled in this session");
        check_time();
        if (iterations_.empty())
            throw Error(ErrorCode::NoCurrentPlan, "no iteration has been submitted yet");
        Iteration& current = iterations_.back();
        if (config_.max_question_size && static_cast<int>(asked_ids.size()) > *config_.max_question_size)
            throw Error(ErrorCode::QuestionTooLarge,
                        "question has " + std::to_string(asked_ids.size()) + " properties, limit is " +
                            std::to_string(*config_.max_question_size),
                        {{"size", asked_ids.size()}, {"limit", *config_.max_question_size}});
        std::vector<std::string> satisfied;
        if (current.status == IterationStatus::Solved) {
            for (const std::string& id : asked_ids) {
                model_->compiled.goal(id);
                if (std::find(current.unsatisfied.begin(), current.unsatisfied.end(), id) ==
                    current.unsatisfied.end())
                    throw Error(ErrorCode::NotUnsatisfied, "property " + id + " is satisfied by the current plan",
                                {{"id", id}});
            }
            satisfied = current.satisfied;
        } else {
            // Unsolvable selection: the question is asked against the hard
            // goals the user wanted, minus the ones asked about.
            for (const std::string& id : asked_ids) {
                model_->compiled.goal(id);
                if (std::find(current.hard.begin(), current.hard.end(), id) != current.hard.end())
                    continue;
                throw Error(ErrorCode::NotUnsatisfied, "property " + id + " is not part of the selection",
                            {{"id", id}});
            }
            for (const std::string& id : current.hard)
                if (std::find(asked_ids.begin(), asked_ids.end(), id) == asked_ids.end())
                    satisfied.push_back(id);
        }
        Answer a = answer_question({asked_ids, satisfied}, catalog());
        QuestionRecord q;
        q.kind = "why-not";
        q.asked = asked_ids;
        q.answer = a;
        q.at = clock_();
        current.questions.push_back(q);
        return a;
    }

    UnsolvableExplanation ask_why_unsolvable()
    {
        std::lock_guard lock(mutex_);
        check_time();
        if (iterations_.empty() || iterations_.back().status != IterationStatus::Unsolvable)
            throw Error(ErrorCode::NotUnsolvable, "the current selection is solvable");
        Iteration& current = iterations_.back();
        QuestionRecord q;
        q.kind = "why-unsolvable";
        q.explanation = current.explanation;
        q.at = clock_();
        current.questions.push_back(q);
        return *current.explanation;
    }

    /// UI telemetry. Timestamps default to the session clock and must not
    /// go backwards.
    void record_event(Event e, bool use_clock = true)
    {
        std::lock_guard lock(mutex_);
        if (use_clock)
            e.at = clock_();
        if (e.type.empty())
            throw Error(ErrorCode::Validation, "event needs a type");
        const double last = events_.empty() ? started_at_ : events_.back().at;
        if (e.at < last)
            throw Error(ErrorCode::Validation, "event timestamps must be monotone",
                        {{"at", e.at}, {"last", last}});
        events_.push_back(std::move(e));
    }

    /// Seconds per interface part: each view-entered event opens a part
    /// that lasts until the next view-entered or session-ended event.
    std::map<std::string, double> dwell_times() const
    {
        std::map<std::string, double> out;
        std::optional<std::pair<std::string, double>> open;
        for (const Event& e : events_) {
            if (e.type != "view-entered" && e.type != "session-ended")
                continue;
            if (open)
                out[open->first] += e.at - open->second;
            open.reset();
            if (e.type == "view-entered")
                open = std::make_pair(e.part, e.at);
        }
        return out;
    }

    nlohmann::json export_log() const
    {
        std::lock_guard lock(mutex_);
        nlohmann::json iterations = nlohmann::json::array();
        nlohmann::json utility_series = nlohmann::json::array();
        nlohmann::json unsolvable_markers = nlohmann::json::array();
        nlohmann::json question_counts = nlohmann::json::array();
        for (const Iteration& it : iterations_) {
            iterations.push_back(to_json(it));
            utility_series.push_back(it.utility ? nlohmann::json(*it.utility) : nlohmann::json(nullptr));
            unsolvable_markers.push_back(it.status == IterationStatus::Unsolvable);
            question_counts.push_back(it.questions.size());
        }
        nlohmann::json events = nlohmann::json::array();
        for (const Event& e : events_)
            events.push_back(to_json(e));
        return {{"schema_version", STUDY_RECORD_SCHEMA_VERSION},
                {"session_id", id_},
                {"demo_id", demo_id_},
                {"project_id", model_->project.id},
                {"config", to_json(config_)},
                {"started_at", started_at_},
                {"iterations", iterations},
                {"events", events},
                {"dwell_seconds", dwell_times()},
                {"utility_series", utility_series},
                {"unsolvable_markers", unsolvable_markers},
                {"question_counts", question_counts}};
    }

    const MugsCatalog& catalog()
    {
        if (!catalog_)
            catalog_ = compute_mugs(model_->compiled, model_->selectable_ids(), search_);
        return *catalog_;
    }

private:
    void check_time() const
    {
        if (config_.time_limit_seconds && clock_() - started_at_ > *config_.time_limit_seconds)
            throw Error(ErrorCode::TimeLimit, "session time limit exceeded",
                        {{"limit", *config_.time_limit_seconds}});
    }

    std::optional<std::int64_t> utility_or_null(const std::vector<std::string>& satisfied) const
    {
        for (const PlanProperty& p : model_->project.properties)
            if (!p.utility)
                return std::nullopt;
        return compute_utility(satisfied, model_->project.properties);
    }

    std::string id_;
    std::string demo_id_;
    std::shared_ptr<const ProjectModel> model_;
    std::optional<MugsCatalog> catalog_;
    StudyConfig config_;
    Clock clock_;
    SearchConfig search_;
    double started_at_ = 0;
    std::vector<Iteration> iterations_;
    std::vector<Event> events_;
    mutable std::recursive_mutex mutex_;
};

/// Per-iteration utility and question counts as CSV.
inline std::string export_csv(const nlohmann::json& record)
{
    std::ostringstream out;
    out << "iteration,status,utility,questions\n";
    for (const auto& it : record.at("iterations")) {
        out << it.at("index").get<int>() << ',' << it.at("status").get<std::string>() << ',';
        if (!it.at("utility").is_null())
            out << it.at("utility").get<std::int64_t>();
        out << ',' << it.at("questions").size() << '\n';
    }
    return out.str();
}

/// Rebuilds a session from an exported record by re-running its selections
/// and questions in order, with the record's timestamps as the clock.
inline std::unique_ptr<Session> replay(const nlohmann::json& record, std::shared_ptr<const ProjectModel> model,
                                       std::optional<MugsCatalog> catalog, const SearchConfig& search = {})
{
    auto times = std::make_shared<std::vector<double>>();
    times->push_back(record.at("started_at").get<double>());
    for (const auto& it : record.at("iterations")) {
        times->push_back(it.at("submitted_at").get<double>());
        times->push_back(it.at("completed_at").get<double>());
        for (const auto& q : it.at("questions"))
            times->push_back(q.at("at").get<double>());
    }
    auto cursor = std::make_shared<std::size_t>(0);
    Clock clock = [times, cursor]() {
        const double t = (*times)[std::min(*cursor, times->size() - 1)];
        ++*cursor;
        return t;
    };
    StudyConfig config = study_config_from_json(record.at("config"));
    // limits were enforced when the record was made; the replay must not
    // trip the time limit through clock reads
    config.time_limit_seconds.reset();
    auto session = std::make_unique<Session>(record.at("session_id").get<std::string>(), std::move(model),
                                             std::move(catalog), config, clock, search,
                                             record.value("demo_id", std::string()));
    for (const auto& it : record.at("iterations")) {
        session->submit_iteration(it.at("selected").get<std::vector<std::string>>());
        for (const auto& q : it.at("questions")) {
            if (q.at("kind").get<std::string>() == "why-unsolvable")
                session->ask_why_unsolvable();
            else
                session->ask_question(q.at("asked").get<std::vector<std::string>>());
        }
    }
    for (const auto& e : record.at("events"))
        session->record_event({e.at("at").get<double>(), e.at("type").get<std::string>(),
                               e.at("part").get<std::string>(), e.at("data")},
                              false);
    return session;
}

} // namespace planspace
