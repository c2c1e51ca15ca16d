#pragma once

// Asynchronous job queue for planning, MUGS and demo builds. Records are
// persisted in the store's "jobs" collection on every status change.

#include "planspace/error.hpp"
#include "planspace/session.hpp"
#include "planspace/store.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace planspace {

enum class JobKind { Plan, Mugs, DemoBuild };
enum class JobStatus { Queued, Running, Done, Failed };

inline std::string_view to_string(JobKind k)
{
    switch (k) {
    case JobKind::Plan: return "PLAN";
    case JobKind::Mugs: return "MUGS";
    case JobKind::DemoBuild: return "DEMO_BUILD";
    }
    return "";
}

inline std::string_view to_string(JobStatus s)
{
    switch (s) {
    case JobStatus::Queued: return "QUEUED";
    case JobStatus::Running: return "RUNNING";
    case JobStatus::Done: return "DONE";
    case JobStatus::Failed: return "FAILED";
    }
    return "";
}

struct JobRecord {
    std::string id;
    JobKind kind = JobKind::Plan;
    JobStatus status = JobStatus::Queued;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json result = nullptr;
    /// e.g. "demos/demo-1" when the result is a stored document
    std::string result_ref;
    nlohmann::json error = nullptr;
    double created_at = 0;
    std::optional<double> started_at;
    std::optional<double> finished_at;
};

inline nlohmann::json to_json(const JobRecord& j)
{
    auto opt = [](const std::optional<double>& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
    return {{"schema_version", 1},
            {"id", j.id},
            {"kind", std::string(to_string(j.kind))},
            {"status", std::string(to_string(j.status))},
            {"params", j.params},
            {"result", j.result},
            {"result_ref", j.result_ref},
            {"error", j.error},
            {"created_at", j.created_at},
            {"started_at", opt(j.started_at)},
            {"finished_at", opt(j.finished_at)}};
}

class JobQueue {
public:
    /// The work function returns the result document; it may set
    /// `result_ref` on the record it is given.
    using Work = std::function<nlohmann::json(JobRecord&)>;

    JobQueue(Store& store, std::size_t workers, std::size_t max_backlog, Clock clock = system_clock())
        : store_(store), max_backlog_(max_backlog), clock_(std::move(clock))
    {
        if (workers == 0)
            throw Error(ErrorCode::ConfigError, "job queue needs at least one worker");
        for (std::size_t i = 0; i < workers; ++i)
            threads_.emplace_back([this] { run(); });
    }

    ~JobQueue()
    {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        wake_.notify_all();
        for (std::thread& t : threads_)
            t.join();
    }

    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    JobRecord submit(JobKind kind, nlohmann::json params, Work work)
    {
        std::unique_lock lock(mutex_);
        if (pending_.size() >= max_backlog_)
            throw Error(ErrorCode::Backlog, "job backlog is full", {{"backlog", pending_.size()}});
        JobRecord rec;
        rec.id = store_.new_id("jobs", "job");
        rec.kind = kind;
        rec.params = std::move(params);
        rec.created_at = clock_();
        records_[rec.id] = rec;
        store_.put("jobs", rec.id, to_json(rec));
        pending_.push_back({rec.id, std::move(work)});
        lock.unlock();
        wake_.notify_one();
        return rec;
    }

    std::optional<JobRecord> get(const std::string& id) const
    {
        std::lock_guard lock(mutex_);
        auto it = records_.find(id);
        if (it == records_.end())
            return std::nullopt;
        return it->second;
    }

    /// Blocks until no job is queued or running.
    void drain()
    {
        std::unique_lock lock(mutex_);
        idle_.wait(lock, [&] { return pending_.empty() && running_ == 0; });
    }

    std::size_t backlog() const
    {
        std::lock_guard lock(mutex_);
        return pending_.size();
    }

private:
    struct Pending {
        std::string id;
        Work work;
    };

    void run()
    {
        while (true) {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
            if (stopping_ && pending_.empty())
                return;
            Pending job = std::move(pending_.front());
            pending_.pop_front();
            ++running_;
            JobRecord rec = records_.at(job.id);
            rec.status = JobStatus::Running;
            rec.started_at = clock_();
            records_[rec.id] = rec;
            store_.put("jobs", rec.id, to_json(rec));
            lock.unlock();

            try {
                rec.result = job.work(rec);
                rec.status = JobStatus::Done;
            } catch (const Error& e) {
                rec.status = JobStatus::Failed;
                rec.error = e.to_json();
            } catch (const std::exception& e) {
                rec.status = JobStatus::Failed;
                rec.error = {{"code", "INTERNAL"}, {"message", e.what()}, {"details", nlohmann::json::object()}};
            }

            lock.lock();
            rec.finished_at = clock_();
            records_[rec.id] = rec;
            try {
                store_.put("jobs", rec.id, to_json(rec));
            } catch (const std::exception&) {
                // the in-memory record stays authoritative for this process
            }
            --running_;
            if (pending_.empty() && running_ == 0)
                idle_.notify_all();
        }
    }

    Store& store_;
    std::size_t max_backlog_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable idle_;
    std::deque<Pending> pending_;
    std::map<std::string, JobRecord> records_;
    std::size_t running_ = 0;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

} // namespace planspace
