#pragma once

// HTTP+JSON service under /api/v1.

#include "planspace/jobs.hpp"
#include "planspace/mugs.hpp"
#include "planspace/project.hpp"
#include "planspace/session.hpp"
#include "planspace/store.hpp"
#include "planspace/task_json.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#ifndef PLANSPACE_VERSION
#define PLANSPACE_VERSION "0.1.0"
#endif

namespace planspace {

inline constexpr int API_SCHEMA_VERSION = 1;

struct ServiceConfig {
    std::filesystem::path store_root = "planspace-store";
    std::string host = "127.0.0.1";
    /// 0 picks a free port
    int port = 8080;
    std::size_t workers = 1;
    std::size_t max_backlog = 16;
    std::optional<std::filesystem::path> static_dir;
    SearchConfig search;
    OracleKind demo_oracle = OracleKind::Reachability;
    Clock clock = system_clock();
};

inline int http_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::DemoNotBuilt: return 404;
    case ErrorCode::IterationLimit:
    case ErrorCode::QuestionTooLarge:
    case ErrorCode::QuestionsDisabled:
    case ErrorCode::TimeLimit:
    case ErrorCode::NoCurrentPlan:
    case ErrorCode::NotUnsolvable: return 409;
    case ErrorCode::Backlog:
    case ErrorCode::PlannerResourceLimit: return 503;
    case ErrorCode::StoreCorrupt:
    case ErrorCode::PortInUse: return 500;
    default: return 400;
    }
}

class Service {
public:
    explicit Service(ServiceConfig config)
        : config_(std::move(config))
        , store_(config_.store_root)
        , jobs_(store_, config_.workers, config_.max_backlog, config_.clock)
    {
        // httplib also sets SO_REUSEPORT by default, which would let a second
        // server share the port silently
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        routes();
    }

    ~Service() { stop(); }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and starts serving on a background thread; returns the port.
    int start()
    {
        int port = config_.port;
        if (port == 0) {
            port = server_.bind_to_any_port(config_.host);
            if (port < 0)
                throw Error(ErrorCode::PortInUse, "no free port", {{"host", config_.host}});
        } else if (!server_.bind_to_port(config_.host, port)) {
            throw Error(ErrorCode::PortInUse, "port " + std::to_string(port) + " is in use", {{"port", port}});
        }
        port_ = port;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void stop()
    {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    /// Asks the listener to shut down without joining; safe to call from a
    /// signal handler.
    void stop_async() { server_.stop(); }

    /// Blocks until the listener exits.
    void wait()
    {
        if (thread_.joinable())
            thread_.join();
    }

    int port() const { return port_; }
    Store& store() { return store_; }
    JobQueue& jobs() { return jobs_; }

private:
    using Json = nlohmann::json;

    struct SessionEntry {
        std::unique_ptr<Session> session;
        std::mutex mutex;
    };

    struct DemoEntry {
        Demo demo;
        std::shared_ptr<const ProjectModel> model;
    };

    static Json body_of(const httplib::Request& req)
    {
        if (req.body.empty())
            return Json::object();
        try {
            return Json::parse(req.body);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::Validation, std::string("request body is not valid JSON: ") + e.what());
        }
    }

    static void reply(httplib::Response& res, int status, Json body)
    {
        if (body.is_object() && !body.contains("schema_version"))
            body["schema_version"] = API_SCHEMA_VERSION;
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void fail(httplib::Response& res, const Error& e) { reply(res, http_status(e.code()), e.to_json()); }

    template <class F>
    auto wrap(F f)
    {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                fail(res, e);
            } catch (const Json::exception& e) {
                fail(res, Error(ErrorCode::Validation, e.what()));
            } catch (const std::exception& e) {
                reply(res, 500, {{"code", "INTERNAL"}, {"message", e.what()}, {"details", Json::object()}});
            }
        };
    }

    static std::vector<std::string> string_list(const Json& j, const char* key)
    {
        if (!j.contains(key))
            return {};
        if (!j.at(key).is_array())
            throw Error(ErrorCode::Validation, std::string(key) + " must be an array of ids");
        return j.at(key).get<std::vector<std::string>>();
    }

    // -- projects ----------------------------------------------------------

    std::shared_ptr<const ProjectModel> project_model(const std::string& id)
    {
        std::lock_guard lock(mutex_);
        if (auto it = models_.find(id); it != models_.end())
            return it->second;
        Project p = project_from_json(store_.require("projects", id));
        auto model = load_project(p);
        models_[id] = model;
        return model;
    }

    void save_project(const Project& p, std::shared_ptr<const ProjectModel> model)
    {
        std::lock_guard lock(mutex_);
        store_.put("projects", p.id, to_json(p));
        models_[p.id] = std::move(model);
    }

    static Json project_summary(const ProjectModel& m)
    {
        Json props = Json::array();
        for (const PlanProperty& p : m.project.properties)
            props.push_back(to_json(p));
        Json templates = Json::array();
        for (const PropertyTemplate& t : m.project.templates)
            templates.push_back(to_json(t));
        return {{"id", m.project.id},
                {"name", m.project.name},
                {"properties", props},
                {"templates", templates},
                {"global_hard_ids", m.compiled.global_hard_ids},
                {"grounding", m.grounded.report.to_json()},
                {"task_image", m.project.task_image ? Json(*m.project.task_image) : Json(nullptr)},
                {"bound", m.grounded.task.bound == INFINITE_COST ? Json(nullptr) : Json(m.grounded.task.bound)}};
    }

    // -- demos and sessions -----------------------------------------------

    std::shared_ptr<DemoEntry> demo_entry(const std::string& id)
    {
        std::lock_guard lock(mutex_);
        if (auto it = demos_.find(id); it != demos_.end())
            return it->second;
        auto doc = store_.get("demos", id);
        if (!doc)
            throw Error(ErrorCode::DemoNotBuilt, "demo " + id + " has not been built", {{"id", id}});
        auto entry = std::make_shared<DemoEntry>();
        entry->demo = demo_from_json(*doc);
        entry->model = load_project(entry->demo.project);
        demos_[id] = entry;
        return entry;
    }

    std::shared_ptr<SessionEntry> session_entry(const std::string& id)
    {
        {
            std::lock_guard lock(mutex_);
            if (auto it = sessions_.find(id); it != sessions_.end())
                return it->second;
        }
        // restored from the store; demo_entry takes the lock itself
        const Json doc = store_.require("sessions", id);
        auto demo = demo_entry(doc.at("demo_id").get<std::string>());
        auto entry = std::make_shared<SessionEntry>();
        entry->session = replay(doc, demo->model, demo->demo.catalog, config_.search);
        std::lock_guard lock(mutex_);
        return sessions_.emplace(id, entry).first->second;
    }

    void persist(const Session& s) { store_.put("sessions", s.id(), s.export_log()); }

    // -- jobs ----------------------------------------------------------------

    Json run_plan(const std::shared_ptr<const ProjectModel>& model, const std::vector<std::string>& selected)
    {
        std::vector<std::string> hard = model->compiled.global_hard_ids;
        for (const std::string& id : selected) {
            model->compiled.goal(id);
            if (std::find(hard.begin(), hard.end(), id) == hard.end())
                hard.push_back(id);
        }
        const SearchResult r = solve_selection(model->compiled, hard, config_.search);
        Json out = to_json(r, &model->compiled.task);
        out["hard_ids"] = hard;
        if (r.status == SearchStatus::ResourceLimit)
            throw Error(ErrorCode::PlannerResourceLimit, "planner hit its resource limit", {{"expanded", r.expanded}});
        if (r.plan) {
            const auto sat = satisfied_properties(model->compiled, *r.plan);
            Json text = Json::array();
            for (ActionId a : r.plan->steps)
                text.push_back(model->action_text(a));
            out["plan_text"] = text;
            out["satisfied"] = sat;
        } else {
            std::vector<std::string> universe;
            for (const std::string& id : hard)
                if (std::find(model->compiled.global_hard_ids.begin(), model->compiled.global_hard_ids.end(), id) ==
                    model->compiled.global_hard_ids.end())
                    universe.push_back(id);
            out["explanation"] = to_json(compute_mugs(model->compiled, universe, config_.search))["mugs"];
        }
        return out;
    }

    Json build_demo_job(const Project& project, const StudyConfig& defaults, OracleKind oracle, JobRecord& rec)
    {
        const std::string key = project_catalog_key(project, oracle);
        const std::string demo_id = project.id + "-" + key.substr(0, 8);
        MugsCatalog catalog;
        bool cached = false;
        if (auto doc = store_.get("catalogs", key)) {
            catalog = catalog_from_json(*doc);
            cached = true;
        } else {
            auto model = load_project(project);
            catalog = compute_mugs(model->compiled, model->selectable_ids(), config_.search, oracle);
            store_.put("catalogs", key, to_json(catalog));
        }
        Demo d;
        d.id = demo_id;
        d.project_id = project.id;
        d.project = project;
        d.catalog = catalog;
        d.defaults = defaults;
        d.catalog_key = key;
        store_.put("demos", demo_id, to_json(d));
        {
            std::lock_guard lock(mutex_);
            demos_.erase(demo_id);
        }
        rec.result_ref = "demos/" + demo_id;
        return {{"demo_id", demo_id}, {"catalog_key", key}, {"cached", cached}, {"mugs", to_json(catalog)["mugs"]}};
    }

    void routes()
    {
        const std::string api = "/api/v1";

        server_.Get(api + "/health", wrap([](const httplib::Request&, httplib::Response& res) {
                        reply(res, 200, {{"status", "ok"}, {"version", PLANSPACE_VERSION}});
                    }));

        server_.Post(api + "/projects", wrap([this](const httplib::Request& req, httplib::Response& res) {
                         Project p = project_from_json(body_of(req));
                         if (p.id.empty())
                             p.id = store_.new_id("projects", "project");
                         Store::check_id(p.id);
                         auto model = load_project(p);
                         save_project(p, model);
                         reply(res, 201, project_summary(*model));
                     }));

        server_.Get(api + R"(/projects/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
                        reply(res, 200, project_summary(*project_model(req.matches[1])));
                    }));

        server_.Post(api + R"(/projects/([^/]+)/properties)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         const std::string id = req.matches[1];
                         const Json body = body_of(req);
                         Project p = project_model(id)->project;
                         std::vector<PlanProperty> added;
                         if (body.contains("properties"))
                             added = properties_from_json(body.at("properties"));
                         else
                             added.push_back(property_from_json(body));
                         for (const PlanProperty& prop : added) {
                             if (p.find_property(prop.id))
                                 throw Error(ErrorCode::Validation, "duplicate property id '" + prop.id + "'",
                                             {{"id", prop.id}});
                             p.properties.push_back(prop);
                         }
                         auto model = load_project(p);
                         save_project(p, model);
                         reply(res, 201, project_summary(*model));
                     }));

        server_.Post(api + R"(/projects/([^/]+)/templates/([^/]+)/instantiate)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         const std::string id = req.matches[1];
                         const std::string tid = req.matches[2];
                         const Json body = body_of(req);
                         auto model = project_model(id);
                         auto t = std::find_if(model->project.templates.begin(), model->project.templates.end(),
                                               [&](const PropertyTemplate& x) { return x.id == tid; });
                         if (t == model->project.templates.end())
                             throw Error(ErrorCode::NotFound, "template " + tid + " not found", {{"id", tid}});
                         const auto bindings = body.value("bindings", Json::object())
                                                   .get<std::map<std::string, std::string>>();
                         PlanProperty prop = instantiate_template(*t, bindings, model->template_context());
                         if (body.value("add", true)) {
                             Project p = model->project;
                             if (p.find_property(prop.id))
                                 throw Error(ErrorCode::Validation, "property " + prop.id + " already exists",
                                             {{"id", prop.id}});
                             p.properties.push_back(prop);
                             save_project(p, load_project(p));
                         }
                         reply(res, 201, {{"property", to_json(prop)}});
                     }));

        server_.Post(api + R"(/projects/([^/]+)/jobs/plan)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto model = project_model(req.matches[1]);
                         const Json body = body_of(req);
                         const auto hard = string_list(body, "hard_ids");
                         for (const std::string& h : hard)
                             model->compiled.goal(h);
                         JobRecord rec = jobs_.submit(JobKind::Plan, {{"project_id", model->project.id}, {"hard_ids", hard}},
                                                      [this, model, hard](JobRecord&) { return run_plan(model, hard); });
                         reply(res, 202, to_json(rec));
                     }));

        server_.Post(api + R"(/projects/([^/]+)/jobs/mugs)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto model = project_model(req.matches[1]);
                         const Json body = body_of(req);
                         auto universe = body.contains("universe") ? string_list(body, "universe")
                                                                   : model->selectable_ids();
                         const OracleKind oracle = oracle_kind_from_string(body.value("oracle", std::string("search")));
                         for (const std::string& u : universe)
                             model->compiled.goal(u);
                         JobRecord rec = jobs_.submit(
                             JobKind::Mugs, {{"project_id", model->project.id}, {"universe", universe}},
                             [this, model, universe, oracle](JobRecord& r) {
                                 const MugsCatalog c = compute_mugs(model->compiled, universe, config_.search, oracle);
                                 const Json doc = to_json(c);
                                 const std::string key = content_hash(to_json(model->project).dump() + Json(universe).dump() +
                                                                      std::string(to_string(oracle)));
                                 store_.put("catalogs", key, doc);
                                 r.result_ref = "catalogs/" + key;
                                 return doc;
                             });
                         reply(res, 202, to_json(rec));
                     }));

        server_.Get(api + R"(/jobs/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
                        const std::string id = req.matches[1];
                        if (auto rec = jobs_.get(id))
                            reply(res, 200, to_json(*rec));
                        else
                            reply(res, 200, store_.require("jobs", id));
                    }));

        server_.Post(api + R"(/projects/([^/]+)/demo)", wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto model = project_model(req.matches[1]);
                         const Json body = body_of(req);
                         StudyConfig defaults;
                         if (body.contains("study_defaults"))
                             defaults = study_config_from_json(body.at("study_defaults"));
                         const OracleKind oracle = body.contains("oracle")
                                                       ? oracle_kind_from_string(body.at("oracle").get<std::string>())
                                                       : config_.demo_oracle;
                         Project frozen = model->project;
                         JobRecord rec = jobs_.submit(JobKind::DemoBuild, {{"project_id", frozen.id}},
                                                      [this, frozen, defaults, oracle](JobRecord& r) {
                                                          return build_demo_job(frozen, defaults, oracle, r);
                                                      });
                         reply(res, 202, to_json(rec));
                     }));

        server_.Get(api + R"(/demos/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
                        auto entry = demo_entry(req.matches[1]);
                        Json j = to_json(entry->demo);
                        j["selectable_ids"] = entry->model->selectable_ids();
                        j["global_hard_ids"] = entry->model->compiled.global_hard_ids;
                        reply(res, 200, j);
                    }));

        server_.Post(api + R"(/demos/([^/]+)/sessions)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto demo = demo_entry(req.matches[1]);
                         const Json body = body_of(req);
                         const StudyConfig config = body.contains("study_config")
                                                        ? study_config_from_json(body.at("study_config"))
                                                        : demo->demo.defaults;
                         auto entry = std::make_shared<SessionEntry>();
                         const std::string sid = store_.new_id("sessions", "session");
                         entry->session = std::make_unique<Session>(sid, demo->model, demo->demo.catalog, config,
                                                                    config_.clock, config_.search, demo->demo.id);
                         persist(*entry->session);
                         {
                             std::lock_guard lock(mutex_);
                             sessions_[sid] = entry;
                         }
                         reply(res, 201, {{"session_id", sid}, {"demo_id", demo->demo.id}, {"config", to_json(config)}});
                     }));

        server_.Post(api + R"(/sessions/([^/]+)/iterations)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto entry = session_entry(req.matches[1]);
                         const Json body = body_of(req);
                         std::lock_guard lock(entry->mutex);
                         const Iteration it = entry->session->submit_iteration(string_list(body, "selected_ids"));
                         persist(*entry->session);
                         reply(res, 201, to_json(it));
                     }));

        server_.Post(api + R"(/sessions/([^/]+)/questions)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto entry = session_entry(req.matches[1]);
                         const Json body = body_of(req);
                         std::lock_guard lock(entry->mutex);
                         const Answer a = entry->session->ask_question(string_list(body, "asked_ids"));
                         persist(*entry->session);
                         reply(res, 200, to_json(a));
                     }));

        server_.Post(api + R"(/sessions/([^/]+)/why-unsolvable)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto entry = session_entry(req.matches[1]);
                         std::lock_guard lock(entry->mutex);
                         const UnsolvableExplanation e = entry->session->ask_why_unsolvable();
                         persist(*entry->session);
                         reply(res, 200, to_json(e));
                     }));

        server_.Post(api + R"(/sessions/([^/]+)/events)",
                     wrap([this](const httplib::Request& req, httplib::Response& res) {
                         auto entry = session_entry(req.matches[1]);
                         const Json body = body_of(req);
                         const Json list = body.contains("events") ? body.at("events") : Json::array({body});
                         std::lock_guard lock(entry->mutex);
                         for (const Json& e : list)
                             entry->session->record_event({0, e.at("type").get<std::string>(),
                                                           e.value("part", std::string()),
                                                           e.value("data", Json::object())});
                         persist(*entry->session);
                         reply(res, 200, {{"recorded", list.size()}});
                     }));

        server_.Get(api + R"(/sessions/([^/]+)/log)", wrap([this](const httplib::Request& req, httplib::Response& res) {
                        auto entry = session_entry(req.matches[1]);
                        std::lock_guard lock(entry->mutex);
                        const Json record = entry->session->export_log();
                        if (req.has_param("format") && req.get_param_value("format") == "csv") {
                            res.status = 200;
                            res.set_content(export_csv(record), "text/csv");
                            return;
                        }
                        reply(res, 200, record);
                    }));

        if (config_.static_dir)
            server_.set_mount_point("/", config_.static_dir->string());
    }

    ServiceConfig config_;
    Store store_;
    JobQueue jobs_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const ProjectModel>> models_;
    std::map<std::string, std::shared_ptr<DemoEntry>> demos_;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
};

} // namespace planspace
