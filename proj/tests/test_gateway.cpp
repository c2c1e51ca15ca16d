#include "oracles/oracles.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <future>
#include <sstream>
#include <sys/wait.h>
#include <thread>

using namespace planspace;
using Json = nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;

    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("planspace-test-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::Validation;
}

Project micro_project()
{
    Project p = cli_detail::load_project_file(oracle::data_path("nomystery/micro.json"));
    p.properties.push_back({"stay", "The truck never drives.", PropertyKind::ActionSet, "(not (used d))",
                            {{"d", {"(drive * * * * *)"}}}, 2, false});
    p.properties.push_back({"loaded", "The package is loaded.", PropertyKind::ActionSet, "(used l)",
                            {{"l", {"(load * * *)"}}}, 1, false});
    return p;
}

struct Api {
    std::unique_ptr<Service> service;
    std::unique_ptr<httplib::Client> client;

    explicit Api(const fs::path& root, std::size_t backlog = 16)
    {
        ServiceConfig cfg;
        cfg.store_root = root;
        cfg.port = 0;
        cfg.max_backlog = backlog;
        auto ticks = std::make_shared<double>(0);
        cfg.clock = [ticks] { return *ticks += 1; };
        service = std::make_unique<Service>(cfg);
        client = std::make_unique<httplib::Client>("127.0.0.1", service->start());
        client->set_read_timeout(120, 0);
    }
    ~Api() { service->stop(); }

    std::pair<int, Json> post(const std::string& path, const Json& body)
    {
        auto r = client->Post("/api/v1" + path, body.dump(), "application/json");
        if (!r)
            throw std::runtime_error("no response from " + path);
        return {r->status, Json::parse(r->body)};
    }

    std::pair<int, Json> get(const std::string& path)
    {
        auto r = client->Get("/api/v1" + path);
        if (!r)
            throw std::runtime_error("no response from " + path);
        return {r->status, r->get_header_value("Content-Type") == "application/json" ? Json::parse(r->body)
                                                                                     : Json(r->body)};
    }

    Json wait(const std::string& job)
    {
        for (int i = 0; i < 1200; ++i) {
            auto [status, j] = get("/jobs/" + job);
            if (j.at("status") == "DONE" || j.at("status") == "FAILED")
                return j;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        throw std::runtime_error("job " + job + " did not finish");
    }

    std::string demo(const Project& p)
    {
        post("/projects", to_json(p));
        auto [status, job] = post("/projects/" + p.id + "/demo", Json::object());
        return wait(job.at("id")).at("result").at("demo_id");
    }
};

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "planspace");
    std::vector<const char*> argv;
    for (const std::string& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string write_project(const fs::path& dir, const Project& p)
{
    const fs::path file = dir / (p.id + ".json");
    std::ofstream(file) << to_json(p).dump();
    return file.string();
}

// [[a, b]]; a braced initializer would read as an object
Json pair_list(const std::string& a, const std::string& b)
{
    return Json::array({Json::array({a, b})});
}

} // namespace

// ---------------------------------------------------------------------------
// file store

TEST(Store, PutGetList)
{
    TempDir dir;
    Store s(dir.path);
    s.put("projects", "a", {{"x", 1}});
    s.put("projects", "b", {{"x", 2}});
    EXPECT_EQ(s.get("projects", "a")->at("x"), 1);
    EXPECT_FALSE(s.get("projects", "c"));
    EXPECT_EQ(s.list("projects"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(code_of([&] { s.require("projects", "c"); }), ErrorCode::NotFound);
    EXPECT_EQ(code_of([&] { s.put("nope", "a", {}); }), ErrorCode::Validation);
    EXPECT_EQ(code_of([&] { s.put("projects", "../escape", {}); }), ErrorCode::Validation);
    EXPECT_NE(s.new_id("projects", "p"), s.new_id("projects", "p"));
}

TEST(Store, CrashBeforeRenameKeepsOldDocument)
{
    TempDir dir;
    {
        Store s(dir.path);
        s.put("sessions", "s", {{"v", 1}});
        s.before_rename = [](const fs::path&) { throw std::runtime_error("crash"); };
        EXPECT_THROW(s.put("sessions", "s", {{"v", 2}}), std::runtime_error);
        EXPECT_EQ(s.get("sessions", "s")->at("v"), 1);
    }
    Store reopened(dir.path);
    EXPECT_EQ(reopened.get("sessions", "s")->at("v"), 1);
    for (const auto& entry : fs::directory_iterator(dir.path / "sessions"))
        EXPECT_EQ(entry.path().filename().string().rfind(".tmp-", 0), std::string::npos);
}

TEST(Store, CorruptDocumentIsReported)
{
    TempDir dir;
    { Store s(dir.path); }
    std::ofstream(dir.path / "demos" / "bad.json") << "{ not json";
    EXPECT_EQ(code_of([&] { Store s(dir.path); }), ErrorCode::StoreCorrupt);
}

// ---------------------------------------------------------------------------
// job queue

TEST(Jobs, RunsAndPersists)
{
    TempDir dir;
    Store store(dir.path);
    {
        JobQueue q(store, 1, 4);
        const JobRecord ok = q.submit(JobKind::Mugs, {}, [](JobRecord&) { return Json{{"answer", 42}}; });
        const JobRecord bad =
            q.submit(JobKind::Plan, {}, [](JobRecord&) -> Json { throw Error(ErrorCode::Validation, "boom"); });
        q.drain();
        EXPECT_EQ(q.get(ok.id)->status, JobStatus::Done);
        EXPECT_EQ(q.get(ok.id)->result.at("answer"), 42);
        EXPECT_EQ(q.get(bad.id)->status, JobStatus::Failed);
        EXPECT_EQ(q.get(bad.id)->error.at("code"), "VALIDATION_ERROR");
        EXPECT_EQ(store.require("jobs", ok.id).at("status"), "DONE");
    }
    EXPECT_EQ(code_of([&] { JobQueue q(store, 0, 1); }), ErrorCode::ConfigError);
}

TEST(Jobs, BacklogLimit)
{
    TempDir dir;
    Store store(dir.path);
    JobQueue q(store, 1, 1);
    std::promise<void> release;
    auto gate = release.get_future().share();
    q.submit(JobKind::Plan, {}, [gate](JobRecord&) {
        gate.wait();
        return Json::object();
    });
    // the first job may still be queued; fill the backlog until it rejects
    bool rejected = false;
    for (int i = 0; i < 3 && !rejected; ++i) {
        try {
            q.submit(JobKind::Plan, {}, [gate](JobRecord&) {
                gate.wait();
                return Json::object();
            });
        } catch (const Error& e) {
            rejected = e.code() == ErrorCode::Backlog;
        }
    }
    EXPECT_TRUE(rejected);
    release.set_value();
    q.drain();
}

// ---------------------------------------------------------------------------
// HTTP API

TEST(Http, HealthAndErrors)
{
    TempDir dir;
    Api api(dir.path);
    auto [s, health] = api.get("/health");
    EXPECT_EQ(s, 200);
    EXPECT_EQ(health.at("status"), "ok");
    auto [s404, missing] = api.get("/projects/none");
    EXPECT_EQ(s404, 404);
    EXPECT_EQ(missing.at("code"), "NOT_FOUND");
    auto [sd, demo] = api.get("/demos/none");
    EXPECT_EQ(sd, 404);
    EXPECT_EQ(demo.at("code"), "DEMO_NOT_BUILT");
    Project broken = micro_project();
    broken.domain_pddl = "(define";
    auto [sbad, bad] = api.post("/projects", to_json(broken));
    EXPECT_EQ(sbad, 400);
    EXPECT_EQ(bad.at("code"), "SYNTAX_ERROR");
}

TEST(Http, PortInUse)
{
    TempDir dir;
    Api api(dir.path);
    ServiceConfig cfg;
    cfg.store_root = dir.path / "other";
    cfg.port = api.service->port();
    Service second(cfg);
    EXPECT_EQ(code_of([&] { second.start(); }), ErrorCode::PortInUse);
}

TEST(Http, ProjectsPropertiesAndTemplates)
{
    TempDir dir;
    Api api(dir.path);
    const Project town = cli_detail::load_project_file(oracle::data_path("nomystery/project.json"));
    auto [s, summary] = api.post("/projects", to_json(town));
    ASSERT_EQ(s, 201);
    EXPECT_EQ(summary.at("global_hard_ids"), Json{"1"});
    EXPECT_EQ(summary.at("properties").size(), 11U);

    auto [st, inst] = api.post("/projects/nomystery/templates/visits/instantiate",
                               {{"bindings", {{"T", "red"}, {"L", "cafe"}}}});
    ASSERT_EQ(st, 201);
    EXPECT_EQ(inst.at("property").at("nl_text"), "The red truck visits the cafe.");
    EXPECT_EQ(api.get("/projects/nomystery").second.at("properties").size(), 12U);

    auto [sc, bad] = api.post("/projects/nomystery/templates/avoid-road/instantiate",
                              {{"bindings", {{"L_i", "cafe"}, {"L_j", "green-house"}, {"T_i", "red"}}}});
    EXPECT_EQ(sc, 400);
    EXPECT_EQ(bad.at("code"), "CONSTRAINT_VIOLATED");

    auto [sp, added] = api.post("/projects/nomystery/properties",
                                {{"id", "12"}, {"nl_text", "Package 4 stays."}, {"kind", "GOAL_FACT"},
                                 {"formula", "(at p4 green-house)"}, {"utility", 1}});
    EXPECT_EQ(sp, 201);
    EXPECT_EQ(added.at("properties").size(), 13U);
    auto [sdup, dup] = api.post("/projects/nomystery/properties",
                                {{"id", "12"}, {"nl_text", "again"}, {"kind", "GOAL_FACT"},
                                 {"formula", "(at p4 green-house)"}});
    EXPECT_EQ(sdup, 400);
}

TEST(Http, PlanAndMugsJobs)
{
    TempDir dir;
    Api api(dir.path);
    const Project p = micro_project();
    api.post("/projects", to_json(p));
    auto [s, job] = api.post("/projects/nomystery-micro/jobs/plan", {{"hard_ids", {"delivered"}}});
    ASSERT_EQ(s, 202);
    const Json done = api.wait(job.at("id"));
    ASSERT_EQ(done.at("status"), "DONE");
    EXPECT_EQ(done.at("result").at("plan").at("cost"), 3);
    EXPECT_EQ(done.at("result").at("plan_text").size(), 3U);

    auto [s2, job2] = api.post("/projects/nomystery-micro/jobs/plan", {{"hard_ids", {"delivered", "stay"}}});
    const Json unsolvable = api.wait(job2.at("id"));
    EXPECT_EQ(unsolvable.at("result").at("status"), "UNSOLVABLE");
    EXPECT_EQ(unsolvable.at("result").at("explanation"), pair_list("delivered", "stay"));

    auto [s3, job3] = api.post("/projects/nomystery-micro/jobs/mugs", Json::object());
    const Json mugs = api.wait(job3.at("id"));
    EXPECT_EQ(mugs.at("result").at("mugs"), pair_list("delivered", "stay"));
    EXPECT_EQ(mugs.at("result_ref").get<std::string>().rfind("catalogs/", 0), 0U);

    auto [s4, unknown] = api.post("/projects/nomystery-micro/jobs/plan", {{"hard_ids", {"zzz"}}});
    EXPECT_EQ(s4, 400);
    EXPECT_EQ(unknown.at("code"), "UNKNOWN_PROPERTY");
}

TEST(Http, DemoCatalogIsReused)
{
    TempDir dir;
    Api api(dir.path);
    const Project p = micro_project();
    api.post("/projects", to_json(p));
    auto first = api.wait(api.post("/projects/nomystery-micro/demo", Json::object()).second.at("id"));
    auto second = api.wait(api.post("/projects/nomystery-micro/demo", Json::object()).second.at("id"));
    EXPECT_FALSE(first.at("result").at("cached").get<bool>());
    EXPECT_TRUE(second.at("result").at("cached").get<bool>());
    EXPECT_EQ(first.at("result").at("demo_id"), second.at("result").at("demo_id"));
    auto [s, demo] = api.get("/demos/" + first.at("result").at("demo_id").get<std::string>());
    EXPECT_EQ(s, 200);
    EXPECT_EQ(demo.at("selectable_ids"), (Json{"delivered", "stay", "loaded"}));
}

TEST(Http, GlobalHardUnsolvableDemoFails)
{
    TempDir dir;
    Api api(dir.path);
    Project p = micro_project();
    p.id = "doomed";
    p.properties[0].global_hard = true;
    p.properties[1].global_hard = true;
    api.post("/projects", to_json(p));
    const Json job = api.wait(api.post("/projects/doomed/demo", Json::object()).second.at("id"));
    EXPECT_EQ(job.at("status"), "FAILED");
    EXPECT_EQ(job.at("error").at("code"), "GLOBAL_HARD_UNSOLVABLE");
}

TEST(Http, SessionsRunIndependently)
{
    TempDir dir;
    Api api(dir.path);
    const std::string demo = api.demo(micro_project());
    auto [sa, a] = api.post("/demos/" + demo + "/sessions", {{"study_config", {{"max_iterations", 2}}}});
    auto [sb, b] = api.post("/demos/" + demo + "/sessions", Json::object());
    ASSERT_EQ(sa, 201);
    ASSERT_EQ(sb, 201);
    const std::string ida = a.at("session_id"), idb = b.at("session_id");
    EXPECT_NE(ida, idb);

    std::thread ta([&] {
        for (int i = 0; i < 2; ++i)
            api.post("/sessions/" + ida + "/iterations", {{"selected_ids", {"stay"}}});
    });
    std::thread tb([&] {
        for (int i = 0; i < 3; ++i)
            api.post("/sessions/" + idb + "/iterations", {{"selected_ids", {"delivered"}}});
    });
    ta.join();
    tb.join();
    EXPECT_EQ(api.get("/sessions/" + ida + "/log").second.at("iterations").size(), 2U);
    EXPECT_EQ(api.get("/sessions/" + idb + "/log").second.at("iterations").size(), 3U);
    auto [slim, lim] = api.post("/sessions/" + ida + "/iterations", {{"selected_ids", Json::array()}});
    EXPECT_EQ(slim, 409);
    EXPECT_EQ(lim.at("code"), "ITERATION_LIMIT");
}

TEST(Http, SessionFlowSurvivesRestart)
{
    TempDir dir;
    std::string sid;
    Json before;
    {
        Api api(dir.path);
        const std::string demo = api.demo(micro_project());
        sid = api.post("/demos/" + demo + "/sessions", Json::object()).second.at("session_id");
        api.post("/sessions/" + sid + "/events", {{"type", "view-entered"}, {"part", "selection"}});
        auto [s1, it] = api.post("/sessions/" + sid + "/iterations", {{"selected_ids", {"stay"}}});
        EXPECT_EQ(s1, 201);
        EXPECT_EQ(it.at("unsatisfied"), (Json::array({"delivered", "loaded"})));
        auto [sq, answer] = api.post("/sessions/" + sid + "/questions", {{"asked_ids", {"delivered"}}});
        EXPECT_EQ(sq, 200);
        EXPECT_EQ(answer.at("entries").at(0).at("tradeoff"), Json{"stay"});
        auto [sw, why] = api.post("/sessions/" + sid + "/why-unsolvable", Json::object());
        EXPECT_EQ(sw, 409);
        EXPECT_EQ(why.at("code"), "NOT_UNSOLVABLE");
        api.post("/sessions/" + sid + "/iterations", {{"selected_ids", {"stay", "delivered"}}});
        auto [sw2, why2] = api.post("/sessions/" + sid + "/why-unsolvable", Json::object());
        EXPECT_EQ(sw2, 200);
        EXPECT_EQ(why2.at("focused"), pair_list("delivered", "stay"));
        api.post("/sessions/" + sid + "/events", {{"events", {{{"type", "session-ended"}}}}});
        before = api.get("/sessions/" + sid + "/log").second;
    }
    Api again(dir.path);
    EXPECT_EQ(again.get("/sessions/" + sid + "/log").second, before);
    const Json csv = again.get("/sessions/" + sid + "/log?format=csv").second;
    EXPECT_EQ(csv.get<std::string>().rfind("iteration,status,utility,questions\n", 0), 0U);
}

TEST(Http, QuestionLimitsAreEnforced)
{
    TempDir dir;
    Api api(dir.path);
    const std::string demo = api.demo(micro_project());
    const std::string sid =
        api.post("/demos/" + demo + "/sessions", {{"study_config", {{"questions_enabled", false}}}})
            .second.at("session_id");
    api.post("/sessions/" + sid + "/iterations", {{"selected_ids", {"stay"}}});
    auto [s, body] = api.post("/sessions/" + sid + "/questions", {{"asked_ids", {"delivered"}}});
    EXPECT_EQ(s, 409);
    EXPECT_EQ(body.at("code"), "QUESTIONS_DISABLED");
    auto [sc, cfg] = api.post("/demos/" + demo + "/sessions", {{"study_config", {{"max_iterations", -1}}}});
    EXPECT_EQ(sc, 400);
    EXPECT_EQ(cfg.at("code"), "CONFIG_ERROR");
}

// ---------------------------------------------------------------------------
// command line

TEST(Cli, MugsPrintsCatalog)
{
    TempDir dir;
    const std::string project = write_project(dir.path, micro_project());
    const CliRun r = cli({"mugs", "--project", project, "--certify"});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j.at("mugs"), pair_list("delivered", "stay"));
    EXPECT_TRUE(j.at("certification").at("ok").get<bool>());
    const CliRun reach = cli({"mugs", "--project", project, "--oracle", "reachability"});
    EXPECT_EQ(Json::parse(reach.out).at("mugs"), j.at("mugs"));
}

TEST(Cli, PlanExitCodes)
{
    TempDir dir;
    const std::string project = write_project(dir.path, micro_project());
    const CliRun ok = cli({"plan", "--project", project, "--hard", "delivered"});
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(ok.out.rfind("(load p1 t1 l1)\n", 0), 0U);
    const CliRun no = cli({"plan", "--project", project, "--hard", "delivered,stay"});
    EXPECT_EQ(no.code, 1);
    EXPECT_NE(no.err.find("delivered stay"), std::string::npos) << no.err;
    EXPECT_EQ(cli({"plan", "--project", project, "--bogus"}).code, 2);
    EXPECT_EQ(cli({"plan", "--project", project, "--heuristic", "magic"}).code, 2);
    const CliRun missing = cli({"plan", "--project", (dir.path / "none.json").string()});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("\"code\""), std::string::npos);
}

TEST(Cli, GroundAndCheckProperty)
{
    TempDir dir;
    const std::string project = write_project(dir.path, micro_project());
    const CliRun g = cli({"ground", "--project", project, "--report"});
    ASSERT_EQ(g.code, 0) << g.err;
    EXPECT_EQ(Json::parse(g.out).at("actions_before_pruning"), 6);
    const fs::path plan = dir.path / "plan.txt";
    std::ofstream(plan) << "(load p1 t1 l1)\n(drive t1 l1 l2 f1 f0)\n(unload p1 t1 l2)\n";
    const CliRun c = cli({"check-property", "--project", project, "--plan", plan.string()});
    ASSERT_EQ(c.code, 0) << c.err;
    const Json j = Json::parse(c.out);
    EXPECT_EQ(j.at("cost"), 3);
    EXPECT_TRUE(j.at("satisfied").at("delivered").get<bool>());
    EXPECT_FALSE(j.at("satisfied").at("stay").get<bool>());
}

TEST(Cli, DemoBuildAndStudyExport)
{
    TempDir dir;
    const std::string project = write_project(dir.path, micro_project());
    const std::string store = (dir.path / "store").string();
    const CliRun first = cli({"demo", "build", "--project", project, "--store", store});
    ASSERT_EQ(first.code, 0) << first.err;
    const CliRun second = cli({"demo", "build", "--project", project, "--store", store});
    EXPECT_TRUE(Json::parse(second.out).at("cached").get<bool>());
    EXPECT_EQ(cli({"study", "export", "--store", store, "--session", "nope"}).code, 1);
}

TEST(Cli, BinaryExitCode)
{
    const int status = std::system((std::string(PLANSPACE_CLI_PATH) + " --no-such-flag > /dev/null 2>&1").c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 2);
}
