#pragma once

// Command line front end. Exit codes: 0 success, 1 domain error (bad
// input, unsolvable task, failed certification), 2 usage error.

#include "planspace/http_api.hpp"
#include "planspace/mugs.hpp"
#include "planspace/project.hpp"
#include "planspace/session.hpp"
#include "planspace/store.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace planspace {

namespace cli_detail {

inline std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::NotFound, "cannot read " + p.string(), {{"path", p.string()}});
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const std::filesystem::path& p)
{
    try {
        return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Validation, p.string() + ": " + e.what(), {{"path", p.string()}});
    }
}

/// Project files may inline the PDDL or point at files next to them via
/// domain_file, problem_file, properties_file and templates_file.
inline Project load_project_file(const std::filesystem::path& path)
{
    nlohmann::json j = read_json(path);
    const auto dir = path.parent_path();
    auto resolve = [&](const char* key) { return dir / j.at(key).get<std::string>(); };
    if (j.contains("domain_file"))
        j["domain"] = read_text(resolve("domain_file"));
    if (j.contains("problem_file"))
        j["problem"] = read_text(resolve("problem_file"));
    if (j.contains("properties_file")) {
        const nlohmann::json props = read_json(resolve("properties_file"));
        j["properties"] = props.is_object() && props.contains("properties") ? props.at("properties") : props;
    }
    if (j.contains("templates_file")) {
        const nlohmann::json t = read_json(resolve("templates_file"));
        j["templates"] = t.is_object() && t.contains("templates") ? t.at("templates") : t;
    }
    for (const char* key : {"domain_file", "problem_file", "properties_file", "templates_file"})
        j.erase(key);
    if (!j.contains("id"))
        j["id"] = path.stem().string();
    return project_from_json(j);
}

struct TaskSource {
    std::string project;
    std::string domain;
    std::string problem;
    std::string properties;

    Project load() const
    {
        if (!project.empty())
            return load_project_file(project);
        if (domain.empty() || problem.empty())
            throw CLI::ValidationError("either --project or both --domain and --problem are required");
        Project p;
        p.id = std::filesystem::path(problem).stem().string();
        p.domain_pddl = read_text(domain);
        p.problem_pddl = read_text(problem);
        if (!properties.empty())
            p.properties = properties_from_json(read_json(properties));
        return p;
    }

    void add_options(CLI::App* app)
    {
        app->add_option("--project", project, "project JSON file");
        app->add_option("--domain", domain, "PDDL domain file");
        app->add_option("--problem", problem, "PDDL problem file");
        app->add_option("--properties", properties, "properties JSON file");
    }
};

struct SearchOptions {
    std::string heuristic = "hmax";
    std::size_t max_expansions = SearchConfig{}.max_expansions;
    double max_seconds = SearchConfig{}.max_seconds;

    void add_options(CLI::App* app)
    {
        app->add_option("--heuristic", heuristic, "hmax or blind")->check(CLI::IsMember({"hmax", "blind"}));
        app->add_option("--max-expansions", max_expansions, "expansion cap per search");
        app->add_option("--max-seconds", max_seconds, "time cap per search");
    }

    SearchConfig config() const
    {
        SearchConfig c;
        c.heuristic = heuristic == "blind" ? HeuristicKind::Blind : HeuristicKind::Hmax;
        c.max_expansions = max_expansions;
        c.max_seconds = max_seconds;
        validate_config(c);
        return c;
    }
};

inline std::vector<std::string> split_ids(const std::vector<std::string>& raw)
{
    std::vector<std::string> out;
    for (const std::string& r : raw) {
        std::stringstream ss(r);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty())
                out.push_back(item);
    }
    return out;
}

/// Reads a plan either as JSON ({"actions": [...]} or {"steps": [...]}) or
/// as one action name per line.
inline Plan read_plan(const std::filesystem::path& p, const OspTask& task)
{
    const std::string text = read_text(p);
    std::vector<std::string> names;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
        const nlohmann::json j = nlohmann::json::parse(text);
        if (j.is_object() && j.contains("steps"))
            return plan_from_json(j);
        names = (j.is_object() ? j.at("actions") : j).get<std::vector<std::string>>();
    } else {
        std::stringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) {
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == ';')
                continue;
            const auto e = line.find_last_not_of(" \t\r");
            names.push_back(line.substr(b, e - b + 1));
        }
    }
    std::map<std::string, ActionId> by_name;
    for (std::size_t i = 0; i < task.actions.size(); ++i)
        by_name[task.actions[i].name] = static_cast<ActionId>(i);
    Plan plan;
    for (const std::string& n : names) {
        auto it = by_name.find(n);
        if (it == by_name.end())
            throw Error(ErrorCode::Validation, "unknown action " + n, {{"action", n}});
        plan.steps.push_back(it->second);
    }
    plan.cost = plan_cost(task, plan.steps);
    return plan;
}

inline std::string env_or(const char* name, const std::string& fallback)
{
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

inline Service* running_service = nullptr;

} // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    using cli_detail::split_ids;
    CLI::App app{"planspace: iterative planning with plan-space explanations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(PLANSPACE_VERSION));

    int code = 0;

    // ground
    cli_detail::TaskSource ground_src;
    bool ground_report = false;
    auto* ground_cmd = app.add_subcommand("ground", "ground a PDDL task and print it as JSON");
    ground_src.add_options(ground_cmd);
    ground_cmd->add_flag("--report", ground_report, "print only the grounding report");
    ground_cmd->callback([&] {
        const auto model = load_project(ground_src.load());
        if (ground_report)
            out << model->grounded.report.to_json().dump(2) << "\n";
        else
            out << to_json(model->compiled.task).dump(2) << "\n";
    });

    // plan
    cli_detail::TaskSource plan_src;
    cli_detail::SearchOptions plan_search;
    std::vector<std::string> plan_hard;
    auto* plan_cmd = app.add_subcommand("plan", "find a cheapest plan satisfying the hard properties");
    plan_src.add_options(plan_cmd);
    plan_search.add_options(plan_cmd);
    plan_cmd->add_option("--hard", plan_hard, "hard property ids (comma separated)");
    plan_cmd->callback([&] {
        const auto model = load_project(plan_src.load());
        const SearchConfig config = plan_search.config();
        std::vector<std::string> hard = model->compiled.global_hard_ids;
        std::vector<std::string> chosen = split_ids(plan_hard);
        for (const std::string& h : chosen)
            if (std::find(hard.begin(), hard.end(), h) == hard.end())
                hard.push_back(h);
        const SearchResult r = solve_selection(model->compiled, hard, config);
        nlohmann::json result = to_json(r, &model->compiled.task);
        if (r.status == SearchStatus::ResourceLimit)
            throw Error(ErrorCode::PlannerResourceLimit, "planner hit its resource limit",
                        {{"expanded", r.expanded}});
        if (r.plan) {
            for (ActionId a : r.plan->steps)
                out << model->compiled.task.action(a).name << "\n";
            result["satisfied"] = satisfied_properties(model->compiled, *r.plan);
            out << result.dump(2) << "\n";
            return;
        }
        out << result.dump(2) << "\n";
        std::vector<std::string> universe;
        for (const std::string& h : chosen)
            if (!model->project.find_property(h)->global_hard)
                universe.push_back(h);
        try {
            const MugsCatalog c = compute_mugs(model->compiled, universe, config);
            err << "unsolvable; minimal conflicting subsets of the hard properties:\n";
            for (const auto& m : c.mugs) {
                err << " ";
                for (const std::string& id : m)
                    err << " " << id;
                err << "\n";
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::GlobalHardUnsolvable)
                throw;
            err << "unsolvable: the global hard properties alone cannot be achieved\n";
        }
        code = 1;
    });

    // mugs
    cli_detail::TaskSource mugs_src;
    cli_detail::SearchOptions mugs_search;
    std::vector<std::string> mugs_universe;
    std::string mugs_oracle = "search";
    bool mugs_certify = false;
    auto* mugs_cmd = app.add_subcommand("mugs", "enumerate minimal unsolvable goal subsets");
    mugs_src.add_options(mugs_cmd);
    mugs_search.add_options(mugs_cmd);
    mugs_cmd->add_option("--universe", mugs_universe, "property ids (default: all non-global)");
    mugs_cmd->add_option("--oracle", mugs_oracle, "search or reachability")
        ->check(CLI::IsMember({"search", "reachability"}));
    mugs_cmd->add_flag("--certify", mugs_certify, "re-check the catalog with fresh planner calls");
    mugs_cmd->callback([&] {
        const auto model = load_project(mugs_src.load());
        const SearchConfig config = mugs_search.config();
        auto universe = split_ids(mugs_universe);
        if (universe.empty())
            universe = model->selectable_ids();
        const MugsCatalog c = compute_mugs(model->compiled, universe, config, oracle_kind_from_string(mugs_oracle));
        nlohmann::json j = to_json(c);
        if (mugs_certify) {
            const CertificationReport rep = certify(c, model->compiled, config);
            j["certification"] = {{"ok", rep.ok}, {"failures", rep.failures}, {"oracle_calls", rep.oracle_calls}};
            if (!rep.ok)
                code = 1;
        }
        out << j.dump(2) << "\n";
    });

    // check-property
    cli_detail::TaskSource check_src;
    std::string check_plan;
    std::vector<std::string> check_ids;
    auto* check_cmd = app.add_subcommand("check-property", "evaluate properties on a given plan");
    check_src.add_options(check_cmd);
    check_cmd->add_option("--plan", check_plan, "plan file (JSON or one action per line)")->required();
    check_cmd->add_option("--property", check_ids, "property ids (default: all)");
    check_cmd->callback([&] {
        const auto model = load_project(check_src.load());
        const Plan plan = cli_detail::read_plan(check_plan, model->grounded.task);
        const ValidationReport v = validate_plan(model->grounded.task, plan);
        if (!v.valid)
            throw Error(ErrorCode::Validation, "plan is not executable", to_json(v));
        auto ids = split_ids(check_ids);
        if (ids.empty())
            ids = model->compiled.property_ids;
        nlohmann::json result = nlohmann::json::object();
        for (const std::string& id : ids)
            result[id] = evaluate_on_trace(model->property(id), *model->context, plan);
        out << nlohmann::json{{"cost", plan.cost}, {"satisfied", result}}.dump(2) << "\n";
    });

    // demo build
    auto* demo_cmd = app.add_subcommand("demo", "demo management");
    demo_cmd->require_subcommand(1);
    std::string demo_project;
    std::string demo_store = cli_detail::env_or("PLANSPACE_STORE", "planspace-store");
    std::string demo_id;
    std::string demo_oracle = "reachability";
    cli_detail::SearchOptions demo_search;
    auto* build_cmd = demo_cmd->add_subcommand("build", "freeze a project and precompute its MUGS");
    build_cmd->add_option("--project", demo_project, "project JSON file")->required();
    build_cmd->add_option("--store", demo_store, "store directory");
    build_cmd->add_option("--id", demo_id, "demo id (default: derived from content)");
    build_cmd->add_option("--oracle", demo_oracle, "search or reachability")
        ->check(CLI::IsMember({"search", "reachability"}));
    demo_search.add_options(build_cmd);
    build_cmd->callback([&] {
        Project p = cli_detail::load_project_file(demo_project);
        Store store(demo_store);
        DemoBuildOptions opts;
        opts.search = demo_search.config();
        opts.oracle = oracle_kind_from_string(demo_oracle);
        const std::string key = project_catalog_key(p, opts.oracle);
        const std::string id = demo_id.empty() ? p.id + "-" + key.substr(0, 8) : demo_id;
        Demo d;
        const bool cached = store.exists("catalogs", key);
        if (cached) {
            d.id = id;
            d.project_id = p.id;
            d.project = p;
            d.catalog = catalog_from_json(store.require("catalogs", key));
            d.catalog_key = key;
        } else {
            d = build_demo(p, id, opts);
            store.put("catalogs", key, to_json(d.catalog));
        }
        if (!store.exists("projects", p.id))
            store.put("projects", p.id, to_json(p));
        store.put("demos", id, to_json(d));
        out << nlohmann::json{{"demo_id", id},
                              {"catalog_key", key},
                              {"cached", cached},
                              {"mugs", to_json(d.catalog)["mugs"]}}
                   .dump(2)
            << "\n";
    });

    // serve
    ServiceConfig serve_config;
    serve_config.store_root = cli_detail::env_or("PLANSPACE_STORE", "planspace-store");
    serve_config.port = std::stoi(cli_detail::env_or("PLANSPACE_PORT", "8080"));
    std::string serve_store = serve_config.store_root.string();
    std::string serve_static;
    cli_detail::SearchOptions serve_search;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
    serve_cmd->add_option("--store", serve_store, "store directory");
    serve_cmd->add_option("--host", serve_config.host, "bind address");
    serve_cmd->add_option("--port", serve_config.port, "port (0 picks a free one)");
    serve_cmd->add_option("--workers", serve_config.workers, "job worker threads");
    serve_cmd->add_option("--backlog", serve_config.max_backlog, "maximum queued jobs");
    serve_cmd->add_option("--static", serve_static, "directory served at /");
    serve_search.add_options(serve_cmd);
    serve_cmd->callback([&] {
        serve_config.store_root = serve_store;
        serve_config.search = serve_search.config();
        if (!serve_static.empty())
            serve_config.static_dir = serve_static;
        Service service(serve_config);
        const int port = service.start();
        out << "listening on " << serve_config.host << ":" << port << std::endl;
        cli_detail::running_service = &service;
        std::signal(SIGINT, [](int) {
            if (cli_detail::running_service)
                cli_detail::running_service->stop_async();
        });
        std::signal(SIGTERM, [](int) {
            if (cli_detail::running_service)
                cli_detail::running_service->stop_async();
        });
        service.wait();
        cli_detail::running_service = nullptr;
    });

    // study export
    auto* study_cmd = app.add_subcommand("study", "study records");
    study_cmd->require_subcommand(1);
    std::string export_store = cli_detail::env_or("PLANSPACE_STORE", "planspace-store");
    std::string export_session;
    std::string export_format = "json";
    auto* export_cmd = study_cmd->add_subcommand("export", "export a session log");
    export_cmd->add_option("--store", export_store, "store directory");
    export_cmd->add_option("--session", export_session, "session id")->required();
    export_cmd->add_option("--format", export_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    export_cmd->callback([&] {
        Store store(export_store);
        const nlohmann::json record = store.require("sessions", export_session);
        if (export_format == "csv")
            out << export_csv(record);
        else
            out << record.dump(2) << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    } catch (const Error& e) {
        err << e.to_json().dump() << "\n";
        return e.code() == ErrorCode::ConfigError ? 2 : 1;
    } catch (const std::exception& e) {
        err << nlohmann::json{{"code", "INTERNAL"}, {"message", e.what()}, {"details", nlohmann::json::object()}}.dump()
            << "\n";
        return 1;
    }
    return code;
}

} // namespace planspace
