#pragma once

// Projects (task sources plus properties) and demos (frozen projects with a
// precomputed MUGS catalog).

#include "planspace/grounding.hpp"
#include "planspace/mugs.hpp"
#include "planspace/pddl.hpp"
#include "planspace/properties.hpp"
#include "planspace/search.hpp"

#include <json.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace planspace {

inline constexpr int PROJECT_SCHEMA_VERSION = 1;
inline constexpr int DEMO_SCHEMA_VERSION = 1;

struct StudyConfig {
    bool questions_enabled = true;
    std::optional<int> max_iterations;
    std::optional<int> max_question_size;
    std::optional<double> time_limit_seconds;

    bool operator==(const StudyConfig&) const = default;
};

inline void validate(const StudyConfig& c)
{
    if (c.max_iterations && *c.max_iterations <= 0)
        throw Error(ErrorCode::ConfigError, "max_iterations must be positive", {{"field", "max_iterations"}});
    if (c.max_question_size && *c.max_question_size <= 0)
        throw Error(ErrorCode::ConfigError, "max_question_size must be positive",
                    {{"field", "max_question_size"}});
    if (c.time_limit_seconds && !(*c.time_limit_seconds > 0))
        throw Error(ErrorCode::ConfigError, "time_limit must be positive", {{"field", "time_limit"}});
}

inline nlohmann::json to_json(const StudyConfig& c)
{
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
    return {{"questions_enabled", c.questions_enabled},
            {"max_iterations", opt(c.max_iterations)},
            {"max_question_size", opt(c.max_question_size)},
            {"time_limit", opt(c.time_limit_seconds)}};
}

inline StudyConfig study_config_from_json(const nlohmann::json& j)
{
    StudyConfig c;
    try {
        c.questions_enabled = j.value("questions_enabled", true);
        if (j.contains("max_iterations") && !j.at("max_iterations").is_null())
            c.max_iterations = j.at("max_iterations").get<int>();
        if (j.contains("max_question_size") && !j.at("max_question_size").is_null())
            c.max_question_size = j.at("max_question_size").get<int>();
        if (j.contains("time_limit") && !j.at("time_limit").is_null())
            c.time_limit_seconds = j.at("time_limit").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed study config: ") + e.what());
    }
    validate(c);
    return c;
}

struct Project {
    std::string id;
    std::string name;
    std::string domain_pddl;
    std::string problem_pddl;
    std::vector<PlanProperty> properties;
    std::vector<PropertyTemplate> templates;
    /// object -> phrase used in sentences
    std::map<std::string, std::string> display_names;
    /// schema -> sentence with {0}, {1}, ... for the action arguments
    std::map<std::string, std::string> action_texts;
    std::optional<std::string> task_image;
    std::optional<Cost> bound;

    std::vector<std::string> global_hard_ids() const
    {
        std::vector<std::string> out;
        for (const PlanProperty& p : properties)
            if (p.global_hard)
                out.push_back(p.id);
        return out;
    }

    const PlanProperty* find_property(const std::string& pid) const
    {
        for (const PlanProperty& p : properties)
            if (p.id == pid)
                return &p;
        return nullptr;
    }
};

inline nlohmann::json to_json(const Project& p)
{
    nlohmann::json props = nlohmann::json::array();
    for (const PlanProperty& prop : p.properties)
        props.push_back(to_json(prop));
    nlohmann::json templates = nlohmann::json::array();
    for (const PropertyTemplate& t : p.templates)
        templates.push_back(to_json(t));
    return {{"schema_version", PROJECT_SCHEMA_VERSION},
            {"id", p.id},
            {"name", p.name},
            {"domain", p.domain_pddl},
            {"problem", p.problem_pddl},
            {"properties", props},
            {"templates", templates},
            {"display_names", p.display_names},
            {"action_texts", p.action_texts},
            {"task_image", p.task_image ? nlohmann::json(*p.task_image) : nlohmann::json(nullptr)},
            {"bound", p.bound ? nlohmann::json(*p.bound) : nlohmann::json(nullptr)}};
}

inline Project project_from_json(const nlohmann::json& j)
{
    Project p;
    try {
        if (!j.is_object())
            throw Error(ErrorCode::Validation, "project must be a JSON object");
        if (j.contains("schema_version") && j.at("schema_version").get<int>() != PROJECT_SCHEMA_VERSION)
            throw Error(ErrorCode::Validation, "unsupported project schema version");
        p.id = j.value("id", std::string());
        p.name = j.value("name", p.id);
        p.domain_pddl = j.at("domain").get<std::string>();
        p.problem_pddl = j.at("problem").get<std::string>();
        if (j.contains("properties"))
            p.properties = properties_from_json(j.at("properties"));
        if (j.contains("templates"))
            for (const auto& t : j.at("templates"))
                p.templates.push_back(template_from_json(t));
        if (j.contains("display_names"))
            p.display_names = j.at("display_names").get<std::map<std::string, std::string>>();
        if (j.contains("action_texts"))
            p.action_texts = j.at("action_texts").get<std::map<std::string, std::string>>();
        if (j.contains("task_image") && !j.at("task_image").is_null())
            p.task_image = j.at("task_image").get<std::string>();
        if (j.contains("bound") && !j.at("bound").is_null()) {
            p.bound = j.at("bound").get<Cost>();
            if (*p.bound < 0)
                throw Error(ErrorCode::Validation, "bound must be nonnegative");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("malformed project: ") + e.what());
    }
    return p;
}

/// Parsed, grounded and compiled form of a project. Immutable once built
/// and shared between sessions.
struct ProjectModel {
    Project project;
    pddl::ParsedDomain domain;
    pddl::ParsedProblem problem;
    GroundedTask grounded;
    std::set<std::string> statics;
    std::unique_ptr<PropertyContext> context;
    CompiledTask compiled;

    ProjectModel() = default;
    ProjectModel(const ProjectModel&) = delete;
    ProjectModel& operator=(const ProjectModel&) = delete;

    std::vector<std::string> property_ids() const { return compiled.property_ids; }

    /// Properties a user may toggle: everything except the global hard ones.
    std::vector<std::string> selectable_ids() const { return soft_universe(compiled); }

    const PlanProperty& property(const std::string& id) const
    {
        if (const PlanProperty* p = project.find_property(id))
            return *p;
        throw Error(ErrorCode::UnknownProperty, "unknown property '" + id + "'", {{"id", id}});
    }

    TemplateContext template_context() const
    {
        return {&domain, &grounded.object_types, &statics, &project.display_names};
    }

    std::string action_text(ActionId a) const
    {
        const GroundActionInfo& info = grounded.action_info.at(static_cast<std::size_t>(a));
        auto it = project.action_texts.find(info.schema);
        if (it == project.action_texts.end())
            return grounded.task.action(a).name;
        std::string out;
        const std::string& pattern = it->second;
        for (std::size_t i = 0; i < pattern.size(); ++i) {
            if (pattern[i] == '{') {
                auto close = pattern.find('}', i);
                if (close != std::string::npos) {
                    const std::string key = pattern.substr(i + 1, close - i - 1);
                    const std::size_t index = std::stoul(key);
                    const std::string& obj = info.args.at(index);
                    auto d = project.display_names.find(obj);
                    out += d != project.display_names.end() ? d->second : detail::default_display_name(obj);
                    i = close;
                    continue;
                }
            }
            out += pattern[i];
        }
        return out;
    }
};

inline std::shared_ptr<const ProjectModel> load_project(const Project& project,
                                                        const GroundingOptions& grounding = {},
                                                        const CompileOptions& compile = {})
{
    auto m = std::make_shared<ProjectModel>();
    m->project = project;
    m->domain = pddl::parse_domain(project.domain_pddl);
    m->problem = pddl::parse_problem(project.problem_pddl, m->domain);
    m->grounded = ground(m->domain, m->problem, grounding);
    if (project.bound)
        m->grounded.task.bound = *project.bound;
    m->statics = static_atoms(m->domain, m->problem);
    m->context = std::make_unique<PropertyContext>(m->grounded);
    m->compiled = compile_properties(*m->context, project.properties, compile);
    m->compiled.task.bound = m->grounded.task.bound;
    for (const auto& [schema, text] : project.action_texts)
        if (std::none_of(m->domain.actions.begin(), m->domain.actions.end(),
                         [&](const pddl::ActionSchema& a) { return a.name == schema; }))
            throw Error(ErrorCode::Validation, "action text for unknown schema '" + schema + "'");
    return m;
}

/// 64-bit FNV-1a, used to key cached catalogs by project content.
inline std::string content_hash(const std::string& text)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Hash over everything that influences the MUGS catalog.
inline std::string project_catalog_key(const Project& p, OracleKind oracle)
{
    nlohmann::json j = to_json(p);
    j.erase("id");
    j.erase("name");
    j.erase("display_names");
    j.erase("action_texts");
    j.erase("task_image");
    j.erase("templates");
    for (auto& prop : j["properties"]) {
        prop.erase("nl_text");
        prop.erase("utility");
    }
    j["oracle"] = std::string(to_string(oracle));
    return content_hash(j.dump());
}

struct Demo {
    std::string id;
    std::string project_id;
    Project project;
    MugsCatalog catalog;
    StudyConfig defaults;
    std::string catalog_key;
};

inline nlohmann::json to_json(const Demo& d)
{
    return {{"schema_version", DEMO_SCHEMA_VERSION},
            {"id", d.id},
            {"project_id", d.project_id},
            {"project", to_json(d.project)},
            {"catalog", to_json(d.catalog)},
            {"defaults", to_json(d.defaults)},
            {"catalog_key", d.catalog_key}};
}

inline Demo demo_from_json(const nlohmann::json& j)
{
    Demo d;
    try {
        if (j.at("schema_version").get<int>() != DEMO_SCHEMA_VERSION)
            throw Error(ErrorCode::Validation, "unsupported demo schema version");
        d.id = j.at("id").get<std::string>();
        d.project_id = j.at("project_id").get<std::string>();
        d.project = project_from_json(j.at("project"));
        d.catalog = catalog_from_json(j.at("catalog"));
        d.defaults = study_config_from_json(j.at("defaults"));
        d.catalog_key = j.value("catalog_key", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("malformed demo: ") + e.what());
    }
    return d;
}

struct DemoBuildOptions {
    SearchConfig search;
    OracleKind oracle = OracleKind::Reachability;
    StudyConfig defaults;
};

/// Freezes the project's properties and precomputes all MUGS over the
/// non-global properties.
inline Demo build_demo(const Project& project, const std::string& demo_id, const DemoBuildOptions& options = {})
{
    auto model = load_project(project);
    Demo d;
    d.id = demo_id;
    d.project_id = project.id;
    d.project = project;
    d.defaults = options.defaults;
    d.catalog = compute_mugs(model->compiled, model->selectable_ids(), options.search, options.oracle);
    d.catalog_key = project_catalog_key(project, options.oracle);
    return d;
}

} // namespace planspace
