#pragma once

// Typed STRIPS PDDL subset: :strips :typing :negative-preconditions
// :action-costs. Domains and problems are parsed into plain ASTs that can be
// written back with unparse().

#include "planspace/error.hpp"
#include "planspace/sexpr.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace planspace::pddl {

inline const std::string OBJECT_TYPE = "object";

struct TypedName {
    std::string name;
    std::string type = OBJECT_TYPE;

    bool operator==(const TypedName&) const = default;
};

/// Predicate applied to terms; a term is a `?variable` or an object name.
struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    std::string to_string() const
    {
        std::string out = "(" + predicate;
        for (const std::string& a : args)
            out += " " + a;
        return out + ")";
    }

    auto operator<=>(const Atom&) const = default;
};

struct Literal {
    bool positive = true;
    Atom atom;

    bool operator==(const Literal&) const = default;
};

/// Amount added to total-cost: a constant or a function term resolved
/// against numeric facts of the problem.
struct CostTerm {
    std::optional<std::int64_t> constant;
    Atom function;

    bool operator==(const CostTerm&) const = default;
};

struct PredicateDecl {
    std::string name;
    std::vector<TypedName> parameters;
    SourcePos pos;

    bool operator==(const PredicateDecl&) const = default;
};

struct ActionSchema {
    std::string name;
    std::vector<TypedName> parameters;
    std::vector<Literal> precondition;
    std::vector<Atom> add_effects;
    std::vector<Atom> delete_effects;
    std::vector<CostTerm> cost;
    SourcePos pos;

    bool operator==(const ActionSchema&) const = default;
};

struct ParsedDomain {
    std::string name;
    std::vector<std::string> requirements;
    /// type -> supertype; "object" is implicit.
    std::map<std::string, std::string> types;
    std::vector<TypedName> constants;
    std::vector<PredicateDecl> predicates;
    std::vector<PredicateDecl> functions;
    std::vector<ActionSchema> actions;

    bool has_requirement(const std::string& r) const
    {
        for (const std::string& x : requirements)
            if (x == r)
                return true;
        return false;
    }
    const PredicateDecl* find_predicate(const std::string& name) const
    {
        for (const PredicateDecl& p : predicates)
            if (p.name == name)
                return &p;
        return nullptr;
    }
    const PredicateDecl* find_function(const std::string& name) const
    {
        for (const PredicateDecl& p : functions)
            if (p.name == name)
                return &p;
        return nullptr;
    }
    bool is_type(const std::string& t) const { return t == OBJECT_TYPE || types.count(t) > 0; }
    /// True if `sub` equals `super` or transitively derives from it.
    bool is_subtype(std::string sub, const std::string& super) const
    {
        for (int guard = 0; guard < 1000; ++guard) {
            if (sub == super || super == OBJECT_TYPE)
                return true;
            auto it = types.find(sub);
            if (it == types.end())
                return false;
            sub = it->second;
        }
        return false;
    }

    bool operator==(const ParsedDomain&) const = default;
};

struct NumericFact {
    Atom function;
    std::int64_t value = 0;

    bool operator==(const NumericFact&) const = default;
};

struct ParsedProblem {
    std::string name;
    std::string domain_name;
    std::vector<TypedName> objects;
    std::vector<Atom> init;
    std::vector<NumericFact> numeric_init;
    /// Non-fatal findings, e.g. an ignored goal section.
    std::vector<std::string> diagnostics;

    bool operator==(const ParsedProblem& o) const
    {
        return name == o.name && domain_name == o.domain_name && objects == o.objects &&
               init == o.init && numeric_init == o.numeric_init;
    }
};

inline const std::set<std::string>& supported_requirements()
{
    static const std::set<std::string> reqs = {":strips", ":typing", ":negative-preconditions",
                                               ":action-costs"};
    return reqs;
}

namespace detail {

[[noreturn]] inline void unsupported(const std::string& what, const SourcePos& pos)
{
    throw Error(ErrorCode::UnsupportedFeature, what + " is not supported",
                {{"feature", what}, {"line", pos.line}, {"column", pos.column}});
}

[[noreturn]] inline void type_error(const std::string& msg, const SourcePos& pos)
{
    throw Error(ErrorCode::TypeError,
                "line " + std::to_string(pos.line) + ": " + msg,
                {{"line", pos.line}, {"column", pos.column}});
}

inline const std::string& expect_atom(const SExpr& e, const std::string& what)
{
    if (!e.is_atom())
        syntax_error(e.pos, what);
    return e.atom;
}

inline void expect_list(const SExpr& e, const std::string& what)
{
    if (!e.is_list)
        syntax_error(e.pos, what);
}

/// Parses `a b - t c - u d` style lists; untyped names default to object.
inline std::vector<TypedName> parse_typed_list(const SExpr& list, std::size_t from = 0)
{
    std::vector<TypedName> out;
    std::vector<std::string> pending;
    for (std::size_t i = from; i < list.size(); ++i) {
        const SExpr& e = list[i];
        if (e.is_atom("-")) {
            if (i + 1 >= list.size())
                syntax_error(e.pos, "a type name after '-'");
            const SExpr& t = list[i + 1];
            if (t.has_head("either"))
                unsupported("either types", t.pos);
            const std::string& type = expect_atom(t, "a type name");
            if (pending.empty())
                syntax_error(e.pos, "names before '-'");
            for (std::string& n : pending)
                out.push_back({std::move(n), type});
            pending.clear();
            ++i;
            continue;
        }
        pending.push_back(expect_atom(e, "a name"));
    }
    for (std::string& n : pending)
        out.push_back({std::move(n), OBJECT_TYPE});
    return out;
}

inline Atom parse_atom(const SExpr& e)
{
    expect_list(e, "an atom '(predicate args...)'");
    if (e.items.empty())
        syntax_error(e.pos, "a predicate name");
    Atom a;
    a.predicate = expect_atom(e[0], "a predicate name");
    for (std::size_t i = 1; i < e.size(); ++i)
        a.args.push_back(expect_atom(e[i], "a term"));
    return a;
}

inline void check_keyword_construct(const SExpr& e)
{
    static const std::set<std::string> rejected = {
        "or", "imply", "exists", "forall", "when", "=", "<", ">", "<=", ">=",
        "decrease", "assign", "scale-up", "scale-down", "at", "over"};
    if (e.is_list && !e.items.empty() && e[0].is_atom() && rejected.count(e[0].atom)) {
        // "at" is also a common predicate name; only the timed form is rejected.
        if (e[0].atom == "at" && !(e.size() == 3 && (e[1].is_atom("start") || e[1].is_atom("end"))))
            return;
        unsupported("'" + e[0].atom + "'", e.pos);
    }
}

inline void parse_precondition(const SExpr& e, std::vector<Literal>& out)
{
    expect_list(e, "a precondition");
    if (e.items.empty())
        return;
    check_keyword_construct(e);
    if (e.has_head("and")) {
        for (std::size_t i = 1; i < e.size(); ++i)
            parse_precondition(e[i], out);
        return;
    }
    if (e.has_head("not")) {
        if (e.size() != 2)
            syntax_error(e.pos, "exactly one argument to 'not'");
        check_keyword_construct(e[1]);
        out.push_back({false, parse_atom(e[1])});
        return;
    }
    out.push_back({true, parse_atom(e)});
}

inline void parse_effect(const SExpr& e, ActionSchema& action)
{
    expect_list(e, "an effect");
    if (e.items.empty())
        return;
    check_keyword_construct(e);
    if (e.has_head("and")) {
        for (std::size_t i = 1; i < e.size(); ++i)
            parse_effect(e[i], action);
        return;
    }
    if (e.has_head("not")) {
        if (e.size() != 2)
            syntax_error(e.pos, "exactly one argument to 'not'");
        check_keyword_construct(e[1]);
        action.delete_effects.push_back(parse_atom(e[1]));
        return;
    }
    if (e.has_head("increase")) {
        if (e.size() != 3 || !e[1].is_list || e[1].size() != 1 || !e[1][0].is_atom("total-cost"))
            unsupported("numeric effects other than (increase (total-cost) ...)", e.pos);
        CostTerm term;
        if (e[2].is_atom()) {
            try {
                std::size_t used = 0;
                term.constant = std::stoll(e[2].atom, &used);
                if (used != e[2].atom.size())
                    syntax_error(e[2].pos, "an integer cost");
            } catch (const std::logic_error&) {
                syntax_error(e[2].pos, "an integer cost");
            }
            if (*term.constant < 0)
                syntax_error(e[2].pos, "a nonnegative cost");
        } else {
            term.function = parse_atom(e[2]);
        }
        action.cost.push_back(std::move(term));
        return;
    }
    action.add_effects.push_back(parse_atom(e));
}

inline ActionSchema parse_action(const SExpr& e)
{
    ActionSchema action;
    action.pos = e.pos;
    if (e.size() < 2)
        syntax_error(e.pos, "an action name");
    action.name = expect_atom(e[1], "an action name");
    for (std::size_t i = 2; i < e.size(); i += 2) {
        const std::string& key = expect_atom(e[i], "an action keyword");
        if (i + 1 >= e.size())
            syntax_error(e[i].pos, "a value for " + key);
        const SExpr& value = e[i + 1];
        if (key == ":parameters") {
            expect_list(value, "a parameter list");
            action.parameters = parse_typed_list(value);
        } else if (key == ":precondition") {
            parse_precondition(value, action.precondition);
        } else if (key == ":effect") {
            parse_effect(value, action);
        } else {
            unsupported("action keyword " + key, e[i].pos);
        }
    }
    return action;
}

inline std::vector<PredicateDecl> parse_declarations(const SExpr& section, bool functions)
{
    std::vector<PredicateDecl> out;
    for (std::size_t i = 1; i < section.size(); ++i) {
        const SExpr& e = section[i];
        if (functions && e.is_atom("-")) {
            // function return type, e.g. "- number"
            if (i + 1 >= section.size() || !section[i + 1].is_atom("number"))
                unsupported("non-number function types", e.pos);
            ++i;
            continue;
        }
        expect_list(e, functions ? "a function declaration" : "a predicate declaration");
        if (e.items.empty())
            syntax_error(e.pos, "a name");
        PredicateDecl d;
        d.pos = e.pos;
        d.name = expect_atom(e[0], "a name");
        d.parameters = parse_typed_list(e, 1);
        out.push_back(std::move(d));
    }
    return out;
}

inline void check_terms(const ParsedDomain& d, const ActionSchema& a, const Atom& atom,
                        bool is_function)
{
    const PredicateDecl* decl = is_function ? d.find_function(atom.predicate)
                                            : d.find_predicate(atom.predicate);
    if (!decl)
        type_error(std::string(is_function ? "function" : "predicate") + " '" + atom.predicate +
                       "' is not declared (action " + a.name + ")",
                   a.pos);
    if (decl->parameters.size() != atom.args.size())
        type_error("'" + atom.predicate + "' expects " +
                       std::to_string(decl->parameters.size()) + " arguments (action " +
                       a.name + ")",
                   a.pos);
    for (std::size_t i = 0; i < atom.args.size(); ++i) {
        const std::string& term = atom.args[i];
        std::string type;
        if (!term.empty() && term[0] == '?') {
            bool found = false;
            for (const TypedName& p : a.parameters)
                if (p.name == term) {
                    type = p.type;
                    found = true;
                }
            if (!found)
                type_error("unknown variable " + term + " in action " + a.name, a.pos);
        } else {
            bool found = false;
            for (const TypedName& c : d.constants)
                if (c.name == term) {
                    type = c.type;
                    found = true;
                }
            if (!found)
                type_error("unknown constant " + term + " in action " + a.name, a.pos);
        }
        if (!d.is_subtype(type, decl->parameters[i].type) &&
            !d.is_subtype(decl->parameters[i].type, type))
            type_error("argument " + term + " of '" + atom.predicate + "' has incompatible type " +
                           type + " (action " + a.name + ")",
                       a.pos);
    }
}

inline void check_domain(const ParsedDomain& d)
{
    std::set<std::string> seen;
    for (const PredicateDecl& p : d.predicates) {
        if (!seen.insert(p.name).second)
            type_error("duplicate predicate " + p.name, p.pos);
        for (const TypedName& t : p.parameters)
            if (!d.is_type(t.type))
                type_error("unknown type " + t.type + " in predicate " + p.name, p.pos);
    }
    seen.clear();
    for (const ActionSchema& a : d.actions) {
        if (!seen.insert(a.name).second)
            type_error("duplicate action " + a.name, a.pos);
        std::set<std::string> params;
        for (const TypedName& p : a.parameters) {
            if (p.name.empty() || p.name[0] != '?')
                type_error("parameter " + p.name + " of " + a.name + " must start with '?'",
                           a.pos);
            if (!params.insert(p.name).second)
                type_error("duplicate parameter " + p.name + " in " + a.name, a.pos);
            if (!d.is_type(p.type))
                type_error("unknown type " + p.type + " in action " + a.name, a.pos);
        }
        for (const Literal& l : a.precondition)
            check_terms(d, a, l.atom, false);
        for (const Atom& at : a.add_effects)
            check_terms(d, a, at, false);
        for (const Atom& at : a.delete_effects)
            check_terms(d, a, at, false);
        for (const CostTerm& c : a.cost)
            if (!c.constant)
                check_terms(d, a, c.function, true);
    }
    for (const auto& [type, super] : d.types)
        if (!d.is_type(super))
            throw Error(ErrorCode::TypeError, "unknown supertype " + super + " of " + type);
}

} // namespace detail

inline ParsedDomain parse_domain(std::string_view text)
{
    using namespace detail;
    SExpr root = SExprReader(text).read_single();
    if (!root.has_head("define") || root.size() < 2 || !root[1].has_head("domain") ||
        root[1].size() != 2)
        syntax_error(root.pos, "(define (domain <name>) ...)");
    ParsedDomain d;
    d.name = expect_atom(root[1][1], "a domain name");
    for (std::size_t i = 2; i < root.size(); ++i) {
        const SExpr& section = root[i];
        expect_list(section, "a domain section");
        if (section.items.empty())
            syntax_error(section.pos, "a section keyword");
        const std::string& key = expect_atom(section[0], "a section keyword");
        if (key == ":requirements") {
            for (std::size_t j = 1; j < section.size(); ++j) {
                const std::string& r = expect_atom(section[j], "a requirement");
                if (!supported_requirements().count(r))
                    unsupported("requirement " + r, section[j].pos);
                d.requirements.push_back(r);
            }
        } else if (key == ":types") {
            for (TypedName& t : parse_typed_list(section, 1)) {
                if (t.name == OBJECT_TYPE)
                    continue;
                d.types[t.name] = t.type;
            }
            // supertypes that are only mentioned after '-' are implicitly declared
            std::vector<std::string> supers;
            for (const auto& [t, super] : d.types)
                supers.push_back(super);
            for (const std::string& super : supers)
                if (super != OBJECT_TYPE && !d.types.count(super))
                    d.types[super] = OBJECT_TYPE;
        } else if (key == ":constants") {
            d.constants = parse_typed_list(section, 1);
        } else if (key == ":predicates") {
            d.predicates = parse_declarations(section, false);
        } else if (key == ":functions") {
            d.functions = parse_declarations(section, true);
        } else if (key == ":action") {
            d.actions.push_back(parse_action(section));
        } else {
            unsupported(key, section.pos);
        }
    }
    for (const TypedName& c : d.constants)
        if (!d.is_type(c.type))
            type_error("unknown type " + c.type + " of constant " + c.name, root.pos);
    check_domain(d);
    return d;
}

inline ParsedProblem parse_problem(std::string_view text, const ParsedDomain& domain)
{
    using namespace detail;
    SExpr root = SExprReader(text).read_single();
    if (!root.has_head("define") || root.size() < 2 || !root[1].has_head("problem") ||
        root[1].size() != 2)
        syntax_error(root.pos, "(define (problem <name>) ...)");
    ParsedProblem p;
    p.name = expect_atom(root[1][1], "a problem name");
    std::vector<const SExpr*> init_items;
    for (std::size_t i = 2; i < root.size(); ++i) {
        const SExpr& section = root[i];
        expect_list(section, "a problem section");
        if (section.items.empty())
            syntax_error(section.pos, "a section keyword");
        const std::string& key = expect_atom(section[0], "a section keyword");
        if (key == ":domain") {
            if (section.size() != 2)
                syntax_error(section.pos, "(:domain <name>)");
            p.domain_name = expect_atom(section[1], "a domain name");
        } else if (key == ":requirements") {
            for (std::size_t j = 1; j < section.size(); ++j)
                if (!supported_requirements().count(expect_atom(section[j], "a requirement")))
                    unsupported("requirement " + section[j].atom, section[j].pos);
        } else if (key == ":objects") {
            p.objects = parse_typed_list(section, 1);
        } else if (key == ":init") {
            for (std::size_t j = 1; j < section.size(); ++j)
                init_items.push_back(&section[j]);
        } else if (key == ":goal") {
            p.diagnostics.push_back(
                "GOAL_PRESENT: line " + std::to_string(section.pos.line) +
                ": goal section ignored; goals are defined by plan properties");
        } else if (key == ":metric") {
            // total-cost minimisation is implied
        } else {
            unsupported(key, section.pos);
        }
    }
    if (!p.domain_name.empty() && p.domain_name != domain.name)
        p.diagnostics.push_back("DOMAIN_MISMATCH: problem names domain " + p.domain_name +
                                " but domain is " + domain.name);

    std::map<std::string, std::string> object_type;
    for (const TypedName& c : domain.constants)
        object_type[c.name] = c.type;
    for (const TypedName& o : p.objects) {
        if (!domain.is_type(o.type))
            type_error("unknown type " + o.type + " of object " + o.name, root.pos);
        auto [it, inserted] = object_type.emplace(o.name, o.type);
        if (!inserted && it->second != o.type)
            type_error("object " + o.name + " declared twice", root.pos);
    }

    auto check_args = [&](const PredicateDecl& decl, const Atom& atom, const SourcePos& pos) {
        if (decl.parameters.size() != atom.args.size())
            type_error("'" + atom.predicate + "' expects " +
                           std::to_string(decl.parameters.size()) + " arguments",
                       pos);
        for (std::size_t k = 0; k < atom.args.size(); ++k) {
            auto it = object_type.find(atom.args[k]);
            if (it == object_type.end())
                type_error("undeclared object " + atom.args[k] + " in " + atom.to_string(), pos);
            if (!domain.is_subtype(it->second, decl.parameters[k].type))
                type_error("object " + atom.args[k] + " of type " + it->second +
                               " does not fit parameter type " + decl.parameters[k].type +
                               " of " + atom.predicate,
                           pos);
        }
    };

    for (const SExpr* item : init_items) {
        const SExpr& e = *item;
        expect_list(e, "an initial atom");
        if (e.has_head("=")) {
            if (e.size() != 3 || !e[2].is_atom())
                syntax_error(e.pos, "(= (<function> args) <number>)");
            NumericFact nf;
            nf.function = parse_atom(e[1]);
            try {
                nf.value = std::stoll(e[2].atom);
            } catch (const std::logic_error&) {
                syntax_error(e[2].pos, "an integer value");
            }
            const PredicateDecl* decl = domain.find_function(nf.function.predicate);
            if (!decl)
                type_error("undeclared function " + nf.function.predicate, e.pos);
            check_args(*decl, nf.function, e.pos);
            p.numeric_init.push_back(std::move(nf));
            continue;
        }
        if (e.has_head("not"))
            unsupported("negative initial literals", e.pos);
        Atom atom = parse_atom(e);
        const PredicateDecl* decl = domain.find_predicate(atom.predicate);
        if (!decl)
            type_error("undeclared predicate " + atom.predicate, e.pos);
        check_args(*decl, atom, e.pos);
        p.init.push_back(std::move(atom));
    }
    return p;
}

namespace detail {

inline std::string unparse_typed(const std::vector<TypedName>& names)
{
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i)
            out += ' ';
        out += names[i].name;
        if (i + 1 == names.size() || names[i + 1].type != names[i].type)
            out += " - " + names[i].type;
    }
    return out;
}

} // namespace detail

inline std::string unparse(const ParsedDomain& d)
{
    using detail::unparse_typed;
    std::string out = "(define (domain " + d.name + ")\n";
    if (!d.requirements.empty()) {
        out += "  (:requirements";
        for (const std::string& r : d.requirements)
            out += " " + r;
        out += ")\n";
    }
    if (!d.types.empty()) {
        out += "  (:types";
        for (const auto& [t, super] : d.types)
            out += " " + t + " - " + super;
        out += ")\n";
    }
    if (!d.constants.empty())
        out += "  (:constants " + unparse_typed(d.constants) + ")\n";
    out += "  (:predicates";
    for (const PredicateDecl& p : d.predicates) {
        out += " (" + p.name;
        if (!p.parameters.empty())
            out += " " + unparse_typed(p.parameters);
        out += ")";
    }
    out += ")\n";
    if (!d.functions.empty()) {
        out += "  (:functions";
        for (const PredicateDecl& f : d.functions) {
            out += " (" + f.name;
            if (!f.parameters.empty())
                out += " " + unparse_typed(f.parameters);
            out += ") - number";
        }
        out += ")\n";
    }
    for (const ActionSchema& a : d.actions) {
        out += "  (:action " + a.name + "\n";
        out += "    :parameters (" + unparse_typed(a.parameters) + ")\n";
        out += "    :precondition (and";
        for (const Literal& l : a.precondition)
            out += l.positive ? " " + l.atom.to_string() : " (not " + l.atom.to_string() + ")";
        out += ")\n    :effect (and";
        for (const Atom& at : a.delete_effects)
            out += " (not " + at.to_string() + ")";
        for (const Atom& at : a.add_effects)
            out += " " + at.to_string();
        for (const CostTerm& c : a.cost)
            out += " (increase (total-cost) " +
                   (c.constant ? std::to_string(*c.constant) : c.function.to_string()) + ")";
        out += "))\n";
    }
    return out + ")\n";
}

inline std::string unparse(const ParsedProblem& p)
{
    std::string out = "(define (problem " + p.name + ")\n";
    if (!p.domain_name.empty())
        out += "  (:domain " + p.domain_name + ")\n";
    out += "  (:objects " + detail::unparse_typed(p.objects) + ")\n  (:init";
    for (const Atom& a : p.init)
        out += "\n    " + a.to_string();
    for (const NumericFact& nf : p.numeric_init)
        out += "\n    (= " + nf.function.to_string() + " " + std::to_string(nf.value) + ")";
    return out + ")\n)\n";
}

} // namespace planspace::pddl
