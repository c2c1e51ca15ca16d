#pragma once

#include "planspace/task.hpp"

#include <functional>
#include <string>
#include <vector>

namespace planspace {

/// Propositional formula over facts. Goal conditions of compiled plan
/// properties are expressed in this vocabulary: a single fact for goal-fact
/// and LTLf properties, an arbitrary formula over flag facts for action-set
/// properties.
class Condition {
public:
    enum class Kind { True, False, Fact, Not, And, Or };

    Condition() = default;

    static Condition truth() { return Condition(Kind::True); }
    static Condition falsity() { return Condition(Kind::False); }
    static Condition fact(Fact f)
    {
        Condition c(Kind::Fact);
        c.fact_ = f;
        return c;
    }
    static Condition negation(Condition inner)
    {
        if (inner.kind_ == Kind::True)
            return falsity();
        if (inner.kind_ == Kind::False)
            return truth();
        if (inner.kind_ == Kind::Not)
            return std::move(inner.children_.front());
        Condition c(Kind::Not);
        c.children_.push_back(std::move(inner));
        return c;
    }
    static Condition conjunction(std::vector<Condition> parts) { return junction(Kind::And, std::move(parts)); }
    static Condition disjunction(std::vector<Condition> parts) { return junction(Kind::Or, std::move(parts)); }

    Kind kind() const { return kind_; }
    Fact get_fact() const { return fact_; }
    const std::vector<Condition>& children() const { return children_; }

    bool is_fact() const { return kind_ == Kind::Fact; }
    bool is_constant() const { return kind_ == Kind::True || kind_ == Kind::False; }

    bool evaluate(const State& s) const
    {
        switch (kind_) {
        case Kind::True: return true;
        case Kind::False: return false;
        case Kind::Fact: return s[fact_.var] == fact_.value;
        case Kind::Not: return !children_.front().evaluate(s);
        case Kind::And:
            for (const Condition& c : children_)
                if (!c.evaluate(s))
                    return false;
            return true;
        case Kind::Or:
            for (const Condition& c : children_)
                if (c.evaluate(s))
                    return true;
            return false;
        }
        return false;
    }

    /// Negation normal form without negation: a negated fact v=d becomes the
    /// disjunction of the other values of v.
    Condition positive_normal_form(const std::vector<Variable>& variables, bool negate = false) const
    {
        switch (kind_) {
        case Kind::True: return negate ? falsity() : truth();
        case Kind::False: return negate ? truth() : falsity();
        case Kind::Fact: {
            if (!negate)
                return *this;
            std::vector<Condition> others;
            const auto domain_size = static_cast<int>(variables.at(fact_.var).domain.size());
            for (int d = 0; d < domain_size; ++d)
                if (d != fact_.value)
                    others.push_back(fact({fact_.var, d}));
            return disjunction(std::move(others));
        }
        case Kind::Not: return children_.front().positive_normal_form(variables, !negate);
        case Kind::And:
        case Kind::Or: {
            std::vector<Condition> parts;
            for (const Condition& c : children_)
                parts.push_back(c.positive_normal_form(variables, negate));
            bool conj = (kind_ == Kind::And) != negate;
            return conj ? conjunction(std::move(parts)) : disjunction(std::move(parts));
        }
        }
        return *this;
    }

    Condition remap(const std::function<Fact(Fact)>& f) const
    {
        Condition c = *this;
        c.remap_in_place(f);
        return c;
    }

    void collect_facts(std::vector<Fact>& out) const
    {
        if (kind_ == Kind::Fact)
            out.push_back(fact_);
        for (const Condition& c : children_)
            c.collect_facts(out);
    }

    std::string to_string(const OspTask* task = nullptr) const
    {
        switch (kind_) {
        case Kind::True: return "true";
        case Kind::False: return "false";
        case Kind::Fact:
            if (task)
                return task->fact_name(fact_);
            return "v" + std::to_string(fact_.var) + "=" + std::to_string(fact_.value);
        case Kind::Not: return "(not " + children_.front().to_string(task) + ")";
        case Kind::And:
        case Kind::Or: {
            std::string out = kind_ == Kind::And ? "(and" : "(or";
            for (const Condition& c : children_)
                out += " " + c.to_string(task);
            return out + ")";
        }
        }
        return "";
    }

    bool operator==(const Condition&) const = default;

private:
    explicit Condition(Kind k) : kind_(k) {}

    static Condition junction(Kind k, std::vector<Condition> parts)
    {
        const Kind absorbing = k == Kind::And ? Kind::False : Kind::True;
        const Kind neutral = k == Kind::And ? Kind::True : Kind::False;
        Condition c(k);
        for (Condition& p : parts) {
            if (p.kind_ == absorbing)
                return Condition(absorbing);
            if (p.kind_ == neutral)
                continue;
            if (p.kind_ == k) {
                for (Condition& q : p.children_)
                    c.children_.push_back(std::move(q));
            } else {
                c.children_.push_back(std::move(p));
            }
        }
        if (c.children_.empty())
            return Condition(neutral);
        if (c.children_.size() == 1)
            return std::move(c.children_.front());
        return c;
    }

    void remap_in_place(const std::function<Fact(Fact)>& f)
    {
        if (kind_ == Kind::Fact)
            fact_ = f(fact_);
        for (Condition& c : children_)
            c.remap_in_place(f);
    }

    Kind kind_ = Kind::True;
    Fact fact_{};
    std::vector<Condition> children_;
};

} // namespace planspace
