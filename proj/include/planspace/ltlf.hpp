#pragma once

// LTL over finite traces. A trace of a plan a1..an is the sequence of
// positions 0..n; position i carries the state s_i and, for i > 0, the action
// a_i that produced it. Atoms are state atoms ("(at p0 cafe)") and action
// atoms ("(occurs (drive red * cafe * *))").

#include "planspace/error.hpp"
#include "planspace/sexpr.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace planspace::ltlf {

enum class Op {
    True,
    False,
    StateAtom,
    ActionAtom,
    Not,
    And,
    Or,
    Next,
    WeakNext,
    Until,
    Eventually,
    Always,
};

struct Formula {
    Op op = Op::True;
    /// Atom text for StateAtom / ActionAtom (the action pattern without "occurs").
    std::string atom;
    /// Index into the atom lists of the enclosing AtomIndex.
    int index = -1;
    std::vector<Formula> args;

    std::string to_string() const
    {
        auto un = [&](const char* name) { return std::string("(") + name + " " + args[0].to_string() + ")"; };
        switch (op) {
        case Op::True: return "true";
        case Op::False: return "false";
        case Op::StateAtom: return atom;
        case Op::ActionAtom: return "(occurs " + atom + ")";
        case Op::Not: return un("not");
        case Op::Next: return un("next");
        case Op::WeakNext: return un("weak-next");
        case Op::Eventually: return un("eventually");
        case Op::Always: return un("always");
        case Op::Until: return "(until " + args[0].to_string() + " " + args[1].to_string() + ")";
        case Op::And:
        case Op::Or: {
            std::string out = op == Op::And ? "(and" : "(or";
            for (const Formula& a : args)
                out += " " + a.to_string();
            return out + ")";
        }
        }
        return "";
    }
};

/// Distinct atoms of a formula, in order of first occurrence.
struct AtomIndex {
    std::vector<std::string> state_atoms;
    std::vector<std::string> action_atoms;
};

namespace detail {

inline Formula parse(const SExpr& e)
{
    Formula f;
    if (e.is_atom()) {
        if (e.atom == "true")
            return f;
        if (e.atom == "false") {
            f.op = Op::False;
            return f;
        }
        syntax_error(e.pos, "true, false or a parenthesised formula");
    }
    if (e.items.empty() || !e[0].is_atom())
        syntax_error(e.pos, "an operator or predicate name");
    const std::string& head = e[0].atom;
    auto arity = [&](std::size_t n) {
        if (e.size() != n + 1)
            syntax_error(e.pos, std::to_string(n) + " argument(s) for '" + head + "'");
    };
    auto unary = [&](Op op) {
        arity(1);
        f.op = op;
        f.args.push_back(parse(e[1]));
        return f;
    };
    if (head == "not")
        return unary(Op::Not);
    if (head == "next")
        return unary(Op::Next);
    if (head == "weak-next")
        return unary(Op::WeakNext);
    if (head == "eventually")
        return unary(Op::Eventually);
    if (head == "always" || head == "globally")
        return unary(Op::Always);
    if (head == "and" || head == "or") {
        f.op = head == "and" ? Op::And : Op::Or;
        for (std::size_t i = 1; i < e.size(); ++i)
            f.args.push_back(parse(e[i]));
        return f;
    }
    if (head == "implies" || head == "imply") {
        arity(2);
        Formula neg;
        neg.op = Op::Not;
        neg.args.push_back(parse(e[1]));
        f.op = Op::Or;
        f.args.push_back(std::move(neg));
        f.args.push_back(parse(e[2]));
        return f;
    }
    if (head == "until") {
        arity(2);
        f.op = Op::Until;
        f.args.push_back(parse(e[1]));
        f.args.push_back(parse(e[2]));
        return f;
    }
    if (head == "occurs") {
        arity(1);
        if (!e[1].is_list)
            syntax_error(e[1].pos, "an action pattern");
        f.op = Op::ActionAtom;
        f.atom = e[1].to_string();
        return f;
    }
    for (std::size_t i = 1; i < e.size(); ++i)
        if (!e[i].is_atom())
            syntax_error(e[i].pos, "an object name in state atom");
    f.op = Op::StateAtom;
    f.atom = e.to_string();
    return f;
}

inline void index_atoms(Formula& f, AtomIndex& idx)
{
    auto find_or_add = [](std::vector<std::string>& list, const std::string& a) {
        auto it = std::find(list.begin(), list.end(), a);
        if (it != list.end())
            return static_cast<int>(it - list.begin());
        list.push_back(a);
        return static_cast<int>(list.size() - 1);
    };
    if (f.op == Op::StateAtom)
        f.index = find_or_add(idx.state_atoms, f.atom);
    else if (f.op == Op::ActionAtom)
        f.index = find_or_add(idx.action_atoms, f.atom);
    for (Formula& a : f.args)
        index_atoms(a, idx);
}

} // namespace detail

/// Parses the s-expression syntax and fills atom indices.
inline Formula parse_formula(std::string_view text, AtomIndex& index)
{
    Formula f = detail::parse(parse_sexpr(text));
    detail::index_atoms(f, index);
    return f;
}

/// Valuation of the atoms at one trace position.
struct Letter {
    std::vector<bool> state;
    std::vector<bool> action;

    auto operator<=>(const Letter&) const = default;
};

/// Truth value at every position, computed backwards from the last position.
inline std::vector<bool> evaluate_positions(const Formula& f, const std::vector<Letter>& trace)
{
    const std::size_t n = trace.size();
    std::vector<bool> out(n, false);
    switch (f.op) {
    case Op::True: std::fill(out.begin(), out.end(), true); break;
    case Op::False: break;
    case Op::StateAtom:
        for (std::size_t i = 0; i < n; ++i)
            out[i] = trace[i].state[static_cast<std::size_t>(f.index)];
        break;
    case Op::ActionAtom:
        for (std::size_t i = 0; i < n; ++i)
            out[i] = trace[i].action[static_cast<std::size_t>(f.index)];
        break;
    case Op::Not: {
        auto a = evaluate_positions(f.args[0], trace);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = !a[i];
        break;
    }
    case Op::And:
    case Op::Or: {
        const bool conj = f.op == Op::And;
        std::fill(out.begin(), out.end(), conj);
        for (const Formula& arg : f.args) {
            auto a = evaluate_positions(arg, trace);
            for (std::size_t i = 0; i < n; ++i)
                out[i] = conj ? (out[i] && a[i]) : (out[i] || a[i]);
        }
        break;
    }
    case Op::Next:
    case Op::WeakNext: {
        auto a = evaluate_positions(f.args[0], trace);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = i + 1 < n ? a[i + 1] : f.op == Op::WeakNext;
        break;
    }
    case Op::Until: {
        auto a = evaluate_positions(f.args[0], trace);
        auto b = evaluate_positions(f.args[1], trace);
        bool later = false;
        for (std::size_t i = n; i-- > 0;) {
            later = b[i] || (a[i] && later);
            out[i] = later;
        }
        break;
    }
    case Op::Eventually: {
        auto a = evaluate_positions(f.args[0], trace);
        bool later = false;
        for (std::size_t i = n; i-- > 0;) {
            later = later || a[i];
            out[i] = later;
        }
        break;
    }
    case Op::Always: {
        auto a = evaluate_positions(f.args[0], trace);
        bool later = true;
        for (std::size_t i = n; i-- > 0;) {
            later = later && a[i];
            out[i] = later;
        }
        break;
    }
    }
    return out;
}

/// Standard finite-trace satisfaction: the formula holds at position 0.
inline bool evaluate(const Formula& f, const std::vector<Letter>& trace)
{
    if (trace.empty())
        throw Error(ErrorCode::Validation, "an LTLf trace has at least one position");
    return evaluate_positions(f, trace).front();
}

/// Hash-consed formula nodes used as automaton states. And/Or operands are
/// flattened, sorted and deduplicated so that equivalent progression results
/// collapse to the same node.
class ProgressionPool {
public:
    using NodeId = int;

    ProgressionPool()
    {
        true_ = intern(Op::True, -1, {});
        false_ = intern(Op::False, -1, {});
    }

    NodeId truth() const { return true_; }
    NodeId falsity() const { return false_; }
    std::size_t size() const { return nodes_.size(); }

    NodeId build(const Formula& f)
    {
        switch (f.op) {
        case Op::True: return true_;
        case Op::False: return false_;
        case Op::StateAtom:
        case Op::ActionAtom: return intern(f.op, f.index, {});
        case Op::Not: return make_not(build(f.args[0]));
        case Op::And:
        case Op::Or: {
            std::vector<NodeId> kids;
            for (const Formula& a : f.args)
                kids.push_back(build(a));
            return f.op == Op::And ? make_and(kids) : make_or(kids);
        }
        case Op::Until: return intern(Op::Until, -1, {build(f.args[0]), build(f.args[1])});
        default: return intern(f.op, -1, {build(f.args[0])});
        }
    }

    /// Obligation on the rest of the trace after reading `letter` at a
    /// position that is not the last one.
    NodeId progress(NodeId id, const Letter& letter)
    {
        const Node n = nodes_[static_cast<std::size_t>(id)];
        switch (n.op) {
        case Op::True:
        case Op::False: return id;
        case Op::StateAtom: return letter.state[static_cast<std::size_t>(n.atom)] ? true_ : false_;
        case Op::ActionAtom: return letter.action[static_cast<std::size_t>(n.atom)] ? true_ : false_;
        case Op::Not: return make_not(progress(n.kids[0], letter));
        case Op::And:
        case Op::Or: {
            std::vector<NodeId> kids;
            for (NodeId k : n.kids)
                kids.push_back(progress(k, letter));
            return n.op == Op::And ? make_and(kids) : make_or(kids);
        }
        case Op::Next:
        case Op::WeakNext: return n.kids[0];
        case Op::Until:
            return make_or({progress(n.kids[1], letter),
                            make_and({progress(n.kids[0], letter), id})});
        case Op::Eventually: return make_or({progress(n.kids[0], letter), id});
        case Op::Always: return make_and({progress(n.kids[0], letter), id});
        }
        return false_;
    }

    /// Truth value when `letter` is read at the last position.
    bool accepts_at_end(NodeId id, const Letter& letter) const
    {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        switch (n.op) {
        case Op::True: return true;
        case Op::False: return false;
        case Op::StateAtom: return letter.state[static_cast<std::size_t>(n.atom)];
        case Op::ActionAtom: return letter.action[static_cast<std::size_t>(n.atom)];
        case Op::Not: return !accepts_at_end(n.kids[0], letter);
        case Op::And:
            for (NodeId k : n.kids)
                if (!accepts_at_end(k, letter))
                    return false;
            return true;
        case Op::Or:
            for (NodeId k : n.kids)
                if (accepts_at_end(k, letter))
                    return true;
            return false;
        case Op::Next: return false;
        case Op::WeakNext: return true;
        case Op::Until: return accepts_at_end(n.kids[1], letter);
        case Op::Eventually:
        case Op::Always: return accepts_at_end(n.kids[0], letter);
        }
        return false;
    }

private:
    struct Node {
        Op op;
        int atom;
        std::vector<NodeId> kids;
    };

    NodeId intern(Op op, int atom, std::vector<NodeId> kids)
    {
        auto key = std::make_tuple(op, atom, kids);
        auto it = index_.find(key);
        if (it != index_.end())
            return it->second;
        const auto id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back({op, atom, kids});
        index_.emplace(std::move(key), id);
        return id;
    }

    NodeId make_not(NodeId a)
    {
        if (a == true_)
            return false_;
        if (a == false_)
            return true_;
        if (nodes_[static_cast<std::size_t>(a)].op == Op::Not)
            return nodes_[static_cast<std::size_t>(a)].kids[0];
        return intern(Op::Not, -1, {a});
    }

    NodeId make_junction(Op op, const std::vector<NodeId>& parts)
    {
        const NodeId absorbing = op == Op::And ? false_ : true_;
        const NodeId neutral = op == Op::And ? true_ : false_;
        std::vector<NodeId> kids;
        for (NodeId p : parts) {
            if (p == absorbing)
                return absorbing;
            if (p == neutral)
                continue;
            const Node& n = nodes_[static_cast<std::size_t>(p)];
            if (n.op == op)
                kids.insert(kids.end(), n.kids.begin(), n.kids.end());
            else
                kids.push_back(p);
        }
        std::sort(kids.begin(), kids.end());
        kids.erase(std::unique(kids.begin(), kids.end()), kids.end());
        for (NodeId k : kids) {
            const Node& n = nodes_[static_cast<std::size_t>(k)];
            if (n.op == Op::Not && std::binary_search(kids.begin(), kids.end(), n.kids[0]))
                return absorbing;
        }
        if (kids.empty())
            return neutral;
        if (kids.size() == 1)
            return kids.front();
        return intern(op, -1, std::move(kids));
    }

    NodeId make_and(const std::vector<NodeId>& parts) { return make_junction(Op::And, parts); }
    NodeId make_or(const std::vector<NodeId>& parts) { return make_junction(Op::Or, parts); }

    std::vector<Node> nodes_;
    std::map<std::tuple<Op, int, std::vector<NodeId>>, NodeId> index_;
    NodeId true_ = 0;
    NodeId false_ = 1;
};

/// Deterministic automaton whose states are pending obligations. Reading a
/// letter in state q moves to progress(q, letter); a trace ending with that
/// letter is accepted iff accepts_at_end(q, letter).
struct Dfa {
    std::vector<Letter> alphabet;
    /// transition[q][letter index]
    std::vector<std::vector<int>> transition;
    std::vector<std::vector<bool>> accept_at_end;
    int initial = 0;

    std::size_t num_states() const { return transition.size(); }

    int letter_index(const Letter& l) const
    {
        auto it = std::lower_bound(alphabet.begin(), alphabet.end(), l);
        if (it == alphabet.end() || *it != l)
            throw Error(ErrorCode::Validation, "letter outside the automaton alphabet");
        return static_cast<int>(it - alphabet.begin());
    }

    bool run(const std::vector<Letter>& trace) const
    {
        int q = initial;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const int l = letter_index(trace[i]);
            if (i + 1 == trace.size())
                return accept_at_end[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
            q = transition[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
        }
        throw Error(ErrorCode::Validation, "an LTLf trace has at least one position");
    }
};

struct DfaOptions {
    std::size_t max_states = 4096;
    std::size_t max_state_atoms = 16;
};

/// Builds the automaton eagerly by breadth-first progression over the
/// alphabet {all state-atom valuations} x `action_valuations`.
inline Dfa build_dfa(const Formula& f, const AtomIndex& atoms,
                     std::vector<std::vector<bool>> action_valuations, const DfaOptions& options = {})
{
    const std::size_t k = atoms.state_atoms.size();
    if (k > options.max_state_atoms)
        throw Error(ErrorCode::FormulaTooLarge,
                    "formula mentions " + std::to_string(k) + " state atoms (limit " +
                        std::to_string(options.max_state_atoms) + ")");
    for (auto& v : action_valuations)
        if (v.size() != atoms.action_atoms.size())
            throw Error(ErrorCode::Validation, "action valuation has wrong width");
    std::sort(action_valuations.begin(), action_valuations.end());
    action_valuations.erase(std::unique(action_valuations.begin(), action_valuations.end()),
                            action_valuations.end());
    if (action_valuations.empty())
        action_valuations.push_back(std::vector<bool>(atoms.action_atoms.size(), false));

    Dfa dfa;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << k); ++bits) {
        std::vector<bool> state(k);
        for (std::size_t i = 0; i < k; ++i)
            state[i] = (bits >> i) & 1U;
        for (const auto& av : action_valuations)
            dfa.alphabet.push_back({state, av});
    }
    std::sort(dfa.alphabet.begin(), dfa.alphabet.end());

    ProgressionPool pool;
    std::map<ProgressionPool::NodeId, int> state_of;
    std::vector<ProgressionPool::NodeId> nodes;
    auto add_state = [&](ProgressionPool::NodeId n) {
        auto [it, inserted] = state_of.emplace(n, static_cast<int>(nodes.size()));
        if (inserted) {
            if (nodes.size() >= options.max_states)
                throw Error(ErrorCode::FormulaTooLarge,
                            "automaton exceeds " + std::to_string(options.max_states) + " states",
                            {{"cap", options.max_states}});
            nodes.push_back(n);
        }
        return it->second;
    };
    dfa.initial = add_state(pool.build(f));
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        std::vector<int> row(dfa.alphabet.size());
        std::vector<bool> acc(dfa.alphabet.size());
        for (std::size_t l = 0; l < dfa.alphabet.size(); ++l) {
            row[l] = add_state(pool.progress(nodes[q], dfa.alphabet[l]));
            acc[l] = pool.accepts_at_end(nodes[q], dfa.alphabet[l]);
        }
        dfa.transition.push_back(std::move(row));
        dfa.accept_at_end.push_back(std::move(acc));
    }
    return dfa;
}

} // namespace planspace::ltlf
