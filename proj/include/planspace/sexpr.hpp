#pragma once

#include "planspace/error.hpp"

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace planspace {

struct SourcePos {
    int line = 1;
    int column = 1;

    // Positions are diagnostics only and never part of structural identity.
    friend bool operator==(const SourcePos&, const SourcePos&) { return true; }
};

/// A parsed s-expression: either an atom (lower-cased symbol) or a list.
struct SExpr {
    bool is_list = false;
    std::string atom;
    std::vector<SExpr> items;
    SourcePos pos;

    bool is_atom() const { return !is_list; }
    bool is_atom(std::string_view s) const { return !is_list && atom == s; }
    std::size_t size() const { return items.size(); }
    const SExpr& operator[](std::size_t i) const { return items.at(i); }

    /// True if this is a list whose head is the atom `head`.
    bool has_head(std::string_view head) const
    {
        return is_list && !items.empty() && items.front().is_atom(head);
    }

    std::string to_string() const
    {
        if (!is_list)
            return atom;
        std::string out = "(";
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i)
                out += ' ';
            out += items[i].to_string();
        }
        return out + ")";
    }
};

[[noreturn]] inline void syntax_error(const SourcePos& pos, const std::string& expected)
{
    throw Error(ErrorCode::SyntaxError,
                "line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) +
                    ": expected " + expected,
                {{"line", pos.line}, {"column", pos.column}, {"expected", expected}});
}

class SExprReader {
public:
    explicit SExprReader(std::string_view text, bool lowercase = true)
        : text_(text), lowercase_(lowercase)
    {
    }

    /// Reads every top-level expression.
    std::vector<SExpr> read_all()
    {
        std::vector<SExpr> out;
        skip_space();
        while (offset_ < text_.size()) {
            out.push_back(read());
            skip_space();
        }
        return out;
    }

    /// Reads exactly one expression and requires end of input afterwards.
    SExpr read_single()
    {
        skip_space();
        if (offset_ >= text_.size())
            syntax_error(pos_, "an expression");
        SExpr e = read();
        skip_space();
        if (offset_ < text_.size())
            syntax_error(pos_, "end of input");
        return e;
    }

private:
    SExpr read()
    {
        skip_space();
        if (offset_ >= text_.size())
            syntax_error(pos_, "an expression");
        SExpr e;
        e.pos = pos_;
        char c = text_[offset_];
        if (c == ')')
            syntax_error(pos_, "an atom or '('");
        if (c == '(') {
            e.is_list = true;
            advance();
            while (true) {
                skip_space();
                if (offset_ >= text_.size())
                    syntax_error(pos_, "')'");
                if (text_[offset_] == ')') {
                    advance();
                    break;
                }
                e.items.push_back(read());
            }
            return e;
        }
        std::size_t start = offset_;
        while (offset_ < text_.size() && !is_delimiter(text_[offset_]))
            advance();
        e.atom = std::string(text_.substr(start, offset_ - start));
        if (lowercase_)
            for (char& ch : e.atom)
                ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return e;
    }

    static bool is_delimiter(char c)
    {
        return c == '(' || c == ')' || c == ';' || std::isspace(static_cast<unsigned char>(c));
    }

    void skip_space()
    {
        while (offset_ < text_.size()) {
            char c = text_[offset_];
            if (c == ';') {
                while (offset_ < text_.size() && text_[offset_] != '\n')
                    advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    void advance()
    {
        if (text_[offset_] == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else {
            ++pos_.column;
        }
        ++offset_;
    }

    std::string_view text_;
    bool lowercase_;
    std::size_t offset_ = 0;
    SourcePos pos_;
};

inline SExpr parse_sexpr(std::string_view text) { return SExprReader(text).read_single(); }

} // namespace planspace
