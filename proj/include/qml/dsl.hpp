#pragma once

// Scenario script front end. One statement per semicolon, `#` comments:
//
//   space <id> dim <int>;
//   system <id> : <space>;
//   ket <id> [on <spaces>] = <ket expression>;
//   operator <id> = <operator name | [[row], [row], ...]>;
//   observable <id> on <space> = { <ket id>, ... };
//   param <id> [= <scalar expression>];
//   assume <systems> |= <ket expression>;
//   apply <operator> to <systems> [as <new names>];
//   measure <system> with <observable> -> (chosen <ket id> | any) [as <id>];
//   query possible <system> with <observable>;
//   query verifies <systems> |= <ket expression>;
//   expect verifies <systems> |= <ket expression>;
//
// <systems> is a single identifier or a parenthesized comma list. An
// <observable> position accepts a declared name or an inline basis literal
// like { k0, k1 }. Expressions combine scalars (number literals, `2i`, `i`,
// parameters, sqrt, exp, + - * /) with kets (ket(...), declared ket names,
// tensor(...), scaling, sums and differences). Fractions such as 3/5 are
// ordinary division. Measuring or evolving a system retires its name; the
// fresh system is named with a trailing prime unless an `as` clause picks
// the name, so scripts spell the single-use discipline out explicitly.
//
// The environment starts with the space `qubit` and the operators H, CNOT,
// SX, SZ, ID2. All declarations share one global scope and cannot shadow.
//
// parse() builds a Script and rejects bad input with a line and column
// diagnostic. pretty_print() renders a Script in the one canonical style;
// parsing its own output reproduces it byte for byte. ScriptRunner executes
// statements against a Session and prefixes every error it meets with the
// originating statement's line.

#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "engine.hpp"
#include "oracle.hpp"

namespace qml::dsl {

// --- tokens ------------------------------------------------------------------

struct SourcePos {
    std::size_t line = 1;
    std::size_t column = 1;
};

inline std::string at(SourcePos p) {
    return "line " + std::to_string(p.line) + ", column " + std::to_string(p.column);
}

struct Token {
    enum class Kind { identifier, keyword, number, imaginary, symbol, end };
    Kind kind = Kind::end;
    std::string text; // lexeme; imaginary stores the numeric part without the i
    SourcePos pos;
};

struct Comment {
    std::size_t line = 0;
    bool own_line = true; // false: trails a statement on the same line
    std::string text;     // raw text after '#', kept verbatim
};

inline const std::set<std::string>& keywords() {
    static const std::set<std::string> kw = {
        "space", "system", "ket", "operator", "observable", "param",
        "assume", "apply", "measure", "query", "expect",
        "dim", "on", "with", "to", "as", "chosen", "any", "possible", "verifies",
        "tensor", "sqrt", "exp", "i",
    };
    return kw;
}

struct LexResult {
    std::vector<Token> tokens;
    std::vector<Comment> comments;
};

inline LexResult lex(std::string_view src) {
    LexResult out;
    std::size_t line = 1, col = 1, i = 0;
    auto is_ident = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++col;
            ++i;
            continue;
        }
        SourcePos p{line, col};
        if (c == '#') {
            bool own = out.tokens.empty() || out.tokens.back().pos.line != line;
            std::size_t j = i + 1;
            while (j < src.size() && src[j] != '\n') ++j;
            out.comments.push_back({line, own, std::string(src.substr(i + 1, j - i - 1))});
            col += j - i;
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && is_ident(src[j])) ++j;
            while (j < src.size() && src[j] == '\'') ++j;
            std::string text(src.substr(i, j - i));
            col += j - i;
            i = j;
            Token::Kind k = keywords().count(text) ? Token::Kind::keyword
                                                   : Token::Kind::identifier;
            out.tokens.push_back({k, std::move(text), p});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '.') {
                if (j + 1 >= src.size() || !std::isdigit(static_cast<unsigned char>(src[j + 1])))
                    throw ParseError(at(p) + ": digits must follow the decimal point");
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    j = k;
                    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                }
            }
            std::string text(src.substr(i, j - i));
            bool imag = false;
            if (j < src.size() && src[j] == 'i') {
                char next = j + 1 < src.size() ? src[j + 1] : '\0';
                if (!is_ident(next) && next != '\'') {
                    imag = true;
                    ++j;
                }
            }
            col += j - i;
            i = j;
            out.tokens.push_back(
                {imag ? Token::Kind::imaginary : Token::Kind::number, std::move(text), p});
            continue;
        }
        if (c == '|') {
            if (i + 1 < src.size() && src[i + 1] == '=') {
                out.tokens.push_back({Token::Kind::symbol, "|=", p});
                i += 2;
                col += 2;
                continue;
            }
            throw ParseError(at(p) + ": stray '|', did you mean '|='?");
        }
        if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
            out.tokens.push_back({Token::Kind::symbol, "->", p});
            i += 2;
            col += 2;
            continue;
        }
        if (std::string_view("(){}[],;:=+-*/").find(c) != std::string_view::npos) {
            out.tokens.push_back({Token::Kind::symbol, std::string(1, c), p});
            ++i;
            ++col;
            continue;
        }
        if (std::isprint(static_cast<unsigned char>(c)))
            throw ParseError(at(p) + ": unexpected character '" + std::string(1, c) + "'");
        char buf[8];
        std::snprintf(buf, sizeof buf, "0x%02x", static_cast<unsigned char>(c));
        throw ParseError(at(p) + ": unexpected byte " + buf);
    }
    out.tokens.push_back({Token::Kind::end, "", {line, col}});
    return out;
}

// --- syntax tree ---------------------------------------------------------------

struct Expr {
    enum class Kind { number, imaginary, unit, ident, call, negate, binary };
    Kind kind = Kind::number;
    std::string text;      // number lexeme, identifier, or callee name
    char op = 0;           // binary operator
    std::vector<Expr> args; // call arguments, or operands
    SourcePos pos;
};

// One struct covers every statement kind; which fields are live depends on
// the kind:
//   space_decl       name, dim
//   system_decl      name, ref (space)
//   ket_decl         name, names (on-spaces, may be empty), expr
//   operator_decl    name, builtin (alias) or rows (matrix)
//   observable_decl  name, ref (space), names (elements)
//   param_decl       name, expr (optional default)
//   assume           names (systems), expr
//   apply            name (operator), names (systems), as_names
//   measure          name (system), ref or names (observable), any/chosen, as_names
//   query_possible   name (system), ref or names (observable)
//   query_verifies   names (systems), expr
//   expect_verifies  names (systems), expr
struct Statement {
    enum class Kind {
        space_decl, system_decl, ket_decl, operator_decl, observable_decl, param_decl,
        assume, apply, measure, query_possible, query_verifies, expect_verifies,
    };
    Kind kind = Kind::space_decl;
    SourcePos pos;
    std::string name;
    std::string ref;
    std::vector<std::string> names;
    std::vector<std::string> as_names;
    std::optional<Expr> expr;
    std::vector<std::vector<Expr>> rows;
    std::string builtin;
    std::size_t dim = 0;
    bool any = false;
    std::string chosen;
};

struct Script {
    std::vector<Statement> statements;
    std::vector<Comment> comments;
};

// --- parse-time symbols --------------------------------------------------------

enum class SymbolKind { space, system, ket, op, observable, param };

inline const char* kind_name(SymbolKind k) {
    switch (k) {
    case SymbolKind::space: return "space";
    case SymbolKind::system: return "system";
    case SymbolKind::ket: return "ket";
    case SymbolKind::op: return "operator";
    case SymbolKind::observable: return "observable";
    case SymbolKind::param: return "parameter";
    }
    return "identifier";
}

struct SymbolTable {
    std::map<std::string, SymbolKind> kinds;

    static SymbolTable with_builtins() {
        SymbolTable t;
        t.kinds = {
            {"qubit", SymbolKind::space}, {"H", SymbolKind::op},   {"CNOT", SymbolKind::op},
            {"SX", SymbolKind::op},       {"SZ", SymbolKind::op},  {"ID2", SymbolKind::op},
        };
        return t;
    }
};

// --- parser ----------------------------------------------------------------

class Parser {
public:
    Parser(std::vector<Token> tokens, SymbolTable& syms)
        : toks_(std::move(tokens)), syms_(syms) {}

    std::vector<Statement> run() {
        std::vector<Statement> out;
        while (peek().kind != Token::Kind::end) out.push_back(statement());
        return out;
    }

private:
    static constexpr std::size_t max_depth = 256;

    std::vector<Token> toks_;
    SymbolTable& syms_;
    std::size_t idx_ = 0;
    std::size_t depth_ = 0;

    const Token& peek() const { return toks_[idx_]; }
    const Token& advance() { return toks_[idx_++]; }

    [[noreturn]] void fail(const Token& t, const std::string& expected) const {
        std::string got = t.kind == Token::Kind::end ? "end of input" : "'" + t.text + "'";
        throw ParseError(at(t.pos) + ": unexpected " + got + ", expected " + expected);
    }

    bool check_symbol(std::string_view s) const {
        return peek().kind == Token::Kind::symbol && peek().text == s;
    }
    bool check_keyword(std::string_view s) const {
        return peek().kind == Token::Kind::keyword && peek().text == s;
    }

    void expect_symbol(std::string_view s) {
        if (!check_symbol(s)) fail(peek(), "'" + std::string(s) + "'");
        advance();
    }
    void expect_keyword(std::string_view s) {
        if (!check_keyword(s)) fail(peek(), "'" + std::string(s) + "'");
        advance();
    }

    const Token& identifier(const std::string& what) {
        if (peek().kind != Token::Kind::identifier) fail(peek(), what);
        return advance();
    }

    void declare(const std::string& name, SymbolKind kind, SourcePos p) {
        auto [it, fresh] = syms_.kinds.emplace(name, kind);
        if (!fresh)
            throw ParseError(at(p) + ": duplicate identifier '" + name + "'");
    }

    void resolve(const Token& t, SymbolKind kind, const std::string& what) const {
        auto it = syms_.kinds.find(t.text);
        if (it == syms_.kinds.end())
            throw ParseError(at(t.pos) + ": unknown " + what + " '" + t.text + "'");
        if (it->second != kind)
            throw ParseError(at(t.pos) + ": '" + t.text + "' is a " +
                             kind_name(it->second) + ", expected a " + what);
    }

    std::vector<std::string> system_list() {
        std::vector<std::string> names;
        if (check_symbol("(")) {
            advance();
            for (;;) {
                const Token& t = identifier("a system name");
                resolve(t, SymbolKind::system, "system");
                names.push_back(t.text);
                if (check_symbol(",")) {
                    advance();
                    continue;
                }
                expect_symbol(")");
                break;
            }
        } else {
            const Token& t = identifier("a system name");
            resolve(t, SymbolKind::system, "system");
            names.push_back(t.text);
        }
        return names;
    }

    std::vector<std::string> space_list() {
        std::vector<std::string> names;
        if (check_symbol("(")) {
            advance();
            for (;;) {
                const Token& t = identifier("a space name");
                resolve(t, SymbolKind::space, "space");
                names.push_back(t.text);
                if (check_symbol(",")) {
                    advance();
                    continue;
                }
                expect_symbol(")");
                break;
            }
        } else {
            const Token& t = identifier("a space name");
            resolve(t, SymbolKind::space, "space");
            names.push_back(t.text);
        }
        return names;
    }

    // new names after an `as`; declared by the caller
    std::vector<Token> name_list() {
        std::vector<Token> names;
        if (check_symbol("(")) {
            advance();
            for (;;) {
                names.push_back(identifier("a fresh system name"));
                if (check_symbol(",")) {
                    advance();
                    continue;
                }
                expect_symbol(")");
                break;
            }
        } else {
            names.push_back(identifier("a fresh system name"));
        }
        return names;
    }

    // --- expressions ---

    struct DepthGuard {
        Parser& p;
        DepthGuard(Parser& parser, const Token& t) : p(parser) {
            if (++p.depth_ > max_depth)
                throw ParseError(at(t.pos) + ": expression nests too deeply");
        }
        ~DepthGuard() { --p.depth_; }
    };

    Expr expression(const std::string& what) {
        Expr e = multiplicative(what);
        while (check_symbol("+") || check_symbol("-")) {
            char op = peek().text[0];
            SourcePos p = peek().pos;
            advance();
            Expr rhs = multiplicative(what);
            Expr node;
            node.kind = Expr::Kind::binary;
            node.op = op;
            node.pos = p;
            node.args = {std::move(e), std::move(rhs)};
            e = std::move(node);
        }
        return e;
    }

    Expr multiplicative(const std::string& what) {
        Expr e = unary(what);
        while (check_symbol("*") || check_symbol("/")) {
            char op = peek().text[0];
            SourcePos p = peek().pos;
            advance();
            Expr rhs = unary(what);
            Expr node;
            node.kind = Expr::Kind::binary;
            node.op = op;
            node.pos = p;
            node.args = {std::move(e), std::move(rhs)};
            e = std::move(node);
        }
        return e;
    }

    Expr unary(const std::string& what) {
        DepthGuard guard(*this, peek());
        if (check_symbol("-")) {
            SourcePos p = peek().pos;
            advance();
            Expr node;
            node.kind = Expr::Kind::negate;
            node.pos = p;
            node.args = {unary(what)};
            return node;
        }
        return primary(what);
    }

    Expr primary(const std::string& what) {
        DepthGuard guard(*this, peek());
        const Token& t = peek();
        Expr e;
        e.pos = t.pos;
        switch (t.kind) {
        case Token::Kind::number:
            e.kind = Expr::Kind::number;
            e.text = t.text;
            advance();
            return e;
        case Token::Kind::imaginary:
            e.kind = Expr::Kind::imaginary;
            e.text = t.text;
            advance();
            return e;
        case Token::Kind::keyword:
            if (t.text == "i") {
                e.kind = Expr::Kind::unit;
                advance();
                return e;
            }
            if (t.text == "ket" || t.text == "tensor" || t.text == "sqrt" || t.text == "exp")
                return call(advance());
            fail(t, what);
        case Token::Kind::identifier: {
            auto it = syms_.kinds.find(t.text);
            if (it == syms_.kinds.end())
                throw ParseError(at(t.pos) + ": unknown identifier '" + t.text + "'");
            if (it->second != SymbolKind::ket && it->second != SymbolKind::param)
                throw ParseError(at(t.pos) + ": '" + t.text + "' is a " +
                                 kind_name(it->second) +
                                 ", only kets and parameters appear in expressions");
            e.kind = Expr::Kind::ident;
            e.text = t.text;
            advance();
            return e;
        }
        case Token::Kind::symbol:
            if (t.text == "(") {
                advance();
                Expr inner = expression(what);
                expect_symbol(")");
                return inner;
            }
            fail(t, what);
        case Token::Kind::end:
            fail(t, what);
        }
        fail(t, what);
    }

    Expr call(const Token& callee) {
        Expr e;
        e.kind = Expr::Kind::call;
        e.text = callee.text;
        e.pos = callee.pos;
        const std::string arg_what = callee.text == "ket"      ? "a scalar amplitude"
                                     : callee.text == "tensor" ? "a ket expression"
                                                               : "a scalar expression";
        expect_symbol("(");
        for (;;) {
            e.args.push_back(expression(arg_what));
            if (check_symbol(",")) {
                advance();
                continue;
            }
            expect_symbol(")");
            break;
        }
        if (e.text == "tensor" && e.args.size() < 2)
            throw ParseError(at(callee.pos) + ": tensor needs at least two arguments");
        if ((e.text == "sqrt" || e.text == "exp") && e.args.size() != 1)
            throw ParseError(at(callee.pos) + ": " + e.text + " takes exactly one argument");
        return e;
    }

    // --- statements ---

    Statement statement() {
        const Token& t = peek();
        static const std::string lead =
            "a statement keyword (space, system, ket, operator, observable, param, "
            "assume, apply, measure, query, or expect)";
        if (t.kind != Token::Kind::keyword) fail(t, lead);
        if (t.text == "space") return space_decl();
        if (t.text == "system") return system_decl();
        if (t.text == "ket") return ket_decl();
        if (t.text == "operator") return operator_decl();
        if (t.text == "observable") return observable_decl();
        if (t.text == "param") return param_decl();
        if (t.text == "assume") return assume_stmt();
        if (t.text == "apply") return apply_stmt();
        if (t.text == "measure") return measure_stmt();
        if (t.text == "query") return query_stmt();
        if (t.text == "expect") return expect_stmt();
        fail(t, lead);
    }

    Statement space_decl() {
        Statement st;
        st.kind = Statement::Kind::space_decl;
        st.pos = advance().pos;
        st.name = identifier("an identifier").text;
        expect_keyword("dim");
        const Token& n = peek();
        if (n.kind != Token::Kind::number ||
            n.text.find_first_not_of("0123456789") != std::string::npos)
            fail(n, "a positive integer dimension");
        unsigned long long v = std::strtoull(n.text.c_str(), nullptr, 10);
        if (v < 2 || v > 1000000)
            throw ParseError(at(n.pos) + ": space dimension must be between 2 and 1000000");
        advance();
        st.dim = static_cast<std::size_t>(v);
        expect_symbol(";");
        declare(st.name, SymbolKind::space, st.pos);
        return st;
    }

    Statement system_decl() {
        Statement st;
        st.kind = Statement::Kind::system_decl;
        st.pos = advance().pos;
        st.name = identifier("an identifier").text;
        expect_symbol(":");
        const Token& sp = identifier("a space name");
        resolve(sp, SymbolKind::space, "space");
        st.ref = sp.text;
        expect_symbol(";");
        declare(st.name, SymbolKind::system, st.pos);
        return st;
    }

    Statement ket_decl() {
        Statement st;
        st.kind = Statement::Kind::ket_decl;
        st.pos = advance().pos;
        st.name = identifier("an identifier").text;
        if (check_keyword("on")) {
            advance();
            st.names = space_list();
        }
        expect_symbol("=");
        st.expr = expression("a ket expression");
        expect_symbol(";");
        declare(st.name, SymbolKind::ket, st.pos);
        return st;
    }

    Statement operator_decl() {
        Statement st;
        st.kind = Statement::Kind::operator_decl;
        st.pos = advance().pos;
        st.name = identifier("an identifier").text;
        expect_symbol("=");
        if (check_symbol("[")) {
            st.rows = matrix(peek().pos);
        } else {
            const Token& b = identifier("an operator name or a matrix literal");
            resolve(b, SymbolKind::op, "operator");
            st.builtin = b.text;
        }
        expect_symbol(";");
        declare(st.name, SymbolKind::op, st.pos);
        return st;
    }

    std::vector<std::vector<Expr>> matrix(SourcePos open) {
        expect_symbol("[");
        std::vector<std::vector<Expr>> rows;
        for (;;) {
            expect_symbol("[");
            std::vector<Expr> row;
            for (;;) {
                row.push_back(expression("a scalar expression"));
                if (check_symbol(",")) {
                    advance();
                    continue;
                }
                expect_symbol("]");
                break;
            }
            rows.push_back(std::move(row));
            if (check_symbol(",")) {
                advance();
                continue;
            }
            expect_symbol("]");
            break;
        }
        for (const auto& row : rows)
            if (row.size() != rows.size())
                throw ParseError(at(open) + ": operator matrix must be square");
        return rows;
    }

    Statement observable_decl() {
        Statement st;
        st.kind = Statement::Kind::observable_decl;
        st.pos = advance().pos;
        st.name = identifier("an identifier").text;
        expect_keyword("on");
        const Token& sp = identifier("a space name");
        resolve(sp, SymbolKind::space, "space");
        st.ref = sp.text;
        expect_symbol("=");
        st.names = basis_literal();
        expect_symbol(";");
        declare(st.name, SymbolKind::observable, st.pos);
        return st;
    }

    std::vector<std::string> basis_literal() {
        expect_symbol("{");
        std::vector<std::string> names;
        for (;;) {
            const Token& k = identifier("a ket name");
            resolve(k, SymbolKind::ket, "ket");
            names.push_back(k.text);
            if (check_symbol(",")) {
                advance();
                continue;
            }
            expect_symbol("}");
            break;
        }
        return names;
    }

    Statement param_decl() {
        Statement st;
        st.kind = Statement::Kind::param_decl;
        st.pos = advance().pos;
        st.name = identifier("an identifier").text;
        if (check_symbol("=")) {
            advance();
            st.expr = expression("a scalar expression");
        }
        expect_symbol(";");
        declare(st.name, SymbolKind::param, st.pos);
        return st;
    }

    Statement assume_stmt() {
        Statement st;
        st.kind = Statement::Kind::assume;
        st.pos = advance().pos;
        st.names = system_list();
        expect_symbol("|=");
        st.expr = expression("a ket expression");
        expect_symbol(";");
        return st;
    }

    Statement apply_stmt() {
        Statement st;
        st.kind = Statement::Kind::apply;
        st.pos = advance().pos;
        const Token& op = identifier("an operator name");
        resolve(op, SymbolKind::op, "operator");
        st.name = op.text;
        expect_keyword("to");
        st.names = system_list();
        if (check_keyword("as")) {
            SourcePos as_pos = peek().pos;
            advance();
            std::vector<Token> fresh = name_list();
            if (fresh.size() != st.names.size())
                throw ParseError(at(as_pos) + ": expected " + std::to_string(st.names.size()) +
                                 " fresh names after 'as', got " + std::to_string(fresh.size()));
            for (const Token& t : fresh) {
                declare(t.text, SymbolKind::system, t.pos);
                st.as_names.push_back(t.text);
            }
        } else {
            for (const std::string& s : st.names)
                declare(s + "'", SymbolKind::system, st.pos);
        }
        expect_symbol(";");
        return st;
    }

    // a declared observable name, or an inline { k0, k1 } basis
    void observable_ref(Statement& st) {
        if (check_symbol("{")) {
            st.names = basis_literal();
            return;
        }
        const Token& o = identifier("an observable name or a { ... } basis");
        resolve(o, SymbolKind::observable, "observable");
        st.ref = o.text;
    }

    Statement measure_stmt() {
        Statement st;
        st.kind = Statement::Kind::measure;
        st.pos = advance().pos;
        const Token& sys = identifier("a system name");
        resolve(sys, SymbolKind::system, "system");
        st.name = sys.text;
        expect_keyword("with");
        observable_ref(st);
        expect_symbol("->");
        if (check_keyword("chosen")) {
            advance();
            const Token& k = identifier("a ket name");
            resolve(k, SymbolKind::ket, "ket");
            st.chosen = k.text;
        } else if (check_keyword("any")) {
            advance();
            st.any = true;
        } else {
            fail(peek(), "'chosen' or 'any'");
        }
        if (check_keyword("as")) {
            advance();
            const Token& fresh = identifier("a fresh system name");
            declare(fresh.text, SymbolKind::system, fresh.pos);
            st.as_names.push_back(fresh.text);
        } else {
            declare(st.name + "'", SymbolKind::system, st.pos);
        }
        expect_symbol(";");
        return st;
    }

    Statement query_stmt() {
        Statement st;
        st.pos = advance().pos;
        if (check_keyword("possible")) {
            advance();
            st.kind = Statement::Kind::query_possible;
            const Token& sys = identifier("a system name");
            resolve(sys, SymbolKind::system, "system");
            st.name = sys.text;
            expect_keyword("with");
            observable_ref(st);
            expect_symbol(";");
            return st;
        }
        if (check_keyword("verifies")) {
            advance();
            st.kind = Statement::Kind::query_verifies;
            st.names = system_list();
            expect_symbol("|=");
            st.expr = expression("a ket expression");
            expect_symbol(";");
            return st;
        }
        fail(peek(), "'possible' or 'verifies'");
    }

    Statement expect_stmt() {
        Statement st;
        st.kind = Statement::Kind::expect_verifies;
        st.pos = advance().pos;
        expect_keyword("verifies");
        st.names = system_list();
        expect_symbol("|=");
        st.expr = expression("a ket expression");
        expect_symbol(";");
        return st;
    }
};

inline Script parse(std::string_view text, SymbolTable& syms) {
    LexResult lx = lex(text);
    Parser p(std::move(lx.tokens), syms);
    Script script;
    script.statements = p.run();
    script.comments = std::move(lx.comments);
    return script;
}

inline Script parse(std::string_view text) {
    SymbolTable syms = SymbolTable::with_builtins();
    return parse(text, syms);
}

// --- pretty printer ----------------------------------------------------------

inline int expr_prec(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::binary: return (e.op == '+' || e.op == '-') ? 1 : 2;
    case Expr::Kind::negate: return 3;
    default: return 4;
    }
}

inline void print_expr(std::string& out, const Expr& e, int min_prec) {
    bool wrap = expr_prec(e) < min_prec;
    if (wrap) out += '(';
    switch (e.kind) {
    case Expr::Kind::number:
        out += e.text;
        break;
    case Expr::Kind::imaginary:
        out += e.text;
        out += 'i';
        break;
    case Expr::Kind::unit:
        out += 'i';
        break;
    case Expr::Kind::ident:
        out += e.text;
        break;
    case Expr::Kind::call:
        out += e.text;
        out += '(';
        for (std::size_t a = 0; a < e.args.size(); ++a) {
            if (a) out += ", ";
            print_expr(out, e.args[a], 1);
        }
        out += ')';
        break;
    case Expr::Kind::negate:
        out += '-';
        print_expr(out, e.args[0], 3);
        break;
    case Expr::Kind::binary: {
        int p = expr_prec(e);
        print_expr(out, e.args[0], p);
        if (p == 1) {
            out += ' ';
            out += e.op;
            out += ' ';
        } else {
            out += e.op;
        }
        print_expr(out, e.args[1], p + 1);
        break;
    }
    }
    if (wrap) out += ')';
}

inline std::string to_string(const Expr& e) {
    std::string out;
    print_expr(out, e, 1);
    return out;
}

inline std::string list_form(const std::vector<std::string>& names) {
    if (names.size() == 1) return names.front();
    std::string out = "(";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    out += ')';
    return out;
}

inline std::string brace_form(const std::vector<std::string>& names) {
    std::string out = "{ ";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    out += " }";
    return out;
}

inline std::string to_string(const Statement& st) {
    using K = Statement::Kind;
    std::string out;
    switch (st.kind) {
    case K::space_decl:
        out = "space " + st.name + " dim " + std::to_string(st.dim) + ";";
        break;
    case K::system_decl:
        out = "system " + st.name + " : " + st.ref + ";";
        break;
    case K::ket_decl:
        out = "ket " + st.name;
        if (!st.names.empty()) out += " on " + list_form(st.names);
        out += " = " + to_string(*st.expr) + ";";
        break;
    case K::operator_decl:
        out = "operator " + st.name + " = ";
        if (!st.builtin.empty()) {
            out += st.builtin;
        } else {
            out += '[';
            for (std::size_t r = 0; r < st.rows.size(); ++r) {
                if (r) out += ", ";
                out += '[';
                for (std::size_t c = 0; c < st.rows[r].size(); ++c) {
                    if (c) out += ", ";
                    out += to_string(st.rows[r][c]);
                }
                out += ']';
            }
            out += ']';
        }
        out += ";";
        break;
    case K::observable_decl:
        out = "observable " + st.name + " on " + st.ref + " = " + brace_form(st.names) + ";";
        break;
    case K::param_decl:
        out = "param " + st.name;
        if (st.expr) out += " = " + to_string(*st.expr);
        out += ";";
        break;
    case K::assume:
        out = "assume " + list_form(st.names) + " |= " + to_string(*st.expr) + ";";
        break;
    case K::apply:
        out = "apply " + st.name + " to " + list_form(st.names);
        if (!st.as_names.empty()) out += " as " + list_form(st.as_names);
        out += ";";
        break;
    case K::measure:
        out = "measure " + st.name + " with " +
              (st.ref.empty() ? brace_form(st.names) : st.ref) + " -> " +
              (st.any ? "any" : "chosen " + st.chosen);
        if (!st.as_names.empty()) out += " as " + st.as_names.front();
        out += ";";
        break;
    case K::query_possible:
        out = "query possible " + st.name + " with " +
              (st.ref.empty() ? brace_form(st.names) : st.ref) + ";";
        break;
    case K::query_verifies:
        out = "query verifies " + list_form(st.names) + " |= " + to_string(*st.expr) + ";";
        break;
    case K::expect_verifies:
        out = "expect verifies " + list_form(st.names) + " |= " + to_string(*st.expr) + ";";
        break;
    }
    return out;
}

// Canonical rendering: one statement per line, comments kept in their
// original order, own-line comments before the statement they preceded and
// trailing comments appended after it.
inline std::string pretty_print(const Script& script) {
    std::string out;
    std::size_t ci = 0;
    for (const Statement& st : script.statements) {
        while (ci < script.comments.size() && script.comments[ci].own_line &&
               script.comments[ci].line <= st.pos.line) {
            out += '#' + script.comments[ci].text + '\n';
            ++ci;
        }
        out += to_string(st);
        if (ci < script.comments.size() && !script.comments[ci].own_line &&
            script.comments[ci].line == st.pos.line) {
            out += " #" + script.comments[ci].text;
            ++ci;
        }
        out += '\n';
    }
    for (; ci < script.comments.size(); ++ci)
        out += '#' + script.comments[ci].text + '\n';
    return out;
}

// --- script execution ----------------------------------------------------------

struct SpaceVal {
    std::size_t dim = 2;
};
struct SystemVal {
    HandleId id = 0;
};
struct ParamVal {
    Complex value;
};

using Value = std::variant<SpaceVal, SystemVal, ParamVal, Ket, Operator, Observable>;

struct ExpectFailure {
    SourcePos pos;
    std::string message;
};

struct RunOutcome {
    std::vector<std::string> lines; // query and expect answers, in script order
    std::vector<ExpectFailure> failures;
    std::vector<PossibilityQuery> audit_queries;
    bool ok() const { return failures.empty(); }
};

// Executes parsed statements against a Session. Any Error raised while a
// statement runs is rethrown with the statement's line number prefixed, so
// script users see where the engine objected. A runner can serve a whole
// script via run() or one statement at a time (the REPL path).
class ScriptRunner {
public:
    explicit ScriptRunner(SessionOptions opts = {}, std::map<std::string, Complex> bindings = {})
        : session_(opts), bindings_(std::move(bindings)) {
        env_.emplace("qubit", SpaceVal{2});
        env_.emplace("H", gates::hadamard());
        env_.emplace("CNOT", gates::cnot());
        env_.emplace("SX", gates::pauli_x());
        env_.emplace("SZ", gates::pauli_z());
        env_.emplace("ID2", gates::identity(2));
    }

    void run(const Script& script) {
        std::set<std::string> declared;
        for (const Statement& st : script.statements)
            if (st.kind == Statement::Kind::param_decl) declared.insert(st.name);
        for (const auto& [name, value] : bindings_)
            if (!declared.count(name))
                throw BindingError("binding for unknown parameter '" + name + "'");
        for (const Statement& st : script.statements) execute(st);
    }

    std::vector<std::string> execute(const Statement& st) {
        try {
            return dispatch(st);
        } catch (const Error& e) {
            throw Error(e.kind(), "line " + std::to_string(st.pos.line) + ": " + e.what());
        }
    }

    Session& session() { return session_; }
    const Session& session() const { return session_; }
    const RunOutcome& outcome() const { return outcome_; }

    std::optional<HandleId> find_system(const std::string& name) const {
        auto it = env_.find(name);
        if (it == env_.end()) return std::nullopt;
        if (const auto* s = std::get_if<SystemVal>(&it->second)) return s->id;
        return std::nullopt;
    }

    std::optional<Complex> param_value(const std::string& name) const {
        auto it = env_.find(name);
        if (it == env_.end()) return std::nullopt;
        if (const auto* p = std::get_if<ParamVal>(&it->second)) return p->value;
        return std::nullopt;
    }

    const Observable* find_observable(const std::string& name) const {
        auto it = env_.find(name);
        if (it == env_.end()) return nullptr;
        return std::get_if<Observable>(&it->second);
    }

    struct MeasurePreview {
        std::vector<std::string> admissible; // outcome labels the screens allow
        std::optional<std::string> certain;  // label forced by a matching fact
    };

    // Peeks at a measure statement's outcome set without executing it. Empty
    // when the statement is not a measure or its names do not resolve yet;
    // the resolution errors then surface through execute() instead.
    std::optional<MeasurePreview> measure_preview(const Statement& st) const {
        if (st.kind != Statement::Kind::measure) return std::nullopt;
        std::optional<HandleId> h = find_system(st.name);
        if (!h) return std::nullopt;
        try {
            Observable obs = observable_value(st);
            MeasurePreview p;
            for (std::size_t k : session_.possible_outcomes(*h, obs))
                p.admissible.push_back(obs.label(k));
            if (auto forced = session_.forced_outcome(*h, obs)) p.certain = obs.label(*forced);
            return p;
        } catch (const Error&) {
            return std::nullopt;
        }
    }

private:
    Session session_;
    std::map<std::string, Complex> bindings_;
    std::map<std::string, Value> env_;
    RunOutcome outcome_;

    using EvalV = std::variant<Complex, Ket>;

    const Value& lookup(const std::string& name) const {
        auto it = env_.find(name);
        if (it == env_.end())
            throw BindingError("unknown identifier '" + name + "'");
        return it->second;
    }

    std::size_t space_dim(const std::string& name) const {
        const Value& v = lookup(name);
        if (const auto* s = std::get_if<SpaceVal>(&v)) return s->dim;
        throw BindingError("'" + name + "' is not a space");
    }

    HandleId system_id(const std::string& name) const {
        const Value& v = lookup(name);
        if (const auto* s = std::get_if<SystemVal>(&v)) return s->id;
        throw BindingError("'" + name + "' is not a system");
    }

    const Ket& ket_value(const std::string& name) const {
        const Value& v = lookup(name);
        if (const auto* k = std::get_if<Ket>(&v)) return *k;
        throw BindingError("'" + name + "' is not a ket");
    }

    const Operator& operator_value(const std::string& name) const {
        const Value& v = lookup(name);
        if (const auto* o = std::get_if<Operator>(&v)) return *o;
        throw BindingError("'" + name + "' is not an operator");
    }

    Observable observable_value(const Statement& st) const {
        if (!st.ref.empty()) {
            const Value& v = lookup(st.ref);
            if (const auto* o = std::get_if<Observable>(&v)) return *o;
            throw BindingError("'" + st.ref + "' is not an observable");
        }
        std::vector<Ket> basis;
        for (const std::string& id : st.names) {
            const Ket& k = ket_value(id);
            basis.push_back(k.reshaped(SpaceShape::single(k.size())));
        }
        return Observable::make(std::move(basis), st.names);
    }

    std::string observable_text(const Statement& st) const {
        return st.ref.empty() ? brace_form(st.names) : st.ref;
    }

    // subject handles in written order, plus the matching factor dims
    std::pair<std::vector<HandleId>, std::vector<std::size_t>>
    subject_of(const std::vector<std::string>& names) const {
        std::vector<HandleId> ids;
        std::vector<std::size_t> dims;
        for (const std::string& n : names) {
            HandleId h = system_id(n);
            ids.push_back(h);
            dims.push_back(session_.handle(h).dim);
        }
        return {std::move(ids), std::move(dims)};
    }

    Ket shaped_for(const std::vector<std::string>& names, const std::vector<std::size_t>& dims,
                   Ket v) const {
        std::size_t total = 1;
        for (std::size_t d : dims) total *= d;
        if (v.size() != total)
            throw BindingError("vector has dimension " + std::to_string(v.size()) + " but " +
                               list_form(names) + " spans dimension " + std::to_string(total));
        return v.reshaped(SpaceShape(dims));
    }

    static Complex scalar_of(const Expr& e, const EvalV& v, const char* context) {
        if (const auto* s = std::get_if<Complex>(&v)) return *s;
        throw BindingError(std::string(context) + " must be a scalar, got a ket (" +
                           at(e.pos) + ")");
    }

    Ket eval_ket(const Expr& e) {
        EvalV v = eval(e);
        if (auto* k = std::get_if<Ket>(&v)) return std::move(*k);
        throw BindingError("expected a ket, got a scalar (" + at(e.pos) + ")");
    }

    EvalV eval(const Expr& e) {
        switch (e.kind) {
        case Expr::Kind::number:
            return Complex(std::strtod(e.text.c_str(), nullptr), 0);
        case Expr::Kind::imaginary:
            return Complex(0, std::strtod(e.text.c_str(), nullptr));
        case Expr::Kind::unit:
            return Complex(0, 1);
        case Expr::Kind::ident: {
            const Value& v = lookup(e.text);
            if (const auto* p = std::get_if<ParamVal>(&v)) return p->value;
            if (const auto* k = std::get_if<Ket>(&v)) return *k;
            throw BindingError("'" + e.text + "' cannot appear in an expression");
        }
        case Expr::Kind::negate: {
            EvalV v = eval(e.args[0]);
            if (const auto* s = std::get_if<Complex>(&v)) return -*s;
            return std::get<Ket>(v).scaled(Complex(-1, 0));
        }
        case Expr::Kind::call:
            return eval_call(e);
        case Expr::Kind::binary:
            return eval_binary(e);
        }
        throw BindingError("malformed expression");
    }

    EvalV eval_call(const Expr& e) {
        if (e.text == "ket") {
            std::vector<Complex> amps;
            for (const Expr& a : e.args) amps.push_back(scalar_of(a, eval(a), "ket(...) amplitude"));
            std::size_t n = amps.size();
            return Ket(SpaceShape::single(n), std::move(amps));
        }
        if (e.text == "tensor") {
            Ket acc = eval_ket(e.args[0]);
            for (std::size_t a = 1; a < e.args.size(); ++a)
                acc = tensor(acc, eval_ket(e.args[a]));
            return acc;
        }
        if (e.text == "sqrt")
            return std::sqrt(scalar_of(e.args[0], eval(e.args[0]), "sqrt argument"));
        return std::exp(scalar_of(e.args[0], eval(e.args[0]), "exp argument"));
    }

    static Ket ket_sum(const Ket& a, const Ket& b, char op) {
        if (a.size() != b.size())
            throw BindingError(std::string("cannot ") + (op == '+' ? "add" : "subtract") +
                               " kets of dimension " + std::to_string(a.size()) + " and " +
                               std::to_string(b.size()));
        std::vector<Complex> amps(a.amps());
        for (std::size_t k = 0; k < amps.size(); ++k)
            amps[k] = op == '+' ? amps[k] + b.amp(k) : amps[k] - b.amp(k);
        SpaceShape shape = a.shape().dims() == b.shape().dims()
                               ? a.shape()
                               : SpaceShape::single(amps.size());
        return Ket(std::move(shape), std::move(amps));
    }

    EvalV eval_binary(const Expr& e) {
        EvalV a = eval(e.args[0]);
        EvalV b = eval(e.args[1]);
        const auto* sa = std::get_if<Complex>(&a);
        const auto* sb = std::get_if<Complex>(&b);
        switch (e.op) {
        case '+':
        case '-':
            if (sa && sb) return e.op == '+' ? *sa + *sb : *sa - *sb;
            if (!sa && !sb) return ket_sum(std::get<Ket>(a), std::get<Ket>(b), e.op);
            throw BindingError(std::string("cannot apply '") + e.op +
                               "' to a scalar and a ket");
        case '*':
            if (sa && sb) return *sa * *sb;
            if (sa) return std::get<Ket>(b).scaled(*sa);
            if (sb) return std::get<Ket>(a).scaled(*sb);
            throw BindingError("cannot multiply two kets, use tensor(...)");
        case '/':
            if (!sb) throw BindingError("cannot divide by a ket");
            if (*sb == Complex(0, 0)) throw BindingError("division by zero");
            if (sa) return *sa / *sb;
            return std::get<Ket>(a).scaled(Complex(1, 0) / *sb);
        }
        throw BindingError("malformed expression");
    }

    void define(const std::string& name, Value v) {
        auto [it, fresh] = env_.emplace(name, std::move(v));
        if (!fresh)
            throw BindingError("duplicate identifier '" + name + "'");
    }

    std::vector<std::string> dispatch(const Statement& st) {
        using K = Statement::Kind;
        switch (st.kind) {
        case K::space_decl:
            define(st.name, SpaceVal{st.dim});
            return {};
        case K::system_decl: {
            HandleId id = session_.declare_system(space_dim(st.ref), st.name);
            define(st.name, SystemVal{id});
            return {};
        }
        case K::ket_decl: {
            Ket v = eval_ket(*st.expr);
            if (!st.names.empty()) {
                std::vector<std::size_t> dims;
                for (const std::string& sp : st.names) dims.push_back(space_dim(sp));
                std::size_t total = 1;
                for (std::size_t d : dims) total *= d;
                if (v.size() != total)
                    throw BindingError("ket '" + st.name + "' has dimension " +
                                       std::to_string(v.size()) + " but " +
                                       list_form(st.names) + " spans dimension " +
                                       std::to_string(total));
                v = v.reshaped(SpaceShape(dims));
            }
            define(st.name, std::move(v));
            return {};
        }
        case K::operator_decl: {
            if (!st.builtin.empty()) {
                define(st.name, operator_value(st.builtin));
                return {};
            }
            std::size_t n = st.rows.size();
            std::vector<Complex> entries;
            entries.reserve(n * n);
            for (const auto& row : st.rows)
                for (const Expr& cell : row)
                    entries.push_back(scalar_of(cell, eval(cell), "operator entry"));
            define(st.name, Operator(n, std::move(entries)));
            return {};
        }
        case K::observable_decl: {
            std::size_t dim = space_dim(st.ref);
            std::vector<Ket> basis;
            for (const std::string& id : st.names) {
                const Ket& k = ket_value(id);
                if (k.size() != dim)
                    throw BindingError("observable element '" + id + "' has dimension " +
                                       std::to_string(k.size()) + " but space '" + st.ref +
                                       "' has dimension " + std::to_string(dim));
                basis.push_back(k.reshaped(SpaceShape::single(dim)));
            }
            define(st.name, Observable::make(std::move(basis), st.names));
            return {};
        }
        case K::param_decl: {
            Complex value;
            auto bound = bindings_.find(st.name);
            if (bound != bindings_.end()) {
                value = bound->second;
            } else if (st.expr) {
                value = scalar_of(*st.expr, eval(*st.expr), "parameter default");
            } else {
                throw BindingError("parameter '" + st.name + "' is unbound, pass -p " +
                                   st.name + "=<value>");
            }
            define(st.name, ParamVal{value});
            return {};
        }
        case K::assume: {
            auto [ids, dims] = subject_of(st.names);
            session_.assume(ids, shaped_for(st.names, dims, eval_ket(*st.expr)));
            return {};
        }
        case K::apply: {
            const Operator& u = operator_value(st.name);
            auto [ids, dims] = subject_of(st.names);
            std::vector<std::string> fresh = st.as_names;
            if (fresh.empty())
                for (const std::string& s : st.names) fresh.push_back(s + "'");
            std::vector<HandleId> outs = session_.apply_unitary(ids, u, fresh);
            for (std::size_t k = 0; k < outs.size(); ++k)
                define(fresh[k], SystemVal{outs[k]});
            return {};
        }
        case K::measure: {
            HandleId h = system_id(st.name);
            Observable obs = observable_value(st);
            OutcomeChoice choice = OutcomeChoice::any();
            if (!st.chosen.empty()) {
                const Ket& want = ket_value(st.chosen);
                if (want.is_zero())
                    throw BindingError("chosen ket '" + st.chosen + "' is the zero vector");
                Ket flat = want.reshaped(SpaceShape::single(want.size()));
                std::optional<std::size_t> index;
                for (std::size_t k = 0; k < obs.size(); ++k)
                    if (flat.size() == obs.dim() && proportional(obs.element(k), flat))
                        index = k;
                if (!index)
                    throw BindingError("'" + st.chosen + "' does not match any element of " +
                                       observable_text(st));
                choice = OutcomeChoice::chosen(*index);
            }
            std::string post = st.as_names.empty() ? st.name + "'" : st.as_names.front();
            MeasureResult r = session_.measure(h, obs, choice, post);
            define(post, SystemVal{r.post});
            return {};
        }
        case K::query_possible: {
            HandleId h = system_id(st.name);
            Observable obs = observable_value(st);
            std::vector<std::size_t> admissible = session_.possible_outcomes(h, obs);
            std::string label = st.name + " with " + observable_text(st);
            std::string line = "possible(" + label + ") = {";
            for (std::size_t k = 0; k < admissible.size(); ++k) {
                if (k) line += ", ";
                line += obs.label(admissible[k]);
            }
            line += "}";
            outcome_.audit_queries.push_back(
                {h, obs, admissible, session_.events().size(), label});
            outcome_.lines.push_back(line);
            return {line};
        }
        case K::query_verifies: {
            auto [ids, dims] = subject_of(st.names);
            auto derivation =
                session_.verifies(ids, shaped_for(st.names, dims, eval_ket(*st.expr)));
            std::string line =
                "verifies(" + list_form(st.names) + ") = " + (derivation ? "yes" : "no");
            outcome_.lines.push_back(line);
            return {line};
        }
        case K::expect_verifies: {
            auto [ids, dims] = subject_of(st.names);
            auto derivation =
                session_.verifies(ids, shaped_for(st.names, dims, eval_ket(*st.expr)));
            std::string line;
            if (derivation) {
                line = "expect ok (line " + std::to_string(st.pos.line) + "): verifies " +
                       list_form(st.names);
            } else {
                line = "expect FAILED (line " + std::to_string(st.pos.line) + "): " +
                       list_form(st.names) + " does not verify the given vector";
                outcome_.failures.push_back({st.pos, line});
            }
            outcome_.lines.push_back(line);
            return {line};
        }
        }
        return {};
    }
};

} // namespace qml::dsl
