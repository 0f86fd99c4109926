#pragma once

#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldl/ast.hpp"

namespace ldl {

struct ParseError : std::runtime_error {
    SourcePos pos;
    ParseError(const std::string& msg, SourcePos p)
        : std::runtime_error(msg + " at " + std::to_string(p.line) + ":" + std::to_string(p.col)),
          pos(p) {}
};

namespace lex {

enum class Tok {
    End, LIdent, UIdent, Int, Flt, Str,
    LPar, RPar, LBrace, RBrace, Comma, Dot, Arrow, ColonColon, Colon,
    Tilde, Eq, Neq, Lt, Le, Gt, Ge, Plus, Minus, Star, Slash,
};

struct Token {
    Tok kind;
    std::string text;
    SourcePos pos;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_ws();
            SourcePos pos{line_, col_};
            if (at_end()) {
                out.push_back({Tok::End, "", pos});
                return out;
            }
            char c = peek();
            if (std::isdigit((unsigned char)c)) {
                out.push_back(number(pos));
            } else if (c == '\'') {
                out.push_back(quoted(pos));
            } else if (std::isalpha((unsigned char)c) || c == '_') {
                std::string id;
                while (!at_end() && (std::isalnum((unsigned char)peek()) || peek() == '_'))
                    id += get();
                bool upper = std::isupper((unsigned char)id[0]) || id[0] == '_';
                out.push_back({upper ? Tok::UIdent : Tok::LIdent, id, pos});
            } else {
                out.push_back(punct(pos));
            }
        }
    }

private:
    bool at_end() const { return i_ >= src_.size(); }
    char peek(size_t k = 0) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }
    char get() {
        char c = src_[i_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_ws() {
        for (;;) {
            while (!at_end() && std::isspace((unsigned char)peek())) get();
            if (!at_end() && peek() == '%') {
                while (!at_end() && peek() != '\n') get();
                continue;
            }
            return;
        }
    }

    Token number(SourcePos pos) {
        std::string s;
        while (!at_end() && std::isdigit((unsigned char)peek())) s += get();
        bool flt = false;
        if (peek() == '.' && std::isdigit((unsigned char)peek(1))) {
            flt = true;
            s += get();
            while (!at_end() && std::isdigit((unsigned char)peek())) s += get();
        }
        if (peek() == 'e' || peek() == 'E') {
            size_t k = 1;
            if (peek(1) == '+' || peek(1) == '-') k = 2;
            if (std::isdigit((unsigned char)peek(k))) {
                flt = true;
                while (k--) s += get();
                while (!at_end() && std::isdigit((unsigned char)peek())) s += get();
            }
        }
        return {flt ? Tok::Flt : Tok::Int, s, pos};
    }

    Token quoted(SourcePos pos) {
        get();  // opening '
        std::string s;
        for (;;) {
            if (at_end()) throw ParseError("unterminated string", pos);
            char c = get();
            if (c == '\'') {
                if (peek() == '\'') {
                    s += get();  // '' escape
                    continue;
                }
                return {Tok::Str, s, pos};
            }
            s += c;
        }
    }

    Token punct(SourcePos pos) {
        char c = get();
        switch (c) {
            case '(': return {Tok::LPar, "(", pos};
            case ')': return {Tok::RPar, ")", pos};
            case '{': return {Tok::LBrace, "{", pos};
            case '}': return {Tok::RBrace, "}", pos};
            case ',': return {Tok::Comma, ",", pos};
            case '.': return {Tok::Dot, ".", pos};
            case '+': return {Tok::Plus, "+", pos};
            case '-': return {Tok::Minus, "-", pos};
            case '*': return {Tok::Star, "*", pos};
            case '/': return {Tok::Slash, "/", pos};
            case '=': return {Tok::Eq, "=", pos};
            case '~':
                if (peek() == '=') {
                    get();
                    return {Tok::Neq, "~=", pos};
                }
                return {Tok::Tilde, "~", pos};
            case '<':
                if (peek() == '-') {
                    get();
                    return {Tok::Arrow, "<-", pos};
                }
                if (peek() == '=') {
                    get();
                    return {Tok::Le, "<=", pos};
                }
                return {Tok::Lt, "<", pos};
            case '>':
                if (peek() == '=') {
                    get();
                    return {Tok::Ge, ">=", pos};
                }
                return {Tok::Gt, ">", pos};
            case ':':
                if (peek() == ':') {
                    get();
                    return {Tok::ColonColon, "::", pos};
                }
                return {Tok::Colon, ":", pos};
            case '!':
                if (peek() == '=') {
                    get();
                    return {Tok::Neq, "~=", pos};
                }
                break;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos);
    }

    const std::string& src_;
    size_t i_ = 0;
    int line_ = 1, col_ = 1;
};

}  // namespace lex

// Recursive-descent parser for the .ldl surface syntax:
//   head <- g1, ~g2, X > 3, choice((X),(Y)).
//   fact(a, 'two', 3).
//   davg(D, avg<S>) <- employee(E, S, D).
//   database({ ns::rel(COL: int, ...) from server use db, ... }).
class Parser {
public:
    explicit Parser(const std::string& src) : toks_(lex::Lexer(src).run()) {}

    Program parse_program() {
        Program p;
        while (!at(lex::Tok::End)) {
            if (at(lex::Tok::LIdent) && cur().text == "database" && next_is(lex::Tok::LPar))
                parse_database(p);
            else
                parse_clause(p);
        }
        check_arities(p);
        return p;
    }

    // A single `head <- body.` / `fact.` clause, for REPL use.
    Rule parse_single_clause() {
        Program p;
        parse_clause(p);
        if (!at(lex::Tok::End)) throw ParseError("trailing input after clause", cur().pos);
        if (!p.rules.empty()) return p.rules[0];
        Rule r;
        r.head = head_from_atom(p.facts.at(0));
        return r;
    }

private:
    const lex::Token& cur() const { return toks_[i_]; }
    bool at(lex::Tok k) const { return cur().kind == k; }
    bool next_is(lex::Tok k) const { return i_ + 1 < toks_.size() && toks_[i_ + 1].kind == k; }
    const lex::Token& advance() { return toks_[i_++]; }
    const lex::Token& expect(lex::Tok k, const char* what) {
        if (!at(k)) throw ParseError(std::string("expected ") + what, cur().pos);
        return advance();
    }

    void parse_clause(Program& p) {
        anon_counter_ = 0;
        SourcePos pos = cur().pos;
        Head head = parse_head();
        Rule r;
        r.head = head;
        r.pos = pos;
        if (at(lex::Tok::Arrow)) {
            advance();
            r.body.push_back(parse_literal());
            while (at(lex::Tok::Comma)) {
                advance();
                r.body.push_back(parse_literal());
            }
        }
        expect(lex::Tok::Dot, "'.'");
        if (r.is_fact_shape()) {
            Atom a = r.head.plain_atom();
            bool ground = true;
            for (auto& t : a.args)
                if (!t.is_const()) ground = false;
            if (ground && !is_uda_template_pred(a.pred)) {
                p.facts.push_back(std::move(a));
                return;
            }
        }
        p.rules.push_back(std::move(r));
    }

    Head parse_head() {
        const auto& t = expect(lex::Tok::LIdent, "predicate name");
        Head h;
        h.pred = t.text;
        if (!at(lex::Tok::LPar)) return h;
        advance();
        if (!at(lex::Tok::RPar)) {
            h.args.push_back(parse_head_arg());
            while (at(lex::Tok::Comma)) {
                advance();
                h.args.push_back(parse_head_arg());
            }
        }
        expect(lex::Tok::RPar, "')'");
        fix_temporal(h);
        return h;
    }

    HeadArg parse_head_arg() {
        if (at(lex::Tok::LIdent) && next_is(lex::Tok::Lt)) {
            AggSpec spec;
            spec.agg = advance().text;
            advance();  // <
            spec.arg = parse_expr();
            expect(lex::Tok::Gt, "'>' closing aggregate");
            return HeadArg{spec, Term()};
        }
        return HeadArg{std::nullopt, parse_expr()};
    }

    Literal parse_literal() {
        if (at(lex::Tok::LIdent) && cur().text == "choice" && next_is(lex::Tok::LPar))
            return parse_choice();
        if (at(lex::Tok::Tilde)) {
            SourcePos pos = cur().pos;
            advance();
            Atom a = parse_atom();
            a.negated = true;
            (void)pos;
            return a;
        }
        SourcePos pos = cur().pos;
        Term lhs = parse_expr();
        if (at(lex::Tok::Eq) || at(lex::Tok::Neq) || at(lex::Tok::Lt) || at(lex::Tok::Le) ||
            at(lex::Tok::Gt) || at(lex::Tok::Ge)) {
            Comparison c;
            c.op = advance().text;
            c.lhs = lhs;
            c.rhs = parse_expr();
            return c;
        }
        // must be a plain atom
        if (lhs.kind == Term::Kind::Sym) {
            Atom a;
            a.pred = lhs.name;
            return finish_atom(a);
        }
        if (lhs.kind == Term::Kind::Compound && !lhs.name.empty()) {
            Atom a;
            a.pred = lhs.name;
            a.args = lhs.args;
            return finish_atom(a);
        }
        throw ParseError("expected a goal", pos);
    }

    Atom finish_atom(Atom a) {
        if (!a.args.empty() && a.args[0].kind == Term::Kind::Compound && a.args[0].name == "+" &&
            a.args[0].args.size() == 2 && a.args[0].args[0].is_var() &&
            a.args[0].args[1].kind == Term::Kind::Int && a.args[0].args[1].num == 1) {
            a.args[0] = Term::temporal(a.args[0].args[0].name);
        }
        return a;
    }

    void fix_temporal(Head& h) {
        if (h.args.empty() || h.args[0].is_agg()) return;
        Term& t = h.args[0].term;
        if (t.kind == Term::Kind::Compound && t.name == "+" && t.args.size() == 2 &&
            t.args[0].is_var() && t.args[1].kind == Term::Kind::Int && t.args[1].num == 1)
            t = Term::temporal(t.args[0].name);
    }

    Atom parse_atom() {
        const auto& t = expect(lex::Tok::LIdent, "predicate name");
        Atom a;
        a.pred = t.text;
        if (at(lex::Tok::LPar)) {
            advance();
            if (!at(lex::Tok::RPar)) {
                a.args.push_back(parse_expr());
                while (at(lex::Tok::Comma)) {
                    advance();
                    a.args.push_back(parse_expr());
                }
            }
            expect(lex::Tok::RPar, "')'");
        }
        return finish_atom(a);
    }

    Literal parse_choice() {
        SourcePos pos = cur().pos;
        advance();  // choice
        expect(lex::Tok::LPar, "'('");
        ChoiceGoal g;
        g.left = parse_var_list();
        expect(lex::Tok::Comma, "','");
        g.right = parse_var_list();
        expect(lex::Tok::RPar, "')'");
        if (g.right.empty())
            throw ParseError("the right side of a choice goal cannot be empty", pos);
        for (auto& l : g.left)
            for (auto& r : g.right)
                if (l == r)
                    throw ParseError("choice goal sides must be disjoint (variable " + l + ")", pos);
        return g;
    }

    std::vector<std::string> parse_var_list() {
        expect(lex::Tok::LPar, "'('");
        std::vector<std::string> vars;
        if (!at(lex::Tok::RPar)) {
            vars.push_back(expect(lex::Tok::UIdent, "variable").text);
            while (at(lex::Tok::Comma)) {
                advance();
                vars.push_back(expect(lex::Tok::UIdent, "variable").text);
            }
        }
        expect(lex::Tok::RPar, "')'");
        return vars;
    }

    // expr := mul (('+'|'-') mul)*
    Term parse_expr() {
        Term t = parse_mul();
        while (at(lex::Tok::Plus) || at(lex::Tok::Minus)) {
            std::string op = advance().text;
            Term rhs = parse_mul();
            t = Term::compound(op, {t, rhs});
        }
        return t;
    }

    Term parse_mul() {
        Term t = parse_primary();
        for (;;) {
            std::string op;
            if (at(lex::Tok::Star))
                op = "*";
            else if (at(lex::Tok::Slash))
                op = "/";
            else if (at(lex::Tok::LIdent) && cur().text == "mod")
                op = "mod";
            else
                break;
            advance();
            Term rhs = parse_primary();
            t = Term::compound(op, {t, rhs});
        }
        return t;
    }

    Term parse_primary() {
        const auto& t = cur();
        switch (t.kind) {
            case lex::Tok::Int: {
                advance();
                return Term::integer(mpz_class(t.text, 10));
            }
            case lex::Tok::Flt: {
                advance();
                return Term::real(std::stod(t.text));
            }
            case lex::Tok::Minus: {
                advance();
                Term inner = parse_primary();
                if (inner.kind == Term::Kind::Int) {
                    inner.num = -inner.num;
                    return inner;
                }
                if (inner.kind == Term::Kind::Flt) {
                    inner.flt = -inner.flt;
                    return inner;
                }
                return Term::compound("-", {Term::integer(0), inner});
            }
            case lex::Tok::Str: {
                advance();
                return Term::str(t.text);
            }
            case lex::Tok::UIdent: {
                advance();
                if (t.text == "_")
                    return Term::var("$_" + std::to_string(++anon_counter_), true);
                return Term::var(t.text);
            }
            case lex::Tok::LIdent: {
                advance();
                if (at(lex::Tok::LPar)) {
                    advance();
                    std::vector<Term> args;
                    if (!at(lex::Tok::RPar)) {
                        args.push_back(parse_expr());
                        while (at(lex::Tok::Comma)) {
                            advance();
                            args.push_back(parse_expr());
                        }
                    }
                    expect(lex::Tok::RPar, "')'");
                    return Term::compound(t.text, std::move(args));
                }
                return Term::sym(t.text);
            }
            case lex::Tok::LPar: {
                advance();
                Term first = parse_expr();
                if (at(lex::Tok::Comma)) {
                    std::vector<Term> items{first};
                    while (at(lex::Tok::Comma)) {
                        advance();
                        items.push_back(parse_expr());
                    }
                    expect(lex::Tok::RPar, "')'");
                    return Term::compound("", std::move(items));
                }
                expect(lex::Tok::RPar, "')'");
                return first;
            }
            default:
                throw ParseError("expected a term", t.pos);
        }
    }

    void parse_database(Program& p) {
        advance();  // database
        expect(lex::Tok::LPar, "'('");
        expect(lex::Tok::LBrace, "'{'");
        for (;;) {
            p.schema.push_back(parse_schema_decl());
            if (at(lex::Tok::Comma)) {
                advance();
                continue;
            }
            break;
        }
        expect(lex::Tok::RBrace, "'}'");
        expect(lex::Tok::RPar, "')'");
        expect(lex::Tok::Dot, "'.'");
    }

    SchemaDecl parse_schema_decl() {
        SchemaDecl d;
        std::string first = expect(lex::Tok::LIdent, "relation name").text;
        if (at(lex::Tok::ColonColon)) {
            advance();
            d.source = SchemaDecl::Source::External;
            d.adapter = first;
            d.pred = expect(lex::Tok::LIdent, "relation name").text;
        } else {
            d.pred = first;
        }
        d.table = d.pred;
        expect(lex::Tok::LPar, "'('");
        for (;;) {
            std::string col;
            if (at(lex::Tok::UIdent) || at(lex::Tok::LIdent))
                col = advance().text;
            else
                throw ParseError("expected column name", cur().pos);
            expect(lex::Tok::Colon, "':'");
            std::string ty = expect(lex::Tok::LIdent, "column type").text;
            if (at(lex::Tok::LPar)) {  // char(30) and friends
                advance();
                expect(lex::Tok::Int, "size");
                expect(lex::Tok::RPar, "')'");
            }
            if (ty == "char" || ty == "varchar" || ty == "text") ty = "string";
            if (ty == "integer") ty = "int";
            if (ty == "real" || ty == "double") ty = "float";
            if (ty != "int" && ty != "float" && ty != "string" && ty != "any")
                throw ParseError("unknown column type '" + ty + "'", cur().pos);
            d.columns.emplace_back(col, ty);
            if (at(lex::Tok::Comma)) {
                advance();
                continue;
            }
            break;
        }
        expect(lex::Tok::RPar, "')'");
        while (at(lex::Tok::LIdent)) {  // from <server> use <db> user_name 'x' ...
            std::string key = advance().text;
            std::string val;
            if (at(lex::Tok::LIdent) || at(lex::Tok::UIdent) || at(lex::Tok::Str) ||
                at(lex::Tok::Int))
                val = advance().text;
            else
                throw ParseError("expected a value after '" + key + "'", cur().pos);
            d.options[key] = val;
        }
        return d;
    }

    void check_arities(const Program& p) {
        std::map<std::string, size_t> arity;
        auto see = [&](const std::string& pred, size_t n, SourcePos pos) {
            auto it = arity.find(pred);
            if (it == arity.end()) {
                arity[pred] = n;
            } else if (it->second != n) {
                throw ParseError("arity mismatch for predicate '" + pred + "': " +
                                     std::to_string(it->second) + " vs " + std::to_string(n),
                                 pos);
            }
        };
        for (auto& d : p.schema) see(d.pred, d.columns.size(), SourcePos{});
        for (auto& f : p.facts) see(f.pred, f.args.size(), SourcePos{});
        for (auto& r : p.rules) {
            see(r.head.pred, r.head.args.size(), r.pos);
            for (auto& lit : r.body)
                if (auto* a = as_atom(lit)) see(a->pred, a->args.size(), r.pos);
        }
    }

    std::vector<lex::Token> toks_;
    size_t i_ = 0;
    int anon_counter_ = 0;
};

inline Program parse_program(const std::string& text) { return Parser(text).parse_program(); }

}  // namespace ldl
