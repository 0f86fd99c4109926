#pragma once

#include <sstream>
#include <string>

#include "ldl/ast.hpp"

namespace ldl {

namespace detail {

inline bool is_arith_functor(const std::string& f) {
    return f == "+" || f == "-" || f == "*" || f == "/" || f == "mod";
}

inline void print_term(std::ostream& out, const Term& t, bool parenthesize_arith = false);

inline void print_args(std::ostream& out, const std::vector<Term>& args) {
    for (size_t i = 0; i < args.size(); ++i) {
        if (i) out << ", ";
        print_term(out, args[i]);
    }
}

inline void print_term(std::ostream& out, const Term& t, bool parenthesize_arith) {
    switch (t.kind) {
        case Term::Kind::Var:
            out << (t.anonymous ? "_" : t.name);
            break;
        case Term::Kind::Sym:
            out << t.name;
            break;
        case Term::Kind::Int:
            out << t.num.get_str();
            break;
        case Term::Kind::Flt: {
            Value v = Value::real(t.flt);
            out << v;
            break;
        }
        case Term::Kind::Str: {
            out << '\'';
            for (char c : t.name) {
                out << c;
                if (c == '\'') out << c;
            }
            out << '\'';
            break;
        }
        case Term::Kind::Temporal:
            out << t.name << "+1";
            break;
        case Term::Kind::Compound:
            if (is_arith_functor(t.name) && t.args.size() == 2) {
                if (parenthesize_arith) out << '(';
                print_term(out, t.args[0], true);
                out << ' ' << t.name << ' ';
                print_term(out, t.args[1], true);
                if (parenthesize_arith) out << ')';
            } else {
                out << t.name << '(';
                print_args(out, t.args);
                out << ')';
            }
            break;
    }
}

}  // namespace detail

inline std::string to_string(const Term& t) {
    std::ostringstream out;
    detail::print_term(out, t);
    return out.str();
}

inline void print_atom(std::ostream& out, const Atom& a) {
    if (a.negated) out << '~';
    out << a.pred;
    if (!a.args.empty()) {
        out << '(';
        detail::print_args(out, a.args);
        out << ')';
    }
}

inline void print_literal(std::ostream& out, const Literal& lit) {
    if (auto* a = as_atom(lit)) {
        print_atom(out, *a);
    } else if (auto* c = as_comparison(lit)) {
        detail::print_term(out, c->lhs);
        out << ' ' << c->op << ' ';
        detail::print_term(out, c->rhs);
    } else if (auto* g = as_choice(lit)) {
        out << "choice((";
        for (size_t i = 0; i < g->left.size(); ++i) out << (i ? ", " : "") << g->left[i];
        out << "), (";
        for (size_t i = 0; i < g->right.size(); ++i) out << (i ? ", " : "") << g->right[i];
        out << "))";
    }
}

inline void print_head(std::ostream& out, const Head& h) {
    out << h.pred;
    if (h.args.empty()) return;
    out << '(';
    for (size_t i = 0; i < h.args.size(); ++i) {
        if (i) out << ", ";
        auto& a = h.args[i];
        if (a.is_agg()) {
            out << a.agg->agg << '<';
            detail::print_term(out, a.agg->arg);
            out << '>';
        } else {
            detail::print_term(out, a.term);
        }
    }
    out << ')';
}

inline std::string to_string(const Rule& r) {
    std::ostringstream out;
    print_head(out, r.head);
    if (!r.body.empty()) {
        out << " <- ";
        for (size_t i = 0; i < r.body.size(); ++i) {
            if (i) out << ", ";
            print_literal(out, r.body[i]);
        }
    }
    out << '.';
    return out.str();
}

inline std::string to_string(const Atom& a) {
    std::ostringstream out;
    print_atom(out, a);
    return out.str();
}

inline std::string print_program(const Program& p) {
    std::ostringstream out;
    if (!p.schema.empty()) {
        out << "database({\n";
        for (size_t i = 0; i < p.schema.size(); ++i) {
            auto& d = p.schema[i];
            out << "    ";
            if (d.source == SchemaDecl::Source::External) out << d.adapter << "::";
            out << d.pred << '(';
            for (size_t j = 0; j < d.columns.size(); ++j) {
                if (j) out << ", ";
                out << d.columns[j].first << ": " << d.columns[j].second;
            }
            out << ')';
            for (auto& [k, v] : d.options) out << ' ' << k << " '" << v << "'";
            out << (i + 1 < p.schema.size() ? ",\n" : "\n");
        }
        out << "}).\n";
    }
    for (auto& f : p.facts) out << to_string(f) << ".\n";
    for (auto& r : p.rules) out << to_string(r) << '\n';
    return out.str();
}

}  // namespace ldl
