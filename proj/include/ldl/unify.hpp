#pragma once

#include <map>
#include <optional>
#include <string>

#include "ldl/ast.hpp"
#include "ldl/value.hpp"

namespace ldl {

// Name-keyed environments for the lightweight evaluation paths: UDA
// definition templates, comparison-defined test predicates, and program
// transforms. The query engine proper uses compiled slot frames instead.
using Env = std::map<std::string, Value>;

namespace detail {
inline bool is_arith_functor_name(const std::string& f) {
    return f == "+" || f == "-" || f == "*" || f == "/" || f == "mod";
}
}  // namespace detail

inline std::optional<Value> eval_term(const Term& t, const Env& env);

inline bool match_term(const Term& pat, const Value& v, Env& env) {
    switch (pat.kind) {
        case Term::Kind::Var: {
            auto it = env.find(pat.name);
            if (it == env.end()) {
                env.emplace(pat.name, v);
                return true;
            }
            return it->second == v;
        }
        case Term::Kind::Sym:
            return v.kind() == Value::Kind::Sym && v.text() == pat.name;
        case Term::Kind::Str:
            return v.kind() == Value::Kind::Str && v.text() == pat.name;
        case Term::Kind::Int:
            return v.kind() == Value::Kind::Int && v.num() == pat.num;
        case Term::Kind::Flt:
            return v.kind() == Value::Kind::Flt && v.flt() == pat.flt;
        case Term::Kind::Temporal: {
            if (v.kind() != Value::Kind::Int) return false;
            return match_term(Term::var(pat.name), Value::integer(mpz_class(v.num() - 1)), env);
        }
        case Term::Kind::Compound: {
            if (detail::is_arith_functor_name(pat.name) && pat.args.size() == 2) {
                auto ev = eval_term(pat, env);
                return ev && *ev == v;
            }
            if (v.kind() != Value::Kind::Tup || v.text() != pat.name ||
                v.args().size() != pat.args.size())
                return false;
            for (size_t i = 0; i < pat.args.size(); ++i)
                if (!match_term(pat.args[i], v.args()[i], env)) return false;
            return true;
        }
    }
    return false;
}

inline std::optional<Value> eval_term(const Term& t, const Env& env) {
    switch (t.kind) {
        case Term::Kind::Var: {
            auto it = env.find(t.name);
            if (it == env.end()) return std::nullopt;
            return it->second;
        }
        case Term::Kind::Temporal: {
            auto it = env.find(t.name);
            if (it == env.end() || !it->second.is_int()) return std::nullopt;
            return Value::integer(mpz_class(it->second.num() + 1));
        }
        case Term::Kind::Compound: {
            if (detail::is_arith_functor_name(t.name) && t.args.size() == 2) {
                auto a = eval_term(t.args[0], env);
                auto b = eval_term(t.args[1], env);
                if (!a || !b) return std::nullopt;
                return arith(t.name, *a, *b);
            }
            std::vector<Value> args;
            for (auto& sub : t.args) {
                auto v = eval_term(sub, env);
                if (!v) return std::nullopt;
                args.push_back(std::move(*v));
            }
            return Value::tup(t.name, std::move(args));
        }
        default:
            return t.to_value();
    }
}

// Comparison literal under an environment. `=` with exactly one evaluable
// side acts as an assignment and binds the other side (a variable or a
// destructuring pattern).
inline bool eval_comparison(const Comparison& c, Env& env) {
    auto lhs = eval_term(c.lhs, env);
    auto rhs = eval_term(c.rhs, env);
    if (c.op == "=") {
        if (lhs && rhs) return *lhs == *rhs;
        if (lhs && !rhs) return match_term(c.rhs, *lhs, env);
        if (rhs && !lhs) return match_term(c.lhs, *rhs, env);
        return false;
    }
    if (!lhs || !rhs) return false;
    auto r = compare_values(c.op, *lhs, *rhs);
    return r && *r;
}

}  // namespace ldl
