#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ldl/value.hpp"

namespace ldl {

struct SourcePos {
    int line = 0;
    int col = 0;
};

// Terms cover variables, constants, compounds (functor "" is the plain
// tuple syntax `(a, b)`), arithmetic expressions (functors + - * / mod),
// and the postfix-successor form `J+1` in a temporal position.
struct Term {
    enum class Kind { Var, Sym, Int, Flt, Str, Compound, Temporal };

    Kind kind = Kind::Sym;
    std::string name;  // var name / symbol / string text / functor / temporal base
    mpz_class num;
    double flt = 0;
    std::vector<Term> args;
    bool anonymous = false;  // `_` occurrence, fresh per use

    static Term var(std::string n, bool anon = false) {
        Term t;
        t.kind = Kind::Var;
        t.name = std::move(n);
        t.anonymous = anon;
        return t;
    }
    static Term sym(std::string n) {
        Term t;
        t.kind = Kind::Sym;
        t.name = std::move(n);
        return t;
    }
    static Term integer(mpz_class n) {
        Term t;
        t.kind = Kind::Int;
        t.num = std::move(n);
        return t;
    }
    static Term integer(long n) { return integer(mpz_class(n)); }
    static Term real(double d) {
        Term t;
        t.kind = Kind::Flt;
        t.flt = d;
        return t;
    }
    static Term str(std::string s) {
        Term t;
        t.kind = Kind::Str;
        t.name = std::move(s);
        return t;
    }
    static Term compound(std::string functor, std::vector<Term> args) {
        Term t;
        t.kind = Kind::Compound;
        t.name = std::move(functor);
        t.args = std::move(args);
        return t;
    }
    static Term temporal(std::string base) {  // base + 1
        Term t;
        t.kind = Kind::Temporal;
        t.name = std::move(base);
        return t;
    }

    bool is_var() const { return kind == Kind::Var; }
    bool is_const() const {
        switch (kind) {
            case Kind::Sym:
            case Kind::Int:
            case Kind::Flt:
            case Kind::Str:
                return true;
            case Kind::Compound: {
                for (auto& a : args)
                    if (!a.is_const()) return false;
                return true;
            }
            default:
                return false;
        }
    }

    int compare(const Term& o) const {
        if (kind != o.kind) return kind < o.kind ? -1 : 1;
        switch (kind) {
            case Kind::Int: {
                int c = cmp(num, o.num);
                return c < 0 ? -1 : (c > 0 ? 1 : 0);
            }
            case Kind::Flt:
                return flt < o.flt ? -1 : (flt > o.flt ? 1 : 0);
            default: {
                if (int c = name.compare(o.name)) return c < 0 ? -1 : 1;
                if (args.size() != o.args.size()) return args.size() < o.args.size() ? -1 : 1;
                for (size_t i = 0; i < args.size(); ++i)
                    if (int c = args[i].compare(o.args[i])) return c;
                return 0;
            }
        }
    }
    bool operator==(const Term& o) const { return compare(o) == 0; }
    bool operator<(const Term& o) const { return compare(o) < 0; }

    void collect_vars(std::vector<std::string>& out) const {
        if (kind == Kind::Var || kind == Kind::Temporal) {
            out.push_back(name);
        } else {
            for (auto& a : args) a.collect_vars(out);
        }
    }

    std::optional<Value> to_value() const {
        switch (kind) {
            case Kind::Sym:
                return Value::sym(name);
            case Kind::Int:
                return Value::integer(num);
            case Kind::Flt:
                return Value::real(flt);
            case Kind::Str:
                return Value::str(name);
            case Kind::Compound: {
                std::vector<Value> vs;
                for (auto& a : args) {
                    auto v = a.to_value();
                    if (!v) return std::nullopt;
                    vs.push_back(std::move(*v));
                }
                return Value::tup(name, std::move(vs));
            }
            default:
                return std::nullopt;
        }
    }
};

inline Term term_from_value(const Value& v) {
    switch (v.kind()) {
        case Value::Kind::Sym:
            return Term::sym(v.text());
        case Value::Kind::Int:
            return Term::integer(v.num());
        case Value::Kind::Flt:
            return Term::real(v.flt());
        case Value::Kind::Str:
            return Term::str(v.text());
        case Value::Kind::Tup: {
            std::vector<Term> args;
            for (auto& a : v.args()) args.push_back(term_from_value(a));
            return Term::compound(v.text(), std::move(args));
        }
    }
    return Term::sym("?");
}

struct Atom {
    std::string pred;
    std::vector<Term> args;
    bool negated = false;

    bool operator==(const Atom& o) const {
        return pred == o.pred && negated == o.negated && args == o.args;
    }
};

struct Comparison {
    std::string op;  // = ~= < <= > >=
    Term lhs, rhs;

    bool operator==(const Comparison& o) const {
        return op == o.op && lhs == o.lhs && rhs == o.rhs;
    }
};

struct ChoiceGoal {
    std::vector<std::string> left, right;

    bool operator==(const ChoiceGoal& o) const { return left == o.left && right == o.right; }
};

using Literal = std::variant<Atom, Comparison, ChoiceGoal>;

inline const Atom* as_atom(const Literal& l) { return std::get_if<Atom>(&l); }
inline const Comparison* as_comparison(const Literal& l) { return std::get_if<Comparison>(&l); }
inline const ChoiceGoal* as_choice(const Literal& l) { return std::get_if<ChoiceGoal>(&l); }

// `name<Arg>` in a head argument position.
struct AggSpec {
    std::string agg;
    Term arg;

    bool operator==(const AggSpec& o) const { return agg == o.agg && arg == o.arg; }
};

struct HeadArg {
    std::optional<AggSpec> agg;
    Term term;  // unused when agg is set

    bool is_agg() const { return agg.has_value(); }
    bool operator==(const HeadArg& o) const { return agg == o.agg && (agg ? true : term == o.term); }
};

struct Head {
    std::string pred;
    std::vector<HeadArg> args;

    bool has_aggregates() const {
        for (auto& a : args)
            if (a.is_agg()) return true;
        return false;
    }
    Atom plain_atom() const {  // only valid when !has_aggregates()
        Atom a;
        a.pred = pred;
        for (auto& h : args) a.args.push_back(h.term);
        return a;
    }
    bool operator==(const Head& o) const { return pred == o.pred && args == o.args; }
};

inline Head head_from_atom(const Atom& a) {
    Head h;
    h.pred = a.pred;
    for (auto& t : a.args) h.args.push_back(HeadArg{std::nullopt, t});
    return h;
}

struct Rule {
    Head head;
    std::vector<Literal> body;
    SourcePos pos;

    bool is_fact_shape() const { return body.empty() && !head.has_aggregates(); }
    bool operator==(const Rule& o) const { return head == o.head && body == o.body; }
};

struct SchemaDecl {
    enum class Source { Internal, External };
    std::string pred;
    std::vector<std::pair<std::string, std::string>> columns;  // name -> {int,float,string,any}
    Source source = Source::Internal;
    std::string adapter;  // External: the `ns::` prefix
    std::string table;    // External: remote table name (defaults to pred)
    std::map<std::string, std::string> options;  // from/use/user_name/... accepted, kept verbatim
};

struct Program {
    std::vector<Rule> rules;
    std::vector<SchemaDecl> schema;
    std::vector<Atom> facts;  // ground bodyless clauses

    const SchemaDecl* schema_for(const std::string& pred) const {
        for (auto& s : schema)
            if (s.pred == pred) return &s;
        return nullptr;
    }
};

// Predicates reserved for UDA definition rules; these are templates applied
// by the aggregate runtime, never evaluated as ordinary relations.
inline bool is_uda_template_pred(const std::string& p) {
    return p == "single" || p == "multi" || p == "ereturn" || p == "freturn";
}

// Predicates defined entirely by comparison bodies (the paper's
// distinct/select_larger style). They are evaluated by substitution at the
// call site, like a guarded builtin, rather than materialized.
inline std::set<std::string> comparison_defined_preds(const Program& p) {
    std::map<std::string, bool> eligible;
    for (auto& f : p.facts) eligible[f.pred] = false;
    for (auto& r : p.rules) {
        if (is_uda_template_pred(r.head.pred)) continue;
        bool pure = !r.head.has_aggregates() && !r.body.empty();
        for (auto& lit : r.body)
            if (!as_comparison(lit)) pure = false;
        auto it = eligible.find(r.head.pred);
        if (it == eligible.end())
            eligible[r.head.pred] = pure;
        else
            it->second = it->second && pure;
    }
    std::set<std::string> out;
    for (auto& [pred, ok] : eligible)
        if (ok) out.insert(pred);
    return out;
}

inline std::vector<std::string> rule_body_vars(const Rule& r) {
    std::vector<std::string> vars;
    for (auto& lit : r.body) {
        if (auto* a = as_atom(lit)) {
            for (auto& t : a->args) t.collect_vars(vars);
        } else if (auto* c = as_comparison(lit)) {
            c->lhs.collect_vars(vars);
            c->rhs.collect_vars(vars);
        } else if (auto* ch = as_choice(lit)) {
            for (auto& v : ch->left) vars.push_back(v);
            for (auto& v : ch->right) vars.push_back(v);
        }
    }
    return vars;
}

// --- structural equality modulo variable renaming ------------------------
//
// Used by transform tests and golden comparisons: a bijection over variable
// names (and optionally over predicate names) must make the rules equal.

namespace detail {

class RenameMap {
public:
    bool bind(const std::string& a, const std::string& b) {
        auto it = fwd_.find(a);
        if (it != fwd_.end()) return it->second == b;
        auto jt = rev_.find(b);
        if (jt != rev_.end()) return false;
        fwd_[a] = b;
        rev_[b] = a;
        return true;
    }

private:
    std::map<std::string, std::string> fwd_, rev_;
};

inline bool terms_match(const Term& a, const Term& b, RenameMap& vars) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Term::Kind::Var:
        case Term::Kind::Temporal:
            return vars.bind(a.name, b.name);
        case Term::Kind::Int:
            return a.num == b.num;
        case Term::Kind::Flt:
            return a.flt == b.flt;
        default: {
            if (a.name != b.name || a.args.size() != b.args.size()) return false;
            for (size_t i = 0; i < a.args.size(); ++i)
                if (!terms_match(a.args[i], b.args[i], vars)) return false;
            return true;
        }
    }
}

inline bool preds_match(const std::string& a, const std::string& b,
                        const std::map<std::string, std::string>* pred_map) {
    if (!pred_map) return a == b;
    auto it = pred_map->find(a);
    return it == pred_map->end() ? a == b : it->second == b;
}

}  // namespace detail

inline bool rules_equal_modulo_renaming(const Rule& a, const Rule& b,
                                        const std::map<std::string, std::string>* pred_map = nullptr) {
    if (a.body.size() != b.body.size()) return false;
    detail::RenameMap vars;
    if (!detail::preds_match(a.head.pred, b.head.pred, pred_map)) return false;
    if (a.head.args.size() != b.head.args.size()) return false;
    for (size_t i = 0; i < a.head.args.size(); ++i) {
        auto &x = a.head.args[i], &y = b.head.args[i];
        if (x.is_agg() != y.is_agg()) return false;
        if (x.is_agg()) {
            if (x.agg->agg != y.agg->agg) return false;
            if (!detail::terms_match(x.agg->arg, y.agg->arg, vars)) return false;
        } else if (!detail::terms_match(x.term, y.term, vars)) {
            return false;
        }
    }
    for (size_t i = 0; i < a.body.size(); ++i) {
        auto &x = a.body[i], &y = b.body[i];
        if (x.index() != y.index()) return false;
        if (auto* ax = as_atom(x)) {
            auto* ay = as_atom(y);
            if (ax->negated != ay->negated) return false;
            if (!detail::preds_match(ax->pred, ay->pred, pred_map)) return false;
            if (ax->args.size() != ay->args.size()) return false;
            for (size_t j = 0; j < ax->args.size(); ++j)
                if (!detail::terms_match(ax->args[j], ay->args[j], vars)) return false;
        } else if (auto* cx = as_comparison(x)) {
            auto* cy = as_comparison(y);
            if (cx->op != cy->op) return false;
            if (!detail::terms_match(cx->lhs, cy->lhs, vars)) return false;
            if (!detail::terms_match(cx->rhs, cy->rhs, vars)) return false;
        } else {
            auto *gx = as_choice(x), *gy = as_choice(y);
            if (gx->left.size() != gy->left.size() || gx->right.size() != gy->right.size())
                return false;
            for (size_t j = 0; j < gx->left.size(); ++j)
                if (!vars.bind(gx->left[j], gy->left[j])) return false;
            for (size_t j = 0; j < gx->right.size(); ++j)
                if (!vars.bind(gx->right[j], gy->right[j])) return false;
        }
    }
    return true;
}

inline bool programs_equal_modulo_renaming(const std::vector<Rule>& a, const std::vector<Rule>& b,
                                           const std::map<std::string, std::string>* pred_map = nullptr) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!rules_equal_modulo_renaming(a[i], b[i], pred_map)) return false;
    return true;
}

}  // namespace ldl
