#pragma once

#include <set>
#include <string>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/printer.hpp"

namespace ldl {

inline void collect_named_vars(const Term& t, std::vector<std::string>& out) {
    if (t.kind == Term::Kind::Var || t.kind == Term::Kind::Temporal) {
        if (!t.anonymous) out.push_back(t.name);
    } else {
        for (auto& a : t.args) collect_named_vars(a, out);
    }
}

// Range restriction. Positive atoms bind their variables (including inside
// destructurable compounds and temporal terms); `=` comparisons propagate
// bindings. Head variables, named variables under negation, comparison
// operands, choice variables, and arithmetic atom arguments must end up
// bound. Variables that occur only anonymously inside a negated goal are
// existential and exempt.
inline std::vector<std::string> check_safety(const Program& p) {
    std::vector<std::string> diags;
    std::set<std::string> testpreds = comparison_defined_preds(p);

    auto bindable = [](const Term& t, std::set<std::string>& out, auto&& self) -> void {
        switch (t.kind) {
            case Term::Kind::Var:
            case Term::Kind::Temporal:
                out.insert(t.name);
                break;
            case Term::Kind::Compound:
                if (!detail::is_arith_functor(t.name))
                    for (auto& a : t.args) self(a, out, self);
                break;
            default:
                break;
        }
    };
    auto requires_of = [](const Term& t, std::set<std::string>& out, auto&& self) -> void {
        if (t.kind == Term::Kind::Compound && detail::is_arith_functor(t.name)) {
            std::vector<std::string> vs;
            t.collect_vars(vs);
            out.insert(vs.begin(), vs.end());
        } else {
            for (auto& a : t.args) self(a, out, self);
        }
    };

    for (auto& r : p.rules) {
        if (is_uda_template_pred(r.head.pred)) continue;
        bool test_rule = testpreds.count(r.head.pred) > 0;

        std::set<std::string> bound;
        std::set<std::string> required;
        if (test_rule) {
            std::vector<std::string> hv;
            for (auto& a : r.head.args)
                if (!a.is_agg()) a.term.collect_vars(hv);
            bound.insert(hv.begin(), hv.end());
        }

        for (auto& lit : r.body) {
            if (auto* a = as_atom(lit)) {
                if (a->negated) continue;
                for (auto& t : a->args) {
                    bindable(t, bound, bindable);
                    requires_of(t, required, requires_of);
                }
            }
        }
        // propagate `=` assignments until stable
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto& lit : r.body) {
                auto* c = as_comparison(lit);
                if (!c || c->op != "=") continue;
                auto side_vars = [](const Term& t) {
                    std::vector<std::string> v;
                    t.collect_vars(v);
                    return v;
                };
                auto all_bound = [&](const std::vector<std::string>& vs) {
                    for (auto& v : vs)
                        if (!bound.count(v)) return false;
                    return true;
                };
                auto lv = side_vars(c->lhs), rv = side_vars(c->rhs);
                if (all_bound(lv) && !all_bound(rv)) {
                    for (auto& v : rv)
                        if (bound.insert(v).second) changed = true;
                } else if (all_bound(rv) && !all_bound(lv)) {
                    for (auto& v : lv)
                        if (bound.insert(v).second) changed = true;
                }
            }
        }

        auto complain = [&](const std::string& var, const std::string& where) {
            diags.push_back("rule '" + to_string(r) + "': variable " + var + " " + where);
        };

        for (auto& a : r.head.args) {
            std::vector<std::string> hv;
            if (a.is_agg())
                a.agg->arg.collect_vars(hv);
            else
                a.term.collect_vars(hv);
            for (auto& v : hv)
                if (!bound.count(v)) complain(v, "in the head is not bound by a positive goal");
        }
        for (auto& v : required)
            if (!bound.count(v))
                complain(v, "in an arithmetic argument is not bound by a positive goal");
        for (auto& lit : r.body) {
            if (auto* a = as_atom(lit)) {
                if (!a->negated) continue;
                for (auto& t : a->args) {
                    std::vector<std::string> vs;
                    collect_named_vars(t, vs);
                    for (auto& v : vs)
                        if (!bound.count(v))
                            complain(v, "appears only in a negated goal");
                }
            } else if (auto* c = as_comparison(lit)) {
                std::vector<std::string> vs;
                c->lhs.collect_vars(vs);
                c->rhs.collect_vars(vs);
                for (auto& v : vs)
                    if (!bound.count(v)) complain(v, "in a comparison is not bound");
            } else if (auto* g = as_choice(lit)) {
                for (auto& v : g->left)
                    if (!bound.count(v)) complain(v, "in a choice goal is not bound");
                for (auto& v : g->right)
                    if (!bound.count(v)) complain(v, "in a choice goal is not bound");
            }
        }
    }
    return diags;
}

}  // namespace ldl
