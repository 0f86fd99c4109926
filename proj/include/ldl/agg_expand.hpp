#pragma once

#include <set>
#include <string>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/uda.hpp"

namespace ldl {

// Rewrites every aggregate invocation rule into the logic-level program:
// chain rules ordering the fed elements by double choice, cagr rules folding
// them through the single/multi templates, and the return rules. Group-by
// arguments are threaded through chain/cagr/results as leading keys. This
// is the formal-semantics route; the engine normally runs the direct
// aggregate runtime, and tests hold the two routes to the same results.
inline Program expand_aggregates(const Program& p, const AggregateRegistry& reg) {
    Program out;
    out.schema = p.schema;
    out.facts = p.facts;
    int counter = 0;
    for (auto& r : p.rules) {
        if (!r.head.has_aggregates()) {
            out.rules.push_back(r);
            continue;
        }
        size_t agg_count = 0, agg_pos = 0;
        for (size_t i = 0; i < r.head.args.size(); ++i)
            if (r.head.args[i].is_agg()) {
                ++agg_count;
                agg_pos = i;
            }
        if (agg_count != 1) {
            // multi-aggregate heads run only through the direct runtime
            out.rules.push_back(r);
            continue;
        }
        const AggSpec& spec = *r.head.args[agg_pos].agg;
        const AggregateDef& def = reg.require(spec.agg);
        ++counter;
        std::string chain_p = "chain_" + std::to_string(counter);
        std::string cagr_p = "cagr_" + std::to_string(counter);
        std::string results_p = "results_" + std::to_string(counter);

        auto dedupe = [](std::vector<std::string>& v) {
            std::set<std::string> seen;
            std::vector<std::string> out;
            for (auto& x : v)
                if (seen.insert(x).second) out.push_back(x);
            v = std::move(out);
        };
        std::vector<Term> group_terms;
        std::vector<std::string> group_vars;
        for (size_t i = 0; i < r.head.args.size(); ++i) {
            if (i == agg_pos) continue;
            group_terms.push_back(r.head.args[i].term);
            r.head.args[i].term.collect_vars(group_vars);
        }
        dedupe(group_vars);
        std::vector<std::string> elem_vars;
        spec.arg.collect_vars(elem_vars);
        dedupe(elem_vars);

        std::set<std::string> taken;
        {
            auto bv = rule_body_vars(r);
            taken.insert(bv.begin(), bv.end());
            taken.insert(group_vars.begin(), group_vars.end());
        }
        auto fresh = [&taken](std::string base) {
            while (taken.count(base)) base += "_";
            taken.insert(base);
            return base;
        };
        std::string prev = fresh("Prev");
        std::string e1 = fresh("E1"), e2 = fresh("E2");
        std::string old_v = fresh("Old"), new_v = fresh("New"), yield = fresh("Yield");
        std::string dangling = fresh("Next");

        auto keyed = [&](const std::string& pred, std::vector<Term> tail) {
            Atom a;
            a.pred = pred;
            a.args = group_terms;
            for (auto& t : tail) a.args.push_back(t);
            return a;
        };
        auto uda_goal = [&](const char* kind, std::vector<Term> tail) {
            Atom a;
            a.pred = kind;
            a.args.push_back(Term::sym(spec.agg));
            for (auto& t : tail) a.args.push_back(t);
            return a;
        };

        // chain root: chain_k(G.., nil, nil) <- B.
        {
            Rule root;
            root.head = head_from_atom(keyed(chain_p, {Term::sym("nil"), Term::sym("nil")}));
            root.body = r.body;
            out.rules.push_back(std::move(root));
        }
        // chain step with the double choice
        {
            Rule step;
            step.head = head_from_atom(keyed(chain_p, {Term::var(prev), spec.arg}));
            step.body.push_back(keyed(chain_p, {Term::var("$_c", true), Term::var(prev)}));
            for (auto& lit : r.body) step.body.push_back(lit);
            ChoiceGoal c1;
            c1.left = group_vars;
            c1.left.push_back(prev);
            c1.right = elem_vars;
            ChoiceGoal c2;
            c2.left = group_vars;
            for (auto& v : elem_vars) c2.left.push_back(v);
            c2.right = {prev};
            step.body.push_back(c1);
            step.body.push_back(c2);
            out.rules.push_back(std::move(step));
        }
        // cagr base and step
        {
            Rule base;
            base.head = head_from_atom(keyed(cagr_p, {Term::var(e1), Term::var(new_v)}));
            base.body.push_back(keyed(chain_p, {Term::sym("nil"), Term::var(e1)}));
            base.body.push_back(Comparison{"~=", Term::var(e1), Term::sym("nil")});
            base.body.push_back(uda_goal("single", {Term::var(e1), Term::var(new_v)}));
            out.rules.push_back(std::move(base));

            Rule step;
            step.head = head_from_atom(keyed(cagr_p, {Term::var(e2), Term::var(new_v)}));
            step.body.push_back(keyed(chain_p, {Term::var(e1), Term::var(e2)}));
            step.body.push_back(keyed(cagr_p, {Term::var(e1), Term::var(old_v)}));
            step.body.push_back(
                uda_goal("multi", {Term::var(e2), Term::var(old_v), Term::var(new_v)}));
            out.rules.push_back(std::move(step));
        }
        // early and final return results
        if (!def.ereturn_rules.empty()) {
            Rule res;
            res.head = head_from_atom(keyed(results_p, {Term::var(yield)}));
            res.body.push_back(keyed(chain_p, {Term::var(e1), Term::var(e2)}));
            res.body.push_back(keyed(cagr_p, {Term::var(e1), Term::var(old_v)}));
            res.body.push_back(
                uda_goal("ereturn", {Term::var(e2), Term::var(old_v), Term::var(yield)}));
            out.rules.push_back(std::move(res));
        }
        if (!def.freturn_rules.empty()) {
            Rule res;
            res.head = head_from_atom(keyed(results_p, {Term::var(yield)}));
            res.body.push_back(keyed(chain_p, {Term::var(e1), Term::var(e2)}));
            Atom nochain = keyed(chain_p, {Term::var(e2), Term::var(dangling)});
            nochain.negated = true;
            nochain.args.back().anonymous = true;
            res.body.push_back(nochain);
            res.body.push_back(keyed(cagr_p, {Term::var(e2), Term::var(old_v)}));
            res.body.push_back(
                uda_goal("freturn", {Term::var(e2), Term::var(old_v), Term::var(yield)}));
            out.rules.push_back(std::move(res));
        }
        // rewritten invocation
        {
            Rule inv;
            inv.head.pred = r.head.pred;
            for (size_t i = 0; i < r.head.args.size(); ++i)
                inv.head.args.push_back(i == agg_pos ? HeadArg{std::nullopt, Term::var(yield)}
                                                     : r.head.args[i]);
            inv.body.push_back(keyed(results_p, {Term::var(yield)}));
            out.rules.push_back(std::move(inv));
        }
    }
    return out;
}

}  // namespace ldl
