#pragma once

#include <set>
#include <string>
#include <vector>

#include "ldl/ast.hpp"

namespace ldl {

// First-order equivalent of a choice program. Each choice rule r gains a
// chosen_<k>(W) goal in place of its choice goals, a chosen rule guarded by
// ~diffchoice_<k>(W), and one diffchoice rule per variable of each goal's
// right side (the vector inequality expands into a disjunction).
struct FoeArtifacts {
    struct PerRule {
        size_t rule_index = 0;
        std::string chosen_pred, diff_pred;
        std::vector<std::string> w;
        Rule rewritten;
        Rule chosen_rule;
        std::vector<Rule> diff_rules;
    };
    std::vector<PerRule> items;
    Program transformed;
    bool changed = false;
};

namespace choice_detail {

inline std::string primed_name(const std::string& base, const std::set<std::string>& taken) {
    std::string cand = base + "_p";
    while (taken.count(cand)) cand += "p";
    return cand;
}

}  // namespace choice_detail

inline FoeArtifacts foe_transform(const Program& p) {
    FoeArtifacts out;
    out.transformed.schema = p.schema;
    out.transformed.facts = p.facts;
    int counter = 0;
    for (size_t ri = 0; ri < p.rules.size(); ++ri) {
        const Rule& r = p.rules[ri];
        std::vector<const ChoiceGoal*> goals;
        for (auto& lit : r.body)
            if (auto* g = as_choice(lit)) goals.push_back(g);
        if (goals.empty()) {
            out.transformed.rules.push_back(r);
            continue;
        }
        out.changed = true;
        ++counter;
        FoeArtifacts::PerRule item;
        item.rule_index = ri;
        item.chosen_pred = "chosen_" + std::to_string(counter);
        item.diff_pred = "diffchoice_" + std::to_string(counter);

        std::set<std::string> seen;
        for (auto* g : goals) {
            for (auto& v : g->left)
                if (seen.insert(v).second) item.w.push_back(v);
            for (auto& v : g->right)
                if (seen.insert(v).second) item.w.push_back(v);
        }
        std::set<std::string> all_vars(seen);
        {
            auto bv = rule_body_vars(r);
            all_vars.insert(bv.begin(), bv.end());
        }

        auto w_atom = [&](const std::vector<std::string>& names) {
            Atom a;
            a.pred = item.chosen_pred;
            for (auto& v : names) a.args.push_back(Term::var(v));
            return a;
        };

        // r': body minus choice goals, plus chosen(W)
        item.rewritten.head = r.head;
        item.rewritten.pos = r.pos;
        for (auto& lit : r.body)
            if (!as_choice(lit)) item.rewritten.body.push_back(lit);
        item.rewritten.body.push_back(w_atom(item.w));

        // chosen(W) <- B(Z), ~diffchoice(W)
        item.chosen_rule.head = head_from_atom(w_atom(item.w));
        for (auto& lit : r.body)
            if (!as_choice(lit)) item.chosen_rule.body.push_back(lit);
        Atom neg;
        neg.pred = item.diff_pred;
        neg.negated = true;
        for (auto& v : item.w) neg.args.push_back(Term::var(v));
        item.chosen_rule.body.push_back(neg);

        // one diffchoice rule per variable of each goal's right side
        for (auto* g : goals) {
            std::set<std::string> keep(g->left.begin(), g->left.end());
            std::map<std::string, std::string> prime;
            for (auto& v : item.w)
                if (!keep.count(v)) prime[v] = choice_detail::primed_name(v, all_vars);
            for (auto& y : g->right) {
                Rule d;
                Atom dh;
                dh.pred = item.diff_pred;
                for (auto& v : item.w) dh.args.push_back(Term::var(v));
                d.head = head_from_atom(dh);
                Atom body;
                body.pred = item.chosen_pred;
                for (auto& v : item.w)
                    body.args.push_back(Term::var(keep.count(v) ? v : prime.at(v)));
                d.body.push_back(body);
                Comparison ne;
                ne.op = "~=";
                ne.lhs = Term::var(y);
                ne.rhs = Term::var(prime.at(y));
                d.body.push_back(ne);
                item.diff_rules.push_back(std::move(d));
            }
        }

        out.transformed.rules.push_back(item.rewritten);
        out.transformed.rules.push_back(item.chosen_rule);
        for (auto& d : item.diff_rules) out.transformed.rules.push_back(d);
        out.items.push_back(std::move(item));
    }
    return out;
}

}  // namespace ldl
