#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/graph.hpp"
#include "ldl/printer.hpp"

namespace ldl {

// --- temporal arguments ---------------------------------------------------
//
// The distinguished temporal argument is always argument position 1 of the
// recursive predicates. A temporal term is an integer constant (exit
// rules), a variable J, or the postfix successor J+1.

struct TemporalTerm {
    enum class Kind { None, Const, Var, Succ };
    Kind kind = Kind::None;
    std::string var;
    mpz_class cval;

    bool operator==(const TemporalTerm& o) const {
        return kind == o.kind && var == o.var && cval == o.cval;
    }
};

inline TemporalTerm temporal_of(const Term& t) {
    TemporalTerm tt;
    switch (t.kind) {
        case Term::Kind::Int:
            tt.kind = TemporalTerm::Kind::Const;
            tt.cval = t.num;
            break;
        case Term::Kind::Var:
            tt.kind = TemporalTerm::Kind::Var;
            tt.var = t.name;
            break;
        case Term::Kind::Temporal:
            tt.kind = TemporalTerm::Kind::Succ;
            tt.var = t.name;
            break;
        default:
            break;
    }
    return tt;
}

struct RuleTemporalInfo {
    bool ok = false;
    TemporalTerm head;
    std::vector<std::pair<size_t, TemporalTerm>> body;  // body literal index -> term
    bool has_recursive_body = false;
};

// Position-1 temporal terms of every recursive atom of r (head included
// when its predicate is recursive). Absent unless each of them is a
// constant, a variable, or a successor term.
inline std::optional<RuleTemporalInfo> temporal_argument(const Rule& r,
                                                         const std::set<std::string>& clique) {
    RuleTemporalInfo info;
    bool head_recursive = clique.count(r.head.pred) > 0;
    if (head_recursive) {
        if (r.head.args.empty() || r.head.args[0].is_agg()) return std::nullopt;
        info.head = temporal_of(r.head.args[0].term);
        if (info.head.kind == TemporalTerm::Kind::None) return std::nullopt;
    }
    for (size_t i = 0; i < r.body.size(); ++i) {
        auto* a = as_atom(r.body[i]);
        if (!a || !clique.count(a->pred)) continue;
        if (a->args.empty()) return std::nullopt;
        TemporalTerm tt = temporal_of(a->args[0]);
        if (tt.kind == TemporalTerm::Kind::None) return std::nullopt;
        info.body.emplace_back(i, tt);
        info.has_recursive_body = true;
    }
    if (!head_recursive && !info.has_recursive_body) return std::nullopt;
    info.ok = true;
    return info;
}

enum class XyClass { X, Y, NotXY };

// X-rule: every recursive body temporal term equals the head's (vacuously,
// an exit rule with a constant or plain-variable head). Y-rule: head J+1
// with every recursive body atom at J or J+1 and at least one at J.
inline XyClass xy_classify_rule(const RuleTemporalInfo& info) {
    const TemporalTerm& h = info.head;
    if (!info.has_recursive_body)
        return h.kind == TemporalTerm::Kind::Succ ? XyClass::NotXY : XyClass::X;
    bool all_equal_head = true;
    for (auto& [i, tt] : info.body)
        if (!(tt == h)) all_equal_head = false;
    if (all_equal_head) return XyClass::X;
    if (h.kind != TemporalTerm::Kind::Succ) return XyClass::NotXY;
    bool some_lagged = false;
    for (auto& [i, tt] : info.body) {
        if (tt.kind == TemporalTerm::Kind::Var && tt.var == h.var) {
            some_lagged = true;
        } else if (tt.kind == TemporalTerm::Kind::Succ && tt.var == h.var) {
            // same step as the head
        } else {
            return XyClass::NotXY;
        }
    }
    return some_lagged ? XyClass::Y : XyClass::NotXY;
}

// --- bistate / synchronized bistate ---------------------------------------

struct BistateRule {
    Rule rule;              // transformed rule over new_/old_ predicates
    size_t src_index = 0;   // position in the unit's rule list
    XyClass cls = XyClass::X;
    bool is_exit = false;
    bool is_copy = false;         // new_q(X..) <- old_q(X..), nothing else
    bool is_copy_shaped = false;  // copy plus extra negated goals / comparisons
    Term counter_term;            // original head temporal term (exit rules)
    std::string target;           // head predicate without prefix
    std::string temporal_var;     // head temporal variable, if any
};

struct BistateProgram {
    std::vector<BistateRule> rules;
    std::set<std::string> preds;  // recursive predicates of the unit
    std::vector<std::string> errors;

    Program as_program() const {
        Program p;
        for (auto& br : rules) p.rules.push_back(br.rule);
        return p;
    }
    bool ok() const { return errors.empty(); }
};

namespace xy_detail {

inline bool same_args_after_temporal(const Head& h, const Atom& a) {
    if (h.args.size() != a.args.size()) return false;
    for (size_t i = 1; i < h.args.size(); ++i) {
        if (h.args[i].is_agg()) return false;
        if (!(h.args[i].term == a.args[i])) return false;
    }
    return true;
}

}  // namespace xy_detail

inline BistateProgram bistate(const std::vector<Rule>& unit_rules,
                              const std::set<std::string>& preds) {
    BistateProgram out;
    out.preds = preds;
    for (size_t idx = 0; idx < unit_rules.size(); ++idx) {
        const Rule& r = unit_rules[idx];
        auto info = temporal_argument(r, preds);
        if (!info) {
            out.errors.push_back("rule has no temporal argument: " + to_string(r));
            continue;
        }
        XyClass cls = xy_classify_rule(*info);
        if (cls == XyClass::NotXY) {
            out.errors.push_back("not an XY rule: " + to_string(r));
            continue;
        }
        BistateRule br;
        br.src_index = idx;
        br.cls = cls;
        br.target = r.head.pred;
        br.is_exit = !info->has_recursive_body;
        if (br.is_exit) br.counter_term = r.head.args[0].term;
        if (info->head.kind != TemporalTerm::Kind::Const) br.temporal_var = info->head.var;

        Rule t;
        t.pos = r.pos;
        t.head.pred = "new_" + r.head.pred;
        for (size_t i = 1; i < r.head.args.size(); ++i) t.head.args.push_back(r.head.args[i]);

        std::map<size_t, TemporalTerm> body_tt;
        for (auto& [i, tt] : info->body) body_tt[i] = tt;
        for (size_t i = 0; i < r.body.size(); ++i) {
            const Literal& lit = r.body[i];
            auto it = body_tt.find(i);
            if (it == body_tt.end()) {
                t.body.push_back(lit);
                continue;
            }
            const Atom& a = *as_atom(lit);
            bool same_step = it->second == info->head;
            if (!same_step && info->head.kind == TemporalTerm::Kind::Succ)
                same_step = it->second.kind == TemporalTerm::Kind::Succ &&
                            it->second.var == info->head.var;
            Atom b;
            b.pred = (same_step ? "new_" : "old_") + a.pred;
            b.negated = a.negated;
            for (size_t k = 1; k < a.args.size(); ++k) b.args.push_back(a.args[k]);
            t.body.push_back(b);
        }
        br.rule = std::move(t);

        // copy rules: single body atom identical to the head modulo prefix
        if (!br.is_exit && cls == XyClass::Y) {
            size_t positive_atoms = 0, other = 0;
            const Atom* lone = nullptr;
            size_t lone_idx = 0;
            for (size_t i = 0; i < r.body.size(); ++i) {
                if (auto* a = as_atom(r.body[i])) {
                    if (!a->negated) {
                        ++positive_atoms;
                        lone = a;
                        lone_idx = i;
                        continue;
                    }
                }
                ++other;
            }
            bool lone_lagged = positive_atoms == 1 && body_tt.count(lone_idx) &&
                               body_tt[lone_idx].kind == TemporalTerm::Kind::Var;
            if (lone_lagged && lone->pred == r.head.pred &&
                xy_detail::same_args_after_temporal(r.head, *lone)) {
                br.is_copy_shaped = true;
                br.is_copy = other == 0 && r.body.size() == 1;
            }
        }
        out.rules.push_back(std::move(br));
    }
    return out;
}

struct SyncbiProgram {
    std::vector<BistateRule> rules;      // bistate rules, exits carry counter goals
    std::vector<Rule> result_rules;      // q(J, X..) <- new_q(X..), counter(J)
    std::set<std::string> preds;
    std::vector<std::string> errors;

    Program as_program() const {
        Program p;
        for (auto& br : rules) p.rules.push_back(br.rule);
        for (auto& r : result_rules) p.rules.push_back(r);
        return p;
    }
};

// The synchronized bistate version: counter goals on exit rules, choice
// goals lose the temporal variable, and each recursive predicate gets a
// result rule that re-attaches the step number.
inline SyncbiProgram syncbi(const BistateProgram& bp,
                            const std::map<std::string, size_t>& arities) {
    SyncbiProgram out;
    out.preds = bp.preds;
    out.errors = bp.errors;
    for (auto bist : bp.rules) {
        for (auto& lit : bist.rule.body) {
            if (auto* g = std::get_if<ChoiceGoal>(&lit)) {
                if (!bist.temporal_var.empty()) {
                    std::erase(g->left, bist.temporal_var);
                    std::erase(g->right, bist.temporal_var);
                }
            }
        }
        if (bist.is_exit) {
            Atom c;
            c.pred = "counter";
            c.args.push_back(bist.counter_term);
            bist.rule.body.push_back(c);
        }
        out.rules.push_back(std::move(bist));
    }
    for (auto& q : bp.preds) {
        Rule r;
        r.head.pred = q;
        r.head.args.push_back(HeadArg{std::nullopt, Term::var("J")});
        Atom b;
        b.pred = "new_" + q;
        size_t n = arities.at(q);
        for (size_t i = 1; i < n; ++i) {
            Term v = Term::var("X" + std::to_string(i));
            r.head.args.push_back(HeadArg{std::nullopt, v});
            b.args.push_back(v);
        }
        r.body.push_back(b);
        Atom c;
        c.pred = "counter";
        c.args.push_back(Term::var("J"));
        r.body.push_back(c);
        out.result_rules.push_back(std::move(r));
    }
    return out;
}

// Acceptance conditions for choice and nonmonotone aggregates inside an XY
// unit, plus XY-stratification of the bistate version itself.
inline std::vector<std::string> validate_choice_and_agg_in_xy(
    const std::vector<Rule>& unit_rules, const std::set<std::string>& preds,
    const AggregateRegistry& reg) {
    std::vector<std::string> diags;
    for (auto& r : unit_rules) {
        auto info = temporal_argument(r, preds);
        XyClass cls = info ? xy_classify_rule(*info) : XyClass::NotXY;
        if (cls == XyClass::NotXY) {
            if (r.head.has_aggregates())
                diags.push_back(
                    "recursive aggregate rule must carry the temporal variable among its "
                    "group-by arguments: " +
                    to_string(r));
            else
                diags.push_back("not an XY rule: " + to_string(r));
            continue;
        }
        if (!info->has_recursive_body) continue;
        std::string tvar = info->head.var;
        bool has_choice = false, choice_ok = false;
        for (auto& lit : r.body) {
            if (auto* g = as_choice(lit)) {
                has_choice = true;
                for (auto& v : g->left)
                    if (v == tvar) choice_ok = true;
            }
        }
        if (has_choice && !choice_ok)
            diags.push_back(
                "recursive choice rule needs a choice goal with the temporal variable on "
                "its left side: " +
                to_string(r));
        if (r.head.has_aggregates()) {
            bool grouped = false;
            for (auto& a : r.head.args)
                if (!a.is_agg() && (a.term.kind == Term::Kind::Var ||
                                    a.term.kind == Term::Kind::Temporal) &&
                    a.term.name == tvar)
                    grouped = true;
            for (auto& a : r.head.args)
                if (a.is_agg()) {
                    auto* def = reg.find(a.agg->agg);
                    if (def && def->monotone) grouped = true;  // restriction is nonmonotone-only
                }
            if (!grouped)
                diags.push_back(
                    "recursive aggregate rule must list the temporal variable among group-by "
                    "arguments: " +
                    to_string(r));
        }
    }
    if (!diags.empty()) return diags;

    BistateProgram bp = bistate(unit_rules, preds);
    for (auto& e : bp.errors) diags.push_back(e);
    if (!diags.empty()) return diags;
    Program prog = bp.as_program();
    Stratification s = stratify(prog, &reg);
    if (!s.ok) diags.push_back("bistate version is " + s.error);
    return diags;
}

}  // namespace ldl
