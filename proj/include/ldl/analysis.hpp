#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/choice.hpp"
#include "ldl/graph.hpp"
#include "ldl/safety.hpp"
#include "ldl/uda.hpp"
#include "ldl/xy.hpp"

namespace ldl {

// One XY-stratified recursive unit: the strongly connected component that
// needs temporal stratification plus any satellite rules that follow the
// same temporal discipline (e.g. the final_e_hist rule of the coalescing
// program). Evaluated per step over its synchronized bistate version.
struct XyUnit {
    std::set<std::string> preds;
    std::vector<size_t> rule_indices;  // into Program::rules, textual order
    std::vector<size_t> fact_indices;  // ground exit facts pulled into the unit
    std::vector<Rule> rules;
    BistateProgram bistate;
    SyncbiProgram syncbi;
    // Largest set S of unit predicates such that every non-exit rule for a
    // member needs some member positively: once a step leaves all of S
    // empty, no later step can revive it, and the remaining rules can only
    // re-stamp copies. Exit rules are excused, hence the step guard.
    std::set<std::string> starvation_set;
    long last_exit_step = 0;
    bool starvation_applicable = true;  // false when an exit fires on a variable step
};

// Rules of an XY unit in textual order, with ground clauses over unit
// predicates restored as bodyless exit rules.
inline std::vector<Rule> xy_unit_rules(const Program& p, const std::set<std::string>& preds) {
    std::vector<Rule> out;
    for (auto& f : p.facts)
        if (preds.count(f.pred)) {
            Rule r;
            r.head = head_from_atom(f);
            out.push_back(std::move(r));
        }
    for (auto& r : p.rules)
        if (preds.count(r.head.pred)) out.push_back(r);
    return out;
}

struct Component {
    enum class Kind { Edb, Plain, Recursive, Xy };
    Kind kind = Kind::Plain;
    std::set<std::string> preds;
    std::vector<size_t> rule_indices;
    int xy_unit = -1;
};

struct Analysis {
    Program program;
    AggregateRegistry registry;
    PredicateGraph graph;
    std::set<std::string> test_preds;
    std::set<std::string> defined;
    std::vector<std::string> diagnostics;
    std::vector<XyUnit> xy_units;
    std::set<size_t> xy_facts;            // fact indices consumed as exit rules
    std::vector<Component> schedule;      // dependency order
    std::map<std::string, int> strata;    // explain-level layering
    std::map<std::string, size_t> arity;

    bool ok() const { return diagnostics.empty(); }

    const XyUnit* unit_for(const std::string& pred) const {
        for (auto& u : xy_units)
            if (u.preds.count(pred)) return &u;
        return nullptr;
    }
};

namespace analysis_detail {

inline bool scc_has_internal_strict(const PredicateGraph& g, int scc_id) {
    for (auto& e : g.edges)
        if (e.strict && g.scc_of.at(e.from) == scc_id && g.scc_of.at(e.to) == scc_id) return true;
    return false;
}

// A positive recursive component still gets the temporal treatment when all
// of its rules are X/Y-shaped and at least one is a genuine Y-step; plain
// recursion over a coincidental first variable stays ordinary.
inline bool scc_is_temporal(const Program& p, const std::set<std::string>& preds) {
    bool any_y = false;
    for (auto& r : xy_unit_rules(p, preds)) {
        auto info = temporal_argument(r, preds);
        if (!info) return false;
        XyClass c = xy_classify_rule(*info);
        if (c == XyClass::NotXY) return false;
        if (c == XyClass::Y) any_y = true;
    }
    return any_y;
}

inline bool all_rules_xy_shaped(const Program& p, const std::string& pred,
                                const std::set<std::string>& preds_plus) {
    bool any = false;
    for (auto& r : p.rules) {
        if (r.head.pred != pred) continue;
        any = true;
        auto info = temporal_argument(r, preds_plus);
        if (!info || xy_classify_rule(*info) == XyClass::NotXY) return false;
        bool touches_unit = false;
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit))
                if (preds_plus.count(a->pred) && a->pred != pred) touches_unit = true;
        if (!touches_unit) return false;
    }
    return any;
}

}  // namespace analysis_detail

inline Analysis analyze(Program program) {
    Analysis a;
    a.program = std::move(program);
    const Program& p = a.program;

    try {
        a.registry = program_registry(p);
    } catch (const UdaError& e) {
        a.registry = builtin_catalog();
        a.diagnostics.push_back(e.what());
    }
    a.test_preds = comparison_defined_preds(p);
    a.defined = defined_predicates(p);
    for (auto& d : p.schema) a.arity[d.pred] = d.columns.size();
    for (auto& f : p.facts) a.arity[f.pred] = f.args.size();
    for (auto& r : p.rules) {
        if (is_uda_template_pred(r.head.pred)) continue;
        a.arity[r.head.pred] = r.head.args.size();
        for (auto& lit : r.body)
            if (auto* at = as_atom(lit)) a.arity.emplace(at->pred, at->args.size());
        for (auto& h : r.head.args)
            if (h.is_agg() && !a.registry.find(h.agg->agg))
                a.diagnostics.push_back("unregistered aggregate '" + h.agg->agg + "' in rule: " +
                                        to_string(r));
    }
    for (auto& d : check_safety(p)) a.diagnostics.push_back("unsafe " + d);

    a.graph = build_graph(p, &a.registry);
    const PredicateGraph& g = a.graph;

    // XY units: recursive components with internal negation or nonmonotone
    // aggregation, plus absorbed satellites.
    std::map<std::string, int> pred_unit;
    for (size_t scc = 0; scc < g.sccs.size(); ++scc) {
        if (!g.is_recursive_scc((int)scc)) continue;
        std::set<std::string> members(g.sccs[scc].begin(), g.sccs[scc].end());
        bool needs_xy = analysis_detail::scc_has_internal_strict(g, (int)scc);
        if (!needs_xy && !analysis_detail::scc_is_temporal(p, members)) continue;
        XyUnit u;
        u.preds = members;
        bool grew = true;
        while (grew) {
            grew = false;
            for (auto& node : g.nodes) {
                if (u.preds.count(node) || a.test_preds.count(node) || !a.defined.count(node))
                    continue;
                if (pred_unit.count(node)) continue;
                std::set<std::string> extended = u.preds;
                extended.insert(node);
                if (g.is_recursive_scc(g.scc_of.at(node))) continue;
                if (analysis_detail::all_rules_xy_shaped(p, node, extended)) {
                    u.preds.insert(node);
                    grew = true;
                }
            }
        }
        for (size_t fi = 0; fi < p.facts.size(); ++fi)
            if (u.preds.count(p.facts[fi].pred)) u.fact_indices.push_back(fi);
        for (size_t ri = 0; ri < p.rules.size(); ++ri)
            if (u.preds.count(p.rules[ri].head.pred)) u.rule_indices.push_back(ri);
        u.rules = xy_unit_rules(p, u.preds);
        for (auto& d : validate_choice_and_agg_in_xy(u.rules, u.preds, a.registry))
            a.diagnostics.push_back(d);
        u.bistate = bistate(u.rules, u.preds);
        std::map<std::string, size_t> arities;
        for (auto& q : u.preds) arities[q] = a.arity.at(q);
        u.syncbi = syncbi(u.bistate, arities);
        // starvation set: greatest fixpoint over the bistate rules
        std::set<std::string> s;
        for (auto& q : u.preds) s.insert(q);
        for (auto& br : u.bistate.rules) {
            if (br.is_copy_shaped) s.erase(br.target);
            if (br.is_exit) {
                if (br.counter_term.kind == Term::Kind::Int)
                    u.last_exit_step =
                        std::max(u.last_exit_step, (long)br.counter_term.num.get_si());
                else
                    u.starvation_applicable = false;
            }
        }
        for (bool changed = true; changed;) {
            changed = false;
            for (auto& br : u.bistate.rules) {
                if (br.is_exit || !s.count(br.target)) continue;
                bool sustained = false;
                for (auto& lit : br.rule.body)
                    if (auto* at = as_atom(lit))
                        if (!at->negated) {
                            std::string base;
                            if (at->pred.rfind("old_", 0) == 0) base = at->pred.substr(4);
                            if (at->pred.rfind("new_", 0) == 0) base = at->pred.substr(4);
                            if (!base.empty() && s.count(base)) sustained = true;
                        }
                if (!sustained) {
                    s.erase(br.target);
                    changed = true;
                }
            }
        }
        u.starvation_set = s;
        int id = (int)a.xy_units.size();
        for (auto& pred : u.preds) pred_unit[pred] = id;
        for (size_t fi : u.fact_indices) a.xy_facts.insert(fi);
        a.xy_units.push_back(std::move(u));
    }

    // collision guard: user programs must keep clear of the generated
    // new_/old_ names and the counter predicate when XY units are present
    for (auto& [pred, id] : pred_unit) {
        if (a.defined.count("new_" + pred) || a.defined.count("old_" + pred))
            a.diagnostics.push_back("predicate name collision with generated new_/old_ names for '" +
                                    pred + "'");
    }
    if (!a.xy_units.empty() && a.arity.count("counter"))
        a.diagnostics.push_back(
            "predicate 'counter' is reserved for the synchronized bistate transform");

    // recursive components with internal strictness that did not validate
    // as XY are plain unstratifiable programs
    for (size_t scc = 0; scc < g.sccs.size(); ++scc) {
        if (!g.is_recursive_scc((int)scc)) continue;
        if (!analysis_detail::scc_has_internal_strict(g, (int)scc)) continue;
        bool in_unit = pred_unit.count(g.sccs[scc][0]) > 0;
        if (!in_unit)
            a.diagnostics.push_back("not stratified: component " + g.sccs[scc][0]);
    }

    // meta-schedule: one node per scc, merged across each XY unit
    size_t n = g.sccs.size();
    std::map<int, int> scc_meta;  // scc -> meta id (unit ids first)
    int meta_count = (int)a.xy_units.size();
    for (size_t scc = 0; scc < n; ++scc) {
        const std::string& rep = g.sccs[scc][0];
        auto it = pred_unit.find(rep);
        scc_meta[(int)scc] = it != pred_unit.end() ? it->second : meta_count++;
    }
    std::vector<std::set<int>> deps(meta_count);
    for (auto& e : g.edges) {
        int mf = scc_meta[g.scc_of.at(e.from)], mt = scc_meta[g.scc_of.at(e.to)];
        if (mf != mt) deps[mt].insert(mf);
    }
    // Kahn, lowest id first for determinism
    std::vector<int> order;
    std::vector<int> indeg(meta_count, 0);
    std::vector<std::set<int>> rdeps(meta_count);
    for (int m = 0; m < meta_count; ++m)
        for (int d : deps[m]) rdeps[d].insert(m);
    for (int m = 0; m < meta_count; ++m) indeg[m] = (int)deps[m].size();
    std::set<int> ready;
    for (int m = 0; m < meta_count; ++m)
        if (!indeg[m]) ready.insert(m);
    while (!ready.empty()) {
        int m = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(m);
        for (int d : rdeps[m])
            if (--indeg[d] == 0) ready.insert(d);
    }

    std::map<int, std::vector<int>> meta_sccs;
    for (auto& [scc, m] : scc_meta) meta_sccs[m].push_back(scc);
    for (int m : order) {
        Component c;
        for (int scc : meta_sccs[m])
            for (auto& pred : g.sccs[scc]) c.preds.insert(pred);
        if (m < (int)a.xy_units.size()) {
            c.kind = Component::Kind::Xy;
            c.xy_unit = m;
            c.rule_indices = a.xy_units[m].rule_indices;
        } else {
            for (size_t ri = 0; ri < p.rules.size(); ++ri)
                if (c.preds.count(p.rules[ri].head.pred) &&
                    !is_uda_template_pred(p.rules[ri].head.pred))
                    c.rule_indices.push_back(ri);
            bool defined_any = false;
            for (auto& pred : c.preds)
                if (a.defined.count(pred)) defined_any = true;
            bool recursive = meta_sccs[m].size() == 1 && g.is_recursive_scc(meta_sccs[m][0]);
            c.kind = !defined_any ? Component::Kind::Edb
                                  : (recursive ? Component::Kind::Recursive : Component::Kind::Plain);
            // test predicates evaluate inline at call sites
            bool all_test = true;
            for (auto& pred : c.preds)
                if (!a.test_preds.count(pred)) all_test = false;
            if (all_test && defined_any) continue;
        }
        a.schedule.push_back(std::move(c));
    }

    // explain-level strata: level 0 for pure EDB, one above dependencies
    // otherwise; XY unit members share their component level
    std::map<int, int> meta_level;
    for (int m : order) {
        bool has_rules = false;
        for (int scc : meta_sccs[m])
            for (auto& pred : g.sccs[scc])
                if (a.defined.count(pred)) has_rules = true;
        int lv = 0;
        if (has_rules)
            for (int d : deps[m]) lv = std::max(lv, meta_level[d] + 1);
        meta_level[m] = lv;
        for (int scc : meta_sccs[m])
            for (auto& pred : g.sccs[scc]) a.strata[pred] = lv;
    }

    return a;
}

}  // namespace ldl
