#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/uda.hpp"

namespace ldl {

enum class Polarity { Positive, Negative, Aggregate };

// Global predicate connection graph: one edge per body-literal dependency,
// body predicate -> head predicate. Aggregate rules give every body
// dependency aggregate polarity; an edge is strict when it must cross
// strata upward (negation, or a nonmonotone aggregate head).
struct PredicateGraph {
    struct Edge {
        std::string from, to;
        Polarity polarity;
        bool strict;
    };

    std::set<std::string> nodes;
    std::vector<Edge> edges;
    std::map<std::string, std::vector<size_t>> out;  // node -> edge indexes

    // strongly-connected components, in dependency (topological) order
    std::vector<std::vector<std::string>> sccs;
    std::map<std::string, int> scc_of;

    bool same_scc(const std::string& a, const std::string& b) const {
        auto i = scc_of.find(a), j = scc_of.find(b);
        return i != scc_of.end() && j != scc_of.end() && i->second == j->second;
    }

    bool is_recursive_scc(int id) const {
        if (sccs[id].size() > 1) return true;
        const std::string& p = sccs[id][0];
        auto it = out.find(p);
        if (it == out.end()) return false;
        for (size_t e : it->second)
            if (edges[e].to == p) return true;
        return false;
    }
};

namespace graph_detail {

class Tarjan {
public:
    explicit Tarjan(const PredicateGraph& g) : g_(g) {}

    void run(PredicateGraph& g) {
        for (auto& n : g_.nodes)
            if (!index_.count(n)) visit(n);
        // Tarjan emits reverse-topological order over the condensation.
        std::reverse(comps_.begin(), comps_.end());
        g.sccs = comps_;
        for (size_t i = 0; i < g.sccs.size(); ++i) {
            std::sort(g.sccs[i].begin(), g.sccs[i].end());
            for (auto& n : g.sccs[i]) g.scc_of[n] = (int)i;
        }
    }

private:
    void visit(const std::string& v) {
        index_[v] = low_[v] = counter_++;
        stack_.push_back(v);
        on_stack_.insert(v);
        auto it = g_.out.find(v);
        if (it != g_.out.end()) {
            for (size_t e : it->second) {
                const std::string& w = g_.edges[e].to;
                if (!index_.count(w)) {
                    visit(w);
                    low_[v] = std::min(low_[v], low_[w]);
                } else if (on_stack_.count(w)) {
                    low_[v] = std::min(low_[v], index_[w]);
                }
            }
        }
        if (low_[v] == index_[v]) {
            std::vector<std::string> comp;
            for (;;) {
                std::string w = stack_.back();
                stack_.pop_back();
                on_stack_.erase(w);
                comp.push_back(w);
                if (w == v) break;
            }
            comps_.push_back(std::move(comp));
        }
    }

    const PredicateGraph& g_;
    std::map<std::string, int> index_, low_;
    std::vector<std::string> stack_;
    std::set<std::string> on_stack_;
    std::vector<std::vector<std::string>> comps_;
    int counter_ = 0;
};

}  // namespace graph_detail

inline PredicateGraph build_graph(const Program& p, const AggregateRegistry* reg = nullptr) {
    PredicateGraph g;
    for (auto& f : p.facts) g.nodes.insert(f.pred);
    for (auto& d : p.schema) g.nodes.insert(d.pred);
    for (auto& r : p.rules) {
        if (is_uda_template_pred(r.head.pred)) continue;
        g.nodes.insert(r.head.pred);
        bool agg_rule = r.head.has_aggregates();
        bool strict_agg = false;
        if (agg_rule) {
            strict_agg = true;
            if (reg) {
                strict_agg = false;
                for (auto& a : r.head.args)
                    if (a.is_agg()) {
                        auto* def = reg->find(a.agg->agg);
                        if (!def || !def->monotone) strict_agg = true;
                    }
            }
        }
        for (auto& lit : r.body) {
            auto* a = as_atom(lit);
            if (!a || is_uda_template_pred(a->pred)) continue;
            g.nodes.insert(a->pred);
            Polarity pol = a->negated ? Polarity::Negative
                                      : (agg_rule ? Polarity::Aggregate : Polarity::Positive);
            bool strict = a->negated || (agg_rule && strict_agg);
            g.out[a->pred].push_back(g.edges.size());
            g.edges.push_back({a->pred, r.head.pred, pol, strict});
        }
    }
    graph_detail::Tarjan(g).run(g);
    return g;
}

// Predicate layering. Predicates with no defining rules sit at level 0;
// a defined predicate sits one level above everything it depends on
// (same-component edges do not bump). Validity requires that no strict
// edge stays inside a component.
struct Stratification {
    bool ok = false;
    std::map<std::string, int> stratum;
    std::vector<std::string> offending;  // members of a component with an internal strict edge
    std::string error;

    std::vector<std::vector<std::string>> layers() const {
        int hi = 0;
        for (auto& [p, s] : stratum) hi = std::max(hi, s);
        std::vector<std::vector<std::string>> out(stratum.empty() ? 0 : hi + 1);
        for (auto& [p, s] : stratum) out[s].push_back(p);
        return out;
    }
};

inline Stratification stratify(const PredicateGraph& g, const std::set<std::string>& defined) {
    Stratification s;
    for (auto& e : g.edges) {
        if (e.strict && g.same_scc(e.from, e.to)) {
            s.offending = g.sccs[g.scc_of.at(e.from)];
            std::string kind = e.polarity == Polarity::Negative ? "negation" : "aggregation";
            s.error = "not stratified: cycle through " + kind + " involving ";
            for (size_t i = 0; i < s.offending.size(); ++i)
                s.error += (i ? ", " : "") + s.offending[i];
            return s;
        }
    }
    std::vector<int> level(g.sccs.size(), 0);
    for (size_t i = 0; i < g.sccs.size(); ++i) {
        bool has_rules = false;
        for (auto& p : g.sccs[i])
            if (defined.count(p)) has_rules = true;
        if (!has_rules) {
            level[i] = 0;
            continue;
        }
        int lv = 0;
        for (auto& e : g.edges)
            if (g.scc_of.at(e.to) == (int)i && g.scc_of.at(e.from) != (int)i)
                lv = std::max(lv, level[g.scc_of.at(e.from)] + 1);
        level[i] = lv;
    }
    for (auto& [p, id] : g.scc_of) s.stratum[p] = level[id];
    s.ok = true;
    return s;
}

inline std::set<std::string> defined_predicates(const Program& p) {
    std::set<std::string> out;
    for (auto& r : p.rules)
        if (!is_uda_template_pred(r.head.pred)) out.insert(r.head.pred);
    return out;
}

inline Stratification stratify(const Program& p, const AggregateRegistry* reg = nullptr) {
    PredicateGraph g = build_graph(p, reg);
    return stratify(g, defined_predicates(p));
}

}  // namespace ldl
