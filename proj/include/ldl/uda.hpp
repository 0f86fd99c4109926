#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/parser.hpp"
#include "ldl/unify.hpp"

namespace ldl {

struct UdaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A user-defined aggregate: the single/multi/ereturn/freturn rule sets.
// Monotone iff there are no final returns.
struct AggregateDef {
    std::string name;
    std::vector<Rule> single_rules, multi_rules, ereturn_rules, freturn_rules;
    bool monotone = false;
};

// Per-group fold state. `last` is handed to freturn rules, which receive
// the last element alongside the final state.
struct GroupCursor {
    Value state;
    long count = 0;
    Value last;
};

namespace uda_detail {

// Apply one definition rule: unify the head argument patterns against the
// given values, run the comparison body, then instantiate the output
// pattern (head argument `out_idx`).
inline std::optional<Value> apply_rule(const Rule& r, const std::vector<Value>& ins,
                                       size_t out_idx) {
    Env env;
    for (size_t i = 0; i < ins.size(); ++i) {
        const Term& pat = r.head.args[i + 1].term;  // arg 0 is the aggregate name
        if (!match_term(pat, ins[i], env)) return std::nullopt;
    }
    for (auto& lit : r.body) {
        auto* c = as_comparison(lit);
        if (!c) return std::nullopt;  // definition bodies are comparisons only
        Env saved = env;
        if (!eval_comparison(*c, env)) {
            env = std::move(saved);
            return std::nullopt;
        }
    }
    return eval_term(r.head.args[out_idx + 1].term, env);
}

}  // namespace uda_detail

class AggregateRegistry {
public:
    void register_def(AggregateDef def) {
        if (def.name.empty()) throw UdaError("aggregate needs a name");
        if (defs_.count(def.name)) throw UdaError("aggregate '" + def.name + "' already defined");
        if (def.single_rules.empty())
            throw UdaError("aggregate '" + def.name + "' has no single rule");
        if (def.multi_rules.empty()) throw UdaError("aggregate '" + def.name + "' has no multi rule");
        def.monotone = def.freturn_rules.empty();
        defs_.emplace(def.name, std::move(def));
    }

    const AggregateDef* find(const std::string& name) const {
        auto it = defs_.find(name);
        return it == defs_.end() ? nullptr : &it->second;
    }

    const AggregateDef& require(const std::string& name) const {
        auto* d = find(name);
        if (!d) throw UdaError("unknown aggregate '" + name + "'");
        return *d;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (auto& [k, v] : defs_) out.push_back(k);
        return out;
    }

    // Collect single/multi/ereturn/freturn rules from a program into
    // definitions, grouped by the aggregate name in argument 0.
    void register_from_program(const Program& p) {
        std::map<std::string, AggregateDef> pending;
        auto sort_in = [&](const Rule& r) {
            const auto& args = r.head.args;
            if (args.empty() || args[0].is_agg() || args[0].term.kind != Term::Kind::Sym)
                throw UdaError("aggregate definition rule needs a constant aggregate name");
            std::string name = args[0].term.name;
            size_t want = r.head.pred == "single" ? 3 : 4;
            if (args.size() != want)
                throw UdaError("wrong arity for " + r.head.pred + " rule of '" + name + "'");
            auto& d = pending[name];
            d.name = name;
            if (r.head.pred == "single")
                d.single_rules.push_back(r);
            else if (r.head.pred == "multi")
                d.multi_rules.push_back(r);
            else if (r.head.pred == "ereturn")
                d.ereturn_rules.push_back(r);
            else
                d.freturn_rules.push_back(r);
        };
        for (auto& r : p.rules)
            if (is_uda_template_pred(r.head.pred)) sort_in(r);
        for (auto& [name, def] : pending) {
            auto it = defs_.find(name);
            if (it != defs_.end() && def.single_rules.empty() && def.multi_rules.empty()) {
                // return-rule-only additions extend an existing aggregate
                auto& d = it->second;
                d.ereturn_rules.insert(d.ereturn_rules.end(), def.ereturn_rules.begin(),
                                       def.ereturn_rules.end());
                d.freturn_rules.insert(d.freturn_rules.end(), def.freturn_rules.begin(),
                                       def.freturn_rules.end());
                d.monotone = d.freturn_rules.empty();
                continue;
            }
            register_def(def);
        }
    }

private:
    std::map<std::string, AggregateDef> defs_;
};

// First element: early returns fire against the reserved empty state `nil`,
// then the state comes from single. Later elements: early returns see the
// previous state, then multi advances it (first matching multi rule wins).
inline std::vector<Value> feed(const AggregateDef& def, GroupCursor& gc, const Value& y) {
    Value old_state = gc.count == 0 ? Value::sym("nil") : gc.state;
    std::vector<Value> early;
    for (auto& r : def.ereturn_rules)
        if (auto v = uda_detail::apply_rule(r, {y, old_state}, 2)) early.push_back(std::move(*v));
    if (gc.count == 0) {
        std::optional<Value> st;
        for (auto& r : def.single_rules)
            if ((st = uda_detail::apply_rule(r, {y}, 1))) break;
        if (!st)
            throw UdaError("aggregate '" + def.name + "': no single rule matches " + y.to_string());
        gc.state = std::move(*st);
    } else {
        std::optional<Value> st;
        for (auto& r : def.multi_rules)
            if ((st = uda_detail::apply_rule(r, {y, gc.state}, 2))) break;
        if (!st)
            throw UdaError("aggregate '" + def.name + "': no multi rule matches " + y.to_string());
        gc.state = std::move(*st);
    }
    gc.count += 1;
    gc.last = y;
    return early;
}

inline std::vector<Value> finalize(const AggregateDef& def, const GroupCursor& gc) {
    std::vector<Value> out;
    if (gc.count == 0) return out;
    for (auto& r : def.freturn_rules)
        if (auto v = uda_detail::apply_rule(r, {gc.last, gc.state}, 2)) out.push_back(std::move(*v));
    return out;
}

// The paper's builtin aggregates, written in their own rule syntax.
// mcount/msum carry an extra nil-state early return so running values start
// with the first element.
inline const AggregateRegistry& builtin_catalog() {
    static const AggregateRegistry reg = [] {
        static const char* kBuiltins = R"(
single(count, Y, 1).
multi(count, Y, Old, New) <- New = Old + 1.
freturn(count, Y, Old, Old).

single(sum, Y, Y).
multi(sum, Y, Old, New) <- New = Old + Y.
freturn(sum, Y, Old, Old).

single(min, Y, Y).
multi(min, Y, Old, Y) <- Y < Old.
multi(min, Y, Old, Old) <- Y >= Old.
freturn(min, Y, Old, Old).

single(max, Y, Y).
multi(max, Y, Old, Y) <- Y > Old.
multi(max, Y, Old, Old) <- Y <= Old.
freturn(max, Y, Old, Old).

single(avg, Y, cs(1, Y)).
multi(avg, Y, cs(Cnt, Sum), cs(Cnt1, Sum1)) <- Cnt1 = Cnt + 1, Sum1 = Sum + Y.
freturn(avg, Y, cs(Cnt, Sum), Val) <- Val = Sum / Cnt.

single(mcount, Y, 1).
multi(mcount, Y, Old, New) <- New = Old + 1.
ereturn(mcount, Y, nil, 1).
ereturn(mcount, Y, Old, New) <- New = Old + 1.

single(msum, Y, Y).
multi(msum, Y, Old, New) <- New = Old + Y.
ereturn(msum, Y, nil, Y).
ereturn(msum, Y, Old, New) <- New = Old + Y.

single(coales, (Frm, To), (Frm, To)).
multi(coales, (Nfr, Nto), (Cfr, Cto), (Cfr, Nto)) <- Nfr <= Cto, Nto > Cto.
multi(coales, (Nfr, Nto), (Cfr, Cto), (Cfr, Cto)) <- Nfr <= Cto, Nto <= Cto.
multi(coales, (Nfr, Nto), (Cfr, Cto), (Nfr, Nto)) <- Cto < Nfr.
ereturn(coales, (Nfr, Nto), (Cfr, Cto), (Cfr, Cto)) <- Cto < Nfr.
freturn(coales, Y, LastInt, LastInt).
)";
        AggregateRegistry r;
        r.register_from_program(parse_program(kBuiltins));
        return r;
    }();
    return reg;
}

// Program-level registry: builtins plus any single/multi/... rules in the
// source text. User definitions may not shadow builtins.
inline AggregateRegistry program_registry(const Program& p) {
    AggregateRegistry reg = builtin_catalog();
    reg.register_from_program(p);
    return reg;
}

}  // namespace ldl
