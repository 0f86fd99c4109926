#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ldl/analysis.hpp"
#include "ldl/store.hpp"
#include "ldl/uda.hpp"
#include "ldl/unify.hpp"

namespace ldl {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalOptions {
    uint64_t seed = 0;
    long max_steps = 10000;
    bool copy_rule_optimization = true;
    bool intelligent_backtracking = true;
    bool offload = true;
    bool trace = false;
    std::ostream* trace_out = nullptr;
};

using Frame = std::vector<std::optional<Value>>;
using Trail = std::vector<int>;

// --- compiled argument ops -------------------------------------------------

struct ArgOp {
    enum class Kind { Const, Slot, Succ, Destructure, Expr };
    Kind kind = Kind::Const;
    Value cval;
    int slot = -1;
    std::string functor;
    std::vector<ArgOp> sub;
    Term expr;  // evaluated against the frame (vars must be bound)
};

class SlotMap {
public:
    SlotMap() = default;
    explicit SlotMap(int* external_counter) : counter_(external_counter) {}

    int slot_of(const std::string& var) {
        auto it = map_.find(var);
        if (it != map_.end()) return it->second;
        int s = counter_ ? (*counter_)++ : (int)map_.size();
        map_.emplace(var, s);
        return s;
    }
    void alias(const std::string& var, int slot) { map_[var] = slot; }
    const std::map<std::string, int>& vars() const { return map_; }
    size_t size() const { return map_.size(); }

private:
    std::map<std::string, int> map_;
    int* counter_ = nullptr;
};

inline ArgOp compile_arg(const Term& t, SlotMap& slots) {
    ArgOp op;
    switch (t.kind) {
        case Term::Kind::Var:
            op.kind = ArgOp::Kind::Slot;
            op.slot = slots.slot_of(t.name);
            break;
        case Term::Kind::Temporal:
            op.kind = ArgOp::Kind::Succ;
            op.slot = slots.slot_of(t.name);
            break;
        case Term::Kind::Compound:
            if (detail::is_arith_functor(t.name)) {
                op.kind = ArgOp::Kind::Expr;
                op.expr = t;
                std::vector<std::string> vs;
                t.collect_vars(vs);
                for (auto& v : vs) slots.slot_of(v);
            } else {
                op.kind = ArgOp::Kind::Destructure;
                op.functor = t.name;
                for (auto& a : t.args) op.sub.push_back(compile_arg(a, slots));
            }
            break;
        default:
            op.kind = ArgOp::Kind::Const;
            op.cval = *t.to_value();
            break;
    }
    return op;
}

inline std::optional<Value> eval_expr_slots(const Term& t, const Frame& f, const SlotMap& slots);

// Ground value of an op under the frame, when available.
inline std::optional<Value> eval_arg(const ArgOp& op, const Frame& f, const SlotMap& slots) {
    switch (op.kind) {
        case ArgOp::Kind::Const:
            return op.cval;
        case ArgOp::Kind::Slot:
            return f[op.slot];
        case ArgOp::Kind::Succ: {
            auto& v = f[op.slot];
            if (!v || !v->is_int()) return std::nullopt;
            return Value::integer(mpz_class(v->num() + 1));
        }
        case ArgOp::Kind::Destructure: {
            std::vector<Value> args;
            for (auto& s : op.sub) {
                auto v = eval_arg(s, f, slots);
                if (!v) return std::nullopt;
                args.push_back(std::move(*v));
            }
            return Value::tup(op.functor, std::move(args));
        }
        case ArgOp::Kind::Expr:
            return eval_expr_slots(op.expr, f, slots);
    }
    return std::nullopt;
}

inline bool match_arg(const ArgOp& op, const Value& v, Frame& f, Trail& trail) {
    switch (op.kind) {
        case ArgOp::Kind::Const:
            return op.cval == v;
        case ArgOp::Kind::Slot:
            if (!f[op.slot]) {
                f[op.slot] = v;
                trail.push_back(op.slot);
                return true;
            }
            return *f[op.slot] == v;
        case ArgOp::Kind::Succ: {
            if (!v.is_int()) return false;
            Value base = Value::integer(mpz_class(v.num() - 1));
            if (!f[op.slot]) {
                f[op.slot] = base;
                trail.push_back(op.slot);
                return true;
            }
            return *f[op.slot] == base;
        }
        case ArgOp::Kind::Destructure: {
            if (v.kind() != Value::Kind::Tup || v.text() != op.functor ||
                v.args().size() != op.sub.size())
                return false;
            for (size_t i = 0; i < op.sub.size(); ++i)
                if (!match_arg(op.sub[i], v.args()[i], f, trail)) return false;
            return true;
        }
        case ArgOp::Kind::Expr:
            return false;  // handled by the caller via eval_expr_slots
    }
    return false;
}

inline void unwind(Frame& f, Trail& trail, size_t mark) {
    while (trail.size() > mark) {
        f[trail.back()] = std::nullopt;
        trail.pop_back();
    }
}

// --- compiled goals and rules ----------------------------------------------

struct CmpPlan {
    std::string op;
    Term lhs, rhs;
};

struct GoalPlan {
    enum class Kind { Match, NegMatch, Cmp, TestCall, UdaCall, ChoiceFd };
    Kind kind = Kind::Match;
    std::string pred;
    size_t arity = 0;
    std::vector<ArgOp> args;
    CmpPlan cmp;
    std::string uda_kind;  // single/multi/ereturn/freturn
    std::string agg_name;
};

struct AggSpecPlan {
    std::string agg;
    ArgOp arg;
    size_t head_pos = 0;
};

struct RulePlan {
    const Rule* src = nullptr;
    std::string head_pred;
    size_t head_arity = 0;
    std::vector<GoalPlan> goals;
    std::vector<ArgOp> head_args;     // agg positions hold a placeholder
    std::vector<AggSpecPlan> aggs;
    size_t nslots = 0;
    std::shared_ptr<SlotMap> slots;
    // choice metadata
    bool has_choice = false;
    std::vector<int> w_slots;
    std::vector<ChosenTable::GoalProjection> projections;
};

inline std::optional<Value> eval_expr_slots(const Term& t, const Frame& f, const SlotMap& slots) {
    switch (t.kind) {
        case Term::Kind::Var: {
            auto it = slots.vars().find(t.name);
            if (it == slots.vars().end()) return std::nullopt;
            return f[it->second];
        }
        case Term::Kind::Temporal: {
            auto it = slots.vars().find(t.name);
            if (it == slots.vars().end() || !f[it->second] || !f[it->second]->is_int())
                return std::nullopt;
            return Value::integer(mpz_class(f[it->second]->num() + 1));
        }
        case Term::Kind::Compound: {
            if (detail::is_arith_functor(t.name) && t.args.size() == 2) {
                auto a = eval_expr_slots(t.args[0], f, slots);
                auto b = eval_expr_slots(t.args[1], f, slots);
                if (!a || !b) return std::nullopt;
                return arith(t.name, *a, *b);
            }
            std::vector<Value> args;
            for (auto& sub : t.args) {
                auto v = eval_expr_slots(sub, f, slots);
                if (!v) return std::nullopt;
                args.push_back(std::move(*v));
            }
            return Value::tup(t.name, std::move(args));
        }
        default:
            return t.to_value();
    }
}

// Bind `pat` (a variable or destructuring pattern) against a value.
inline bool bind_pattern_slots(const Term& pat, const Value& v, Frame& f, SlotMap& slots,
                               Trail& trail) {
    ArgOp op = compile_arg(pat, slots);
    if (op.kind == ArgOp::Kind::Expr) return false;
    return match_arg(op, v, f, trail);
}

inline RulePlan compile_rule(const Rule& r, const std::set<std::string>& test_preds,
                             const AggregateRegistry& reg,
                             std::shared_ptr<SlotMap> shared_slots = nullptr) {
    RulePlan plan;
    plan.src = &r;
    plan.head_pred = r.head.pred;
    plan.head_arity = r.head.args.size();
    plan.slots = shared_slots ? std::move(shared_slots) : std::make_shared<SlotMap>();
    SlotMap& slots = *plan.slots;

    for (auto& h : r.head.args) {
        if (h.is_agg()) {
            AggSpecPlan sp;
            sp.agg = h.agg->agg;
            sp.arg = compile_arg(h.agg->arg, slots);
            sp.head_pos = plan.head_args.size();
            plan.aggs.push_back(sp);
            plan.head_args.push_back(ArgOp{});  // placeholder, filled per return
        } else {
            plan.head_args.push_back(compile_arg(h.term, slots));
        }
    }

    // textual order, with non-binding goals deferred until their inputs can
    // be bound; choice goals collapse into one trailing ChoiceFd
    std::set<std::string> bound;
    std::vector<const Literal*> deferred;
    std::vector<const ChoiceGoal*> choices;

    auto vars_of_term = [](const Term& t) {
        std::vector<std::string> v;
        t.collect_vars(v);
        return v;
    };
    auto ready = [&](const Literal& lit) {
        if (auto* a = as_atom(lit)) {
            // negations and UDA calls need their named inputs bound
            std::vector<std::string> need;
            if (a->negated) {
                for (auto& t : a->args) collect_named_vars(t, need);
            } else if (is_uda_template_pred(a->pred)) {
                for (size_t i = 0; i + 1 < a->args.size(); ++i) {
                    auto vs = vars_of_term(a->args[i]);
                    need.insert(need.end(), vs.begin(), vs.end());
                }
            }
            for (auto& v : need)
                if (!bound.count(v)) return false;
            return true;
        }
        if (auto* c = as_comparison(lit)) {
            auto lv = vars_of_term(c->lhs), rv = vars_of_term(c->rhs);
            auto all_in = [&](const std::vector<std::string>& vs) {
                for (auto& v : vs)
                    if (!bound.count(v)) return false;
                return true;
            };
            if (c->op == "=") return all_in(lv) || all_in(rv);
            return all_in(lv) && all_in(rv);
        }
        return true;
    };
    auto emit = [&](const Literal& lit) {
        if (auto* a = as_atom(lit)) {
            GoalPlan g;
            g.pred = a->pred;
            g.arity = a->args.size();
            if (is_uda_template_pred(a->pred) && !a->negated) {
                g.kind = GoalPlan::Kind::UdaCall;
                g.uda_kind = a->pred;
                if (a->args.empty() || a->args[0].kind != Term::Kind::Sym)
                    throw EvalError("aggregate call needs a constant aggregate name");
                g.agg_name = a->args[0].name;
                for (auto& t : a->args) g.args.push_back(compile_arg(t, slots));
            } else {
                g.kind = a->negated ? GoalPlan::Kind::NegMatch
                                    : (test_preds.count(a->pred) ? GoalPlan::Kind::TestCall
                                                                 : GoalPlan::Kind::Match);
                for (auto& t : a->args) g.args.push_back(compile_arg(t, slots));
            }
            if (!a->negated) {
                std::vector<std::string> vs;
                for (auto& t : a->args) t.collect_vars(vs);
                bound.insert(vs.begin(), vs.end());
            }
            plan.goals.push_back(std::move(g));
        } else if (auto* c = as_comparison(lit)) {
            GoalPlan g;
            g.kind = GoalPlan::Kind::Cmp;
            g.cmp = CmpPlan{c->op, c->lhs, c->rhs};
            std::vector<std::string> vs;
            c->lhs.collect_vars(vs);
            c->rhs.collect_vars(vs);
            for (auto& v : vs) slots.slot_of(v);
            if (c->op == "=") bound.insert(vs.begin(), vs.end());
            plan.goals.push_back(std::move(g));
        }
    };

    for (auto& lit : r.body) {
        if (auto* ch = as_choice(lit)) {
            choices.push_back(ch);
            continue;
        }
        if (ready(lit)) {
            emit(lit);
            // deferred goals whose inputs just became available
            bool moved = true;
            while (moved) {
                moved = false;
                for (size_t i = 0; i < deferred.size(); ++i)
                    if (ready(*deferred[i])) {
                        emit(*deferred[i]);
                        deferred.erase(deferred.begin() + i);
                        moved = true;
                        break;
                    }
            }
        } else {
            deferred.push_back(&lit);
        }
    }
    for (auto* lit : deferred) emit(*lit);  // safety has already complained if unbound

    if (!choices.empty()) {
        plan.has_choice = true;
        std::vector<std::string> w;
        std::set<std::string> seen;
        for (auto* g : choices) {
            for (auto& v : g->left)
                if (seen.insert(v).second) w.push_back(v);
            for (auto& v : g->right)
                if (seen.insert(v).second) w.push_back(v);
        }
        std::map<std::string, size_t> pos;
        for (size_t i = 0; i < w.size(); ++i) {
            pos[w[i]] = i;
            plan.w_slots.push_back(slots.slot_of(w[i]));
        }
        for (auto* g : choices) {
            ChosenTable::GoalProjection proj;
            for (auto& v : g->left) proj.left.push_back(pos[v]);
            for (auto& v : g->right) proj.right.push_back(pos[v]);
            plan.projections.push_back(std::move(proj));
        }
        GoalPlan g;
        g.kind = GoalPlan::Kind::ChoiceFd;
        plan.goals.push_back(std::move(g));
    }

    plan.nslots = slots.size();
    (void)reg;
    return plan;
}

// --- plan execution ---------------------------------------------------------

class Evaluator;

struct PlanContext {
    Evaluator* ev = nullptr;
    // resolve a predicate to its relation for scanning
    std::function<Relation*(const std::string& pred, size_t arity)> resolve;
    // chosen table for the rule being executed (set by the driver)
    ChosenTable* chosen = nullptr;
};

struct Window {
    int goal_index = -1;
    size_t from = 0;
};

// Enumerates solutions of plan.goals[gi..] over the current frame.
// The sink returns false to cut enumeration.
class Evaluator {
public:
    Evaluator(const Analysis& an, EvalOptions opts) : an_(&an), opts_(std::move(opts)) {}

    Store store;

    const Analysis& analysis() const { return *an_; }
    const EvalOptions& options() const { return opts_; }
    EvalOptions& options() { return opts_; }

    ChosenTable& chosen_table(const Rule* rule, const RulePlan& plan) {
        auto it = chosen_.find(rule);
        if (it == chosen_.end())
            it = chosen_.emplace(rule, ChosenTable(plan.projections)).first;
        return it->second;
    }
    void clear_chosen(const Rule* rule) { chosen_.erase(rule); }
    std::map<const Rule*, ChosenTable>& chosen_tables() { return chosen_; }

    struct AggRuleState {
        std::map<Tuple, std::vector<GroupCursor>> groups;
        std::set<std::vector<Value>> fed;
    };
    AggRuleState& agg_state(const Rule* rule) { return agg_states_[rule]; }
    void clear_agg_state(const Rule* rule) { agg_states_.erase(rule); }

    Relation* relation(const std::string& pred, size_t arity) {
        return store.relation(pred, arity).get();
    }

    bool run_goals(const RulePlan& plan, size_t gi, Frame& f, const PlanContext& ctx,
                   const Window* window, const std::function<bool(Frame&)>& sink) {
        if (gi == plan.goals.size()) return sink(f);
        const GoalPlan& g = plan.goals[gi];
        Trail trail;
        switch (g.kind) {
            case GoalPlan::Kind::Match: {
                Relation* rel = ctx.resolve(g.pred, g.arity);
                if (!rel) return true;
                size_t from = (window && (int)gi == window->goal_index) ? window->from : 0;
                ScanPattern pat(g.arity);
                for (size_t i = 0; i < g.args.size(); ++i) pat[i] = eval_arg(g.args[i], f, *plan.slots);
                std::vector<size_t> ids;
                rel->for_each_match(pat, from, [&](size_t id, const Tuple&) {
                    ids.push_back(id);
                    return true;
                });
                for (size_t id : ids) {
                    Tuple t = rel->row(id);  // copy: the relation may grow under us
                    size_t mark = trail.size();
                    bool ok = true;
                    for (size_t i = 0; i < g.args.size(); ++i)
                        if (!match_arg(g.args[i], t[i], f, trail)) {
                            ok = false;
                            break;
                        }
                    if (ok && !run_goals(plan, gi + 1, f, ctx, window, sink)) {
                        unwind(f, trail, 0);
                        return false;
                    }
                    unwind(f, trail, mark);
                }
                return true;
            }
            case GoalPlan::Kind::NegMatch: {
                Relation* rel = ctx.resolve(g.pred, g.arity);
                if (rel) {
                    ScanPattern pat(g.arity);
                    for (size_t i = 0; i < g.args.size(); ++i)
                        pat[i] = eval_arg(g.args[i], f, *plan.slots);
                    bool found = false;
                    rel->for_each_match(pat, 0, [&](size_t, const Tuple& t) {
                        Trail tr;
                        bool ok = true;
                        for (size_t i = 0; i < g.args.size(); ++i)
                            if (!match_arg(g.args[i], t[i], f, tr)) {
                                ok = false;
                                break;
                            }
                        unwind(f, tr, 0);
                        if (ok) {
                            found = true;
                            return false;
                        }
                        return true;
                    });
                    if (found) return true;  // negation fails, no solutions here
                }
                return run_goals(plan, gi + 1, f, ctx, window, sink);
            }
            case GoalPlan::Kind::Cmp: {
                const SlotMap& slots = *plan.slots;
                auto lhs = eval_expr_slots(g.cmp.lhs, f, slots);
                auto rhs = eval_expr_slots(g.cmp.rhs, f, slots);
                bool pass = false;
                size_t mark = trail.size();
                if (g.cmp.op == "=") {
                    if (lhs && rhs) {
                        pass = *lhs == *rhs;
                    } else if (lhs && !rhs) {
                        pass = bind_pattern_slots(g.cmp.rhs, *lhs, f, *plan.slots, trail);
                    } else if (rhs && !lhs) {
                        pass = bind_pattern_slots(g.cmp.lhs, *rhs, f, *plan.slots, trail);
                    }
                } else if (lhs && rhs) {
                    auto r = compare_values(g.cmp.op, *lhs, *rhs);
                    pass = r && *r;
                }
                if (pass && !run_goals(plan, gi + 1, f, ctx, window, sink)) {
                    unwind(f, trail, 0);
                    return false;
                }
                unwind(f, trail, mark);
                return true;
            }
            case GoalPlan::Kind::TestCall: {
                for (const Rule* tr_rule : test_rules(g.pred)) {
                    size_t mark = trail.size();
                    if (eval_test_rule(*tr_rule, g, f, *plan.slots, trail)) {
                        if (!run_goals(plan, gi + 1, f, ctx, window, sink)) {
                            unwind(f, trail, 0);
                            return false;
                        }
                    }
                    unwind(f, trail, mark);
                }
                return true;
            }
            case GoalPlan::Kind::UdaCall: {
                const AggregateDef& def = an_->registry.require(g.agg_name);
                std::vector<Value> ins;
                for (size_t i = 1; i + 1 < g.args.size(); ++i) {
                    auto v = eval_arg(g.args[i], f, *plan.slots);
                    if (!v) return true;
                    ins.push_back(std::move(*v));
                }
                const std::vector<Rule>* rules = nullptr;
                bool all_matches = false;
                if (g.uda_kind == "single") {
                    rules = &def.single_rules;
                } else if (g.uda_kind == "multi") {
                    rules = &def.multi_rules;
                } else if (g.uda_kind == "ereturn") {
                    rules = &def.ereturn_rules;
                    all_matches = true;
                } else {
                    rules = &def.freturn_rules;
                    all_matches = true;
                }
                for (auto& rule : *rules) {
                    auto out = uda_detail::apply_rule(rule, ins, ins.size());
                    if (!out) continue;
                    size_t mark = trail.size();
                    if (match_arg(g.args.back(), *out, f, trail)) {
                        if (!run_goals(plan, gi + 1, f, ctx, window, sink)) {
                            unwind(f, trail, 0);
                            return false;
                        }
                    }
                    unwind(f, trail, mark);
                    if (!all_matches) break;  // first matching rule wins
                }
                return true;
            }
            case GoalPlan::Kind::ChoiceFd: {
                if (!ctx.chosen) return run_goals(plan, gi + 1, f, ctx, window, sink);
                Tuple w;
                for (int s : plan.w_slots) {
                    if (!f[s]) return true;
                    w.push_back(*f[s]);
                }
                if (ctx.chosen->fd_insert(w) == ChosenTable::Fd::Violates) return true;
                return run_goals(plan, gi + 1, f, ctx, window, sink);
            }
        }
        return true;
    }

    // full enumeration with an optional semi-naive window
    void for_each_solution(const RulePlan& plan, const PlanContext& ctx, const Window* window,
                           const std::function<bool(Frame&)>& sink) {
        Frame f(plan.nslots);
        run_goals(plan, 0, f, ctx, window, sink);
    }

private:
    std::vector<const Rule*> test_rules(const std::string& pred) {
        auto it = test_rule_cache_.find(pred);
        if (it != test_rule_cache_.end()) return it->second;
        std::vector<const Rule*> out;
        for (auto& r : an_->program.rules)
            if (r.head.pred == pred) out.push_back(&r);
        test_rule_cache_[pred] = out;
        return out;
    }

    // Call-site evaluation of a comparison-defined predicate: bound args
    // unify with the head pattern, the body runs, unbound args bind from
    // the head terms.
    bool eval_test_rule(const Rule& rule, const GoalPlan& g, Frame& f, SlotMap& slots,
                        Trail& trail) {
        Env env;
        std::vector<size_t> outputs;
        for (size_t i = 0; i < g.args.size(); ++i) {
            auto v = eval_arg(g.args[i], f, slots);
            if (!v) {
                outputs.push_back(i);
                continue;
            }
            if (!match_term(rule.head.args[i].term, *v, env)) return false;
        }
        for (auto& lit : rule.body) {
            auto* c = as_comparison(lit);
            if (!c || !eval_comparison(*c, env)) return false;
        }
        for (size_t i : outputs) {
            auto v = eval_term(rule.head.args[i].term, env);
            if (!v) return false;
            if (!match_arg(g.args[i], *v, f, trail)) return false;
        }
        return true;
    }

    const Analysis* an_;
    EvalOptions opts_;
    std::map<const Rule*, ChosenTable> chosen_;
    std::map<const Rule*, AggRuleState> agg_states_;
    std::map<std::string, std::vector<const Rule*>> test_rule_cache_;
};

}  // namespace ldl
