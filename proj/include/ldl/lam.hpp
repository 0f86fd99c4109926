#pragma once

#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ldl/engine.hpp"

namespace ldl {

// Pipelined query execution: a query form compiles into a network of
// AND/OR nodes over one shared slot frame, each exposing the get-tuple
// protocol as enter (first tuple) and backtrack (next tuple). Recursive
// predicates appear as cursors over their lazy fixpoint producers; strata
// that need complete operands (negation, nonmonotone aggregation, XY
// units) materialize on first touch.

struct LamExec {
    Engine* engine = nullptr;
    Frame frame;
    long steps = 0;
    bool trace = false;
    std::ostream* trace_out = nullptr;

    void log(const std::string& line) {
        if (trace && trace_out) (*trace_out) << "[trace] " << line << "\n";
    }
};

class LamNode {
public:
    virtual ~LamNode() = default;
    virtual bool enter(LamExec& x) = 0;
    virtual bool backtrack(LamExec& x) = 0;
    virtual void reset(LamExec& x) = 0;  // discard iteration state, unwind bindings
    virtual std::string label() const = 0;

    int id = 0;
};

namespace lam_detail {

// one-shot goals share the entered/failed bookkeeping
class OneShot : public LamNode {
public:
    bool enter(LamExec& x) final {
        ++x.steps;
        unwind(x.frame, trail_, 0);
        bool ok = fire(x);
        if (!ok) unwind(x.frame, trail_, 0);
        return ok;
    }
    bool backtrack(LamExec& x) final {
        ++x.steps;
        unwind(x.frame, trail_, 0);
        return false;
    }
    void reset(LamExec& x) final { unwind(x.frame, trail_, 0); }

protected:
    virtual bool fire(LamExec& x) = 0;
    Trail trail_;
};

}  // namespace lam_detail

// Scan over a relation: base relations and materialized predicates iterate
// a complete extent; stream sources ask the producer to grow on demand.
class ScanNode : public LamNode {
public:
    enum class Source { Complete, MaterializeFirst, Stream };

    ScanNode(std::string pred, size_t arity, std::vector<ArgOp> args,
             std::shared_ptr<SlotMap> slots, Source src)
        : pred_(std::move(pred)), arity_(arity), args_(std::move(args)),
          slots_(std::move(slots)), source_(src) {}

    bool enter(LamExec& x) override {
        ++x.steps;
        cursor_ = 0;
        x.log("enter scan " + pred_);
        return advance(x);
    }
    bool backtrack(LamExec& x) override {
        ++x.steps;
        x.log("backtrack scan " + pred_);
        return advance(x);
    }
    void reset(LamExec& x) override {
        unwind(x.frame, trail_, 0);
        cursor_ = 0;
    }
    std::string label() const override { return pred_; }

private:
    Relation* rel(LamExec& x) {
        if (source_ == Source::MaterializeFirst) x.engine->materialize_pred(pred_);
        return x.engine->resolve(pred_, arity_);
    }

    bool advance(LamExec& x) {
        unwind(x.frame, trail_, 0);
        Relation* r = rel(x);
        for (;;) {
            while (cursor_ >= r->size()) {
                if (source_ != Source::Stream) return false;
                if (!x.engine->grow_stream(pred_, cursor_)) return false;
            }
            Tuple t = r->row(cursor_++);
            bool ok = true;
            for (size_t i = 0; i < args_.size() && ok; ++i) {
                auto bound = eval_arg(args_[i], x.frame, *slots_);
                if (bound) {
                    ok = *bound == t[i];
                } else {
                    ok = match_arg(args_[i], t[i], x.frame, trail_);
                }
            }
            if (ok) {
                x.log("scan " + pred_ + " -> success");
                return true;
            }
            unwind(x.frame, trail_, 0);
        }
    }

    std::string pred_;
    size_t arity_;
    std::vector<ArgOp> args_;
    std::shared_ptr<SlotMap> slots_;
    Source source_;
    size_t cursor_ = 0;
    Trail trail_;
};

class NegNode : public lam_detail::OneShot {
public:
    NegNode(std::string pred, size_t arity, std::vector<ArgOp> args,
            std::shared_ptr<SlotMap> slots)
        : pred_(std::move(pred)), arity_(arity), args_(std::move(args)),
          slots_(std::move(slots)) {}
    std::string label() const override { return "~" + pred_; }

protected:
    bool fire(LamExec& x) override {
        x.engine->materialize_pred(pred_);
        Relation* r = x.engine->resolve(pred_, arity_);
        ScanPattern pat(arity_);
        for (size_t i = 0; i < args_.size(); ++i) pat[i] = eval_arg(args_[i], x.frame, *slots_);
        bool found = false;
        r->for_each_match(pat, 0, [&](size_t, const Tuple& t) {
            Trail tr;
            bool ok = true;
            for (size_t i = 0; i < args_.size() && ok; ++i)
                ok = match_arg(args_[i], t[i], x.frame, tr);
            unwind(x.frame, tr, 0);
            if (ok) found = true;
            return !found;
        });
        return !found;
    }

private:
    std::string pred_;
    size_t arity_;
    std::vector<ArgOp> args_;
    std::shared_ptr<SlotMap> slots_;
};

class CmpNode : public lam_detail::OneShot {
public:
    CmpNode(CmpPlan cmp, std::shared_ptr<SlotMap> slots)
        : cmp_(std::move(cmp)), slots_(std::move(slots)) {}
    std::string label() const override { return cmp_.op; }

protected:
    bool fire(LamExec& x) override {
        auto lhs = eval_expr_slots(cmp_.lhs, x.frame, *slots_);
        auto rhs = eval_expr_slots(cmp_.rhs, x.frame, *slots_);
        if (cmp_.op == "=") {
            if (lhs && rhs) return *lhs == *rhs;
            if (lhs) return bind_pattern_slots(cmp_.rhs, *lhs, x.frame, *slots_, trail_);
            if (rhs) return bind_pattern_slots(cmp_.lhs, *rhs, x.frame, *slots_, trail_);
            return false;
        }
        if (!lhs || !rhs) return false;
        auto r = compare_values(cmp_.op, *lhs, *rhs);
        return r && *r;
    }

private:
    CmpPlan cmp_;
    std::shared_ptr<SlotMap> slots_;
};

// Head-argument unification that could not be resolved by slot aliasing.
// The pre node fires when the caller side is already bound; the post node
// settles the remaining direction after the body ran.
class UnifyNode : public lam_detail::OneShot {
public:
    UnifyNode(ArgOp caller, ArgOp callee, std::shared_ptr<SlotMap> slots, bool post)
        : caller_(std::move(caller)), callee_(std::move(callee)), slots_(std::move(slots)),
          post_(post) {}
    std::string label() const override { return post_ ? "bind-out" : "bind-in"; }

protected:
    bool fire(LamExec& x) override {
        auto cv = eval_arg(caller_, x.frame, *slots_);
        if (cv) return match_arg(callee_, *cv, x.frame, trail_);
        auto hv = eval_arg(callee_, x.frame, *slots_);
        if (hv) return match_arg(caller_, *hv, x.frame, trail_);
        return !post_;  // both unbound: fine before the body, an error after
    }

private:
    ArgOp caller_, callee_;
    std::shared_ptr<SlotMap> slots_;
    bool post_;
};

class ChoiceNode : public lam_detail::OneShot {
public:
    ChoiceNode(const Rule* rule, RulePlan plan)
        : rule_(rule), plan_(std::move(plan)) {}
    std::string label() const override { return "choice"; }

protected:
    bool fire(LamExec& x) override {
        ChosenTable& ct = x.engine->evaluator().chosen_table(rule_, plan_);
        Tuple w;
        for (int s : plan_.w_slots) {
            if (!x.frame[s]) return false;
            w.push_back(*x.frame[s]);
        }
        return ct.fd_insert(w) == ChosenTable::Fd::Accepted;
    }

private:
    const Rule* rule_;
    RulePlan plan_;
};

class TestCallNode : public LamNode {
public:
    TestCallNode(std::string pred, std::vector<ArgOp> args, std::vector<const Rule*> rules,
                 std::shared_ptr<SlotMap> slots)
        : pred_(std::move(pred)), args_(std::move(args)), rules_(std::move(rules)),
          slots_(std::move(slots)) {}

    bool enter(LamExec& x) override {
        ++x.steps;
        next_ = 0;
        return advance(x);
    }
    bool backtrack(LamExec& x) override {
        ++x.steps;
        return advance(x);
    }
    void reset(LamExec& x) override {
        unwind(x.frame, trail_, 0);
        next_ = 0;
    }
    std::string label() const override { return pred_; }

private:
    bool advance(LamExec& x) {
        unwind(x.frame, trail_, 0);
        while (next_ < rules_.size()) {
            const Rule& rule = *rules_[next_++];
            if (try_rule(rule, x)) return true;
            unwind(x.frame, trail_, 0);
        }
        return false;
    }

    bool try_rule(const Rule& rule, LamExec& x) {
        Env env;
        std::vector<size_t> outputs;
        for (size_t i = 0; i < args_.size(); ++i) {
            auto v = eval_arg(args_[i], x.frame, *slots_);
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
            if (!v || !match_arg(args_[i], *v, x.frame, trail_)) return false;
        }
        return true;
    }

    std::string pred_;
    std::vector<ArgOp> args_;
    std::vector<const Rule*> rules_;
    std::shared_ptr<SlotMap> slots_;
    size_t next_ = 0;
    Trail trail_;
};

// Nested loop over the goal nodes of one rule body. On a fresh failure the
// intelligent-backtracking target is the latest earlier goal producing one
// of the failed goal's input slots; goals that already yielded a tuple
// backtrack normally so no answers are skipped.
class AndNode : public LamNode {
public:
    AndNode(std::string name, std::vector<std::unique_ptr<LamNode>> goals,
            std::vector<int> jump_targets)
        : name_(std::move(name)), goals_(std::move(goals)), targets_(std::move(jump_targets)) {
        entered_.assign(goals_.size(), false);
        succeeded_.assign(goals_.size(), false);
    }

    bool enter(LamExec& x) override {
        ++x.steps;
        for (size_t i = 0; i < goals_.size(); ++i) entered_[i] = false;
        return run_from(x, 0, /*entering=*/true);
    }
    bool backtrack(LamExec& x) override {
        ++x.steps;
        if (goals_.empty()) return false;
        return run_from(x, (int)goals_.size() - 1, /*entering=*/false);
    }
    void reset(LamExec& x) override {
        for (auto& g : goals_) g->reset(x);
        for (size_t i = 0; i < goals_.size(); ++i) entered_[i] = succeeded_[i] = false;
    }
    std::string label() const override { return name_; }

private:
    bool run_from(LamExec& x, int i, bool entering) {
        const int n = (int)goals_.size();
        while (i >= 0 && i < n) {
            bool ok;
            if (entering) {
                ok = goals_[i]->enter(x);
                entered_[i] = true;
                succeeded_[i] = ok;
            } else {
                ok = goals_[i]->backtrack(x);
                if (ok) succeeded_[i] = true;
            }
            if (ok) {
                ++i;
                entering = true;
                continue;
            }
            // A goal that failed without ever producing a tuple cannot be
            // helped by goals that do not bind its inputs: jump straight to
            // the latest producer. Exhaustion after success backtracks
            // chronologically so no answers are skipped.
            int j = i - 1;
            bool fresh_fail = entering && !succeeded_[i];
            if (fresh_fail && x.engine->options().intelligent_backtracking) {
                j = targets_[i];
                if (j < i - 1)
                    x.log("and(" + name_ + ") fail at " + goals_[i]->label() +
                          " -> backtrack to " + (j >= 0 ? goals_[j]->label() : "exit"));
                for (int k = i - 1; k > j; --k) {
                    goals_[k]->reset(x);
                    entered_[k] = false;
                }
            }
            goals_[i]->reset(x);
            entered_[i] = false;
            i = j;
            entering = false;
        }
        return i >= n;
    }

    std::string name_;
    std::vector<std::unique_ptr<LamNode>> goals_;
    std::vector<int> targets_;
    std::vector<bool> entered_, succeeded_;
};

// Predicate occurrence over its defining rules.
class OrNode : public LamNode {
public:
    OrNode(std::string pred, std::vector<std::unique_ptr<LamNode>> children)
        : pred_(std::move(pred)), children_(std::move(children)) {}

    bool enter(LamExec& x) override {
        ++x.steps;
        active_ = 0;
        x.log("enter or " + pred_);
        return advance(x, /*entering=*/true);
    }
    bool backtrack(LamExec& x) override {
        ++x.steps;
        return advance(x, /*entering=*/false);
    }
    void reset(LamExec& x) override {
        for (auto& c : children_) c->reset(x);
        active_ = 0;
    }
    std::string label() const override { return pred_; }

private:
    bool advance(LamExec& x, bool entering) {
        while (active_ < children_.size()) {
            bool ok = entering ? children_[active_]->enter(x) : children_[active_]->backtrack(x);
            if (ok) return true;
            children_[active_]->reset(x);
            ++active_;
            entering = true;
        }
        return false;
    }

    std::string pred_;
    std::vector<std::unique_ptr<LamNode>> children_;
    size_t active_ = 0;
};

class UdaCallNode : public LamNode {
public:
    UdaCallNode(std::string kind, const AggregateDef* def, std::vector<ArgOp> args,
                std::shared_ptr<SlotMap> slots)
        : kind_(std::move(kind)), def_(def), args_(std::move(args)), slots_(std::move(slots)) {}

    bool enter(LamExec& x) override {
        ++x.steps;
        next_ = 0;
        return advance(x);
    }
    bool backtrack(LamExec& x) override {
        ++x.steps;
        if (first_only_) return false;
        return advance(x);
    }
    void reset(LamExec& x) override {
        unwind(x.frame, trail_, 0);
        next_ = 0;
    }
    std::string label() const override { return kind_; }

private:
    const std::vector<Rule>& rules() const {
        if (kind_ == "single") return def_->single_rules;
        if (kind_ == "multi") return def_->multi_rules;
        if (kind_ == "ereturn") return def_->ereturn_rules;
        return def_->freturn_rules;
    }

    bool advance(LamExec& x) {
        unwind(x.frame, trail_, 0);
        first_only_ = kind_ == "single" || kind_ == "multi";
        std::vector<Value> ins;
        for (size_t i = 1; i + 1 < args_.size(); ++i) {
            auto v = eval_arg(args_[i], x.frame, *slots_);
            if (!v) return false;
            ins.push_back(std::move(*v));
        }
        const auto& rs = rules();
        while (next_ < rs.size()) {
            auto out = uda_detail::apply_rule(rs[next_++], ins, ins.size());
            if (out && match_arg(args_.back(), *out, x.frame, trail_)) return true;
            unwind(x.frame, trail_, 0);
            if (first_only_) return false;
        }
        return false;
    }

    std::string kind_;
    const AggregateDef* def_;
    std::vector<ArgOp> args_;
    std::shared_ptr<SlotMap> slots_;
    size_t next_ = 0;
    bool first_only_ = false;
    Trail trail_;
};

// A compiled query form: predicate plus bound/free adornment. Constants of
// the concrete query instance are injected into the root slots at run
// start; answers stream one per pull with set semantics.
class QueryForm {
public:
    QueryForm(Engine& eng, const Atom& query) : eng_(eng) {
        adornment_ = query.pred;
        auto root_slots = std::make_shared<SlotMap>(&slot_counter_);
        std::vector<ArgOp> qargs;
        for (size_t i = 0; i < query.args.size(); ++i) {
            const Term& t = query.args[i];
            if (t.is_const()) {
                adornment_ += 'b';
                int slot = slot_counter_++;
                const_slots_.emplace_back(i, slot);
                ArgOp op;
                op.kind = ArgOp::Kind::Slot;
                op.slot = slot;
                qargs.push_back(op);
            } else {
                adornment_ += 'f';
                qargs.push_back(compile_arg(t, *root_slots));
            }
        }
        answer_args_ = qargs;
        answer_slots_ = root_slots;
        child_ = compile_occurrence(query.pred, query.args.size(), qargs, root_slots, 0);
    }

    const std::string& adornment() const { return adornment_; }

    // Fresh execution for a concrete query instance of this form.
    void start(const Atom& query) {
        exec_.engine = &eng_;
        exec_.frame.assign((size_t)slot_counter_, std::nullopt);
        exec_.trace = eng_.options().trace;
        exec_.trace_out = eng_.options().trace_out ? eng_.options().trace_out : &std::cerr;
        if (started_) child_->reset(exec_);
        for (auto& [pos, slot] : const_slots_) exec_.frame[slot] = *query.args[pos].to_value();
        seen_.clear();
        started_ = false;
        exhausted_ = false;
    }

    std::optional<Tuple> next() {
        if (exhausted_) return std::nullopt;
        bool ok = started_ ? child_->backtrack(exec_) : child_->enter(exec_);
        started_ = true;
        while (ok) {
            Tuple t;
            bool complete = true;
            for (auto& op : answer_args_) {
                auto v = eval_arg(op, exec_.frame, *answer_slots_);
                if (!v) complete = false;
                t.push_back(v ? *v : Value::sym("_"));
            }
            if (complete && seen_.insert(t).second) {
                exec_.log("answer " + tuple_to_string(t));
                return t;
            }
            ok = child_->backtrack(exec_);
        }
        exhausted_ = true;
        return std::nullopt;
    }

    bool exhausted() const { return exhausted_; }
    long steps() const { return exec_.steps; }

private:
    std::unique_ptr<LamNode> compile_occurrence(const std::string& pred, size_t arity,
                                                const std::vector<ArgOp>& args,
                                                std::shared_ptr<SlotMap> caller_slots,
                                                int depth) {
        if (depth > 64) throw EvalError("query expansion too deep");
        const Analysis& an = eng_.analysis();
        if (an.test_preds.count(pred))
            return std::make_unique<TestCallNode>(pred, args, eng_.rules_for(pred), caller_slots);
        const Component* comp = eng_.component_of(pred);
        ScanNode::Source src = ScanNode::Source::Complete;
        if (comp) {
            switch (comp->kind) {
                case Component::Kind::Edb:
                    src = ScanNode::Source::Complete;
                    break;
                case Component::Kind::Recursive:
                    src = ScanNode::Source::Stream;
                    break;
                case Component::Kind::Xy:
                    src = ScanNode::Source::MaterializeFirst;
                    break;
                case Component::Kind::Plain: {
                    bool agg = false;
                    for (size_t ri : comp->rule_indices)
                        if (an.program.rules[ri].head.has_aggregates()) agg = true;
                    if (agg) {
                        src = ScanNode::Source::MaterializeFirst;
                    } else {
                        // inline expansion: one AND child per rule
                        std::vector<std::unique_ptr<LamNode>> kids;
                        for (size_t ri : comp->rule_indices)
                            kids.push_back(
                                compile_and(an.program.rules[ri], args, caller_slots, depth));
                        return std::make_unique<OrNode>(pred, std::move(kids));
                    }
                    break;
                }
            }
        }
        return std::make_unique<ScanNode>(pred, arity, args, caller_slots, src);
    }

    std::unique_ptr<LamNode> compile_and(const Rule& rule, const std::vector<ArgOp>& caller_args,
                                         std::shared_ptr<SlotMap> caller_slots, int depth) {
        const Analysis& an = eng_.analysis();
        auto rs = std::make_shared<SlotMap>(&slot_counter_);
        std::vector<std::pair<ArgOp, ArgOp>> unifies;
        for (size_t i = 0; i < rule.head.args.size(); ++i) {
            const Term& h = rule.head.args[i].term;
            const ArgOp& c = caller_args[i];
            if (h.kind == Term::Kind::Var && !rs->vars().count(h.name) &&
                c.kind == ArgOp::Kind::Slot) {
                rs->alias(h.name, c.slot);  // compile-time unification
                continue;
            }
            unifies.emplace_back(c, compile_arg(h, *rs));
        }
        RulePlan plan = compile_rule(rule, an.test_preds, an.registry, rs);

        std::vector<std::unique_ptr<LamNode>> goals;
        for (auto& [c, h] : unifies)
            goals.push_back(std::make_unique<UnifyNode>(c, h, rs, /*post=*/false));
        for (auto& g : plan.goals) {
            switch (g.kind) {
                case GoalPlan::Kind::Match:
                    goals.push_back(compile_occurrence(g.pred, g.arity, g.args, rs, depth + 1));
                    break;
                case GoalPlan::Kind::NegMatch:
                    goals.push_back(std::make_unique<NegNode>(g.pred, g.arity, g.args, rs));
                    break;
                case GoalPlan::Kind::Cmp:
                    goals.push_back(std::make_unique<CmpNode>(g.cmp, rs));
                    break;
                case GoalPlan::Kind::TestCall:
                    goals.push_back(std::make_unique<TestCallNode>(g.pred, g.args,
                                                                   eng_.rules_for(g.pred), rs));
                    break;
                case GoalPlan::Kind::UdaCall:
                    goals.push_back(std::make_unique<UdaCallNode>(
                        g.uda_kind, &an.registry.require(g.agg_name), g.args, rs));
                    break;
                case GoalPlan::Kind::ChoiceFd:
                    goals.push_back(std::make_unique<ChoiceNode>(&rule, plan));
                    break;
            }
        }
        for (auto& [c, h] : unifies)
            goals.push_back(std::make_unique<UnifyNode>(c, h, rs, /*post=*/true));

        std::vector<int> targets = jump_targets(plan, unifies.size(), goals.size());
        return std::make_unique<AndNode>(rule.head.pred, std::move(goals), std::move(targets));
    }

    // Latest earlier goal that first binds one of goal i's slots.
    std::vector<int> jump_targets(const RulePlan& plan, size_t pre_unifies, size_t total) {
        std::vector<std::set<int>> mentions(total);
        auto collect_op = [](const ArgOp& op, std::set<int>& out, auto&& self) -> void {
            if (op.kind == ArgOp::Kind::Slot || op.kind == ArgOp::Kind::Succ) out.insert(op.slot);
            for (auto& s : op.sub) self(s, out, self);
            if (op.kind == ArgOp::Kind::Expr) {
                std::vector<std::string> vs;
                op.expr.collect_vars(vs);
                (void)vs;  // slots of expression vars are collected by the caller
            }
        };
        auto expr_slots = [&](const Term& t, std::set<int>& out) {
            std::vector<std::string> vs;
            t.collect_vars(vs);
            for (auto& v : vs) {
                auto it = plan.slots->vars().find(v);
                if (it != plan.slots->vars().end()) out.insert(it->second);
            }
        };
        for (size_t k = 0; k < plan.goals.size(); ++k) {
            auto& g = plan.goals[k];
            std::set<int>& m = mentions[pre_unifies + k];
            for (auto& op : g.args) {
                collect_op(op, m, collect_op);
                if (op.kind == ArgOp::Kind::Expr) expr_slots(op.expr, m);
            }
            if (g.kind == GoalPlan::Kind::Cmp) {
                expr_slots(g.cmp.lhs, m);
                expr_slots(g.cmp.rhs, m);
            }
            if (g.kind == GoalPlan::Kind::ChoiceFd)
                for (int s : plan.w_slots) m.insert(s);
        }
        // pre/post unify nodes produce and consume conservatively: treat
        // them as mentioning nothing so they always backtrack normally
        std::vector<int> targets(total);
        std::map<int, int> first_binder;
        for (size_t i = 0; i < total; ++i) {
            int best = (int)i - 1;
            bool binding_goal =
                i >= pre_unifies && i < pre_unifies + plan.goals.size() &&
                (plan.goals[i - pre_unifies].kind == GoalPlan::Kind::Match ||
                 plan.goals[i - pre_unifies].kind == GoalPlan::Kind::TestCall ||
                 plan.goals[i - pre_unifies].kind == GoalPlan::Kind::UdaCall ||
                 (plan.goals[i - pre_unifies].kind == GoalPlan::Kind::Cmp &&
                  plan.goals[i - pre_unifies].cmp.op == "="));
            if (i >= pre_unifies && i < pre_unifies + plan.goals.size()) {
                best = -1;
                for (int s : mentions[i]) {
                    auto it = first_binder.find(s);
                    if (it != first_binder.end() && it->second < (int)i)
                        best = std::max(best, it->second);
                }
                auto& g = plan.goals[i - pre_unifies];
                if (g.kind == GoalPlan::Kind::NegMatch || g.kind == GoalPlan::Kind::Cmp ||
                    g.kind == GoalPlan::Kind::ChoiceFd) {
                    // pure checks: jump to the latest producer
                } else if (best < (int)i - 1) {
                    // scans can be re-entered profitably only via producers,
                    // same rule applies
                }
            } else {
                best = (int)i - 1;  // unify nodes backtrack normally
            }
            targets[i] = best;
            if (binding_goal || i < pre_unifies || i >= pre_unifies + plan.goals.size())
                for (int s : mentions[i])
                    first_binder.emplace(s, (int)i);
        }
        return targets;
    }

    Engine& eng_;
    int slot_counter_ = 0;
    std::string adornment_;
    std::vector<std::pair<size_t, int>> const_slots_;
    std::vector<ArgOp> answer_args_;
    std::shared_ptr<SlotMap> answer_slots_;
    std::unique_ptr<LamNode> child_;
    LamExec exec_;
    std::set<Tuple> seen_;
    bool started_ = false;
    bool exhausted_ = false;
};

}  // namespace ldl
