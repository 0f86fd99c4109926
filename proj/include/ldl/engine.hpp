#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ldl/eval.hpp"

namespace ldl {

class Engine;

// Semi-naive fixpoint over one rule set. Own predicates and lazily grown
// lower streams are consumed through per-(rule, goal) watermarks; a sweep
// applies every pending window once. Doubles as the lazy producer of
// Figure-2 style: grow() extends the result relation only as far as the
// consumer needs, pulling lower streams one row at a time when all windows
// run dry.
class FixpointProducer {
public:
    FixpointProducer(Evaluator& ev, Engine* engine, std::vector<const Rule*> rules,
                     std::set<std::string> own_preds, std::set<std::string> stream_preds);

    // Extend until `pred` has more than `need` rows or the fixpoint flag is
    // set. Returns true when the relation grew past `need`.
    bool grow(const std::string& pred, size_t need);
    void run_to_fixpoint();
    bool exhausted() const { return fixpoint_; }

    long rule_derivations(const Rule* r) const {
        auto it = derivations_.find(r);
        return it == derivations_.end() ? 0 : it->second;
    }
    long total_derivations() const {
        long n = 0;
        for (auto& [r, c] : derivations_) n += c;
        return n;
    }

private:
    struct PlanRt {
        RulePlan plan;
        std::vector<size_t> feed_goals;  // goal indexes with windowed scans
        std::vector<size_t> watermarks;
        bool ran_once = false;  // for rules without feed goals
    };

    bool sweep();
    bool pull_lower();
    long apply(PlanRt& prt, const Window* window);

    Evaluator& ev_;
    Engine* engine_;
    std::vector<PlanRt> plans_;
    std::set<std::string> own_;
    std::set<std::string> streams_;
    std::vector<std::string> stream_order_;
    size_t stream_rr_ = 0;
    bool fixpoint_ = false;
    std::map<const Rule*, long> derivations_;
};

// Evaluation engine: components of the analyzed program are materialized in
// dependency order (iterated choice fixpoint), with positive/monotone
// recursive cliques optionally left as lazy producers for the pipelined
// query path. XY units run Procedure-1 style over their synchronized
// bistate rules.
class Engine {
public:
    Engine(const Analysis& an, EvalOptions opts) : an_(an), ev_(an, std::move(opts)) {
        comp_.resize(an_.schedule.size());
        for (size_t i = 0; i < an_.schedule.size(); ++i)
            for (auto& pred : an_.schedule[i].preds) pred_comp_[pred] = (int)i;
        init_facts();
    }

    Evaluator& evaluator() { return ev_; }
    Store& store() { return ev_.store; }
    const Analysis& analysis() const { return an_; }
    EvalOptions& options() { return ev_.options(); }

    void set_external_loader(std::function<void(const std::string&, Store&)> loader,
                             std::set<std::string> pending) {
        external_loader_ = std::move(loader);
        pending_external_ = std::move(pending);
    }

    // Full bottom-up evaluation: the iterated (choice) fixpoint model.
    void materialize_all() {
        for (size_t i = 0; i < an_.schedule.size(); ++i) materialize_component((int)i);
    }

    void materialize_pred(const std::string& pred) {
        auto it = pred_comp_.find(pred);
        if (it != pred_comp_.end()) materialize_component(it->second);
    }

    // Completed relation for a predicate (evaluating it if needed).
    Relation* complete_relation(const std::string& pred, size_t arity) {
        materialize_pred(pred);
        return resolve(pred, arity);
    }

    bool is_stream_pred(const std::string& pred) const {
        auto it = pred_comp_.find(pred);
        return it != pred_comp_.end() &&
               an_.schedule[it->second].kind == Component::Kind::Recursive;
    }

    // Lazily grow a recursive predicate past `need` rows.
    bool grow_stream(const std::string& pred, size_t need) {
        int c = pred_comp_.at(pred);
        start_stream(c);
        if (comp_[c].state == CompState::Done)
            return resolve_existing(pred) && resolve_existing(pred)->size() > need;
        return comp_[c].producer->grow(pred, need);
    }

    bool stream_exhausted(const std::string& pred) {
        int c = pred_comp_.at(pred);
        if (comp_[c].state == CompState::Done) return true;
        return comp_[c].producer && comp_[c].producer->exhausted();
    }

    FixpointProducer* stream_producer(const std::string& pred) {
        int c = pred_comp_.at(pred);
        start_stream(c);
        return comp_[c].producer.get();
    }

    Relation* resolve(const std::string& pred, size_t arity) {
        if (!pending_external_.empty() && pending_external_.count(pred)) {
            pending_external_.erase(pred);
            if (external_loader_) external_loader_(pred, ev_.store);
        }
        return ev_.relation(pred, arity);
    }

    const Component* component_of(const std::string& pred) const {
        auto it = pred_comp_.find(pred);
        return it == pred_comp_.end() ? nullptr : &an_.schedule[it->second];
    }

    std::vector<const Rule*> rules_for(const std::string& pred) const {
        std::vector<const Rule*> out;
        for (auto& r : an_.program.rules)
            if (r.head.pred == pred) out.push_back(&r);
        return out;
    }

    const RulePlan& plan_for(const Rule* r) {
        auto it = plan_cache_.find(r);
        if (it == plan_cache_.end())
            it = plan_cache_.emplace(r, compile_rule(*r, an_.test_preds, an_.registry)).first;
        return it->second;
    }

    PlanContext context() {
        PlanContext ctx;
        ctx.ev = &ev_;
        ctx.resolve = [this](const std::string& p, size_t a) { return resolve(p, a); };
        return ctx;
    }

    long rule_derivations(const Rule* r) const {
        long n = 0;
        for (auto& c : comp_)
            if (c.producer) n += c.producer->rule_derivations(r);
        auto it = plain_derivations_.find(r);
        if (it != plain_derivations_.end()) n += it->second;
        return n;
    }

    // One rule application outside any producer: plain heads insert
    // directly, aggregate heads run the full enumerate/feed/finalize pass.
    long run_rule_once(const Rule* rule) {
        const RulePlan& plan = plan_for(rule);
        PlanContext ctx = context();
        if (plan.has_choice) ctx.chosen = &ev_.chosen_table(rule, plan);
        long n;
        if (plan.aggs.empty())
            n = insert_solutions(plan, ctx, nullptr);
        else
            n = run_agg_rule_full(rule, plan, ctx);
        plain_derivations_[rule] += n;
        return n;
    }

    long insert_solutions(const RulePlan& plan, const PlanContext& ctx, const Window* window) {
        Relation* head = resolve(plan.head_pred, plan.head_arity);
        long inserted = 0;
        ev_.for_each_solution(plan, ctx, window, [&](Frame& f) {
            Tuple t = build_head(plan, f);
            if (head->insert_if_new(std::move(t)) == InsertResult::Inserted) ++inserted;
            return true;
        });
        return inserted;
    }

    Tuple build_head(const RulePlan& plan, const Frame& f) {
        Tuple t;
        t.reserve(plan.head_args.size());
        for (auto& op : plan.head_args) {
            auto v = eval_arg(op, f, *plan.slots);
            if (!v) throw EvalError("unbound head argument in rule for " + plan.head_pred);
            t.push_back(std::move(*v));
        }
        return t;
    }

    // Incremental (monotone) aggregate evaluation: feed each new body
    // solution once, emit early returns as ordinary tuples.
    long run_agg_rule_incremental(const Rule* rule, const RulePlan& plan, const PlanContext& ctx,
                                  const Window* window) {
        Relation* head = resolve(plan.head_pred, plan.head_arity);
        auto& st = ev_.agg_state(rule);
        long inserted = 0;
        ev_.for_each_solution(plan, ctx, window, [&](Frame& f) {
            std::vector<Value> key_frame;
            for (auto& s : f) key_frame.push_back(s ? *s : Value::sym(""));
            if (!st.fed.insert(key_frame).second) return true;
            inserted += feed_solution(rule, plan, st, f, head);
            return true;
        });
        return inserted;
    }

    long run_agg_rule_full(const Rule* rule, const RulePlan& plan, const PlanContext& ctx) {
        ev_.clear_agg_state(rule);
        long inserted = run_agg_rule_incremental(rule, plan, ctx, nullptr);
        Relation* head = resolve(plan.head_pred, plan.head_arity);
        auto& st = ev_.agg_state(rule);
        for (auto& [key, cursors] : st.groups) {
            std::vector<std::vector<Value>> finals(plan.aggs.size());
            bool all = true;
            for (size_t i = 0; i < plan.aggs.size(); ++i) {
                finals[i] = finalize(an_.registry.require(plan.aggs[i].agg), cursors[i]);
                if (finals[i].empty()) all = false;
            }
            if (all) inserted += emit_agg_tuples(plan, key, finals, head);
        }
        ev_.clear_agg_state(rule);
        return inserted;
    }

    void run_component_for_test(int i) { materialize_component(i); }

private:
    enum class CompState { Idle, Streaming, Done };
    struct CompRt {
        CompState state = CompState::Idle;
        std::unique_ptr<FixpointProducer> producer;
    };

    friend class FixpointProducer;

    void init_facts() {
        std::vector<const Atom*> facts;
        for (size_t i = 0; i < an_.program.facts.size(); ++i)
            if (!an_.xy_facts.count(i)) facts.push_back(&an_.program.facts[i]);
        if (ev_.options().seed != 0) {
            std::mt19937_64 rng(ev_.options().seed);
            std::shuffle(facts.begin(), facts.end(), rng);
        }
        for (auto* f : facts) {
            Relation* rel = ev_.relation(f->pred, f->args.size());
            Tuple t;
            for (auto& arg : f->args) t.push_back(*arg.to_value());
            rel->insert_if_new(std::move(t));
        }
    }

    void materialize_component(int i) {
        CompRt& rt = comp_[i];
        if (rt.state == CompState::Done) return;
        const Component& c = an_.schedule[i];
        prepare_deps(c, /*full=*/c.kind != Component::Kind::Recursive);
        switch (c.kind) {
            case Component::Kind::Edb:
                break;
            case Component::Kind::Plain:
                for (size_t ri : c.rule_indices) run_rule_once(&an_.program.rules[ri]);
                break;
            case Component::Kind::Recursive:
                start_stream(i);
                rt.producer->run_to_fixpoint();
                break;
            case Component::Kind::Xy:
                run_xy(an_.xy_units[c.xy_unit]);
                break;
        }
        rt.state = CompState::Done;
    }

    void start_stream(int i) {
        CompRt& rt = comp_[i];
        if (rt.state != CompState::Idle) return;
        const Component& c = an_.schedule[i];
        prepare_deps(c, /*full=*/false);
        std::vector<const Rule*> rules;
        for (size_t ri : c.rule_indices) rules.push_back(&an_.program.rules[ri]);
        std::set<std::string> streams;
        for (auto* r : rules)
            for (auto& lit : r->body)
                if (auto* a = as_atom(lit))
                    if (!a->negated && !c.preds.count(a->pred) && is_stream_pred(a->pred) &&
                        comp_[pred_comp_.at(a->pred)].state != CompState::Done)
                        streams.insert(a->pred);
        rt.producer = std::make_unique<FixpointProducer>(ev_, this, rules, c.preds, streams);
        rt.state = CompState::Streaming;
    }

    // Dependencies of a component: negated or nonmonotone inputs are always
    // completed first; positive recursive inputs stay streaming unless a
    // full materialization was requested.
    void prepare_deps(const Component& c, bool full) {
        std::set<std::string> needed_full, needed_stream;
        auto classify_atom = [&](const Atom& a) {
            if (c.preds.count(a.pred) || is_uda_template_pred(a.pred)) return;
            if (a.negated || full || !is_stream_pred(a.pred))
                needed_full.insert(a.pred);
            else
                needed_stream.insert(a.pred);
        };
        auto scan_rule = [&](const Rule& r) {
            for (auto& lit : r.body)
                if (auto* a = as_atom(lit)) classify_atom(*a);
        };
        for (size_t ri : c.rule_indices) scan_rule(an_.program.rules[ri]);
        if (c.kind == Component::Kind::Xy) {
            const XyUnit& u = an_.xy_units[c.xy_unit];
            for (auto& r : u.rules) scan_rule(r);
        }
        for (auto& pred : needed_full) {
            // comparison-defined predicates evaluate inline
            if (an_.test_preds.count(pred)) continue;
            auto it = pred_comp_.find(pred);
            if (it != pred_comp_.end()) materialize_component(it->second);
        }
        for (auto& pred : needed_stream) {
            auto it = pred_comp_.find(pred);
            if (it != pred_comp_.end()) start_stream(it->second);
        }
    }

    Relation* resolve_existing(const std::string& pred) {
        auto r = ev_.store.find(pred);
        return r ? r.get() : nullptr;
    }

    long feed_solution(const Rule* rule, const RulePlan& plan, Evaluator::AggRuleState& st,
                       Frame& f, Relation* head) {
        Tuple key;
        for (size_t i = 0; i < plan.head_args.size(); ++i) {
            bool is_agg = false;
            for (auto& sp : plan.aggs)
                if (sp.head_pos == i) is_agg = true;
            if (is_agg) continue;
            auto v = eval_arg(plan.head_args[i], f, *plan.slots);
            if (!v) throw EvalError("unbound group-by argument in " + plan.head_pred);
            key.push_back(std::move(*v));
        }
        auto& cursors = st.groups[key];
        if (cursors.empty()) cursors.resize(plan.aggs.size());
        std::vector<std::vector<Value>> earlies(plan.aggs.size());
        bool all = true;
        for (size_t i = 0; i < plan.aggs.size(); ++i) {
            auto y = eval_arg(plan.aggs[i].arg, f, *plan.slots);
            if (!y) throw EvalError("unbound aggregate argument in " + plan.head_pred);
            earlies[i] = feed(an_.registry.require(plan.aggs[i].agg), cursors[i], *y);
            if (earlies[i].empty()) all = false;
        }
        if (!all) return 0;
        return emit_agg_tuples(plan, key, earlies, head);
    }

    long emit_agg_tuples(const RulePlan& plan, const Tuple& key,
                         const std::vector<std::vector<Value>>& returns, Relation* head) {
        long inserted = 0;
        std::vector<size_t> idx(returns.size(), 0);
        for (;;) {
            Tuple t;
            size_t k = 0;
            for (size_t i = 0; i < plan.head_args.size(); ++i) {
                bool is_agg = false;
                for (size_t j = 0; j < plan.aggs.size(); ++j)
                    if (plan.aggs[j].head_pos == i) {
                        is_agg = true;
                        t.push_back(returns[j][idx[j]]);
                    }
                if (!is_agg) t.push_back(key[k++]);
            }
            if (head->insert_if_new(std::move(t)) == InsertResult::Inserted) ++inserted;
            size_t j = 0;
            for (; j < idx.size(); ++j) {
                if (++idx[j] < returns[j].size()) break;
                idx[j] = 0;
            }
            if (j == idx.size()) break;
        }
        return inserted;
    }

    // --- XY evaluation (Procedure 1 over the synchronized bistate) --------

    struct XyRt {
        std::vector<std::vector<const Rule*>> levels;  // rules grouped by stratum
        std::map<const Rule*, const BistateRule*> meta;
        std::map<std::string, const Rule*> copy_rule_of;  // target pred -> strict copy rule
        std::vector<std::string> preds;                   // deterministic order
    };

    XyRt& xy_rt(const XyUnit& u) {
        auto it = xy_rt_.find(&u);
        if (it != xy_rt_.end()) return it->second;
        XyRt rt;
        Program sp = u.syncbi.as_program();
        Stratification s = stratify(sp, &an_.registry);
        if (!s.ok) throw EvalError("XY unit is " + s.error);
        int hi = 0;
        for (auto& [p, lv] : s.stratum) hi = std::max(hi, lv);
        rt.levels.resize(hi + 1);
        for (auto& br : u.syncbi.rules) {
            rt.levels[s.stratum.at(br.rule.head.pred)].push_back(&br.rule);
            rt.meta[&br.rule] = &br;
            if (br.is_copy) rt.copy_rule_of[br.target] = &br.rule;
        }
        for (auto& rr : u.syncbi.result_rules)
            rt.levels[s.stratum.at(rr.head.pred)].push_back(&rr);
        rt.preds.assign(u.preds.begin(), u.preds.end());
        return xy_rt_.emplace(&u, std::move(rt)).first->second;
    }

    void run_xy(const XyUnit& u) {
        XyRt& rt = xy_rt(u);
        bool copy_opt = ev_.options().copy_rule_optimization;
        // fresh state pairs and accumulators
        for (auto& q : rt.preds) {
            size_t n = an_.arity.at(q);
            ev_.store.reset("new_" + q);
            ev_.store.reset("old_" + q);
            ev_.relation("new_" + q, n - 1);
            ev_.relation("old_" + q, n - 1);
            ev_.relation(q, n);
        }
        Relation* counter = ev_.relation("counter", 1);
        long step = 0;
        for (;; ++step) {
            if (step > ev_.options().max_steps) throw EvalError("step limit reached");
            ev_.store.reset("counter");
            counter = ev_.relation("counter", 1);
            counter->insert_if_new({Value::integer(step)});
            for (auto& br : u.syncbi.rules) {
                ev_.clear_chosen(&br.rule);   // choice memo is per step
                ev_.clear_agg_state(&br.rule);
            }
            if (copy_opt)
                for (auto& [q, rule] : rt.copy_rule_of) {
                    auto nq = ev_.store.find("new_" + q);
                    nq->install_base(ev_.store.find("old_" + q));
                }
            for (auto& level : rt.levels) run_xy_level(rt, level, copy_opt);

            // stop policy: no new non-copy tuples, or a starved generative feed
            bool any_novel = false;
            for (auto& q : rt.preds) {
                auto nq = ev_.store.find("new_" + q);
                if (rt.copy_rule_of.count(q)) {
                    auto oq = ev_.store.find("old_" + q)->as_set();
                    for (auto& t : nq->as_set())
                        if (!oq.count(t)) any_novel = true;
                } else if (!nq->empty()) {
                    any_novel = true;
                }
            }
            bool starved = false;
            if (u.starvation_applicable && !u.starvation_set.empty() &&
                step >= u.last_exit_step) {
                starved = true;
                for (auto& q : u.starvation_set)
                    if (!ev_.store.find("new_" + q)->empty()) starved = false;
            }
            if (!any_novel || starved) break;
            for (auto& q : rt.preds) ev_.store.swap_state("old_" + q, "new_" + q);
        }
    }

    void run_xy_level(XyRt& rt, const std::vector<const Rule*>& level, bool copy_opt) {
        if (level.empty()) return;
        std::set<std::string> heads;
        for (auto* r : level) heads.insert(r->head.pred);
        bool recursive = false;
        for (auto* r : level)
            for (auto& lit : r->body)
                if (auto* a = as_atom(lit))
                    if (!a->negated && heads.count(a->pred)) recursive = true;
        std::vector<const Rule*> to_run;
        for (auto* r : level) {
            auto it = rt.meta.find(r);
            if (copy_opt && it != rt.meta.end() && it->second->is_copy) continue;
            to_run.push_back(r);
        }
        if (recursive) {
            FixpointProducer fp(ev_, this, to_run, heads, {});
            fp.run_to_fixpoint();
        } else {
            for (auto* r : to_run) run_rule_once(r);
        }
    }

    const Analysis& an_;
    Evaluator ev_;
    std::vector<CompRt> comp_;
    std::map<std::string, int> pred_comp_;
    std::map<const Rule*, RulePlan> plan_cache_;
    std::map<const Rule*, long> plain_derivations_;
    std::map<const XyUnit*, XyRt> xy_rt_;
    std::function<void(const std::string&, Store&)> external_loader_;
    std::set<std::string> pending_external_;
};

// --- FixpointProducer ------------------------------------------------------

inline FixpointProducer::FixpointProducer(Evaluator& ev, Engine* engine,
                                          std::vector<const Rule*> rules,
                                          std::set<std::string> own_preds,
                                          std::set<std::string> stream_preds)
    : ev_(ev), engine_(engine), own_(std::move(own_preds)), streams_(std::move(stream_preds)) {
    for (auto* r : rules) {
        PlanRt prt;
        prt.plan = engine_ ? engine_->plan_for(r)
                           : compile_rule(*r, ev_.analysis().test_preds, ev_.analysis().registry);
        for (size_t gi = 0; gi < prt.plan.goals.size(); ++gi) {
            const GoalPlan& g = prt.plan.goals[gi];
            if (g.kind != GoalPlan::Kind::Match) continue;
            if (own_.count(g.pred) || streams_.count(g.pred)) prt.feed_goals.push_back(gi);
        }
        prt.watermarks.assign(prt.feed_goals.size(), 0);
        plans_.push_back(std::move(prt));
    }
    stream_order_.assign(streams_.begin(), streams_.end());
}

inline long FixpointProducer::apply(PlanRt& prt, const Window* window) {
    PlanContext ctx;
    ctx.ev = &ev_;
    ctx.resolve = [this](const std::string& p, size_t a) {
        return engine_ ? engine_->resolve(p, a) : ev_.relation(p, a);
    };
    const Rule* rule = prt.plan.src;
    if (prt.plan.has_choice) ctx.chosen = &ev_.chosen_table(rule, prt.plan);
    long n;
    if (!engine_) {
        // local complete-input mode is only used for plain heads
        Relation* head = ev_.relation(prt.plan.head_pred, prt.plan.head_arity);
        n = 0;
        ev_.for_each_solution(prt.plan, ctx, window, [&](Frame& f) {
            Tuple t;
            for (auto& op : prt.plan.head_args) {
                auto v = eval_arg(op, f, *prt.plan.slots);
                if (!v) throw EvalError("unbound head argument");
                t.push_back(std::move(*v));
            }
            if (head->insert_if_new(std::move(t)) == InsertResult::Inserted) ++n;
            return true;
        });
    } else if (prt.plan.aggs.empty()) {
        n = engine_->insert_solutions(prt.plan, ctx, window);
    } else {
        n = engine_->run_agg_rule_incremental(rule, prt.plan, ctx, window);
    }
    derivations_[rule] += n;
    return n;
}

inline bool FixpointProducer::sweep() {
    bool progressed = false;
    for (auto& prt : plans_) {
        if (prt.feed_goals.empty()) {
            if (!prt.ran_once) {
                prt.ran_once = true;
                apply(prt, nullptr);
                progressed = true;
            }
            continue;
        }
        for (size_t k = 0; k < prt.feed_goals.size(); ++k) {
            const GoalPlan& g = prt.plan.goals[prt.feed_goals[k]];
            Relation* rel = engine_ ? engine_->resolve(g.pred, g.arity)
                                    : ev_.relation(g.pred, g.arity);
            size_t sz = rel->size();
            if (prt.watermarks[k] >= sz) continue;
            Window w{(int)prt.feed_goals[k], prt.watermarks[k]};
            prt.watermarks[k] = sz;
            apply(prt, &w);
            progressed = true;
        }
    }
    return progressed;
}

inline bool FixpointProducer::pull_lower() {
    if (!engine_ || stream_order_.empty()) return false;
    for (size_t i = 0; i < stream_order_.size(); ++i) {
        const std::string& pred = stream_order_[stream_rr_ % stream_order_.size()];
        ++stream_rr_;
        Relation* rel = engine_->resolve(pred, ev_.analysis().arity.at(pred));
        if (engine_->grow_stream(pred, rel->size())) return true;
    }
    return false;
}

inline bool FixpointProducer::grow(const std::string& pred, size_t need) {
    Relation* rel = engine_ ? engine_->resolve(pred, ev_.analysis().arity.count(pred)
                                                         ? ev_.analysis().arity.at(pred)
                                                         : 0)
                            : ev_.store.find(pred).get();
    if (!rel) return false;
    for (;;) {
        if (rel->size() > need) return true;
        if (fixpoint_) return false;
        if (sweep()) continue;
        if (pull_lower()) continue;
        fixpoint_ = true;
    }
}

inline void FixpointProducer::run_to_fixpoint() {
    while (!fixpoint_) {
        if (sweep()) continue;
        if (pull_lower()) continue;
        fixpoint_ = true;
    }
}

}  // namespace ldl
