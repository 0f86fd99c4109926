#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ldl/ast.hpp"
#include "ldl/csv.hpp"
#include "ldl/store.hpp"
#include "ldl/uda.hpp"

namespace ldl {

struct SqlError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structural SQL query. Adapters may evaluate the tree directly (the CSV
// adapter does); text() renders the canonical SQL sent to real servers.
struct SqlQuery {
    struct ColRef {
        std::string alias, column;
        std::string text() const { return alias + "." + column; }
        bool operator<(const ColRef& o) const {
            return std::tie(alias, column) < std::tie(o.alias, o.column);
        }
    };
    using Operand = std::variant<ColRef, Value>;

    struct Cmp {
        Operand lhs;
        std::string op;  // SQL operator: = <> < <= > >=
        Operand rhs;
    };
    struct NotExists;
    using Conjunct = std::variant<Cmp, std::shared_ptr<NotExists>>;

    struct AggCall {
        std::string fn;  // COUNT SUM MIN MAX AVG
        ColRef col;
    };
    using SelectItem = std::variant<ColRef, AggCall>;

    std::vector<SelectItem> select;
    std::vector<std::pair<std::string, std::string>> from;  // table, alias
    std::vector<Conjunct> where;
    std::vector<ColRef> group_by;

    std::string text() const;
};

struct SqlQuery::NotExists {
    SqlQuery sub;  // correlated subquery; outer aliases appear in its where
};

namespace sql_detail {

inline std::string operand_text(const SqlQuery::Operand& o) {
    if (auto* c = std::get_if<SqlQuery::ColRef>(&o)) return c->text();
    const Value& v = std::get<Value>(o);
    if (v.kind() == Value::Kind::Str || v.kind() == Value::Kind::Sym) return "'" + v.text() + "'";
    return v.to_string();
}

}  // namespace sql_detail

inline std::string SqlQuery::text() const {
    std::ostringstream out;
    out << "SELECT ";
    for (size_t i = 0; i < select.size(); ++i) {
        if (i) out << ", ";
        if (auto* c = std::get_if<ColRef>(&select[i]))
            out << c->text();
        else {
            auto& a = std::get<AggCall>(select[i]);
            out << a.fn << "(" << a.col.text() << ")";
        }
    }
    out << " FROM ";
    for (size_t i = 0; i < from.size(); ++i) {
        if (i) out << ", ";
        out << from[i].first << " " << from[i].second;
    }
    if (!where.empty()) {
        out << " WHERE ";
        for (size_t i = 0; i < where.size(); ++i) {
            if (i) out << " AND ";
            if (auto* c = std::get_if<Cmp>(&where[i])) {
                out << sql_detail::operand_text(c->lhs) << " " << c->op << " "
                    << sql_detail::operand_text(c->rhs);
            } else {
                auto& ne = std::get<std::shared_ptr<NotExists>>(where[i]);
                out << "NOT EXISTS (" << ne->sub.text() << ")";
            }
        }
    }
    if (!group_by.empty()) {
        out << " GROUP BY ";
        for (size_t i = 0; i < group_by.size(); ++i) {
            if (i) out << ", ";
            out << group_by[i].text();
        }
    }
    return out.str();
}

// Adapter interface: execute a query tree, stream typed tuples.
class ExternalAdapter {
public:
    virtual ~ExternalAdapter() = default;
    virtual std::string name() const = 0;
    virtual bool supports_not_exists() const { return true; }
    virtual bool supports_aggregates() const { return true; }
    // column schema of a table, in declaration order
    virtual std::vector<std::pair<std::string, std::string>> table_schema(
        const std::string& table) = 0;
    virtual void execute(const SqlQuery& q, const std::function<void(Tuple)>& sink) = 0;
};

// --- collapse / compress ----------------------------------------------------

// Which rule body literals can move into a single SQL node: positive atoms
// over external relations, comparisons whose variables are bound by them,
// and negated external atoms (NOT EXISTS) likewise bound.
struct CollapsePlan {
    std::vector<size_t> sql_literals;       // indexes into the rule body
    std::vector<size_t> residual_literals;  // everything else, original order
    bool whole_body = false;
};

inline CollapsePlan collapse(const Rule& r, const std::set<std::string>& external_preds,
                             bool allow_not_exists) {
    CollapsePlan plan;
    std::set<std::string> sql_bound;
    auto vars_of = [](const Term& t) {
        std::vector<std::string> v;
        t.collect_vars(v);
        return v;
    };
    // positive externals first (they bind), then filters that fit
    for (size_t i = 0; i < r.body.size(); ++i) {
        if (auto* a = as_atom(r.body[i])) {
            if (!a->negated && external_preds.count(a->pred)) {
                plan.sql_literals.push_back(i);
                for (auto& t : a->args)
                    for (auto& v : vars_of(t)) sql_bound.insert(v);
            }
        }
    }
    for (size_t i = 0; i < r.body.size(); ++i) {
        bool taken = false;
        for (size_t k : plan.sql_literals) taken = taken || k == i;
        if (taken) continue;
        if (auto* a = as_atom(r.body[i])) {
            if (a->negated && external_preds.count(a->pred) && allow_not_exists) {
                bool ok = true;
                for (auto& t : a->args) {
                    std::vector<std::string> named;
                    collect_named_vars(t, named);
                    for (auto& v : named)
                        if (!sql_bound.count(v)) ok = false;
                }
                if (ok) {
                    plan.sql_literals.push_back(i);
                    continue;
                }
            }
        } else if (auto* c = as_comparison(r.body[i])) {
            bool ok = c->op != "=";  // assignments stay with the engine
            for (auto& v : vars_of(c->lhs))
                if (!sql_bound.count(v)) ok = false;
            for (auto& v : vars_of(c->rhs))
                if (!sql_bound.count(v)) ok = false;
            if (ok) {
                plan.sql_literals.push_back(i);
                continue;
            }
        }
        plan.residual_literals.push_back(i);
    }
    std::sort(plan.sql_literals.begin(), plan.sql_literals.end());
    plan.whole_body = plan.residual_literals.empty() && !plan.sql_literals.empty();
    return plan;
}

// Vertical rule compression: unfold intermediate predicates defined by a
// single non-recursive rule whose body is entirely external, so larger
// bodies collapse into one SQL query.
inline Program compress(const Program& p, const std::set<std::string>& external_preds) {
    std::map<std::string, const Rule*> candidates;
    std::map<std::string, int> rule_count;
    std::set<std::string> negated_use;
    for (auto& f : p.facts) rule_count[f.pred] += 1;
    for (auto& r : p.rules) {
        rule_count[r.head.pred] += 1;
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit))
                if (a->negated) negated_use.insert(a->pred);
    }
    for (auto& r : p.rules) {
        if (rule_count[r.head.pred] != 1 || r.head.has_aggregates()) continue;
        if (negated_use.count(r.head.pred)) continue;
        bool ok = !r.body.empty();
        bool head_vars_distinct = true;
        std::set<std::string> seen;
        for (auto& h : r.head.args) {
            if (h.term.kind != Term::Kind::Var || !seen.insert(h.term.name).second)
                head_vars_distinct = false;
        }
        for (auto& lit : r.body) {
            if (auto* a = as_atom(lit)) {
                if (a->pred == r.head.pred) ok = false;  // recursive
                if (!external_preds.count(a->pred)) ok = false;
            } else if (!as_comparison(lit)) {
                ok = false;
            }
        }
        if (ok && head_vars_distinct) candidates[r.head.pred] = &r;
    }
    if (candidates.empty()) return p;

    Program out;
    out.schema = p.schema;
    out.facts = p.facts;
    int fresh = 0;
    for (auto& r : p.rules) {
        // intermediates keep their own definition; call sites unfold
        Rule nr;
        nr.head = r.head;
        nr.pos = r.pos;
        for (auto& lit : r.body) {
            auto* a = as_atom(lit);
            if (!a || a->negated || !candidates.count(a->pred)) {
                nr.body.push_back(lit);
                continue;
            }
            const Rule& def = *candidates.at(a->pred);
            // rename the definition apart, then substitute head vars
            std::map<std::string, Term> subst;
            for (size_t i = 0; i < def.head.args.size(); ++i)
                subst[def.head.args[i].term.name] = a->args[i];
            std::set<std::string> caller_vars;
            {
                auto bv = rule_body_vars(r);
                caller_vars.insert(bv.begin(), bv.end());
            }
            auto rename = [&](const std::string& v) {
                if (subst.count(v)) return subst.at(v);
                std::string nv = v + "_u" + std::to_string(fresh);
                while (caller_vars.count(nv)) nv += "x";
                return Term::var(nv);
            };
            std::function<Term(const Term&)> apply = [&](const Term& t) -> Term {
                switch (t.kind) {
                    case Term::Kind::Var:
                        return rename(t.name);
                    case Term::Kind::Temporal: {
                        Term base = rename(t.name);
                        return Term::temporal(base.name);
                    }
                    case Term::Kind::Compound: {
                        Term c = t;
                        c.args.clear();
                        for (auto& s : t.args) c.args.push_back(apply(s));
                        return c;
                    }
                    default:
                        return t;
                }
            };
            ++fresh;
            for (auto& dlit : def.body) {
                if (auto* da = as_atom(dlit)) {
                    Atom na = *da;
                    na.args.clear();
                    for (auto& t : da->args) na.args.push_back(apply(t));
                    nr.body.push_back(na);
                } else if (auto* dc = as_comparison(dlit)) {
                    Comparison nc = *dc;
                    nc.lhs = apply(dc->lhs);
                    nc.rhs = apply(dc->rhs);
                    nr.body.push_back(nc);
                }
            }
        }
        out.rules.push_back(std::move(nr));
    }
    // iterate until no candidate remains referenced
    for (auto& r : out.rules)
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit))
                if (candidates.count(a->pred) && !a->negated && a->pred != r.head.pred)
                    return compress(out, external_preds);
    return out;
}

// --- SQL generation ----------------------------------------------------------

class SqlGenerator {
public:
    SqlGenerator(const Program& program, const std::map<std::string, const SchemaDecl*>& schemas)
        : program_(program), schemas_(schemas) {}

    // Build the query for the collapsed part of a rule. Head aggregates
    // (the five standard SQL ones) become aggregate selects with GROUP BY
    // on the remaining head columns.
    // One pass in body order: atoms add FROM entries, repeated variables
    // and constants add equality conjuncts, comparisons and negated atoms
    // interleave where they stand.
    SqlQuery generate(const Rule& r, const CollapsePlan& plan) {
        SqlQuery q;
        std::map<std::string, int> alias_counters;
        std::map<std::string, SqlQuery::ColRef> binding;  // var -> first column
        for (size_t i : plan.sql_literals) {
            if (auto* a = as_atom(r.body[i])) {
                if (a->negated)
                    q.where.push_back(make_not_exists(*a, alias_counters, binding));
                else
                    emit_atom(*a, alias_counters, binding, q);
            } else if (auto* c = as_comparison(r.body[i])) {
                SqlQuery::Cmp cmp;
                cmp.lhs = operand(c->lhs, binding);
                cmp.op = sql_op(c->op);
                cmp.rhs = operand(c->rhs, binding);
                q.where.push_back(cmp);
            }
        }
        bool has_agg = r.head.has_aggregates();
        for (auto& h : r.head.args) {
            if (h.is_agg()) {
                SqlQuery::AggCall call;
                call.fn = sql_aggregate(h.agg->agg);
                call.col = column_for(h.agg->arg, binding);
                q.select.push_back(call);
            } else {
                SqlQuery::ColRef col = column_for(h.term, binding);
                q.select.push_back(col);
                if (has_agg) q.group_by.push_back(col);
            }
        }
        return q;
    }

    static bool is_sql_aggregate(const std::string& name) {
        return name == "count" || name == "sum" || name == "min" || name == "max" ||
               name == "avg";
    }

private:
    void emit_atom(const Atom& a, std::map<std::string, int>& alias_counters,
                   std::map<std::string, SqlQuery::ColRef>& binding, SqlQuery& q) {
        const SchemaDecl* decl = schemas_.at(a.pred);
        std::string alias = decl->table + "_" + std::to_string(alias_counters[a.pred]++);
        q.from.emplace_back(decl->table, alias);
        for (size_t i = 0; i < a.args.size(); ++i) {
            SqlQuery::ColRef col{alias, decl->columns[i].first};
            const Term& t = a.args[i];
            if (t.kind == Term::Kind::Var) {
                if (t.anonymous) continue;
                auto it = binding.find(t.name);
                if (it == binding.end())
                    binding.emplace(t.name, col);
                else
                    q.where.push_back(SqlQuery::Cmp{col, "=", it->second});
            } else if (t.is_const()) {
                q.where.push_back(SqlQuery::Cmp{col, "=", *t.to_value()});
            } else {
                throw SqlError("cannot offload argument " + to_string(t));
            }
        }
    }

    SqlQuery::Conjunct make_not_exists(const Atom& a, std::map<std::string, int>& alias_counters,
                                       std::map<std::string, SqlQuery::ColRef>& binding) {
        auto ne = std::make_shared<SqlQuery::NotExists>();
        const SchemaDecl* decl = schemas_.at(a.pred);
        std::string alias = decl->table + "_" + std::to_string(alias_counters[a.pred]++);
        ne->sub.from.emplace_back(decl->table, alias);
        ne->sub.select.push_back(SqlQuery::ColRef{alias, "*"});
        for (size_t i = 0; i < a.args.size(); ++i) {
            SqlQuery::ColRef col{alias, decl->columns[i].first};
            const Term& t = a.args[i];
            if (t.kind == Term::Kind::Var) {
                if (t.anonymous) continue;
                auto it = binding.find(t.name);
                if (it != binding.end())
                    ne->sub.where.push_back(SqlQuery::Cmp{col, "=", it->second});
            } else if (t.is_const()) {
                ne->sub.where.push_back(SqlQuery::Cmp{col, "=", *t.to_value()});
            }
        }
        return ne;
    }

    SqlQuery::Operand operand(const Term& t, std::map<std::string, SqlQuery::ColRef>& binding) {
        if (t.kind == Term::Kind::Var) {
            auto it = binding.find(t.name);
            if (it == binding.end()) throw SqlError("unbound variable in SQL comparison");
            return it->second;
        }
        auto v = t.to_value();
        if (!v) throw SqlError("cannot offload term " + to_string(t));
        return *v;
    }

    SqlQuery::ColRef column_for(const Term& t, std::map<std::string, SqlQuery::ColRef>& binding) {
        if (t.kind != Term::Kind::Var || !binding.count(t.name))
            throw SqlError("head variable not bound by offloaded goals: " + to_string(t));
        return binding.at(t.name);
    }

    static std::string sql_op(const std::string& op) {
        if (op == "~=") return "<>";
        return op;
    }
    static std::string sql_aggregate(const std::string& name) {
        std::string up = name;
        for (auto& c : up) c = (char)std::toupper((unsigned char)c);
        return up;
    }

    const Program& program_;
    const std::map<std::string, const SchemaDecl*>& schemas_;
};

// --- offload rewriting -------------------------------------------------------

// Rewrites rule bodies so that every external access goes through a
// sql_node_k predicate carrying a generated query: maximal collapsed runs
// where the adapter capabilities allow, bare table-scan nodes otherwise.
struct OffloadResult {
    Program program;
    std::map<std::string, SqlQuery> nodes;            // node pred -> query
    std::map<std::string, std::string> node_adapter;  // node pred -> adapter id
    std::map<std::string, size_t> node_arity;
};

inline OffloadResult apply_offload(const Program& input,
                                   const std::map<std::string, ExternalAdapter*>& adapters) {
    std::set<std::string> external_preds;
    std::map<std::string, const SchemaDecl*> schemas;
    for (auto& d : input.schema)
        if (d.source == SchemaDecl::Source::External) {
            external_preds.insert(d.pred);
            schemas[d.pred] = &d;
        }
    OffloadResult out;
    if (external_preds.empty()) {
        out.program = input;
        return out;
    }
    Program p = compress(input, external_preds);
    out.program.schema = p.schema;
    out.program.facts = p.facts;
    SqlGenerator gen(p, schemas);
    int counter = 0;

    auto adapter_of = [&](const std::string& pred) -> ExternalAdapter* {
        auto it = adapters.find(schemas.at(pred)->adapter);
        if (it == adapters.end())
            throw SqlError("no adapter registered for '" + schemas.at(pred)->adapter + "'");
        return it->second;
    };
    std::map<std::string, std::string> scan_nodes;  // external pred -> node pred
    auto bare_scan_node = [&](const std::string& pred) {
        auto it = scan_nodes.find(pred);
        if (it != scan_nodes.end()) return it->second;
        const SchemaDecl* d = schemas.at(pred);
        std::string node = "sql_scan_" + pred;
        SqlQuery q;
        std::string alias = d->table + "_0";
        q.from.emplace_back(d->table, alias);
        for (auto& [col, ty] : d->columns) q.select.push_back(SqlQuery::ColRef{alias, col});
        out.nodes[node] = q;
        out.node_adapter[node] = d->adapter;
        out.node_arity[node] = d->columns.size();
        scan_nodes[pred] = node;
        return node;
    };

    for (auto& r : p.rules) {
        bool any_external = false;
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit))
                if (external_preds.count(a->pred)) any_external = true;
        if (!any_external) {
            out.program.rules.push_back(r);
            continue;
        }
        // the collapsed run uses the adapter of the first external atom
        ExternalAdapter* adapter = nullptr;
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit))
                if (external_preds.count(a->pred)) {
                    adapter = adapter_of(a->pred);
                    break;
                }
        std::set<std::string> same_adapter;
        for (auto& pred : external_preds)
            if (adapter_of(pred) == adapter) same_adapter.insert(pred);
        CollapsePlan plan = collapse(r, same_adapter, adapter->supports_not_exists());

        bool push_aggregates = r.head.has_aggregates() && plan.whole_body &&
                               adapter->supports_aggregates();
        if (push_aggregates)
            for (auto& h : r.head.args)
                if (h.is_agg() && !SqlGenerator::is_sql_aggregate(h.agg->agg))
                    push_aggregates = false;

        // variables the rest of the rule needs from the collapsed part
        std::set<std::string> sql_bound;
        for (size_t i : plan.sql_literals)
            if (auto* a = as_atom(r.body[i]))
                if (!a->negated)
                    for (auto& t : a->args) {
                        std::vector<std::string> vs;
                        t.collect_vars(vs);
                        for (auto& v : vs) sql_bound.insert(v);
                    }
        std::vector<std::string> needed;
        {
            std::vector<std::string> want;
            for (auto& h : r.head.args) {
                if (h.is_agg())
                    h.agg->arg.collect_vars(want);
                else
                    h.term.collect_vars(want);
            }
            for (size_t i : plan.residual_literals) {
                if (auto* a = as_atom(r.body[i])) {
                    for (auto& t : a->args) t.collect_vars(want);
                } else if (auto* c = as_comparison(r.body[i])) {
                    c->lhs.collect_vars(want);
                    c->rhs.collect_vars(want);
                } else if (auto* g = as_choice(r.body[i])) {
                    for (auto& v : g->left) want.push_back(v);
                    for (auto& v : g->right) want.push_back(v);
                }
            }
            std::set<std::string> seen;
            for (auto& v : want)
                if (sql_bound.count(v) && seen.insert(v).second) needed.push_back(v);
        }

        Rule head_rule;
        head_rule.pos = r.pos;
        std::string node = "sql_node_" + std::to_string(++counter);
        if (push_aggregates) {
            // the node computes group keys and aggregate values directly
            Rule agg_src = r;
            agg_src.body.clear();
            CollapsePlan full;
            for (size_t i : plan.sql_literals) {
                full.sql_literals.push_back(agg_src.body.size());
                agg_src.body.push_back(r.body[i]);
            }
            full.whole_body = true;
            out.nodes[node] = gen.generate(agg_src, full);
            out.node_adapter[node] = adapter->name();
            out.node_arity[node] = r.head.args.size();
            head_rule.head.pred = r.head.pred;
            Atom call;
            call.pred = node;
            for (size_t i = 0; i < r.head.args.size(); ++i) {
                Term v = Term::var("C" + std::to_string(i));
                head_rule.head.args.push_back(HeadArg{std::nullopt, v});
                call.args.push_back(v);
            }
            head_rule.body.push_back(call);
            out.program.rules.push_back(std::move(head_rule));
            continue;
        }

        // plain node: selected columns are the needed variables
        Rule node_src;
        node_src.head.pred = node;
        for (auto& v : needed) node_src.head.args.push_back(HeadArg{std::nullopt, Term::var(v)});
        node_src.body = r.body;
        out.nodes[node] = gen.generate(node_src, plan);
        out.node_adapter[node] = adapter->name();
        out.node_arity[node] = needed.size();

        head_rule.head = r.head;
        Atom call;
        call.pred = node;
        for (auto& v : needed) call.args.push_back(Term::var(v));
        head_rule.body.push_back(call);
        for (size_t i : plan.residual_literals) {
            const Literal& lit = r.body[i];
            if (auto* a = as_atom(lit)) {
                if (external_preds.count(a->pred)) {
                    Atom scan = *a;
                    scan.pred = bare_scan_node(a->pred);
                    head_rule.body.push_back(scan);
                    continue;
                }
            }
            head_rule.body.push_back(lit);
        }
        out.program.rules.push_back(std::move(head_rule));
    }
    return out;
}

// --- the CSV adapter ----------------------------------------------------------

// Mounts a directory of <table>.csv files and evaluates query trees
// structurally: nested-loop joins over the FROM list, conjunct filters,
// NOT EXISTS via sub-evaluation, SQL aggregates over groups.
class CsvAdapter : public ExternalAdapter {
public:
    explicit CsvAdapter(std::string dir, bool not_exists = true, bool aggregates = true)
        : dir_(std::move(dir)), not_exists_(not_exists), aggregates_(aggregates) {}

    std::string name() const override { return "csv"; }
    bool supports_not_exists() const override { return not_exists_; }
    bool supports_aggregates() const override { return aggregates_; }

    void declare(const SchemaDecl& d) { declared_[d.table] = d.columns; }

    std::vector<std::pair<std::string, std::string>> table_schema(
        const std::string& table) override {
        auto it = declared_.find(table);
        if (it == declared_.end()) throw SqlError("no schema declared for table " + table);
        return it->second;
    }

    void execute(const SqlQuery& q, const std::function<void(Tuple)>& sink) override {
        std::vector<Row> scope;
        if (q.group_by.empty() && !has_aggregate(q)) {
            join(q, 0, scope, [&](const std::vector<Row>& rows) {
                Tuple t;
                for (auto& item : q.select)
                    t.push_back(column_value(std::get<SqlQuery::ColRef>(item), q, rows));
                sink(std::move(t));
            });
            return;
        }
        if (!aggregates_) throw SqlError("adapter does not support aggregates");
        std::map<Tuple, std::vector<std::vector<Row>>> groups;
        join(q, 0, scope, [&](const std::vector<Row>& rows) {
            Tuple key;
            for (auto& g : q.group_by) key.push_back(column_value(g, q, rows));
            groups[key].push_back(rows);
        });
        for (auto& [key, members] : groups) {
            Tuple t;
            size_t gi = 0;
            for (auto& item : q.select) {
                if (auto* col = std::get_if<SqlQuery::ColRef>(&item)) {
                    (void)col;
                    t.push_back(key[gi++]);
                } else {
                    auto& call = std::get<SqlQuery::AggCall>(item);
                    t.push_back(aggregate(call, q, members));
                }
            }
            sink(std::move(t));
        }
    }

private:
    struct Row {
        std::vector<Value> values;
        const std::vector<std::pair<std::string, std::string>>* columns;
    };

    const std::vector<std::vector<std::string>>& raw_table(const std::string& table) {
        auto it = cache_.find(table);
        if (it == cache_.end())
            it = cache_.emplace(table, csv::read_file(dir_ + "/" + table + ".csv")).first;
        return it->second;
    }

    std::vector<Row> typed_rows(const std::string& table) {
        auto& schema = declared_.at(table);
        const auto& raw = raw_table(table);
        std::vector<Row> rows;
        for (size_t r = 1; r < raw.size(); ++r) {
            if (raw[r].size() != schema.size())
                throw SqlError(table + ".csv row " + std::to_string(r) + ": field count");
            Row row;
            row.columns = &schema;
            for (size_t c = 0; c < schema.size(); ++c)
                row.values.push_back(
                    csv::typed_value(raw[r][c], schema[c].second, r, schema[c].first));
            rows.push_back(std::move(row));
        }
        return rows;
    }

    template <class F>
    void join(const SqlQuery& q, size_t level, std::vector<Row>& scope, const F& f) {
        if (level == q.from.size()) {
            for (auto& conj : q.where)
                if (!conjunct_holds(conj, q, scope)) return;
            f(scope);
            return;
        }
        for (auto& row : typed_rows(q.from[level].first)) {
            scope.push_back(row);
            join(q, level + 1, scope, f);
            scope.pop_back();
        }
    }

    Value column_value(const SqlQuery::ColRef& col, const SqlQuery& q,
                       const std::vector<Row>& rows) const {
        for (size_t i = 0; i < q.from.size() && i < rows.size(); ++i) {
            if (q.from[i].second != col.alias) continue;
            auto& cols = *rows[i].columns;
            for (size_t c = 0; c < cols.size(); ++c)
                if (cols[c].first == col.column) return rows[i].values[c];
        }
        throw SqlError("unknown column " + col.text());
    }

    std::optional<Value> operand_value(const SqlQuery::Operand& o, const SqlQuery& q,
                                       const std::vector<Row>& rows,
                                       const SqlQuery* outer = nullptr,
                                       const std::vector<Row>* outer_rows = nullptr) const {
        if (auto* v = std::get_if<Value>(&o)) return *v;
        auto& col = std::get<SqlQuery::ColRef>(o);
        for (size_t i = 0; i < q.from.size() && i < rows.size(); ++i)
            if (q.from[i].second == col.alias) return column_value(col, q, rows);
        if (outer && outer_rows) return column_value(col, *outer, *outer_rows);
        return std::nullopt;
    }

    bool conjunct_holds(const SqlQuery::Conjunct& conj, const SqlQuery& q,
                        const std::vector<Row>& rows, const SqlQuery* outer = nullptr,
                        const std::vector<Row>* outer_rows = nullptr) {
        if (auto* cmp = std::get_if<SqlQuery::Cmp>(&conj)) {
            auto l = operand_value(cmp->lhs, q, rows, outer, outer_rows);
            auto r = operand_value(cmp->rhs, q, rows, outer, outer_rows);
            if (!l || !r) return false;
            std::string op = cmp->op == "<>" ? "~=" : cmp->op;
            auto res = compare_values(op, *l, *r);
            return res && *res;
        }
        if (!not_exists_) throw SqlError("adapter does not support NOT EXISTS");
        auto& ne = std::get<std::shared_ptr<SqlQuery::NotExists>>(conj);
        bool found = false;
        std::vector<Row> sub_scope;
        sub_join(ne->sub, 0, sub_scope, q, rows, found);
        return !found;
    }

    void sub_join(const SqlQuery& sub, size_t level, std::vector<Row>& scope,
                  const SqlQuery& outer, const std::vector<Row>& outer_rows, bool& found) {
        if (found) return;
        if (level == sub.from.size()) {
            for (auto& conj : sub.where)
                if (!conjunct_holds(conj, sub, scope, &outer, &outer_rows)) return;
            found = true;
            return;
        }
        for (auto& row : typed_rows(sub.from[level].first)) {
            scope.push_back(row);
            sub_join(sub, level + 1, scope, outer, outer_rows, found);
            scope.pop_back();
            if (found) return;
        }
    }

    static bool has_aggregate(const SqlQuery& q) {
        for (auto& s : q.select)
            if (std::holds_alternative<SqlQuery::AggCall>(s)) return true;
        return false;
    }

    Value aggregate(const SqlQuery::AggCall& call, const SqlQuery& q,
                    const std::vector<std::vector<Row>>& members) {
        if (call.fn == "COUNT") return Value::integer((long)members.size());
        std::vector<Value> vals;
        for (auto& rows : members) vals.push_back(column_value(call.col, q, rows));
        if (call.fn == "SUM" || call.fn == "AVG") {
            bool all_int = true;
            for (auto& v : vals)
                if (!v.is_int()) all_int = false;
            if (all_int) {
                mpz_class sum = 0;
                for (auto& v : vals) sum += v.num();
                if (call.fn == "SUM") return Value::integer(sum);
                return Value::real(Value::integer(sum).as_double() / (double)vals.size());
            }
            double sum = 0;
            for (auto& v : vals) sum += v.as_double();
            return call.fn == "SUM" ? Value::real(sum) : Value::real(sum / (double)vals.size());
        }
        Value best = vals.at(0);
        for (auto& v : vals) {
            bool less = v.is_numeric() && best.is_numeric() ? v.as_double() < best.as_double()
                                                            : v < best;
            if ((call.fn == "MIN" && less) || (call.fn == "MAX" && !less && !(v == best)))
                best = v;
        }
        return best;
    }

    std::string dir_;
    bool not_exists_, aggregates_;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> declared_;
    std::map<std::string, std::vector<std::vector<std::string>>> cache_;
};

}  // namespace ldl
