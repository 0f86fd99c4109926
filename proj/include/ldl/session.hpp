#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ldl/agg_expand.hpp"
#include "ldl/engine.hpp"
#include "ldl/lam.hpp"
#include "ldl/parser.hpp"
#include "ldl/printer.hpp"
#include "ldl/sqlgen.hpp"

namespace ldl {

// One interactive or batch session: loaded program text, analysis
// artifacts, the engine, and compiled query forms keyed by predicate and
// bound/free adornment.
class Session {
public:
    struct Options {
        EvalOptions eval;
        std::string csv_dir = ".";
    };

    Session() : Session(Options()) {}
    explicit Session(Options opts) : opts_(std::move(opts)) {}

    EvalOptions& eval_options() { return opts_.eval; }

    // seed and offload shape the engine itself; the rest applies live
    void apply_option(const std::string& name, const std::string& value) {
        EvalOptions& o = opts_.eval;
        bool on = value == "on" || value == "1" || value == "true";
        if (name == "seed")
            o.seed = std::stoull(value);
        else if (name == "max_steps" || name == "max-steps")
            o.max_steps = std::stol(value);
        else if (name == "trace")
            o.trace = on;
        else if (name == "offload")
            o.offload = on;
        else if (name == "copy_rules")
            o.copy_rule_optimization = on;
        else if (name == "backtracking")
            o.intelligent_backtracking = on;
        else
            throw EvalError("unknown option '" + name + "'");
        if (!source_.empty() && (name == "seed" || name == "offload")) {
            rebuild();
        } else if (engine_) {
            engine_->options() = o;
        }
    }

    void load_text(const std::string& text) {
        source_ += text;
        if (!source_.empty() && source_.back() != '\n') source_ += '\n';
        rebuild();
    }

    void load_file(const std::string& path) {
        if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
            csv_files_.push_back(path);
            rebuild();
            return;
        }
        std::ifstream in(path);
        if (!in) throw EvalError("cannot open file: " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        load_text(buf.str());
    }

    bool analyzed_ok() const { return analysis_ && analysis_->ok(); }
    const std::vector<std::string>& diagnostics() const {
        static const std::vector<std::string> empty;
        return analysis_ ? analysis_->diagnostics : empty;
    }
    const Analysis& analysis() const { return *analysis_; }
    Engine& engine() { return *engine_; }

    // --- queries ----------------------------------------------------------

    class AnswerStream {
    public:
        AnswerStream(QueryForm* form, const Atom& query) : form_(form) { form_->start(query); }
        std::optional<Tuple> next() { return form_ ? form_->next() : std::nullopt; }
        long steps() const { return form_ ? form_->steps() : 0; }

    private:
        QueryForm* form_;
    };

    AnswerStream stream_answers(const Atom& query) {
        require_ready(query.pred);
        std::string key = adornment_key(query);
        auto it = forms_.find(key);
        if (it == forms_.end())
            it = forms_.emplace(key, std::make_unique<QueryForm>(*engine_, query)).first;
        return AnswerStream(it->second.get(), query);
    }

    std::vector<Tuple> all_answers(const Atom& query) {
        auto stream = stream_answers(query);
        std::vector<Tuple> out;
        while (auto t = stream.next()) out.push_back(*t);
        return out;
    }

    // --- explain ------------------------------------------------------------

    std::string explain(const std::string& what, const std::string& pred) {
        require_analyzed();
        std::ostringstream out;
        if (what == "strata") {
            std::map<int, std::vector<std::string>> layers;
            for (auto& [p, s] : analysis_->strata) layers[s].push_back(p);
            for (auto& [level, preds] : layers) {
                out << "S" << level << ": ";
                for (size_t i = 0; i < preds.size(); ++i) out << (i ? ", " : "") << preds[i];
                out << "\n";
            }
            return out.str();
        }
        if (what == "foe") {
            FoeArtifacts foe = foe_transform(analysis_->program);
            bool all = pred.empty();
            for (auto& item : foe.items) {
                const Rule& src = analysis_->program.rules[item.rule_index];
                if (!all && src.head.pred != pred) continue;
                out << to_string(item.rewritten) << "\n" << to_string(item.chosen_rule) << "\n";
                for (auto& d : item.diff_rules) out << to_string(d) << "\n";
            }
            return out.str();
        }
        if (what == "bistate" || what == "syncbi") {
            const XyUnit* unit = analysis_->unit_for(pred);
            if (!unit) throw EvalError("predicate '" + pred + "' is not part of an XY unit");
            if (what == "bistate") {
                for (auto& br : unit->bistate.rules) out << to_string(br.rule) << "\n";
            } else {
                for (auto& br : unit->syncbi.rules) out << to_string(br.rule) << "\n";
                for (auto& rr : unit->syncbi.result_rules) out << to_string(rr) << "\n";
            }
            return out.str();
        }
        throw EvalError("unknown explain kind '" + what + "' (strata|foe|bistate|syncbi)");
    }

    std::string facts_of(const std::string& pred) {
        require_ready(pred);
        engine_->materialize_pred(pred);
        auto rel = engine_->store().find(pred);
        std::ostringstream out;
        if (rel)
            for (auto& t : rel->all_tuples()) {
                out << pred;
                if (!t.empty()) out << tuple_to_string(t);
                out << ".\n";
            }
        return out.str();
    }

private:
    std::string adornment_key(const Atom& q) const {
        std::string key = q.pred + "/";
        for (auto& t : q.args) key += t.is_const() ? 'b' : 'f';
        return key;
    }

    void require_analyzed() {
        if (!analysis_) throw EvalError("no program loaded");
        if (!analysis_->ok())
            throw EvalError("program has analysis errors: " + analysis_->diagnostics[0]);
    }

    void require_ready(const std::string& pred) {
        require_analyzed();
        if (!analysis_->arity.count(pred) && !engine_->store().find(pred))
            throw EvalError("unknown predicate '" + pred + "'");
    }

    void rebuild() {
        forms_.clear();
        Program parsed = parse_program(source_);

        adapter_ = std::make_shared<CsvAdapter>(opts_.csv_dir);
        bool has_external = false;
        for (auto& d : parsed.schema)
            if (d.source == SchemaDecl::Source::External) {
                adapter_->declare(d);
                has_external = true;
            }

        OffloadResult off;
        if (has_external && opts_.eval.offload) {
            std::map<std::string, ExternalAdapter*> adapters{{"csv", adapter_.get()}};
            off = apply_offload(parsed, adapters);
            analysis_ = std::make_unique<Analysis>(analyze(off.program));
        } else {
            analysis_ = std::make_unique<Analysis>(analyze(parsed));
        }
        engine_ = std::make_unique<Engine>(*analysis_, opts_.eval);
        engine_->options().trace_out = opts_.eval.trace_out;

        if (has_external && opts_.eval.offload) {
            std::set<std::string> pending;
            for (auto& [node, q] : off.nodes) pending.insert(node);
            auto nodes = off.nodes;
            auto arities = off.node_arity;
            auto adapter = adapter_;
            engine_->set_external_loader(
                [nodes, arities, adapter](const std::string& pred, Store& store) {
                    auto rel = store.relation(pred, arities.at(pred));
                    adapter->execute(nodes.at(pred),
                                     [&](Tuple t) { rel->insert_if_new(std::move(t)); });
                },
                pending);
        } else if (has_external) {
            // offload disabled: external tables load into the local store
            for (auto& d : parsed.schema) {
                if (d.source != SchemaDecl::Source::External) continue;
                SqlQuery q;
                std::string alias = d.table + "_0";
                q.from.emplace_back(d.table, alias);
                for (auto& [col, ty] : d.columns) q.select.push_back(SqlQuery::ColRef{alias, col});
                auto rel = engine_->store().relation(d.pred, d.columns.size());
                adapter_->execute(q, [&](Tuple t) { rel->insert_if_new(std::move(t)); });
            }
        }
        // internal-relation CSV files: one relation per file, types from the
        // schema declaration
        for (auto& path : csv_files_) {
            std::string stem = path;
            if (auto pos = stem.find_last_of('/'); pos != std::string::npos)
                stem = stem.substr(pos + 1);
            stem = stem.substr(0, stem.size() - 4);
            const SchemaDecl* d = analysis_->program.schema_for(stem);
            if (!d) throw EvalError("no schema declaration for CSV relation '" + stem + "'");
            engine_->store().load_csv(stem, d->columns, path);
        }
    }

    Options opts_;
    std::string source_;
    std::vector<std::string> csv_files_;
    std::unique_ptr<Analysis> analysis_;
    std::unique_ptr<Engine> engine_;
    std::shared_ptr<CsvAdapter> adapter_;
    std::map<std::string, std::unique_ptr<QueryForm>> forms_;
};

// --- the line-oriented command interpreter ----------------------------------

// Commands: load <file> | schema <file> | query <atom>. | facts <pred> |
// explain strata|foe|bistate|syncbi [pred] | set <option> <value> | quit
class CommandLoop {
public:
    CommandLoop(Session& session, std::ostream& out, std::ostream& err)
        : session_(session), out_(out), err_(err) {}

    int run(std::istream& in, bool interactive) {
        std::string line;
        int status = 0;
        if (interactive) out_ << "ldl> " << std::flush;
        while (std::getline(in, line)) {
            if (!dispatch(line, status)) break;
            if (interactive) out_ << "ldl> " << std::flush;
        }
        return status;
    }

    // returns false on quit
    bool dispatch(const std::string& raw, int& status) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '%') return true;
        std::istringstream words(line);
        std::string cmd;
        words >> cmd;
        try {
            if (cmd == "quit" || cmd == "exit") return false;
            if (cmd == "load" || cmd == "schema") {
                std::string path;
                words >> path;
                session_.load_file(path);
                for (auto& d : session_.diagnostics()) err_ << d << "\n";
                if (!session_.analyzed_ok()) status = 1;
                return true;
            }
            if (cmd == "set") {
                std::string opt, value;
                words >> opt >> value;
                set_option(opt, value);
                return true;
            }
            if (cmd == "facts") {
                std::string pred;
                words >> pred;
                out_ << session_.facts_of(pred);
                return true;
            }
            if (cmd == "explain") {
                std::string what, pred;
                words >> what >> pred;
                out_ << session_.explain(what, pred);
                return true;
            }
            if (cmd == "query") {
                std::string rest = trim(line.substr(5));
                run_query(rest);
                return true;
            }
            // a bare `p(X).` goal works like `query p(X).`
            if (line.back() == '.') {
                run_query(line);
                return true;
            }
            err_ << "unknown command: " << cmd << "\n";
            status = 1;
        } catch (const std::exception& e) {
            err_ << "error: " << e.what() << "\n";
            status = 1;
        }
        return true;
    }

private:
    void run_query(const std::string& text) {
        Rule clause = Parser(text).parse_single_clause();
        if (!clause.body.empty()) throw EvalError("queries are single atoms");
        Atom q = clause.head.plain_atom();
        auto stream = session_.stream_answers(q);
        long n = 0;
        while (auto t = stream.next()) {
            out_ << q.pred;
            if (!t->empty()) out_ << tuple_to_string(*t);
            out_ << "\n";
            ++n;
        }
        out_ << "-- " << n << (n == 1 ? " answer" : " answers") << "\n";
    }

    void set_option(const std::string& opt, const std::string& value) {
        session_.apply_option(opt, value);
    }

    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        size_t b = s.find_last_not_of(" \t\r\n");
        return a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }

    Session& session_;
    std::ostream& out_;
    std::ostream& err_;
};

// Batch runner: load the program, execute each query line, answers on
// stdout, diagnostics on stderr. Nonzero exit on analysis or runtime
// failure.
inline int run_batch(const std::string& program_file, const std::string& query_file,
                     Session::Options opts, std::ostream& out, std::ostream& err) {
    Session session(std::move(opts));
    CommandLoop loop(session, out, err);
    try {
        session.load_file(program_file);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    if (!session.analyzed_ok()) {
        for (auto& d : session.diagnostics()) err << d << "\n";
        return 1;
    }
    std::ifstream queries(query_file);
    if (!queries) {
        err << "error: cannot open query file " << query_file << "\n";
        return 1;
    }
    int status = 0;
    std::string line;
    while (std::getline(queries, line)) {
        int st = 0;
        loop.dispatch(line, st);
        if (st) status = st;
    }
    return status;
}

}  // namespace ldl
