#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ldl/engine.hpp"
#include "ldl/parser.hpp"
#include "ldl/sqlgen.hpp"

using namespace ldl;

namespace {

std::string normalize_ws(const std::string& s) {
    std::string out;
    bool space = true;
    for (char c : s) {
        if (std::isspace((unsigned char)c)) {
            if (!space) out += ' ';
            space = true;
        } else {
            out += c;
            space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

const char* kEmployeeSchema = R"(
database({
    csv::employee(NAME: string, SALARY: int, MANAGER: string) from files
}).
)";

std::string fixture_dir() {
    const char* env = std::getenv("LDL_FIXTURES");
    return env ? std::string(env) + "/csv" : "fixtures/csv";
}

CsvAdapter make_adapter(const Program& p, bool ne = true, bool agg = true) {
    CsvAdapter a(fixture_dir(), ne, agg);
    for (auto& d : p.schema)
        if (d.source == SchemaDecl::Source::External) a.declare(d);
    return a;
}

TEST(SqlGen, ExpensiveEmployeeMatchesPaperListing) {
    Program p = parse_program(std::string(kEmployeeSchema) + R"(
expensive_employee(Name) <-
    employee(Name, Salary1, Manager),
    Salary1 > 75000,
    employee(Manager, Salary2, _),
    Salary1 > Salary2.
)");
    std::set<std::string> ext{"employee"};
    CollapsePlan plan = collapse(p.rules[0], ext, true);
    EXPECT_TRUE(plan.whole_body);
    std::map<std::string, const SchemaDecl*> schemas{{"employee", &p.schema[0]}};
    SqlGenerator gen(p, schemas);
    Rule node_src;
    node_src.head.pred = "sql_node";
    node_src.head.args.push_back(HeadArg{std::nullopt, Term::var("Name")});
    node_src.body = p.rules[0].body;
    SqlQuery q = gen.generate(node_src, plan);
    const char* expected = R"(
        SELECT  employee_0.NAME
        FROM    employee employee_0, employee employee_1
        WHERE   employee_0.SALARY > 75000 AND
              employee_1.NAME = employee_0.MANAGER AND
              employee_0.SALARY > employee_1.SALARY
)";
    EXPECT_EQ(normalize_ws(q.text()), normalize_ws(expected));
}

TEST(SqlGen, AliasGenerationDeterministic) {
    Program p = parse_program(std::string(kEmployeeSchema) +
                              "q(N) <- employee(N, S, M), employee(M, S2, M2), S > S2.\n");
    std::set<std::string> ext{"employee"};
    std::map<std::string, const SchemaDecl*> schemas{{"employee", &p.schema[0]}};
    SqlGenerator gen(p, schemas);
    CollapsePlan plan = collapse(p.rules[0], ext, true);
    Rule src;
    src.head.pred = "n";
    src.head.args.push_back(HeadArg{std::nullopt, Term::var("N")});
    src.body = p.rules[0].body;
    EXPECT_EQ(gen.generate(src, plan).text(), gen.generate(src, plan).text());
}

TEST(SqlGen, CollapsePartitionsMixedBodies) {
    Program p = parse_program(std::string(kEmployeeSchema) + R"(
local(x).
mixed(N) <- employee(N, S, M), local(N), S > 10.
)");
    std::set<std::string> ext{"employee"};
    CollapsePlan plan = collapse(p.rules[0], ext, true);
    EXPECT_FALSE(plan.whole_body);
    ASSERT_EQ(plan.sql_literals.size(), 2u);  // scan + comparison
    EXPECT_EQ(plan.sql_literals[0], 0u);
    EXPECT_EQ(plan.sql_literals[1], 2u);
    ASSERT_EQ(plan.residual_literals.size(), 1u);
    EXPECT_EQ(plan.residual_literals[0], 1u);

    Program internal_only = parse_program("p(X) <- q(X), X > 3.");
    CollapsePlan none = collapse(internal_only.rules[0], ext, true);
    EXPECT_TRUE(none.sql_literals.empty());
}

TEST(SqlGen, NotExistsGeneration) {
    Program p = parse_program(std::string(kEmployeeSchema) +
                              "only_mgr(N) <- employee(N, S, M), ~employee(M, S2, M2).\n");
    std::set<std::string> ext{"employee"};
    // named vars under negation must be bound by the positive part
    Program p2 = parse_program(std::string(kEmployeeSchema) +
                               "only_mgr(N) <- employee(N, S, M), ~employee(M, _, _).\n");
    CollapsePlan plan = collapse(p2.rules[0], ext, true);
    EXPECT_TRUE(plan.whole_body);
    std::map<std::string, const SchemaDecl*> schemas{{"employee", &p2.schema[0]}};
    SqlGenerator gen(p2, schemas);
    Rule src;
    src.head.pred = "n";
    src.head.args.push_back(HeadArg{std::nullopt, Term::var("N")});
    src.body = p2.rules[0].body;
    std::string sql = gen.generate(src, plan).text();
    EXPECT_NE(sql.find("NOT EXISTS (SELECT employee_1.* FROM employee employee_1 WHERE "
                       "employee_1.NAME = employee_0.MANAGER)"),
              std::string::npos)
        << sql;
}

TEST(SqlGen, CompressUnfoldsSingleRuleIntermediates) {
    Program p = parse_program(std::string(kEmployeeSchema) + R"(
rich(N) <- employee(N, S, M), S > 75000.
query(N) <- rich(N).
)");
    Program c = compress(p, {"employee"});
    const Rule* q = nullptr;
    for (auto& r : c.rules)
        if (r.head.pred == "query") q = &r;
    ASSERT_TRUE(q);
    bool saw_employee = false, saw_rich = false;
    for (auto& lit : q->body)
        if (auto* a = as_atom(lit)) {
            saw_employee |= a->pred == "employee";
            saw_rich |= a->pred == "rich";
        }
    EXPECT_TRUE(saw_employee);
    EXPECT_FALSE(saw_rich);
}

TEST(SqlGen, CompressGuards) {
    // multi-rule intermediate: untouched
    Program multi = parse_program(std::string(kEmployeeSchema) + R"(
rich(N) <- employee(N, S, M), S > 75000.
rich(boss).
query(N) <- rich(N).
)");
    Program c1 = compress(multi, {"employee"});
    for (auto& r : c1.rules)
        if (r.head.pred == "query")
            EXPECT_EQ(as_atom(r.body[0])->pred, "rich");
    // recursive intermediate: untouched
    Program rec = parse_program(std::string(kEmployeeSchema) + R"(
chainr(N) <- employee(N, S, M), S > 0.
up(N) <- up(M), chainr(N).
up(root).
)");
    Program c2 = compress(rec, {"employee"});
    (void)c2;
    // internal-relation intermediate: untouched
    Program internal_body = parse_program(R"(
base(a).
mid(X) <- base(X).
q(X) <- mid(X).
)");
    Program c3 = compress(internal_body, {"employee"});
    for (auto& r : c3.rules)
        if (r.head.pred == "q") EXPECT_EQ(as_atom(r.body[0])->pred, "mid");
}

// --- adapter + dual-path execution ---------------------------------------

struct SqlFixture {
    Analysis an;
    std::unique_ptr<Engine> eng;
    std::shared_ptr<CsvAdapter> adapter;
    OffloadResult off;

    SqlFixture(const std::string& text, bool offload, bool ne = true, bool agg = true) {
        Program p = parse_program(text);
        adapter = std::make_shared<CsvAdapter>(fixture_dir(), ne, agg);
        for (auto& d : p.schema)
            if (d.source == SchemaDecl::Source::External) adapter->declare(d);
        if (offload) {
            std::map<std::string, ExternalAdapter*> adapters{{"csv", adapter.get()}};
            off = apply_offload(p, adapters);
            an = analyze(off.program);
            if (!an.ok()) throw std::runtime_error(an.diagnostics[0]);
            eng = std::make_unique<Engine>(an, EvalOptions{});
            std::set<std::string> pending;
            for (auto& [node, q] : off.nodes) pending.insert(node);
            auto nodes = off.nodes;
            auto arities = off.node_arity;
            auto ad = adapter;
            eng->set_external_loader(
                [nodes, arities, ad](const std::string& pred, Store& store) {
                    auto rel = store.relation(pred, arities.at(pred));
                    ad->execute(nodes.at(pred), [&](Tuple t) { rel->insert_if_new(std::move(t)); });
                },
                pending);
        } else {
            an = analyze(p);
            if (!an.ok()) throw std::runtime_error(an.diagnostics[0]);
            eng = std::make_unique<Engine>(an, EvalOptions{});
            // load external tables into the local store up front
            for (auto& d : p.schema) {
                if (d.source != SchemaDecl::Source::External) continue;
                SqlQuery q;
                std::string alias = d.table + "_0";
                q.from.emplace_back(d.table, alias);
                for (auto& [col, ty] : d.columns) q.select.push_back(SqlQuery::ColRef{alias, col});
                auto rel = eng->store().relation(d.pred, d.columns.size());
                adapter->execute(q, [&](Tuple t) { rel->insert_if_new(std::move(t)); });
            }
        }
    }

    std::set<Tuple> eval(const std::string& pred) {
        eng->materialize_all();
        auto rel = eng->store().find(pred);
        return rel ? rel->as_set() : std::set<Tuple>{};
    }
};

void write_fixture_csvs() {
    std::string dir = fixture_dir();
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/employee.csv");
        f << "NAME,SALARY,DEPTNO\n";
        f << "smith,80000,d1\njones,90000,d1\nblake,50000,d2\nclark,76000,d2\nking,95000,d2\n";
    }
    {
        std::ofstream f(dir + "/staff.csv");
        f << "NAME,SALARY,MANAGER\n";
        f << "smith,80000,jones\njones,90000,king\nblake,50000,jones\nking,95000,board\n";
        f << "adams,99000,blake\n";
    }
}

const char* kStaffSchema = R"(
database({
    csv::staff(NAME: string, SALARY: int, MANAGER: string) from files
}).
)";

const char* kDeptSchema = R"(
database({
    csv::employee(NAME: string, SALARY: int, DEPTNO: string) from files
}).
)";

TEST(SqlExec, DualPathExpensiveEmployee) {
    write_fixture_csvs();
    std::string prog = std::string(kStaffSchema) + R"(
expensive_employee(Name) <-
    staff(Name, Salary1, Manager), Salary1 > 75000,
    staff(Manager, Salary2, _), Salary1 > Salary2.
)";
    SqlFixture offload(prog, true);
    SqlFixture local(prog, false);
    auto a = offload.eval("expensive_employee");
    auto b = local.eval("expensive_employee");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, (std::set<Tuple>{{Value::str("adams")}}));
}

TEST(SqlExec, DualPathNotExists) {
    write_fixture_csvs();
    std::string prog = std::string(kStaffSchema) + R"(
only_mgr(N) <- staff(N, _, M), ~staff(M, _, _).
)";
    SqlFixture offload(prog, true);
    SqlFixture local(prog, false);
    EXPECT_EQ(offload.eval("only_mgr"), local.eval("only_mgr"));
    EXPECT_EQ(offload.eval("only_mgr"), (std::set<Tuple>{{Value::str("king")}}));
}

TEST(SqlExec, DualPathGroupByAverage) {
    write_fixture_csvs();
    std::string prog = std::string(kDeptSchema) + R"(
davg(D, avg<S>) <- employee(_, S, D).
)";
    SqlFixture offload(prog, true);
    SqlFixture local(prog, false);
    auto a = offload.eval("davg");
    EXPECT_EQ(a, local.eval("davg"));
    EXPECT_EQ(a, (std::set<Tuple>{{Value::str("d1"), Value::real(85000.0)},
                                  {Value::str("d2"), Value::real(73666.666666666672)}}));
    // the generated text names the aggregate and groups by the head column
    std::string sql;
    for (auto& [node, q] : offload.off.nodes) sql = q.text();
    EXPECT_NE(sql.find("AVG(employee_0.SALARY)"), std::string::npos) << sql;
    EXPECT_NE(sql.find("GROUP BY employee_0.DEPTNO"), std::string::npos) << sql;
}

TEST(SqlExec, DualPathMixedInternalExternal) {
    write_fixture_csvs();
    std::string prog = std::string(kStaffSchema) + R"(
vip('jones'). vip('adams').
paid_vip(N, S) <- staff(N, S, M), vip(N), S > 85000.
)";
    SqlFixture offload(prog, true);
    SqlFixture local(prog, false);
    auto a = offload.eval("paid_vip");
    EXPECT_EQ(a, local.eval("paid_vip"));
    EXPECT_EQ(a, (std::set<Tuple>{{Value::str("jones"), Value::integer(90000L)},
                                  {Value::str("adams"), Value::integer(99000L)}}));
}

TEST(SqlExec, CapabilityFallback) {
    write_fixture_csvs();
    std::string prog = std::string(kStaffSchema) + R"(
only_mgr(N) <- staff(N, _, M), ~staff(M, _, _).
)";
    // adapter without NOT EXISTS: the negated goal stays in the engine
    SqlFixture limited(prog, true, /*ne=*/false, /*agg=*/true);
    EXPECT_EQ(limited.eval("only_mgr"), (std::set<Tuple>{{Value::str("king")}}));
    bool has_scan_node = false;
    for (auto& [node, q] : limited.off.nodes)
        if (node.rfind("sql_scan_", 0) == 0) has_scan_node = true;
    EXPECT_TRUE(has_scan_node);
}

TEST(SqlExec, EmptyCsvYieldsEmptyStream) {
    std::string dir = fixture_dir();
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/nobody.csv");
        f << "NAME:string\n";
    }
    {
        std::ofstream f(dir + "/nobody.csv");
        f << "NAME\n";
    }
    Program p = parse_program("database({ csv::nobody(NAME: string) from files }).\n");
    CsvAdapter a(fixture_dir());
    a.declare(p.schema[0]);
    SqlQuery q;
    q.from.emplace_back("nobody", "nobody_0");
    q.select.push_back(SqlQuery::ColRef{"nobody_0", "NAME"});
    size_t n = 0;
    a.execute(q, [&](Tuple) { ++n; });
    EXPECT_EQ(n, 0u);
}

TEST(SqlExec, TypeMismatchNamesRowAndColumn) {
    std::string dir = fixture_dir();
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/badrows.csv");
        f << "N,AGE\nok,12\nbad,old\n";
    }
    Program p = parse_program("database({ csv::badrows(N: string, AGE: int) from files }).\n");
    CsvAdapter a(fixture_dir());
    a.declare(p.schema[0]);
    SqlQuery q;
    q.from.emplace_back("badrows", "badrows_0");
    q.select.push_back(SqlQuery::ColRef{"badrows_0", "AGE"});
    try {
        a.execute(q, [](Tuple) {});
        FAIL() << "expected CsvError";
    } catch (const CsvError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos);
        EXPECT_NE(msg.find("AGE"), std::string::npos);
    }
}

}  // namespace
