#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "ldl/store.hpp"

using namespace ldl;

namespace {

Tuple tup(std::initializer_list<long> xs) {
    Tuple t;
    for (long x : xs) t.push_back(Value::integer(x));
    return t;
}

TEST(Relation, InsertAndDuplicate) {
    Relation r("p", 2);
    EXPECT_EQ(r.insert_if_new({Value::sym("a"), Value::sym("b")}), InsertResult::Inserted);
    EXPECT_EQ(r.insert_if_new({Value::sym("a"), Value::sym("b")}), InsertResult::Duplicate);
    EXPECT_EQ(r.size(), 1u);
    EXPECT_THROW(r.insert_if_new({Value::sym("a")}), StoreError);
}

TEST(Relation, RandomInsertsMatchReferenceSet) {
    std::mt19937_64 rng(7);
    Relation r("p", 2);
    std::set<Tuple> reference;
    for (int i = 0; i < 10000; ++i) {
        Tuple t = tup({(long)(rng() % 70), (long)(rng() % 70)});  // ~50% repeats
        reference.insert(t);
        r.insert_if_new(t);
    }
    EXPECT_EQ(r.size(), reference.size());
    EXPECT_EQ(r.as_set(), reference);
}

TEST(Relation, ScanBoundPattern) {
    Relation parent("parent", 2);
    parent.insert_if_new({Value::sym("anna"), Value::sym("marc")});
    parent.insert_if_new({Value::sym("zoe"), Value::sym("anna")});
    parent.insert_if_new({Value::sym("tom"), Value::sym("marc")});
    ScanPattern pat{std::nullopt, Value::sym("marc")};
    std::vector<std::string> hits;
    parent.for_each_match(pat, 0, [&](size_t, const Tuple& t) {
        hits.push_back(t[0].text());
        return true;
    });
    EXPECT_EQ(hits, (std::vector<std::string>{"anna", "tom"}));

    ScanPattern all{std::nullopt, std::nullopt};
    size_t n = 0;
    parent.for_each_match(all, 0, [&](size_t, const Tuple&) {
        ++n;
        return true;
    });
    EXPECT_EQ(n, 3u);
}

TEST(Relation, IndexedAndLinearScansAgree) {
    std::mt19937_64 rng(11);
    Relation r("p", 2);
    for (int i = 0; i < 1000; ++i) r.insert_if_new(tup({(long)(rng() % 40), (long)(rng() % 40)}));
    for (long k = 0; k < 40; ++k) {
        ScanPattern pat{Value::integer(k), std::nullopt};
        std::multiset<Tuple> indexed, linear;
        r.for_each_match(pat, 0, [&](size_t, const Tuple& t) {  // size>64: index path
            indexed.insert(t);
            return true;
        });
        size_t n = r.size();
        for (size_t i = 0; i < n; ++i)
            if (r.row(i)[0] == Value::integer(k)) linear.insert(r.row(i));
        EXPECT_EQ(indexed, linear) << k;
    }
}

TEST(Relation, InsertAfterIndexBuildStaysConsistent) {
    Relation r("p", 2);
    for (long i = 0; i < 100; ++i) r.insert_if_new(tup({i % 5, i}));
    ScanPattern pat{Value::integer(3L), std::nullopt};
    size_t before = 0;
    r.for_each_match(pat, 0, [&](size_t, const Tuple&) {
        ++before;
        return true;
    });
    r.insert_if_new(tup({3, 1000}));
    size_t after = 0;
    r.for_each_match(pat, 0, [&](size_t, const Tuple&) {
        ++after;
        return true;
    });
    EXPECT_EQ(after, before + 1);
}

TEST(ChosenTable, AdvisorScenario) {
    ChosenTable ct({{{0}, {1}}});  // FD: arg0 -> arg1
    Tuple ohm{Value::str("Jim Black"), Value::sym("ohm")};
    Tuple bell{Value::str("Jim Black"), Value::sym("bell")};
    EXPECT_EQ(ct.fd_insert(ohm), ChosenTable::Fd::Accepted);
    EXPECT_EQ(ct.fd_insert(bell), ChosenTable::Fd::Violates);
    EXPECT_EQ(ct.fd_insert(ohm), ChosenTable::Fd::Accepted);  // re-derivation
    EXPECT_EQ(ct.chosen().size(), 1u);
}

TEST(ChosenTable, EmptyLeftSideForcesSingleRight) {
    ChosenTable ct({{{}, {0}}});
    EXPECT_EQ(ct.fd_insert({Value::sym("a")}), ChosenTable::Fd::Accepted);
    EXPECT_EQ(ct.fd_insert({Value::sym("b")}), ChosenTable::Fd::Violates);
    EXPECT_EQ(ct.fd_insert({Value::sym("a")}), ChosenTable::Fd::Accepted);
}

// Property: after any fd_insert sequence, every accepted pair respects the
// FDs of every goal (checked against an independent map).
TEST(ChosenTable, FdInvariantUnderRandomSequences) {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 50; ++round) {
        ChosenTable ct({{{0}, {1}}, {{1}, {0}}});
        std::map<Value, Value> fwd, rev;
        for (int i = 0; i < 200; ++i) {
            Tuple w = tup({(long)(rng() % 12), (long)(rng() % 12)});
            auto res = ct.fd_insert(w);
            bool ok_fwd = !fwd.count(w[0]) || fwd[w[0]] == w[1];
            bool ok_rev = !rev.count(w[1]) || rev[w[1]] == w[0];
            EXPECT_EQ(res == ChosenTable::Fd::Accepted, ok_fwd && ok_rev);
            if (res == ChosenTable::Fd::Accepted) {
                fwd[w[0]] = w[1];
                rev[w[1]] = w[0];
            }
        }
        for (auto& w : ct.chosen()) {
            EXPECT_EQ(fwd.at(w[0]), w[1]);
            EXPECT_EQ(rev.at(w[1]), w[0]);
        }
    }
}

TEST(Store, SwapStateSemantics) {
    Store s;
    auto n = s.relation("new_q", 2);
    auto o = s.relation("old_q", 2);
    n->insert_if_new(tup({1, 10}));
    o->insert_if_new(tup({0, 5}));
    s.swap_state("old_q", "new_q");
    EXPECT_EQ(s.find("old_q")->as_set(), (std::set<Tuple>{tup({1, 10})}));
    EXPECT_TRUE(s.find("new_q")->empty());
    s.swap_state("old_q", "new_q");
    EXPECT_TRUE(s.find("old_q")->empty());  // double swap with no writes
}

TEST(Store, BaseInstallSharesContents) {
    Store s;
    auto o = s.relation("old_q", 1);
    for (long i = 0; i < 10; ++i) o->insert_if_new(tup({i}));
    auto n = s.relation("new_q", 1);
    n->install_base(o);
    EXPECT_EQ(n->size(), 10u);
    EXPECT_EQ(n->insert_if_new(tup({3})), InsertResult::Duplicate);
    EXPECT_EQ(n->insert_if_new(tup({42})), InsertResult::Inserted);
    EXPECT_EQ(n->size(), 11u);
    EXPECT_EQ(o->size(), 10u);  // base untouched
}

TEST(Store, SwapCostIndependentOfSize) {
    auto measure = [](size_t n) {
        Store s;
        auto nn = s.relation("new_q", 1);
        s.relation("old_q", 1);
        for (size_t i = 0; i < n; ++i) nn->insert_if_new(tup({(long)i}));
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < 2000; ++i) {
            s.swap_state("old_q", "new_q");
        }
        auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double>(t1 - t0).count();
    };
    double small = measure(100), large = measure(100000);
    EXPECT_LT(large, small * 10 + 1e-2);
}

TEST(Store, CsvLoadTypedAndErrors) {
    std::string dir = ::testing::TempDir();
    std::string good = dir + "/emp.csv";
    {
        std::ofstream f(good);
        f << "NAME,SALARY\nsmith,100\n\"jones, jr\",200\n";
    }
    Store s;
    s.load_csv("emp", {{"NAME", "string"}, {"SALARY", "int"}}, good);
    EXPECT_EQ(s.find("emp")->size(), 2u);
    EXPECT_EQ(s.find("emp")->row(1)[0], Value::str("jones, jr"));
    EXPECT_EQ(s.find("emp")->row(1)[1], Value::integer(200L));

    std::string bad = dir + "/bad.csv";
    {
        std::ofstream f(bad);
        f << "NAME,SALARY\nsmith,lots\n";
    }
    Store s2;
    try {
        s2.load_csv("emp", {{"NAME", "string"}, {"SALARY", "int"}}, bad);
        FAIL() << "expected CsvError";
    } catch (const CsvError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("row 1"), std::string::npos);
        EXPECT_NE(msg.find("SALARY"), std::string::npos);
    }

    std::string empty = dir + "/empty.csv";
    { std::ofstream f(empty); }
    Store s3;
    s3.load_csv("emp", {{"NAME", "string"}, {"SALARY", "int"}}, empty);
    EXPECT_EQ(s3.find("emp"), nullptr);
}

}  // namespace
