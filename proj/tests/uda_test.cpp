#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ldl/parser.hpp"
#include "ldl/uda.hpp"

using namespace ldl;

namespace {

std::vector<Value> feed_all(const AggregateDef& def, GroupCursor& gc,
                            const std::vector<Value>& ys) {
    std::vector<Value> early;
    for (auto& y : ys)
        for (auto& v : feed(def, gc, y)) early.push_back(v);
    return early;
}

TEST(Uda, McountEarlyReturnsAreOneToN) {
    const auto& def = builtin_catalog().require("mcount");
    GroupCursor gc;
    auto early = feed_all(def, gc, {Value::sym("a"), Value::sym("b"), Value::sym("c")});
    ASSERT_EQ(early.size(), 3u);
    EXPECT_EQ(early[0], Value::integer(1L));
    EXPECT_EQ(early[1], Value::integer(2L));
    EXPECT_EQ(early[2], Value::integer(3L));
    EXPECT_TRUE(finalize(def, gc).empty());  // no freturn: monotone
}

TEST(Uda, MsumCompanyControlTrace) {
    const auto& def = builtin_catalog().require("msum");
    GroupCursor gc;
    auto early = feed_all(def, gc, {Value::integer(20L), Value::integer(40L)});
    ASSERT_EQ(early.size(), 2u);
    EXPECT_EQ(early[0], Value::integer(20L));
    EXPECT_EQ(early[1], Value::integer(60L));  // crosses the 50% threshold here
}

TEST(Uda, AvgFinalReturn) {
    const auto& def = builtin_catalog().require("avg");
    GroupCursor gc;
    auto early = feed_all(def, gc, {Value::integer(1L), Value::integer(2L), Value::integer(3L)});
    EXPECT_TRUE(early.empty());
    auto fin = finalize(def, gc);
    ASSERT_EQ(fin.size(), 1u);
    EXPECT_EQ(fin[0], Value::real(2.0));
}

TEST(Uda, AvgEveryHundredEarlyReturns) {
    AggregateRegistry reg = builtin_catalog();
    reg.register_from_program(parse_program(
        "ereturn(avg, Y, cs(Cnt, Sum), A) <- Cnt mod 100 = 0, A = Sum / Cnt."));
    const auto& def = reg.require("avg");
    EXPECT_FALSE(def.monotone);
    GroupCursor gc;
    std::vector<Value> early;
    for (long i = 1; i <= 250; ++i)
        for (auto& v : feed(def, gc, Value::integer(i))) early.push_back(v);
    ASSERT_EQ(early.size(), 2u);
    EXPECT_EQ(early[0], Value::real(50.5));    // mean of 1..100
    EXPECT_EQ(early[1], Value::real(100.5));   // mean of 1..200
    auto fin = finalize(def, gc);
    ASSERT_EQ(fin.size(), 1u);
    EXPECT_EQ(fin[0], Value::real(125.5));
}

Value interval(long a, long b) {
    return Value::tup("", {Value::integer(a), Value::integer(b)});
}

TEST(Uda, CoalesSortedIntervals) {
    const auto& def = builtin_catalog().require("coales");
    GroupCursor gc;
    auto e1 = feed(def, gc, interval(1, 5));
    EXPECT_TRUE(e1.empty());
    auto e2 = feed(def, gc, interval(3, 8));
    EXPECT_TRUE(e2.empty());
    EXPECT_EQ(gc.state, interval(1, 8));
    auto e3 = feed(def, gc, interval(10, 12));
    ASSERT_EQ(e3.size(), 1u);
    EXPECT_EQ(e3[0], interval(1, 8));
    EXPECT_EQ(gc.state, interval(10, 12));
    auto fin = finalize(def, gc);
    ASSERT_EQ(fin.size(), 1u);
    EXPECT_EQ(fin[0], interval(10, 12));
}

TEST(Uda, CoalesContainedInterval) {
    const auto& def = builtin_catalog().require("coales");
    GroupCursor gc;
    feed(def, gc, interval(1, 10));
    feed(def, gc, interval(2, 3));  // contained: state unchanged
    EXPECT_EQ(gc.state, interval(1, 10));
}

TEST(Uda, CountOverEmptyGroupYieldsNothing) {
    const auto& def = builtin_catalog().require("count");
    GroupCursor gc;
    EXPECT_TRUE(finalize(def, gc).empty());
}

TEST(Uda, FeedWithoutMatchingRuleThrows) {
    const auto& def = builtin_catalog().require("coales");
    GroupCursor gc;
    EXPECT_THROW(feed(def, gc, Value::integer(7L)), UdaError);  // not an interval
}

// Builtin folds against closed-form oracles over random multisets.
TEST(Uda, FoldsMatchClosedForms) {
    std::mt19937_64 rng(5);
    const auto& reg = builtin_catalog();
    for (int round = 0; round < 100; ++round) {
        size_t n = 1 + rng() % 100;
        std::vector<long> xs;
        for (size_t i = 0; i < n; ++i) xs.push_back((long)(rng() % 2001) - 1000);

        auto run = [&](const char* name) {
            GroupCursor gc;
            const auto& def = reg.require(name);
            for (long x : xs) feed(def, gc, Value::integer(x));
            auto fin = finalize(def, gc);
            return fin;
        };
        long sum = 0, mn = xs[0], mx = xs[0];
        for (long x : xs) {
            sum += x;
            mn = std::min(mn, x);
            mx = std::max(mx, x);
        }
        EXPECT_EQ(run("count")[0], Value::integer((long)n));
        EXPECT_EQ(run("sum")[0], Value::integer(sum));
        EXPECT_EQ(run("min")[0], Value::integer(mn));
        EXPECT_EQ(run("max")[0], Value::integer(mx));
        EXPECT_EQ(run("avg")[0], Value::real((double)sum / (double)n));
        // monotone running aggregates: last early return equals the fold
        GroupCursor gc;
        std::vector<Value> early;
        for (long x : xs)
            for (auto& v : feed(reg.require("msum"), gc, Value::integer(x))) early.push_back(v);
        ASSERT_EQ(early.size(), n);
        EXPECT_EQ(early.back(), Value::integer(sum));
    }
}

TEST(Uda, MonotoneFlagMatchesFreturnPresence) {
    const auto& reg = builtin_catalog();
    for (auto& name : reg.names()) {
        const auto& def = reg.require(name);
        EXPECT_EQ(def.monotone, def.freturn_rules.empty()) << name;
    }
}

}  // namespace
