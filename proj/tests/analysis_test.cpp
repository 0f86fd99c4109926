#include <gtest/gtest.h>

#include "ldl/agg_expand.hpp"
#include "ldl/analysis.hpp"
#include "ldl/parser.hpp"
#include "ldl/printer.hpp"

using namespace ldl;

namespace {

const char* kAncestors = R"(
delta_anc(0, marc).
delta_anc(J+1, Y) <- delta_anc(J, X), parent(Y, X), ~all_anc(J, Y).
all_anc(J+1, X) <- all_anc(J, X).
all_anc(J, X) <- delta_anc(J, X).
)";

const char* kJoinParty = R"(
willcome(P) <- sure(P).
willcome(P) <- c_friends(P, K), K >= 3.
c_friends(P, mcount<F>) <- willcome(F), friend(P, F).
)";

const char* kFloyd = R"(
delta(0, X, Y, C) <- g(X, Y, C).
new(J+1, X, Z, C) <- delta(J, X, Y, C1), all(J, Y, Z, C2), C = C1 + C2.
new(J+1, X, Z, C) <- all(J, X, Y, C1), delta(J, Y, Z, C2), C = C1 + C2.
newmin(J, X, Z, min<C>) <- new(J, X, Z, C).
discard(J+1, X, Z, C1) <- newmin(J+1, X, Z, C1), all(J, X, Z, C2), C1 >= C2.
delta(J, X, Z, C) <- newmin(J, X, Z, C), ~discard(J, X, Z, _).
all(J+1, X, Z, C) <- all(J, X, Z, C), ~delta(J+1, X, Z, _).
all(J, X, Z, C) <- delta(J, X, Z, C).
)";

const char* kOverlap = R"(
e_hist(0, Eno, Frm, To) <- emp_dep_sal(0, Eno, D, S, Frm, To).
overlap(J+1, Eno, Frm1, To1, Frm2, To2) <-
    e_hist(J, Eno, Frm1, To1), e_hist(J, Eno, Frm2, To2),
    Frm1 <= Frm2, Frm2 <= To1, distinct(Frm1, To1, Frm2, To2).
e_hist(J, Eno, Frm1, To) <- overlap(J, Eno, Frm1, To1, Frm2, To2), select_larger(To1, To2, To).
final_e_hist(J+1, Eno, Frm, To) <- e_hist(J, Eno, Frm, To),
    ~overlap(J+1, Eno, Frm, To, _, _), ~overlap(J+1, Eno, _, _, Frm, To).
distinct(Frm1, To1, Frm2, To2) <- To1 ~= To2.
distinct(Frm1, To1, Frm2, To2) <- Frm1 ~= Frm2.
select_larger(X, Y, X) <- X >= Y.
select_larger(X, Y, Y) <- Y > X.
)";

TEST(Graph, AncestorCliqueWithNegativeEdge) {
    Program p = parse_program(kAncestors);
    auto reg = program_registry(p);
    PredicateGraph g = build_graph(p, &reg);
    EXPECT_TRUE(g.same_scc("delta_anc", "all_anc"));
    bool found = false;
    for (auto& e : g.edges)
        if (e.from == "all_anc" && e.to == "delta_anc" && e.polarity == Polarity::Negative)
            found = true;
    EXPECT_TRUE(found);
}

TEST(Graph, FactOnlyProgramHasIsolatedNodes) {
    Program p = parse_program("parent(a, b). g(a, b, 3).");
    PredicateGraph g = build_graph(p);
    EXPECT_EQ(g.nodes.size(), 2u);
    EXPECT_TRUE(g.edges.empty());
}

TEST(Graph, JoinThePartyAggregateEdge) {
    Program p = parse_program(kJoinParty);
    auto reg = program_registry(p);
    PredicateGraph g = build_graph(p, &reg);
    EXPECT_TRUE(g.same_scc("willcome", "c_friends"));
    bool found = false;
    for (auto& e : g.edges)
        if (e.from == "willcome" && e.to == "c_friends" && e.polarity == Polarity::Aggregate) {
            found = true;
            EXPECT_FALSE(e.strict);  // mcount is monotone
        }
    EXPECT_TRUE(found);
}

TEST(Safety, HeadVariableUnbound) {
    auto diags = check_safety(parse_program("p(X) <- q(Y)."));
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_NE(diags[0].find("X"), std::string::npos);
}

TEST(Safety, PaperAdvisorRuleIsSafe) {
    auto diags = check_safety(parse_program(
        "actual_adv(S, P) <- student(S, M, Y), professor(P, M), choice((S), (P))."));
    EXPECT_TRUE(diags.empty());
}

TEST(Safety, NegatedOnlyVariable) {
    auto diags = check_safety(parse_program("r(X) <- q(X), ~s(Y)."));
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_NE(diags[0].find("Y"), std::string::npos);
}

TEST(Safety, AnonymousUnderNegationIsExistential) {
    EXPECT_TRUE(check_safety(parse_program("r(X) <- q(X), ~s(_).")).empty());
}

TEST(Safety, AssignmentsBind) {
    EXPECT_TRUE(
        check_safety(parse_program("p(J1) <- q(J), J1 = J + 1.")).empty());
}

TEST(Safety, ComparisonDefinedPredicatesFlowFromCallSite) {
    Program p = parse_program(kOverlap);
    EXPECT_TRUE(check_safety(p).empty());
    auto tp = comparison_defined_preds(p);
    EXPECT_TRUE(tp.count("distinct"));
    EXPECT_TRUE(tp.count("select_larger"));
    EXPECT_FALSE(tp.count("e_hist"));
}

TEST(Stratify, BistateAncestorStrata) {
    Program p = parse_program(kAncestors);
    auto reg = program_registry(p);
    BistateProgram bp = bistate(xy_unit_rules(p, {"delta_anc", "all_anc"}), {"delta_anc", "all_anc"});
    ASSERT_TRUE(bp.ok());
    Stratification s = stratify(bp.as_program(), &reg);
    ASSERT_TRUE(s.ok);
    EXPECT_EQ(s.stratum.at("parent"), 0);
    EXPECT_EQ(s.stratum.at("old_all_anc"), 0);
    EXPECT_EQ(s.stratum.at("old_delta_anc"), 0);
    EXPECT_EQ(s.stratum.at("new_delta_anc"), 1);
    EXPECT_EQ(s.stratum.at("new_all_anc"), 2);
}

TEST(Stratify, PositiveTransitiveClosure) {
    Stratification s = stratify(parse_program(R"(
tc(X, Y) <- edge(X, Y).
tc(X, Z) <- tc(X, Y), edge(Y, Z).
)"));
    ASSERT_TRUE(s.ok);
    EXPECT_EQ(s.stratum.at("edge"), 0);
    EXPECT_EQ(s.stratum.at("tc"), 1);
}

TEST(Stratify, NegativeSelfLoopFails) {
    Stratification s = stratify(parse_program("p <- ~p."));
    EXPECT_FALSE(s.ok);
    EXPECT_NE(s.error.find("not stratified"), std::string::npos);
}

TEST(Foe, AdvisorMatchesPaperListing) {
    Program p = parse_program(
        "actual_adv(S, P) <- student(S, Majr, Yr), professor(P, Majr), choice((S), (P)).");
    FoeArtifacts foe = foe_transform(p);
    ASSERT_EQ(foe.items.size(), 1u);
    Program expected = parse_program(R"(
actual_adv(S, P) <- student(S, Majr, Yr), professor(P, Majr), chosen(S, P).
chosen(S, P) <- student(S, Majr, Yr), professor(P, Majr), ~diffchoice(S, P).
diffchoice(S, P) <- chosen(S, Pp), P ~= Pp.
)");
    std::map<std::string, std::string> pred_map{{"chosen_1", "chosen"},
                                                {"diffchoice_1", "diffchoice"}};
    ASSERT_EQ(foe.transformed.rules.size(), 3u);
    EXPECT_TRUE(programs_equal_modulo_renaming(foe.transformed.rules, expected.rules, &pred_map));
}

TEST(Foe, IdentityOnChoiceFreePrograms) {
    Program p = parse_program("tc(X, Y) <- edge(X, Y).\ntc(X, Z) <- tc(X, Y), edge(Y, Z).");
    FoeArtifacts foe = foe_transform(p);
    EXPECT_FALSE(foe.changed);
    EXPECT_EQ(foe.transformed.rules.size(), p.rules.size());
    for (size_t i = 0; i < p.rules.size(); ++i) EXPECT_EQ(foe.transformed.rules[i], p.rules[i]);
}

TEST(Foe, DoubleChoiceChainRule) {
    Program p = parse_program(
        "chain(X, Y) <- chain(_, X), d(Y), choice((X), (Y)), choice((Y), (X)).");
    FoeArtifacts foe = foe_transform(p);
    ASSERT_EQ(foe.items.size(), 1u);
    const auto& item = foe.items[0];
    EXPECT_EQ(item.w, (std::vector<std::string>{"X", "Y"}));
    ASSERT_EQ(item.diff_rules.size(), 2u);
    // goal 1 primes Y and tests Y ~= Y'; goal 2 primes X and tests X ~= X'
    Program expect = parse_program(R"(
diffchoice(X, Y) <- chosen(X, Yp), Y ~= Yp.
diffchoice(X, Y) <- chosen(Xp, Y), X ~= Xp.
)");
    std::map<std::string, std::string> pred_map{{"chosen_1", "chosen"},
                                                {"diffchoice_1", "diffchoice"}};
    EXPECT_TRUE(rules_equal_modulo_renaming(item.diff_rules[0], expect.rules[0], &pred_map));
    EXPECT_TRUE(rules_equal_modulo_renaming(item.diff_rules[1], expect.rules[1], &pred_map));
}

TEST(Classify, BuiltinMonotonicity) {
    const auto& reg = builtin_catalog();
    EXPECT_TRUE(reg.require("mcount").monotone);
    EXPECT_TRUE(reg.require("msum").monotone);
    EXPECT_FALSE(reg.require("avg").monotone);
    EXPECT_FALSE(reg.require("coales").monotone);
    EXPECT_FALSE(reg.require("count").monotone);
    EXPECT_FALSE(reg.require("sum").monotone);
    EXPECT_FALSE(reg.require("min").monotone);
    EXPECT_FALSE(reg.require("max").monotone);
}

TEST(Classify, RegistrationErrors) {
    AggregateRegistry reg;
    AggregateDef d;
    d.name = "broken";
    EXPECT_THROW(reg.register_def(d), UdaError);  // missing single/multi
    Program p = parse_program(R"(
single(avg, Y, cs(1, Y)).
multi(avg, Y, cs(C, S), cs(C1, S1)) <- C1 = C + 1, S1 = S + Y.
)");
    AggregateRegistry reg2 = builtin_catalog();
    EXPECT_THROW(reg2.register_from_program(p), UdaError);  // avg exists
}

TEST(XyClassify, AncestorRules) {
    Program p = parse_program(kAncestors);
    std::set<std::string> clique{"delta_anc", "all_anc"};
    auto rules = xy_unit_rules(p, clique);
    ASSERT_EQ(rules.size(), 4u);
    std::vector<XyClass> expected{XyClass::X, XyClass::Y, XyClass::Y, XyClass::X};
    for (size_t i = 0; i < rules.size(); ++i) {
        auto info = temporal_argument(rules[i], clique);
        ASSERT_TRUE(info.has_value()) << i;
        EXPECT_EQ(xy_classify_rule(*info), expected[i]) << i;
    }
}

TEST(XyClassify, OverlapRuleIsY) {
    Program p = parse_program(kOverlap);
    std::set<std::string> clique{"e_hist", "overlap", "final_e_hist"};
    auto info = temporal_argument(p.rules[1], clique);
    ASSERT_TRUE(info.has_value());
    EXPECT_EQ(xy_classify_rule(*info), XyClass::Y);
}

TEST(XyClassify, PlusTwoIsNotXY) {
    Program p = parse_program("p(J + 2, X) <- p(J, X), q(X).");
    auto info = temporal_argument(p.rules[0], {"p"});
    EXPECT_FALSE(info.has_value());
}

TEST(XyClassify, NonRecursiveRuleHasNoTemporalArgument) {
    Program p = parse_program("s(X) <- parent(X, Y).");
    EXPECT_FALSE(temporal_argument(p.rules[0], {"tc"}).has_value());
}

TEST(Bistate, AncestorMatchesPaperListing) {
    Program p = parse_program(kAncestors);
    BistateProgram bp = bistate(xy_unit_rules(p, {"delta_anc", "all_anc"}), {"delta_anc", "all_anc"});
    ASSERT_TRUE(bp.ok());
    auto clause = [](const char* text) { return Parser(text).parse_single_clause(); };
    ASSERT_EQ(bp.rules.size(), 4u);
    EXPECT_TRUE(rules_equal_modulo_renaming(bp.rules[0].rule, clause("new_delta_anc(marc).")));
    EXPECT_TRUE(rules_equal_modulo_renaming(
        bp.rules[1].rule,
        clause("new_delta_anc(Y) <- old_delta_anc(X), parent(Y, X), ~old_all_anc(Y).")));
    EXPECT_TRUE(rules_equal_modulo_renaming(bp.rules[2].rule,
                                            clause("new_all_anc(X) <- old_all_anc(X).")));
    EXPECT_TRUE(rules_equal_modulo_renaming(bp.rules[3].rule,
                                            clause("new_all_anc(X) <- new_delta_anc(X).")));
    EXPECT_TRUE(bp.rules[0].is_exit);
    EXPECT_TRUE(bp.rules[2].is_copy);  // r3 is the copy rule
    EXPECT_FALSE(bp.rules[1].is_copy);
    EXPECT_FALSE(bp.rules[3].is_copy);
}

TEST(Bistate, NonXyCliqueErrors) {
    Program p = parse_program("p(X, Y) <- p(Y, X).");
    BistateProgram bp = bistate(p.rules, {"p"});
    EXPECT_FALSE(bp.ok());
}

TEST(Syncbi, AncestorGainsCounterAndResultRules) {
    Program p = parse_program(kAncestors);
    Analysis a = analyze(p);
    ASSERT_TRUE(a.ok()) << (a.diagnostics.empty() ? "" : a.diagnostics[0]);
    ASSERT_EQ(a.xy_units.size(), 1u);
    const SyncbiProgram& sb = a.xy_units[0].syncbi;
    Program expected_exit = parse_program("new_delta_anc(marc) <- counter(0).");
    EXPECT_TRUE(rules_equal_modulo_renaming(sb.rules[0].rule, expected_exit.rules[0]));
    ASSERT_EQ(sb.result_rules.size(), 2u);
    Program expected_results = parse_program(R"(
all_anc(J, X) <- new_all_anc(X), counter(J).
delta_anc(J, X) <- new_delta_anc(X), counter(J).
)");
    EXPECT_TRUE(rules_equal_modulo_renaming(sb.result_rules[0], expected_results.rules[0]));
    EXPECT_TRUE(rules_equal_modulo_renaming(sb.result_rules[1], expected_results.rules[1]));
}

TEST(Syncbi, OverlapUnitAbsorbsFinalEHist) {
    Program p = parse_program(kOverlap);
    Analysis a = analyze(p);
    ASSERT_TRUE(a.ok()) << (a.diagnostics.empty() ? "" : a.diagnostics[0]);
    ASSERT_EQ(a.xy_units.size(), 1u);
    const XyUnit& u = a.xy_units[0];
    EXPECT_TRUE(u.preds.count("final_e_hist"));
    bool has_result = false;
    for (auto& r : u.syncbi.result_rules)
        if (r.head.pred == "final_e_hist") has_result = true;
    EXPECT_TRUE(has_result);
    bool exit_has_counter = false;
    for (auto& br : u.syncbi.rules)
        if (br.is_exit)
            for (auto& lit : br.rule.body)
                if (auto* at = as_atom(lit))
                    if (at->pred == "counter") exit_has_counter = true;
    EXPECT_TRUE(exit_has_counter);
}

TEST(Validate, CorrectedFloydAccepted) {
    Program p = parse_program(kFloyd);
    auto reg = program_registry(p);
    std::set<std::string> preds{"delta", "new", "newmin", "discard", "all"};
    std::vector<Rule> rules;
    for (auto& r : p.rules) rules.push_back(r);
    auto diags = validate_choice_and_agg_in_xy(rules, preds, reg);
    EXPECT_TRUE(diags.empty()) << (diags.empty() ? "" : diags[0]);
}

TEST(Validate, FloydWithoutTemporalGroupByRejected) {
    Program p = parse_program(R"(
delta(0, X, Y, C) <- g(X, Y, C).
new(J+1, X, Z, C) <- delta(J, X, Y, C1), all(J, Y, Z, C2), C = C1 + C2.
newmin(X, Z, min<C>) <- new(J, X, Z, C).
delta(J, X, Z, C) <- new(J, X, Z, C), newmin(X, Z, C).
all(J, X, Z, C) <- delta(J, X, Z, C).
)");
    auto reg = program_registry(p);
    std::set<std::string> preds{"delta", "new", "newmin", "all"};
    std::vector<Rule> rules(p.rules.begin(), p.rules.end());
    auto diags = validate_choice_and_agg_in_xy(rules, preds, reg);
    ASSERT_FALSE(diags.empty());
    EXPECT_NE(diags[0].find("group-by"), std::string::npos);
}

TEST(Validate, ChoiceNeedsTemporalVariableOnLeft) {
    Program p = parse_program(R"(
walk(0, a).
walk(J+1, Y) <- walk(J, X), g(X, Y), choice((X), (Y)).
)");
    auto reg = program_registry(p);
    std::vector<Rule> rules(p.rules.begin(), p.rules.end());
    auto diags = validate_choice_and_agg_in_xy(rules, {"walk"}, reg);
    ASSERT_FALSE(diags.empty());
    EXPECT_NE(diags[0].find("choice"), std::string::npos);

    Program ok = parse_program(R"(
walk(0, a).
walk(J+1, Y) <- walk(J, X), g(X, Y), choice((J, X), (Y)).
)");
    std::vector<Rule> ok_rules(ok.rules.begin(), ok.rules.end());
    EXPECT_TRUE(validate_choice_and_agg_in_xy(ok_rules, {"walk"}, reg).empty());
}

TEST(Expand, AvgRewriteShape) {
    Program p = parse_program("p(avg<Y>) <- d(Y).");
    auto reg = program_registry(p);
    Program e = expand_aggregates(p, reg);
    // chain root, chain step, cagr base, cagr step, freturn results, invocation
    ASSERT_EQ(e.rules.size(), 6u);
    EXPECT_EQ(e.rules[0].head.pred, "chain_1");
    EXPECT_EQ(e.rules[1].head.pred, "chain_1");
    EXPECT_EQ(e.rules[2].head.pred, "cagr_1");
    EXPECT_EQ(e.rules[3].head.pred, "cagr_1");
    EXPECT_EQ(e.rules[4].head.pred, "results_1");
    EXPECT_EQ(e.rules[5].head.pred, "p");
    int negated_chain = 0;
    for (auto& r : e.rules)
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit))
                if (a->negated && a->pred == "chain_1") ++negated_chain;
    EXPECT_EQ(negated_chain, 1);  // exactly one negated chain literal (freturn guard)
}

TEST(Expand, MonotoneOnlyIntroducesNoNegation) {
    Program p = parse_program("p(mcount<Y>) <- d(Y).");
    auto reg = program_registry(p);
    Program e = expand_aggregates(p, reg);
    for (auto& r : e.rules)
        for (auto& lit : r.body)
            if (auto* a = as_atom(lit)) EXPECT_FALSE(a->negated) << to_string(r);
}

TEST(Expand, NoAggregatesUnchanged) {
    Program p = parse_program("p(X) <- d(X).");
    auto reg = program_registry(p);
    Program e = expand_aggregates(p, reg);
    ASSERT_EQ(e.rules.size(), 1u);
    EXPECT_EQ(e.rules[0], p.rules[0]);
}

TEST(Expand, GroupByKeysThreaded) {
    Program p = parse_program("davg(D, avg<S>) <- employee(E, S, D).");
    auto reg = program_registry(p);
    Program e = expand_aggregates(p, reg);
    for (auto& r : e.rules) {
        if (r.head.pred.rfind("chain_", 0) == 0 || r.head.pred.rfind("cagr_", 0) == 0 ||
            r.head.pred.rfind("results_", 0) == 0) {
            ASSERT_FALSE(r.head.args.empty());
            EXPECT_EQ(r.head.args[0].term.name, "D") << to_string(r);
        }
    }
}

TEST(Analysis, UnregisteredAggregateDiagnosed) {
    Analysis a = analyze(parse_program("p(zap<Y>) <- d(Y)."));
    ASSERT_FALSE(a.ok());
    EXPECT_NE(a.diagnostics[0].find("zap"), std::string::npos);
}

TEST(Analysis, ScheduleOrdersComponents) {
    Analysis a = analyze(parse_program(R"(
edge(a, b). edge(b, c).
tc(X, Y) <- edge(X, Y).
tc(X, Z) <- tc(X, Y), edge(Y, Z).
top(X) <- tc(a, X), ~edge(X, c).
)"));
    ASSERT_TRUE(a.ok());
    std::vector<Component::Kind> kinds;
    for (auto& c : a.schedule) kinds.push_back(c.kind);
    // edb first, then the recursive clique, then the plain rule
    ASSERT_EQ(a.schedule.size(), 3u);
    EXPECT_EQ(a.schedule[0].kind, Component::Kind::Edb);
    EXPECT_EQ(a.schedule[1].kind, Component::Kind::Recursive);
    EXPECT_EQ(a.schedule[2].kind, Component::Kind::Plain);
}

}  // namespace
