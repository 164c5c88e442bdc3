#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qarank/error.hpp"
#include "qarank/eval.hpp"
#include "qarank/rng.hpp"
#include "support/metric_oracle.hpp"

using namespace qarank;
using Ranking = std::vector<std::string>;

TEST(Metrics, AveragePrecisionExample)
{
    Qrels::Judgments j{{"a", 1}, {"c", 1}};
    EXPECT_NEAR(*average_precision({"a", "b", "c"}, j, 1000), (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(*average_precision({"x", "y"}, j, 1000), 0.0);
    // Relevant documents beyond the cutoff still count in the denominator.
    EXPECT_DOUBLE_EQ(*average_precision({"a", "b", "c"}, j, 1), 0.5);
}

TEST(Metrics, NdcgExample)
{
    // Grades {a:2, b:1}, ranking [b, a] at k=10, exponential gain.
    Qrels::Judgments j{{"a", 2}, {"b", 1}};
    const double dcg = 1.0 + 3.0 / std::log2(3.0);
    const double idcg = 3.0 + 1.0 / std::log2(3.0);
    EXPECT_NEAR(*ndcg_at_k({"b", "a"}, j, 10), dcg / idcg, 1e-12);
    EXPECT_DOUBLE_EQ(*ndcg_at_k({"a", "b"}, j, 10), 1.0);
    // Linear gain.
    EXPECT_NEAR(*ndcg_at_k({"b", "a"}, j, 10, Gain::linear), (1.0 + 2.0 / std::log2(3.0)) / (2.0 + 1.0 / std::log2(3.0)),
                1e-12);
}

TEST(Metrics, NdcgSingleRelevantAtRankTwo)
{
    Qrels::Judgments j{{"a", 3}};
    EXPECT_NEAR(*ndcg_at_k({"x", "a"}, j, 10), 0.6309297535714575, 1e-12);
    EXPECT_NEAR(7.0 / std::log2(3.0), 4.4165082750002025, 1e-12);
}

TEST(Metrics, MrrAndRecall)
{
    Qrels::Judgments j{{"a", 1}, {"b", 1}, {"z", 0}};
    EXPECT_DOUBLE_EQ(*mrr_at_k({"z", "x", "b"}, j, 10), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(*mrr_at_k({"z", "x", "b"}, j, 2), 0.0);
    EXPECT_DOUBLE_EQ(*recall_at_k({"z", "x", "b"}, j, 1000), 0.5);
    EXPECT_DOUBLE_EQ(*recall_at_k({"a", "x", "b"}, j, 1), 0.5);
}

TEST(Metrics, UndefinedWithoutRelevantDocuments)
{
    Qrels::Judgments none{{"a", 0}};
    EXPECT_FALSE(average_precision({"a"}, none, 10).has_value());
    EXPECT_FALSE(ndcg_at_k({"a"}, none, 10).has_value());
    EXPECT_FALSE(mrr_at_k({"a"}, none, 10).has_value());
    EXPECT_FALSE(recall_at_k({"a"}, none, 10).has_value());
    Qrels::Judgments low{{"a", 1}};
    EXPECT_FALSE(average_precision({"a"}, low, 10, 2).has_value());
    EXPECT_TRUE(ndcg_at_k({"a"}, low, 10).has_value());
}

// Property: random rankings and graded judgments agree with the brute-force reference,
// and every metric lies in [0, 1].
TEST(Metrics, MatchBruteForceReference)
{
    Xoshiro256 rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t pool = 1 + rng.below(60);
        Qrels::Judgments j;
        for (std::size_t d = 0; d < pool; ++d) {
            if (rng.below(3) == 0) j["d" + std::to_string(d)] = static_cast<int>(rng.below(4));
        }
        if (j.empty()) j["d0"] = 1;
        Ranking r;
        for (std::size_t d = 0; d < pool; ++d) r.push_back("d" + std::to_string(d));
        rng.shuffle(std::span(r));
        r.resize(rng.below(pool + 1));
        std::size_t k = 1 + rng.below(20);
        int thr = 1 + static_cast<int>(rng.below(2));
        auto check = [](std::optional<double> got, std::optional<double> want) {
            ASSERT_EQ(got.has_value(), want.has_value());
            if (got) {
                EXPECT_NEAR(*got, *want, 1e-12);
                EXPECT_GE(*got, 0.0);
                EXPECT_LE(*got, 1.0 + 1e-12);
            }
        };
        check(average_precision(r, j, k, thr), oracle::ap(r, j, k, thr));
        check(ndcg_at_k(r, j, k), oracle::ndcg(r, j, k, true));
        check(ndcg_at_k(r, j, k, Gain::linear), oracle::ndcg(r, j, k, false));
        check(mrr_at_k(r, j, k, thr), oracle::rr(r, j, k, thr));
        check(recall_at_k(r, j, k, thr), oracle::recall(r, j, k, thr));
    }
}

TEST(Metrics, PerfectRankingScoresOne)
{
    Qrels::Judgments j{{"a", 3}, {"b", 2}, {"c", 1}, {"d", 0}};
    Ranking r{"a", "b", "c", "d"};
    EXPECT_DOUBLE_EQ(*average_precision(r, j, 1000), 1.0);
    EXPECT_DOUBLE_EQ(*ndcg_at_k(r, j, 10), 1.0);
    EXPECT_DOUBLE_EQ(*mrr_at_k(r, j, 10), 1.0);
    EXPECT_DOUBLE_EQ(*recall_at_k(r, j, 1000), 1.0);
}

namespace {

qarank::Run make_run(const std::map<std::string, Ranking>& rankings, const std::string& tag)
{
    qarank::Run run;
    for (const auto& [qid, docs] : rankings) {
        std::vector<ScoredDoc> scored;
        for (std::size_t i = 0; i < docs.size(); ++i) scored.push_back({docs[i], static_cast<double>(docs.size() - i)});
        append_ranking(run, qid, scored, tag);
    }
    return run;
}

}  // namespace

TEST(EvaluateRun, ExcludesUnjudgedAndUndefined)
{
    Qrels q;
    q.add("q1", "a", 1);
    q.add("q2", "b", 0);
    qarank::Run run = make_run({{"q1", {"x", "a"}}, {"q2", {"b"}}, {"q3", {"a"}}}, "sys");
    auto rep = evaluate_run(run, q);
    EXPECT_EQ(rep.system, "sys");
    EXPECT_EQ(rep.evaluated_qids, (std::vector<std::string>{"q1", "q2"}));
    EXPECT_EQ(rep.excluded.at(Metric::map), (std::vector<std::string>{"q2"}));
    EXPECT_EQ(rep.evaluated(Metric::map), 1u);
    EXPECT_DOUBLE_EQ(rep.aggregate.at(Metric::map), 0.5);
    EXPECT_DOUBLE_EQ(rep.aggregate.at(Metric::mrr), 0.5);

    qarank::Run unjudged = make_run({{"q9", {"a"}}}, "sys");
    EXPECT_THROW(evaluate_run(unjudged, q), Error);
}

TEST(EvaluateRun, ConfigValidationAndNames)
{
    MetricConfig c;
    EXPECT_EQ(c.name(Metric::map), "map@1000");
    EXPECT_EQ(c.name(Metric::ndcg), "ndcg@10");
    c.ndcg_cutoff = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TTest, KnownValues)
{
    auto r = paired_t_test(std::vector<double>{0.1, 0.2, 0.15, 0.05}, std::vector<double>{0, 0, 0, 0});
    EXPECT_NEAR(r.t, 3.8729833462074184, 1e-9);
    EXPECT_NEAR(r.p, 0.03046629166217095, 1e-9);
    EXPECT_EQ(r.n, 4u);

    auto r2 = paired_t_test(std::vector<double>{0.5, 0.3, 0.9, 0.1, 0.7, 0.2},
                            std::vector<double>{0.4, 0.35, 0.6, 0.0, 0.5, 0.25});
    EXPECT_NEAR(r2.t, 1.7770466332772774, 1e-9);
    EXPECT_NEAR(r2.p, 0.13571017261995083, 1e-9);

    auto r3 = paired_t_test(std::vector<double>{0.8, 0.6, 0.7, 0.9, 0.75, 0.65, 0.85, 0.55, 0.95, 0.5},
                            std::vector<double>{0.7, 0.65, 0.5, 0.8, 0.6, 0.7, 0.9, 0.45, 0.8, 0.52});
    EXPECT_NEAR(r3.t, 2.0719250596269183, 1e-9);
    EXPECT_NEAR(r3.p, 0.0681511630418889, 1e-9);
}

TEST(TTest, SymmetryAndDegenerateCases)
{
    std::vector<double> a{0.2, 0.4, 0.9, 0.3};
    std::vector<double> b{0.1, 0.5, 0.6, 0.35};
    auto ab = paired_t_test(a, b);
    auto ba = paired_t_test(b, a);
    EXPECT_DOUBLE_EQ(ab.t, -ba.t);
    EXPECT_DOUBLE_EQ(ab.p, ba.p);

    auto same = paired_t_test(a, a);
    EXPECT_EQ(same.t, 0.0);
    EXPECT_EQ(same.p, 1.0);

    std::vector<double> base{0.5, 1.0, 1.5, 2.0};
    std::vector<double> shifted{0.75, 1.25, 1.75, 2.25};
    auto shift = paired_t_test(shifted, base);
    EXPECT_TRUE(shift.degenerate);
    EXPECT_TRUE(std::isinf(shift.t) && shift.t > 0);
    EXPECT_EQ(shift.p, 0.0);

    EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}), Error);
    EXPECT_THROW(paired_t_test(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0}), Error);
    std::map<std::string, double> ma{{"q1", 1.0}, {"q2", 2.0}};
    std::map<std::string, double> mb{{"q1", 1.0}, {"q3", 2.0}};
    EXPECT_THROW(paired_t_test(ma, mb), Error);
}

TEST(CompareSystems, BonferroniOverAllPairs)
{
    Qrels q;
    std::map<std::string, Ranking> good, mid, bad;
    for (int i = 0; i < 12; ++i) {
        std::string qid = "q" + std::to_string(i);
        q.add(qid, "rel", 1);
        good[qid] = {"rel", "x", "y"};
        mid[qid] = i % 2 ? Ranking{"x", "rel", "y"} : Ranking{"rel", "x", "y"};
        bad[qid] = {"x", "y", "rel"};
    }
    std::vector<MetricReport> reps{evaluate_run(make_run(good, "good"), q), evaluate_run(make_run(mid, "mid"), q),
                                   evaluate_run(make_run(bad, "bad"), q)};
    auto res = compare_systems(reps, 0.05);
    EXPECT_EQ(res.size(), 3u * std::size(kAllMetrics));
    for (const auto& r : res) EXPECT_NEAR(r.adjusted_alpha, 0.05 / 3.0, 1e-15);
    bool found = false;
    for (const auto& r : res) {
        if (r.metric == Metric::mrr && r.system_a == "mid" && r.system_b == "bad") {
            found = true;
            EXPECT_TRUE(r.significant);
            EXPECT_GT(r.t_statistic, 0.0);
        }
    }
    EXPECT_TRUE(found);
    EXPECT_THROW(compare_systems({reps[0]}), Error);

    std::ostringstream out;
    write_significance_tsv(res, out);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')).find("system_a"), 0u);
}

TEST(DomainBreakdown, WeightedMeanOfDomainsEqualsOverall)
{
    Qrels q;
    SplitManifest m;
    std::map<std::string, Ranking> rk;
    Xoshiro256 rng(3);
    for (int i = 0; i < 50; ++i) {
        std::string qid = "q" + std::to_string(i);
        q.add(qid, "rel", 1);
        Ranking r{"a", "b", "c", "d"};
        r.insert(r.begin() + static_cast<std::ptrdiff_t>(rng.below(5)), "rel");
        rk[qid] = r;
        m.qids.push_back(qid);
        m.assignment[qid] = Split::test;
        m.domains[qid] = kAllDomains[rng.below(5)];
    }
    auto rep = evaluate_run(make_run(rk, "s"), q);
    auto by = domain_breakdown(rep, m);
    for (Metric metric : kAllMetrics) {
        double weighted = 0.0;
        std::size_t n = 0;
        for (const auto& [d, r] : by) {
            weighted += r.aggregate.at(metric) * static_cast<double>(r.evaluated(metric));
            n += r.evaluated(metric);
        }
        EXPECT_EQ(n, 50u);
        EXPECT_NEAR(weighted / static_cast<double>(n), rep.aggregate.at(metric), 1e-12);
    }
}

TEST(Writers, PerQueryAndSummary)
{
    Qrels q;
    q.add("q1", "a", 1);
    auto rep = evaluate_run(make_run({{"q1", {"a"}}}, "bm25"), q);
    std::ostringstream per;
    write_per_query_tsv(rep, per);
    EXPECT_NE(per.str().find("q1\tmap@1000\t1.000000"), std::string::npos);
    std::ostringstream sum;
    write_summary_table({rep}, sum);
    EXPECT_NE(sum.str().find("bm25"), std::string::npos);
}
