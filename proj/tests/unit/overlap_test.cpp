#include <gtest/gtest.h>

#include <sstream>

#include "qarank/error.hpp"
#include "qarank/overlap.hpp"

using namespace qarank;

TEST(QueryCoverage, Examples)
{
    EXPECT_DOUBLE_EQ(query_coverage("what is bm25", "bm25 is a ranking function"), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(query_coverage("a a b", "a"), 0.5);
    EXPECT_DOUBLE_EQ(query_coverage("Hello", "HELLO there"), 1.0);
    EXPECT_DOUBLE_EQ(query_coverage("x", ""), 0.0);
    EXPECT_THROW(query_coverage("?!", "anything"), Error);
}

TEST(QueryCoverage, DocumentContainingQueryHasFullCoverage)
{
    const char* qs[] = {"why is the sky blue", "How do vaccines work?", "state-of-the-art retrieval"};
    for (const char* q : qs) {
        EXPECT_DOUBLE_EQ(query_coverage(q, std::string("prefix ") + q + " suffix"), 1.0);
        double c = query_coverage(q, "unrelated words entirely");
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
    }
}

TEST(AnalyzeOverlap, MeansQuartilesAndDomains)
{
    QuerySet qs;
    qs.add({"q1", "alpha beta", Domain::medicine, {}});
    qs.add({"q2", "gamma delta", Domain::finance, {}});
    Collection c;
    c.add({"h_0", "alpha beta gamma", Source::human});
    c.add({"h_1", "alpha", Source::human});
    c.add({"h_2", "zeta", Source::human});
    Qrels q;
    q.add("q1", "h_0", 1);
    q.add("q1", "h_1", 1);
    q.add("q2", "h_2", 1);
    q.add("q2", "h_0", 0);
    q.add("q9", "h_0", 1);

    auto r = analyze_overlap(qs, q, c, "human");
    EXPECT_EQ(r.per_pair.size(), 3u);
    EXPECT_DOUBLE_EQ(r.mean_coverage, 0.5);
    EXPECT_DOUBLE_EQ(r.coverage_quartiles.median, 0.5);
    EXPECT_DOUBLE_EQ(r.mean_length, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.mean_coverage_by_domain.at(Domain::medicine), 0.75);
    EXPECT_DOUBLE_EQ(r.mean_coverage_by_domain.at(Domain::finance), 0.0);

    std::ostringstream tsv;
    write_overlap_tsv(r, tsv);
    EXPECT_NE(tsv.str().find("q1\th_1\t0.500000"), std::string::npos);
    std::ostringstream summary;
    write_overlap_summary({r}, summary);
    EXPECT_NE(summary.str().find("human"), std::string::npos);

    q.add("q1", "missing", 1);
    EXPECT_THROW(analyze_overlap(qs, q, c), IntegrityError);
}
