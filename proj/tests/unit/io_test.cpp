#include <gtest/gtest.h>

#include <algorithm>

#include "qarank/error.hpp"
#include "qarank/io.hpp"
#include "qarank/rng.hpp"
#include "support/tempdir.hpp"

using namespace qarank;
using qarank::testing::slurp;
using qarank::testing::TempDir;

TEST(Collection, ReadsDocumentsInFileOrder)
{
    TempDir tmp;
    auto c = read_collection(tmp.write("c.tsv", "h_0\thello world\nh_1\tfoo\n"));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].docid, "h_0");
    EXPECT_EQ(c[0].text, "hello world");
    EXPECT_EQ(c[0].source, Source::human);
    EXPECT_EQ(c[1].text, "foo");
}

TEST(Collection, EmptyFileIsEmptyCollection)
{
    TempDir tmp;
    EXPECT_TRUE(read_collection(tmp.write("c.tsv", "")).empty());
}

TEST(Collection, SourceFollowsDocidPrefix)
{
    TempDir tmp;
    auto c = read_collection(tmp.write("c.tsv", "c_0\tx\n123\ty\n"), Source::llm);
    EXPECT_EQ(c[0].source, Source::llm);
    EXPECT_EQ(c[1].source, Source::llm);
}

TEST(Collection, MalformedLineReportsLineNumber)
{
    TempDir tmp;
    auto p = tmp.write("c.tsv", "h_0\tok\nh_1 no tab\n");
    try {
        read_collection(p);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(read_collection(tmp.write("d.tsv", "a\tb\tc\n")), ParseError);
}

TEST(Collection, DuplicateDocidIsIntegrityError)
{
    TempDir tmp;
    EXPECT_THROW(read_collection(tmp.write("c.tsv", "h_0\ta\nh_0\tb\n")), IntegrityError);
}

TEST(Collection, WriteSanitizesTabsAndNewlines)
{
    TempDir tmp;
    Collection c;
    c.add({"h_0", "line one\n\nline\ttwo", Source::human});
    write_collection(c, tmp / "c.tsv");
    EXPECT_EQ(slurp(tmp / "c.tsv"), "h_0\tline one line two\n");
}

TEST(Queries, RejectsEmptyTextAndDuplicates)
{
    TempDir tmp;
    EXPECT_THROW(read_queries(tmp.write("q.tsv", "q1\t   \n")), IntegrityError);
    EXPECT_THROW(read_queries(tmp.write("q2.tsv", "q1\ta\nq1\tb\n")), IntegrityError);
    auto q = read_queries(tmp.write("q3.tsv", "q1\twhat is bm25\n"));
    EXPECT_EQ(q.find("q1")->text, "what is bm25");
}

TEST(Qrels, ParsesWhitespaceSeparatedLines)
{
    TempDir tmp;
    auto q = read_qrels(tmp.write("qrels", "q1 0 h_3 1\nq1\t0  h_4\t2\n\nq2 0 h_9 0\n"));
    EXPECT_EQ(q.grade("q1", "h_3"), 1);
    EXPECT_EQ(q.grade("q1", "h_4"), 2);
    EXPECT_EQ(q.grade("q2", "h_9"), 0);
    EXPECT_EQ(q.grade("q2", "nope"), 0);
    EXPECT_EQ(q.num_queries(), 2u);
    EXPECT_EQ(q.num_entries(), 3u);
}

TEST(Qrels, DuplicateNegativeAndNonIntegerGrades)
{
    TempDir tmp;
    EXPECT_THROW(read_qrels(tmp.write("a", "q1 0 h_3 1\nq1 0 h_3 1\n")), IntegrityError);
    EXPECT_THROW(read_qrels(tmp.write("b", "q1 0 h_3 -1\n")), IntegrityError);
    EXPECT_THROW(read_qrels(tmp.write("c", "q1 0 h_3 1.5\n")), ParseError);
    EXPECT_THROW(read_qrels(tmp.write("d", "q1 0 h_3\n")), ParseError);
}

TEST(Run, LineFormat)
{
    RunEntry e{"q1", "h_2", 1, 3.5, "bm25"};
    EXPECT_EQ(format_run_line(e), "q1 Q0 h_2 1 3.500000 bm25");
}

TEST(Run, RefusesRankGapsAndScoreInversions)
{
    TempDir tmp;
    qarank::Run gap{{{"q1", "a", 1, 2.0, "t"}, {"q1", "b", 3, 1.0, "t"}}};
    EXPECT_THROW(write_run(gap, tmp / "r"), IntegrityError);
    qarank::Run inverted{{{"q1", "a", 1, 1.0, "t"}, {"q1", "b", 2, 2.0, "t"}}};
    EXPECT_THROW(write_run(inverted, tmp / "r"), IntegrityError);
    qarank::Run dup{{{"q1", "a", 1, 2.0, "t"}, {"q1", "a", 2, 1.0, "t"}}};
    EXPECT_THROW(write_run(dup, tmp / "r"), IntegrityError);
    EXPECT_FALSE(std::filesystem::exists(tmp / "r"));
    EXPECT_THROW(read_run(tmp.write("bad", "q1 Q0 a 2 1.0 t\n")), IntegrityError);
}

// Property: write then read reproduces (qid, docid, rank, tag) exactly and the score to
// 6 decimals, for random valid runs up to 1000 entries.
TEST(Run, RoundTripProperty)
{
    TempDir tmp;
    Xoshiro256 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        qarank::Run run;
        std::size_t nq = 1 + rng.below(5);
        for (std::size_t q = 0; q < nq; ++q) {
            std::vector<ScoredDoc> docs;
            std::size_t n = trial == 0 && q == 0 ? 1000 : rng.below(200);
            for (std::size_t d = 0; d < n; ++d) {
                docs.push_back({"d" + std::to_string(d), static_cast<double>(rng.below(1000000)) / 997.0 - 300.0});
            }
            append_ranking(run, "q" + std::to_string(q), std::move(docs), "sys");
        }
        write_run(run, tmp / "r.run");
        auto back = read_run(tmp / "r.run");
        ASSERT_EQ(back.entries.size(), run.entries.size());
        for (std::size_t i = 0; i < run.entries.size(); ++i) {
            const auto& a = run.entries[i];
            const auto& b = back.entries[i];
            EXPECT_EQ(a.qid, b.qid);
            EXPECT_EQ(a.docid, b.docid);
            EXPECT_EQ(a.rank, b.rank);
            EXPECT_EQ(a.tag, b.tag);
            EXPECT_NEAR(a.score, b.score, 5e-7);
        }
        // Serialized form is a fixed point.
        write_run(back, tmp / "r2.run");
        EXPECT_EQ(slurp(tmp / "r.run"), slurp(tmp / "r2.run"));
    }
}

TEST(Run, TieBreakIsDescendingDocid)
{
    qarank::Run run;
    append_ranking(run, "q", {{"a", 1.0}, {"c", 1.0}, {"b", 2.0}}, "t");
    ASSERT_EQ(run.entries.size(), 3u);
    EXPECT_EQ(run.entries[0].docid, "b");
    EXPECT_EQ(run.entries[1].docid, "c");
    EXPECT_EQ(run.entries[2].docid, "a");
    EXPECT_EQ(run.entries[2].rank, 3);
}

TEST(ValidateRun, ReportsUnjudgedShallowAndDuplicates)
{
    Qrels qrels;
    qrels.add("q1", "a", 1);
    qarank::Run full;
    std::vector<ScoredDoc> docs;
    for (int i = 0; i < 1000; ++i) docs.push_back({"d" + std::to_string(i), 1000.0 - i});
    append_ranking(full, "q1", docs, "t");
    EXPECT_EQ(validate_run(full, qrels, 1000).violations(), 0u);

    qarank::Run other = full;
    for (auto& e : other.entries) e.qid = "q9";
    auto r = validate_run(other, qrels, 1000);
    ASSERT_EQ(r.unjudged_qids.size(), 1u);
    EXPECT_EQ(r.unjudged_qids[0], "q9");

    qarank::Run shallow;
    append_ranking(shallow, "q1", std::vector<ScoredDoc>(docs.begin(), docs.begin() + 10), "t");
    append_ranking(shallow, "q2", std::vector<ScoredDoc>(docs.begin(), docs.begin() + 10), "t");
    auto s = validate_run(shallow, qrels, 1000);
    EXPECT_EQ(s.shallow_qids, (std::vector<std::string>{"q1", "q2"}));
    EXPECT_EQ(s.depth_per_qid.at("q1"), 10u);

    qarank::Run dup{{{"q1", "a", 1, 1.0, "t"}, {"q1", "a", 2, 1.0, "t"}}};
    EXPECT_EQ(validate_run(dup, qrels, 2).duplicates.size(), 1u);
}

TEST(Triples, ReadBothForms)
{
    TempDir tmp;
    auto ids = read_triples_ids(tmp.write("i", "q1\th_0\th_5\n"));
    ASSERT_EQ(ids.size(), 1u);
    EXPECT_EQ(ids[0].negative_docid, "h_5");
    auto text = read_triples_text(tmp.write("t", "why\tbecause\tbanana\n"));
    EXPECT_EQ(text[0].positive, "because");
    EXPECT_THROW(read_triples_ids(tmp.write("x", "q1\th_0\n")), ParseError);
}

TEST(Top1000, WritesFourColumnsInRunOrder)
{
    TempDir tmp;
    QuerySet qs;
    qs.add({"q1", "what\tis it", {}, {}});
    Collection c;
    c.add({"h_0", "first doc", Source::human});
    c.add({"h_1", "second doc", Source::human});
    qarank::Run run;
    append_ranking(run, "q1", {{"h_0", 1.0}, {"h_1", 2.0}}, "bm25");
    write_top1000(run, qs, c, tmp / "top1000.tsv");
    EXPECT_EQ(slurp(tmp / "top1000.tsv"), "q1\th_1\twhat is it\tsecond doc\nq1\th_0\twhat is it\tfirst doc\n");
    auto rows = read_top1000(tmp / "top1000.tsv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].docid, "h_1");
}

TEST(Text, SanitizeCollapsesBreakRuns)
{
    EXPECT_EQ(sanitize_text("a\r\n\tb\nc"), "a b c");
    EXPECT_EQ(sanitize_text("plain"), "plain");
}
