#include <gtest/gtest.h>

#include <set>

#include "qarank/dataset.hpp"
#include "qarank/error.hpp"
#include "qarank/io.hpp"
#include "qarank/summary.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace qarank;
using qarank::testing::slurp;
using qarank::testing::TempDir;

namespace {

std::vector<QaRecord> records(std::size_t n, std::size_t human_per, std::size_t llm_per)
{
    std::vector<QaRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        QaRecord r;
        r.question = "question " + std::to_string(i);
        for (std::size_t a = 0; a < human_per; ++a) r.human_answers.push_back("human " + std::to_string(i) + " " + std::to_string(a));
        for (std::size_t a = 0; a < llm_per; ++a) r.llm_answers.push_back("llm " + std::to_string(i) + " " + std::to_string(a));
        r.domain = kAllDomains[i % 5];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

TEST(ReadHc3, ParsesRecordsAndNullAnswers)
{
    TempDir tmp;
    auto p = tmp.write("hc3.jsonl",
                       R"({"question":"Why?","human_answers":["because"],"chatgpt_answers":[null, "so"],"source":"reddit_eli5"})"
                       "\n\n"
                       R"({"question":"How?","human_answers":[],"chatgpt_answers":["thus"],"source":"open_qa"})"
                       "\n");
    auto recs = read_hc3_jsonl(p);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].domain, Domain::reddit);
    EXPECT_EQ(recs[0].llm_answers, (std::vector<std::string>{"", "so"}));
    EXPECT_EQ(recs[1].domain, Domain::wiki_openqa);
}

TEST(ReadHc3, ErrorsCarryLineNumbers)
{
    TempDir tmp;
    auto p = tmp.write("bad.jsonl", R"({"question":"a","human_answers":[],"chatgpt_answers":[],"source":"finance"})"
                                    "\n{not json\n");
    try {
        read_hc3_jsonl(p);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(read_hc3_jsonl(tmp.write("b.jsonl", R"({"question":"a","human_answers":[],"chatgpt_answers":[],"source":"mars"})")),
                 ParseError);
}

TEST(BuildCollections, IdsAndQrels)
{
    auto recs = records(3, 2, 1);
    recs[1].human_answers[1] = "  \n ";
    auto d = build_collections(recs);
    EXPECT_EQ(d.queries.size(), 3u);
    EXPECT_EQ(d.queries[2].qid, "q2");
    EXPECT_EQ(d.human.size(), 5u);
    EXPECT_EQ(d.llm.size(), 3u);
    EXPECT_EQ(d.human[2].docid, "h_2");
    EXPECT_EQ(d.human[3].docid, "h_3");
    EXPECT_EQ(d.human[3].text, "human 2 0");
    EXPECT_EQ(d.llm[1].docid, "c_1");
    EXPECT_EQ(d.human_qrels.grade("q1", "h_2"), 1);
    EXPECT_EQ(d.llm_qrels.relevant("q2"), (std::vector<std::string>{"c_2"}));
    ASSERT_EQ(d.warnings.size(), 1u);
    EXPECT_NE(d.warnings[0].find("q1"), std::string::npos);
}

TEST(BuildCollections, EveryQueryHasAPositiveSomewhere)
{
    auto recs = records(20, 1, 1);
    recs[4].llm_answers.clear();
    auto d = build_collections(recs);
    for (const auto& q : d.queries.queries()) {
        EXPECT_TRUE(d.human_qrels.contains(q.qid) || d.llm_qrels.contains(q.qid));
    }
    EXPECT_FALSE(d.llm_qrels.contains("q4"));
    recs[5].human_answers.clear();
    recs[5].llm_answers.clear();
    EXPECT_THROW(build_collections(recs), IntegrityError);
}

TEST(SplitTargets, PublishedCounts)
{
    auto t = SplitTargets::hc3();
    EXPECT_EQ(t.get(Domain::medicine, Split::train), 862u);
    EXPECT_EQ(t.get(Domain::reddit, Split::test), 4876u);
    EXPECT_EQ(t.total(Split::train), 16788u);
    EXPECT_EQ(t.total(Split::validation), 606u);
    EXPECT_EQ(t.total(Split::test), 6928u);
}

TEST(SplitDataset, CountsDisjointAndDeterministic)
{
    auto d = build_collections(records(100, 1, 1));
    auto targets = SplitTargets::proportional(d.queries);
    auto a = split_dataset(d.queries, targets, 7);
    auto b = split_dataset(d.queries, targets, 7);
    auto c = split_dataset(d.queries, targets, 8);
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_NE(a.assignment, c.assignment);
    std::size_t sum = 0;
    for (auto s : kAllSplits) {
        sum += a.count(s);
        EXPECT_EQ(a.count(s), targets.total(s));
        for (auto dom : kAllDomains) EXPECT_EQ(a.count(dom, s), targets.get(dom, s));
    }
    EXPECT_EQ(sum, 100u);
    EXPECT_EQ(a.assignment.size(), 100u);

    auto bad = targets;
    bad.counts[{Domain::finance, Split::train}] += 1;
    EXPECT_THROW(split_dataset(d.queries, bad, 7), ConfigError);
}

TEST(SplitDataset, ManifestRoundTripReproducesSplit)
{
    TempDir tmp;
    auto d = build_collections(records(40, 1, 1));
    auto m = split_dataset(d.queries, SplitTargets::proportional(d.queries), 3);
    write_manifest(m, tmp / "manifest.tsv");
    auto back = split_from_manifest(d.queries, read_manifest(tmp / "manifest.tsv"));
    EXPECT_TRUE(back.from_file);
    EXPECT_EQ(back.assignment, m.assignment);
    EXPECT_EQ(back.domains, m.domains);

    auto partial = m;
    partial.assignment.erase("q0");
    EXPECT_THROW(split_from_manifest(d.queries, partial), IntegrityError);
}

TEST(SampleNegatives, ExcludesPositivesAndIsKeyed)
{
    auto d = build_collections(records(50, 2, 1));
    SamplingConfig cfg{30, 42};
    auto s = sample_negatives("q3", d.human_qrels, d.human, cfg, "human");
    EXPECT_EQ(s.docids.size(), 30u);
    EXPECT_FALSE(s.short_pool);
    std::set<std::string> uniq(s.docids.begin(), s.docids.end());
    EXPECT_EQ(uniq.size(), 30u);
    for (const auto& id : s.docids) EXPECT_EQ(d.human_qrels.grade("q3", id), 0);
    EXPECT_EQ(sample_negatives("q3", d.human_qrels, d.human, cfg, "human").docids, s.docids);
    EXPECT_NE(sample_negatives("q3", d.human_qrels, d.human, SamplingConfig{30, 43}, "human").docids, s.docids);
    EXPECT_THROW(sample_negatives("nope", d.human_qrels, d.human, cfg), Error);
}

TEST(SampleNegatives, ShortPoolReturnsEverything)
{
    auto d = build_collections(records(4, 2, 1));
    auto s = sample_negatives("q0", d.human_qrels, d.human, SamplingConfig{1000, 1}, "human");
    EXPECT_TRUE(s.short_pool);
    EXPECT_EQ(s.docids.size(), 6u);
}

// Property: marginally, each non-positive document is drawn with probability
// negatives / pool size.
TEST(SampleNegatives, UniformInclusion)
{
    auto d = build_collections(records(21, 1, 1));
    std::map<std::string, int> hits;
    const int trials = 4000;
    for (int seed = 0; seed < trials; ++seed) {
        for (const auto& id : sample_negatives("q0", d.human_qrels, d.human, SamplingConfig{5, static_cast<std::uint64_t>(seed)}).docids) {
            ++hits[id];
        }
    }
    ASSERT_EQ(hits.size(), 20u);
    const double expected = trials * 5.0 / 20.0;
    for (const auto& [id, n] : hits) EXPECT_NEAR(n, expected, 5.0 * std::sqrt(expected)) << id;
}

TEST(Triples, IntegrityAndDeterminism)
{
    TempDir tmp;
    auto d = build_collections(records(60, 3, 1));
    auto m = split_dataset(d.queries, SplitTargets::proportional(d.queries), 1);
    auto train = select_split(d.queries, m, Split::train);
    SamplingConfig cfg{50, 42};
    std::vector<Triple> triples;
    auto sum = build_triples(train, d.human_qrels, d.human, cfg, 4, [&](const Triple& t) { triples.push_back(t); }, "human");
    EXPECT_EQ(sum.triples, triples.size());
    EXPECT_EQ(sum.positives, train.size() * 3);
    EXPECT_EQ(triples.size(), train.size() * 3 * 4);
    std::set<std::string> train_ids;
    for (const auto& q : train.queries()) train_ids.insert(q.qid);
    for (const auto& t : triples) {
        EXPECT_TRUE(train_ids.count(t.qid));
        EXPECT_EQ(d.human_qrels.grade(t.qid, t.positive_docid), 1);
        EXPECT_EQ(d.human_qrels.grade(t.qid, t.negative_docid), 0);
        EXPECT_NE(d.human.find(t.negative_docid), nullptr);
    }

    write_triples(train, d.human_qrels, d.human, cfg, 4, tmp / "a.ids", tmp / "a.text", "human");
    write_triples(train, d.human_qrels, d.human, cfg, 4, tmp / "b.ids", tmp / "b.text", "human");
    EXPECT_EQ(slurp(tmp / "a.ids"), slurp(tmp / "b.ids"));
    EXPECT_EQ(slurp(tmp / "a.text"), slurp(tmp / "b.text"));
    auto ids = read_triples_ids(tmp / "a.ids");
    auto text = read_triples_text(tmp / "a.text");
    ASSERT_EQ(ids.size(), text.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        EXPECT_EQ(text[i].query, train.find(ids[i].qid)->text);
        EXPECT_EQ(text[i].negative, d.human.find(ids[i].negative_docid)->text);
    }
}

TEST(CorpusStats, LengthsAndRatio)
{
    Collection c;
    c.add({"h_0", "a b c", Source::human});
    c.add({"h_1", "a", Source::human});
    c.add({"h_2", "a b c d e", Source::human});
    QuerySet q;
    q.add({"q0", "x", {}, {}});
    q.add({"q1", "y", {}, {}});
    auto s = corpus_stats(c, q);
    EXPECT_DOUBLE_EQ(s.mean_len, 3.0);
    EXPECT_DOUBLE_EQ(s.median_len, 3.0);
    EXPECT_DOUBLE_EQ(s.q1_len, 2.0);
    EXPECT_DOUBLE_EQ(s.q3_len, 4.0);
    EXPECT_DOUBLE_EQ(s.responses_per_query, 1.5);
}

TEST(WriteDataset, LayoutAndByteIdenticalRebuild)
{
    TempDir tmp;
    auto d = build_collections(records(80, 2, 1));
    auto m = split_dataset(d.queries, SplitTargets::proportional(d.queries), 42);
    DatasetBuildConfig cfg;
    cfg.sampling.negatives_per_query = 20;
    write_dataset(d, m, cfg, tmp / "a");
    write_dataset(d, m, cfg, tmp / "b");
    for (const char* f : {"queries.tsv", "queries.train.tsv", "queries.validation.tsv", "queries.test.tsv", "manifest.tsv",
                          "build-metadata.txt", "human/collection.tsv", "human/qrels.tsv", "human/qrels.test.tsv",
                          "llm/collection.tsv", "llm/triples.train.ids.tsv", "human/triples.train.text.tsv"}) {
        ASSERT_TRUE(std::filesystem::exists(tmp / "a" / f)) << f;
        EXPECT_EQ(slurp(tmp / "a" / f), slurp(tmp / "b" / f)) << f;
    }
    auto test_qrels = read_qrels(tmp / "a" / "human" / "qrels.test.tsv");
    EXPECT_EQ(test_qrels.num_queries(), m.count(Split::test));
    EXPECT_EQ(read_collection(tmp / "a" / "llm" / "collection.tsv").size(), 80u);
}

TEST(Summary, TukeyHinges)
{
    auto q = tukey_hinges({1, 2, 3, 4, 5, 6, 7});
    EXPECT_DOUBLE_EQ(q.q1, 2.5);
    EXPECT_DOUBLE_EQ(q.median, 4.0);
    EXPECT_DOUBLE_EQ(q.q3, 5.5);
    auto e = tukey_hinges({4, 1, 3, 2});
    EXPECT_DOUBLE_EQ(e.q1, 1.5);
    EXPECT_DOUBLE_EQ(e.median, 2.5);
    EXPECT_DOUBLE_EQ(e.q3, 3.5);
    EXPECT_DOUBLE_EQ(tukey_hinges({}).median, 0.0);
    EXPECT_DOUBLE_EQ(mean({1, 2, 6}), 3.0);
}
