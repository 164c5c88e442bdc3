#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qarank/types.hpp"

namespace qarank {

/// One question with its human and LLM answers (an HC3 record).
struct QaRecord {
    std::string question;
    std::vector<std::string> human_answers;
    std::vector<std::string> llm_answers;
    Domain domain = Domain::reddit;
};

/// Reads HC3-style JSON lines: `question`, `human_answers`, `chatgpt_answers`, `source`.
/// Blank lines are skipped; null answers are read as empty strings.
std::vector<QaRecord> read_hc3_jsonl(const std::filesystem::path& path);

/// Two parallel retrieval datasets over one query set.
struct BuiltDataset {
    QuerySet queries;
    Collection human;
    Collection llm;
    Qrels human_qrels;
    Qrels llm_qrels;
    std::vector<std::string> warnings;

    const Collection& collection(Source s) const { return s == Source::human ? human : llm; }
    const Qrels& qrels(Source s) const { return s == Source::human ? human_qrels : llm_qrels; }
};

/// Question i becomes query `q<i>`; human answers become `h_<n>` and LLM answers `c_<n>`
/// with one running counter per collection. Every answer is a grade-1 positive for its
/// query. Identical answer texts are not merged. Empty answers are dropped with a warning.
BuiltDataset build_collections(const std::vector<QaRecord>& records);

/// Requested split sizes per (domain, split).
struct SplitTargets {
    std::map<std::pair<Domain, Split>, std::size_t> counts;

    std::size_t get(Domain d, Split s) const;
    std::size_t total(Split s) const;

    /// Published per-domain split sizes of the HC3-derived retrieval dataset.
    static SplitTargets hc3();
    /// Per-domain counts proportional to the hc3() ratios, rounded by largest remainder.
    static SplitTargets proportional(const QuerySet& queries);
};

struct SplitManifest {
    std::vector<std::string> qids;  // query-set order
    std::map<std::string, Split, std::less<>> assignment;
    std::map<std::string, Domain, std::less<>> domains;
    std::uint64_t seed = 0;
    bool from_file = false;

    Split split_of(std::string_view qid) const;
    std::size_t count(Split s) const;
    std::size_t count(Domain d, Split s) const;
};

/// Seeded, domain-stratified assignment. For each domain (in enum order) the domain's
/// qids are shuffled and the first train-target go to train, the next validation-target
/// to validation, the rest to test. Throws ConfigError unless each domain's targets sum
/// to its query count. Every query must carry a domain.
SplitManifest split_dataset(const QuerySet& queries, const SplitTargets& targets,
                            std::uint64_t seed);

/// Adopts an explicit manifest verbatim after checking it covers exactly the query set.
SplitManifest split_from_manifest(const QuerySet& queries, const SplitManifest& manifest);

// manifest.tsv: `qid<TAB>split<TAB>domain`, in query order.
SplitManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path);

/// Queries of one split, each tagged with split and domain.
QuerySet select_split(const QuerySet& queries, const SplitManifest& manifest, Split split);
Qrels restrict_qrels(const Qrels& qrels, const QuerySet& queries);

struct SamplingConfig {
    std::size_t negatives_per_query = 1000;
    std::uint64_t seed = 42;

    void validate() const;
};

struct NegativeSample {
    std::vector<std::string> docids;
    bool short_pool = false;  // fewer non-positives than requested; all of them returned
};

/// Uniform sample without replacement from the documents that are not positives
/// (grade >= 1) of `qid`, in random order. The stream is keyed on (seed, salt, qid), so
/// the result does not depend on which other queries are sampled. Throws Error if qid
/// has no qrels.
NegativeSample sample_negatives(const std::string& qid, const Qrels& qrels,
                                const Collection& collection, const SamplingConfig& config,
                                std::string_view salt = {});

struct TriplesSummary {
    std::size_t triples = 0;
    std::size_t positives = 0;
    std::size_t short_pools = 0;
};

/// For each query (in order) and each of its positives (in docid order), emits up to
/// `triples_per_positive` triples whose negatives are consecutive, distinct entries of the
/// query's sampled pool. Throws IntegrityError when a positive is not in the collection.
TriplesSummary build_triples(const QuerySet& train, const Qrels& qrels,
                             const Collection& collection, const SamplingConfig& config,
                             std::size_t triples_per_positive,
                             const std::function<void(const Triple&)>& sink,
                             std::string_view salt = {});

/// build_triples written as line-aligned ID and text TSV files.
TriplesSummary write_triples(const QuerySet& train, const Qrels& qrels,
                             const Collection& collection, const SamplingConfig& config,
                             std::size_t triples_per_positive,
                             const std::filesystem::path& ids_path,
                             const std::filesystem::path& text_path, std::string_view salt = {});

struct StatsReport {
    std::size_t num_docs = 0;
    std::size_t num_queries = 0;
    double mean_len = 0.0;  // whitespace words
    double q1_len = 0.0;
    double median_len = 0.0;
    double q3_len = 0.0;
    double responses_per_query = 0.0;
};

StatsReport corpus_stats(const Collection& collection, const QuerySet& queries);

struct DatasetBuildConfig {
    SamplingConfig sampling;
    std::size_t triples_per_positive = 4;
    bool emit_triples = true;
};

/// Writes the full dataset layout under `dir`:
///   queries.tsv, queries.<split>.tsv, manifest.tsv, build-metadata.txt,
///   {human,llm}/collection.tsv, qrels.tsv, qrels.<split>.tsv,
///   {human,llm}/triples.train.ids.tsv, triples.train.text.tsv
void write_dataset(const BuiltDataset& data, const SplitManifest& manifest,
                   const DatasetBuildConfig& config, const std::filesystem::path& dir);

}  // namespace qarank
