#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qarank/types.hpp"

namespace qarank {

namespace fs = std::filesystem;

/// Writes to `<path>.tmp` and renames over `path` on commit(). An uncommitted file is
/// removed on destruction.
class AtomicFile {
  public:
    explicit AtomicFile(fs::path path);
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;
    ~AtomicFile();

    std::ofstream& stream() { return out_; }
    void commit();

  private:
    fs::path path_;
    fs::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

// Collection TSV: `docid<TAB>text`. Source is taken from the docid prefix when present,
// otherwise from `default_source`.
Collection read_collection(const fs::path& path, Source default_source = Source::human);
void write_collection(const Collection& collection, const fs::path& path);

// Queries TSV: `qid<TAB>text`.
QuerySet read_queries(const fs::path& path);
void write_queries(const QuerySet& queries, const fs::path& path);

// TREC qrels: `qid 0 docid grade`, any run of spaces/tabs as separator.
Qrels read_qrels(const fs::path& path);
void write_qrels(const Qrels& qrels, const fs::path& path);

// TREC run: `qid Q0 docid rank score tag`, scores with 6 decimals.
Run read_run(const fs::path& path);
void write_run(const Run& run, const fs::path& path);
void write_run(const Run& run, std::ostream& out);
std::string format_run_line(const RunEntry& e);

/// Throws IntegrityError unless, per qid, ranks are exactly 1..n, scores do not increase
/// with rank, docids are unique, and tags are non-empty tokens.
void check_run_integrity(const Run& run);

struct ValidationReport {
    std::map<std::string, std::size_t> depth_per_qid;
    std::vector<std::string> unjudged_qids;                       // absent from qrels
    std::vector<std::string> shallow_qids;                        // fewer than `depth` entries
    std::vector<std::pair<std::string, std::string>> duplicates;  // repeated (qid, docid)
    std::size_t requested_depth = 0;

    std::size_t violations() const
    {
        return unjudged_qids.size() + shallow_qids.size() + duplicates.size();
    }
};

ValidationReport validate_run(const Run& run, const Qrels& qrels, std::size_t depth);

// Triples: `qid<TAB>pos<TAB>neg` (ids) and `query<TAB>positive<TAB>negative` (text).
std::vector<Triple> read_triples_ids(const fs::path& path);

struct TextTriple {
    std::string query;
    std::string positive;
    std::string negative;
};
std::vector<TextTriple> read_triples_text(const fs::path& path);

// top1000.tsv: `qid<TAB>docid<TAB>query_text<TAB>doc_text`, rows in run order.
struct CandidateRow {
    std::string qid;
    std::string docid;
    std::string query_text;
    std::string doc_text;
};
void write_top1000(const Run& run, const QuerySet& queries, const Collection& collection,
                   const fs::path& path);
std::vector<CandidateRow> read_top1000(const fs::path& path);

/// Splits on a single-character separator; empty fields are kept.
std::vector<std::string_view> split_fields(std::string_view line, char sep);
/// Splits on runs of spaces, tabs and carriage returns; empty fields are dropped.
std::vector<std::string_view> split_whitespace(std::string_view line);

}  // namespace qarank
