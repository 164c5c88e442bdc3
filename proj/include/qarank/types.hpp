#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qarank {

enum class Domain : std::uint8_t { medicine, finance, reddit, wiki_openqa, wiki_csai };
enum class Split : std::uint8_t { train, validation, test };
enum class Source : std::uint8_t { human, llm };

inline constexpr Domain kAllDomains[] = {Domain::medicine, Domain::finance, Domain::reddit,
                                         Domain::wiki_openqa, Domain::wiki_csai};
inline constexpr Split kAllSplits[] = {Split::train, Split::validation, Split::test};

std::string_view to_string(Domain d);
std::string_view to_string(Split s);
std::string_view to_string(Source s);

// Accept canonical names plus the HC3 source labels ("reddit_eli5", "open_qa").
std::optional<Domain> parse_domain(std::string_view name);
std::optional<Split> parse_split(std::string_view name);
std::optional<Source> parse_source(std::string_view name);

struct Query {
    std::string qid;
    std::string text;
    std::optional<Domain> domain;
    std::optional<Split> split;
};

struct Document {
    std::string docid;
    std::string text;
    Source source = Source::human;
};

/// Source implied by the docid prefix scheme: `h_` human, `c_` llm.
std::optional<Source> source_from_docid(std::string_view docid);

/// Documents in file order with a docid lookup. Docids are unique.
class Collection {
  public:
    Collection() = default;
    explicit Collection(std::vector<Document> docs);

    void add(Document doc);

    const std::vector<Document>& documents() const noexcept { return docs_; }
    std::size_t size() const noexcept { return docs_.size(); }
    bool empty() const noexcept { return docs_.empty(); }
    const Document& operator[](std::size_t i) const { return docs_[i]; }

    const Document* find(std::string_view docid) const;
    std::optional<std::size_t> index_of(std::string_view docid) const;

  private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Queries in file order with a qid lookup. Qids are unique, texts non-empty.
class QuerySet {
  public:
    QuerySet() = default;
    explicit QuerySet(std::vector<Query> queries);

    void add(Query q);

    const std::vector<Query>& queries() const noexcept { return queries_; }
    std::size_t size() const noexcept { return queries_.size(); }
    bool empty() const noexcept { return queries_.empty(); }
    const Query& operator[](std::size_t i) const { return queries_[i]; }

    const Query* find(std::string_view qid) const;

  private:
    std::vector<Query> queries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Graded judgments per query. Grades are non-negative; (qid, docid) is unique.
class Qrels {
  public:
    using Judgments = std::map<std::string, int, std::less<>>;

    void add(const std::string& qid, const std::string& docid, int grade);

    const std::map<std::string, Judgments, std::less<>>& entries() const noexcept { return by_qid_; }
    const Judgments* judgments(std::string_view qid) const;
    int grade(std::string_view qid, std::string_view docid) const;  // 0 when unjudged
    bool contains(std::string_view qid) const { return judgments(qid) != nullptr; }

    std::size_t num_queries() const noexcept { return by_qid_.size(); }
    std::size_t num_entries() const noexcept { return count_; }

    /// Docids with grade >= threshold for qid.
    std::vector<std::string> relevant(std::string_view qid, int threshold = 1) const;

    friend bool operator==(const Qrels& a, const Qrels& b) { return a.by_qid_ == b.by_qid_; }

  private:
    std::map<std::string, Judgments, std::less<>> by_qid_;
    std::size_t count_ = 0;
};

struct RunEntry {
    std::string qid;
    std::string docid;
    int rank = 1;
    double score = 0.0;
    std::string tag;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// Flat list of run entries. Entries of one qid are kept contiguous and in rank order
/// by every producer in this library.
struct Run {
    std::vector<RunEntry> entries;

    /// Qids in first-appearance order.
    std::vector<std::string> qids() const;
    /// Docids per qid, ordered by rank.
    std::map<std::string, std::vector<std::string>, std::less<>> rankings() const;

    friend bool operator==(const Run&, const Run&) = default;
};

struct ScoredDoc {
    std::string docid;
    double score = 0.0;
};

/// Orders by descending score, then descending docid. This is the tie-break used for
/// every ranking the library produces.
inline bool ranks_before(double score_a, std::string_view docid_a, double score_b,
                         std::string_view docid_b)
{
    if (score_a != score_b) return score_a > score_b;
    return docid_a > docid_b;
}

/// Sorts in place by `ranks_before` and appends entries with ranks 1..n.
void append_ranking(Run& run, const std::string& qid, std::vector<ScoredDoc> docs,
                    const std::string& tag);

struct Triple {
    std::string qid;
    std::string positive_docid;
    std::string negative_docid;
};

/// Replaces each run of tabs/CR/LF with one space so text is safe in TSV.
std::string sanitize_text(std::string_view text);
/// Strips leading/trailing ASCII whitespace.
std::string_view trim(std::string_view text);

}  // namespace qarank
