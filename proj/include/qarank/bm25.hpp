#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qarank/tokenizer.hpp"
#include "qarank/types.hpp"

namespace qarank {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    /// Throws ConfigError unless k1 > 0 and 0 <= b <= 1.
    void validate() const;
};

struct Posting {
    std::uint32_t doc;  // internal document number (collection order)
    std::uint32_t tf;
};

struct PostingList {
    std::string term;
    std::vector<std::pair<std::string, std::uint32_t>> postings;  // (docid, tf), index order
};

struct IndexStats {
    std::size_t num_docs = 0;
    std::uint64_t total_len = 0;
    double avg_len = 0.0;
    std::size_t num_terms = 0;
};

/// Drops repeated terms, keeping first-occurrence order. BM25 sums over the set of
/// query terms.
std::vector<std::string> unique_terms(const std::vector<std::string>& terms);

/// Okapi BM25 over an in-memory inverted index. Immutable once built, so concurrent
/// queries are safe.
///
///   score(q, d) = sum over t in q∩d of rsj(t) * tf / (tf + k1 * ((1 - b) + b * |d| / avg_len))
///   rsj(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
///
/// This rsj form is always positive, so every score is >= 0 and a document scores 0
/// exactly when it shares no term with the query.
class Bm25Index {
  public:
    static constexpr std::uint32_t kFormatVersion = 1;

    /// Throws Error on an empty collection. `threads` = 0 uses hardware concurrency.
    static Bm25Index build(const Collection& collection, const TokenizerConfig& tokenizer = {},
                           unsigned threads = 0);
    static Bm25Index load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const IndexStats& stats() const noexcept { return stats_; }
    const TokenizerConfig& tokenizer() const noexcept { return tokenizer_; }
    std::vector<std::string> analyze(std::string_view text) const
    {
        return tokenize(text, tokenizer_);
    }

    std::size_t num_docs() const noexcept { return docids_.size(); }
    const std::string& docid(std::uint32_t doc) const { return docids_[doc]; }
    std::optional<std::uint32_t> doc_number(std::string_view docid) const;
    std::uint32_t doc_len(std::string_view docid) const;
    std::uint32_t doc_len(std::uint32_t doc) const { return doc_len_[doc]; }

    std::uint32_t df(std::string_view term) const;
    double rsj(std::string_view term) const;
    PostingList postings(std::string_view term) const;
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<Posting>& raw_postings(std::uint32_t term_id) const
    {
        return postings_[term_id];
    }

    /// Score of one document. Throws Error for an unknown docid.
    double score(const std::vector<std::string>& query_terms, std::string_view docid,
                 const Bm25Params& params = {}) const;

    /// Top-k documents with score > 0, ordered by `ranks_before`. Throws ConfigError if k < 1.
    std::vector<ScoredDoc> search(const std::vector<std::string>& query_terms, std::size_t k,
                                  const Bm25Params& params = {}) const;

    Run search_topk(const Query& query, std::size_t k = 1000, const Bm25Params& params = {},
                    const std::string& tag = "bm25") const;

    /// search_topk for every query, in query-set order. Queries run in parallel; output
    /// is identical to the sequential result.
    Run batch_retrieve(const QuerySet& queries, std::size_t k = 1000,
                       const Bm25Params& params = {}, const std::string& tag = "bm25",
                       unsigned threads = 0) const;

  private:
    double term_weight(std::uint32_t df) const;
    std::optional<std::uint32_t> term_id(std::string_view term) const;

    TokenizerConfig tokenizer_;
    IndexStats stats_;
    std::vector<std::string> docids_;
    std::unordered_map<std::string, std::uint32_t> doc_numbers_;
    std::vector<std::uint32_t> doc_len_;
    std::vector<std::string> terms_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::vector<Posting>> postings_;
};

}  // namespace qarank
