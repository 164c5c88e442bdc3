#pragma once

#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qarank/summary.hpp"
#include "qarank/tokenizer.hpp"
#include "qarank/types.hpp"

namespace qarank {

/// Share of distinct query terms that also occur in the document. Throws Error when the
/// query has no tokens.
double query_coverage(std::string_view query, std::string_view document,
                      const TokenizerConfig& tokenizer = {});

struct OverlapReport {
    std::string label;  // e.g. "human", "llm"
    std::map<std::pair<std::string, std::string>, double> per_pair;  // (qid, docid)
    double mean_coverage = 0.0;
    Quartiles coverage_quartiles;
    double mean_length = 0.0;  // whitespace words per positive document
    std::map<Domain, double> mean_coverage_by_domain;
};

/// Coverage over every (query, positive document) pair in qrels (grade >= 1). Qrels
/// qids missing from `queries` are skipped; a positive missing from the collection is an
/// IntegrityError.
OverlapReport analyze_overlap(const QuerySet& queries, const Qrels& qrels,
                              const Collection& collection, std::string label = {},
                              const TokenizerConfig& tokenizer = {});

void write_overlap_tsv(const OverlapReport& report, std::ostream& out);  // qid docid coverage
void write_overlap_summary(const std::vector<OverlapReport>& reports, std::ostream& out);

}  // namespace qarank
