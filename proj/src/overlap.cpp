#include "qarank/overlap.hpp"

#include <cstdio>
#include <unordered_set>

#include "qarank/error.hpp"

namespace qarank {

double query_coverage(std::string_view query, std::string_view document,
                      const TokenizerConfig& tokenizer)
{
    auto q = tokenize(query, tokenizer);
    std::unordered_set<std::string> query_terms(q.begin(), q.end());
    if (query_terms.empty()) throw Error("query has no tokens");
    auto d = tokenize(document, tokenizer);
    std::unordered_set<std::string> doc_terms(d.begin(), d.end());
    std::size_t covered = 0;
    for (const auto& t : query_terms) covered += doc_terms.count(t);
    return static_cast<double>(covered) / static_cast<double>(query_terms.size());
}

OverlapReport analyze_overlap(const QuerySet& queries, const Qrels& qrels,
                              const Collection& collection, std::string label,
                              const TokenizerConfig& tokenizer)
{
    OverlapReport report;
    report.label = std::move(label);
    std::vector<double> coverage;
    std::vector<double> lengths;
    std::map<Domain, std::pair<double, std::size_t>> by_domain;
    for (const auto& [qid, judged] : qrels.entries()) {
        const auto* q = queries.find(qid);
        if (q == nullptr) continue;
        for (const auto& [docid, grade] : judged) {
            if (grade < 1) continue;
            const auto* d = collection.find(docid);
            if (d == nullptr) {
                throw IntegrityError("positive '" + docid + "' of " + qid + " is not in the collection");
            }
            double c = query_coverage(q->text, d->text, tokenizer);
            report.per_pair[{qid, docid}] = c;
            coverage.push_back(c);
            lengths.push_back(static_cast<double>(whitespace_tokens(d->text).size()));
            if (q->domain) {
                auto& [sum, n] = by_domain[*q->domain];
                sum += c;
                ++n;
            }
        }
    }
    report.mean_coverage = mean(coverage);
    report.coverage_quartiles = tukey_hinges(std::move(coverage));
    report.mean_length = mean(lengths);
    for (const auto& [d, acc] : by_domain) {
        report.mean_coverage_by_domain[d] = acc.first / static_cast<double>(acc.second);
    }
    return report;
}

void write_overlap_tsv(const OverlapReport& report, std::ostream& out)
{
    char buf[32];
    for (const auto& [key, c] : report.per_pair) {
        std::snprintf(buf, sizeof buf, "%.6f", c);
        out << key.first << '\t' << key.second << '\t' << buf << '\n';
    }
}

void write_overlap_summary(const std::vector<OverlapReport>& reports, std::ostream& out)
{
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s %8s %10s\n", "source", "pairs",
                  "mean%", "q1%", "median%", "q3%", "mean_len");
    out << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-10s %8zu %8.1f %8.1f %8.1f %8.1f %10.1f\n",
                      r.label.c_str(), r.per_pair.size(), 100.0 * r.mean_coverage,
                      100.0 * r.coverage_quartiles.q1, 100.0 * r.coverage_quartiles.median,
                      100.0 * r.coverage_quartiles.q3, r.mean_length);
        out << line;
    }
}

}  // namespace qarank
