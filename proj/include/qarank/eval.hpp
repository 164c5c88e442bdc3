#pragma once

#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "qarank/dataset.hpp"
#include "qarank/types.hpp"

namespace qarank {

enum class Gain { exponential, linear };

enum class Metric { map, ndcg, mrr, recall };
inline constexpr Metric kAllMetrics[] = {Metric::map, Metric::ndcg, Metric::mrr, Metric::recall};

struct MetricConfig {
    std::size_t map_cutoff = 1000;
    std::size_t ndcg_cutoff = 10;
    std::size_t mrr_cutoff = 10;
    std::size_t recall_cutoff = 1000;
    int relevance_threshold = 1;  // grade >= threshold is relevant for MAP, MRR, recall
    Gain gain = Gain::exponential;

    void validate() const;
    /// "map@1000", "ndcg@10", ...
    std::string name(Metric m) const;
};

std::string_view metric_label(Metric m);  // "map", "ndcg", "mrr", "recall"

// Single-query metrics. `ranking` is the docid list in rank order; `judged` maps docid to
// grade for the query. Metrics that are undefined for the query (no relevant docs, or
// an all-zero judgment set for NDCG) return std::nullopt.
std::optional<double> average_precision(const std::vector<std::string>& ranking,
                                        const Qrels::Judgments& judged, std::size_t cutoff,
                                        int threshold = 1);
std::optional<double> ndcg_at_k(const std::vector<std::string>& ranking,
                                const Qrels::Judgments& judged, std::size_t k,
                                Gain gain = Gain::exponential);
std::optional<double> mrr_at_k(const std::vector<std::string>& ranking,
                               const Qrels::Judgments& judged, std::size_t k, int threshold = 1);
std::optional<double> recall_at_k(const std::vector<std::string>& ranking,
                                  const Qrels::Judgments& judged, std::size_t k,
                                  int threshold = 1);

struct MetricReport {
    std::string system;  // run tag or label
    MetricConfig config;
    std::map<Metric, std::map<std::string, double>> per_query;
    std::map<Metric, double> aggregate;
    std::vector<std::string> evaluated_qids;  // run qids that have judgments
    std::map<Metric, std::vector<std::string>> excluded;  // undefined for that metric

    std::size_t evaluated(Metric m) const;
};

/// Per-query metrics for every run qid that has judgments; aggregates are means over
/// the qids where the metric is defined. Throws Error when no run qid is judged.
MetricReport evaluate_run(const Run& run, const Qrels& qrels, const MetricConfig& config = {},
                          std::string system = {});

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t n = 0;
    bool degenerate = false;  // zero variance in the differences
};

/// Two-sided paired t-test on a - b. All-zero differences give t = 0, p = 1; constant
/// non-zero differences give t = +/-inf, p = 0 and set `degenerate`. Throws Error when
/// the sizes differ or n < 2.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Keyed variant: throws Error unless both maps hold the same qids.
TTestResult paired_t_test(const std::map<std::string, double>& a,
                          const std::map<std::string, double>& b);

struct SignificanceResult {
    std::string system_a;
    std::string system_b;
    Metric metric = Metric::map;
    double t_statistic = 0.0;
    double p_value = 1.0;
    double adjusted_alpha = 0.05;
    bool significant = false;
    bool degenerate = false;
};

/// Every unordered pair of systems per metric, Bonferroni-corrected with
/// adjusted_alpha = alpha / (number of pairs). Throws Error for fewer than two systems
/// or mismatched per-metric qid sets.
std::vector<SignificanceResult> compare_systems(const std::vector<MetricReport>& reports,
                                                double alpha = 0.05);

/// Per-domain reports. The overall mean equals the qid-weighted mean of domain means.
std::map<Domain, MetricReport> domain_breakdown(const MetricReport& report,
                                                const SplitManifest& manifest);

// Output formats.
void write_per_query_tsv(const MetricReport& report, std::ostream& out);  // qid metric value
void write_summary_table(const std::vector<MetricReport>& reports, std::ostream& out);
void write_significance_tsv(const std::vector<SignificanceResult>& results, std::ostream& out);

}  // namespace qarank
