#include "qarank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "qarank/error.hpp"

namespace qarank {

namespace {

int grade_of(const Qrels::Judgments& judged, const std::string& docid)
{
    auto it = judged.find(docid);
    return it == judged.end() ? 0 : it->second;
}

std::size_t count_relevant(const Qrels::Judgments& judged, int threshold)
{
    return static_cast<std::size_t>(std::count_if(
        judged.begin(), judged.end(), [&](const auto& kv) { return kv.second >= threshold; }));
}

double gain_value(int grade, Gain gain)
{
    if (grade <= 0) return 0.0;
    return gain == Gain::exponential ? std::exp2(static_cast<double>(grade)) - 1.0
                                     : static_cast<double>(grade);
}

std::string fmt_value(double v, const char* format = "%.4f")
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

}  // namespace

void MetricConfig::validate() const
{
    if (map_cutoff < 1 || ndcg_cutoff < 1 || mrr_cutoff < 1 || recall_cutoff < 1) {
        throw ConfigError("metric cutoffs must be >= 1");
    }
    if (relevance_threshold < 1) throw ConfigError("relevance threshold must be >= 1");
}

std::string_view metric_label(Metric m)
{
    switch (m) {
    case Metric::map: return "map";
    case Metric::ndcg: return "ndcg";
    case Metric::mrr: return "mrr";
    case Metric::recall: return "recall";
    }
    return "unknown";
}

std::string MetricConfig::name(Metric m) const
{
    std::size_t cutoff = 0;
    switch (m) {
    case Metric::map: cutoff = map_cutoff; break;
    case Metric::ndcg: cutoff = ndcg_cutoff; break;
    case Metric::mrr: cutoff = mrr_cutoff; break;
    case Metric::recall: cutoff = recall_cutoff; break;
    }
    return std::string(metric_label(m)) + "@" + std::to_string(cutoff);
}

std::optional<double> average_precision(const std::vector<std::string>& ranking,
                                        const Qrels::Judgments& judged, std::size_t cutoff,
                                        int threshold)
{
    const std::size_t total_relevant = count_relevant(judged, threshold);
    if (total_relevant == 0) return std::nullopt;
    const std::size_t depth = std::min(cutoff, ranking.size());
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        if (grade_of(judged, ranking[i]) >= threshold) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

std::optional<double> ndcg_at_k(const std::vector<std::string>& ranking,
                                const Qrels::Judgments& judged, std::size_t k, Gain gain)
{
    std::vector<int> grades;
    for (const auto& [docid, g] : judged) {
        if (g > 0) grades.push_back(g);
    }
    if (grades.empty()) return std::nullopt;
    std::sort(grades.begin(), grades.end(), std::greater<>());

    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
        ideal += gain_value(grades[i], gain) / std::log2(static_cast<double>(i + 2));
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        dcg += gain_value(grade_of(judged, ranking[i]), gain) / std::log2(static_cast<double>(i + 2));
    }
    return dcg / ideal;
}

std::optional<double> mrr_at_k(const std::vector<std::string>& ranking,
                               const Qrels::Judgments& judged, std::size_t k, int threshold)
{
    if (count_relevant(judged, threshold) == 0) return std::nullopt;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        if (grade_of(judged, ranking[i]) >= threshold) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

std::optional<double> recall_at_k(const std::vector<std::string>& ranking,
                                  const Qrels::Judgments& judged, std::size_t k, int threshold)
{
    const std::size_t total_relevant = count_relevant(judged, threshold);
    if (total_relevant == 0) return std::nullopt;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        if (grade_of(judged, ranking[i]) >= threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total_relevant);
}

std::size_t MetricReport::evaluated(Metric m) const
{
    auto it = per_query.find(m);
    return it == per_query.end() ? 0 : it->second.size();
}

MetricReport evaluate_run(const Run& run, const Qrels& qrels, const MetricConfig& config,
                          std::string system)
{
    config.validate();
    MetricReport report;
    report.config = config;
    report.system = system.empty() && !run.entries.empty() ? run.entries.front().tag : std::move(system);
    for (auto m : kAllMetrics) {
        report.per_query[m];
        report.excluded[m];
    }

    for (const auto& [qid, ranking] : run.rankings()) {
        const auto* judged = qrels.judgments(qid);
        if (judged == nullptr) continue;
        report.evaluated_qids.push_back(qid);
        auto record = [&](Metric m, std::optional<double> value) {
            if (value) {
                report.per_query[m][qid] = *value;
            } else {
                report.excluded[m].push_back(qid);
            }
        };
        record(Metric::map, average_precision(ranking, *judged, config.map_cutoff,
                                              config.relevance_threshold));
        record(Metric::ndcg, ndcg_at_k(ranking, *judged, config.ndcg_cutoff, config.gain));
        record(Metric::mrr, mrr_at_k(ranking, *judged, config.mrr_cutoff, config.relevance_threshold));
        record(Metric::recall, recall_at_k(ranking, *judged, config.recall_cutoff,
                                           config.relevance_threshold));
    }
    if (report.evaluated_qids.empty()) {
        throw Error("run and qrels share no qids");
    }
    for (auto m : kAllMetrics) {
        const auto& values = report.per_query[m];
        double sum = 0.0;
        for (const auto& [qid, v] : values) sum += v;
        report.aggregate[m] = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
    }
    return report;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size()) {
        throw Error("paired t-test needs equal-length samples (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
    }
    const std::size_t n = a.size();
    if (n < 2) throw Error("paired t-test needs at least 2 pairs");

    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    const double mean_diff = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double d : diff) ss += (d - mean_diff) * (d - mean_diff);
    const double variance = ss / static_cast<double>(n - 1);

    TTestResult r;
    r.n = n;
    const bool all_equal = std::all_of(diff.begin(), diff.end(), [&](double d) { return d == diff[0]; });
    if (all_equal) {
        if (diff[0] == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = diff[0] > 0 ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
            r.degenerate = true;
        }
        return r;
    }
    r.t = mean_diff / std::sqrt(variance / static_cast<double>(n));
    boost::math::students_t dist(static_cast<double>(n - 1));
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    r.p = std::clamp(r.p, 0.0, 1.0);
    return r;
}

TTestResult paired_t_test(const std::map<std::string, double>& a, const std::map<std::string, double>& b)
{
    if (a.size() != b.size() ||
        !std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.first == y.first; })) {
        throw Error("paired t-test needs the same qid set for both systems");
    }
    std::vector<double> va;
    std::vector<double> vb;
    va.reserve(a.size());
    vb.reserve(b.size());
    for (const auto& [qid, v] : a) va.push_back(v);
    for (const auto& [qid, v] : b) vb.push_back(v);
    return paired_t_test(va, vb);
}

std::vector<SignificanceResult> compare_systems(const std::vector<MetricReport>& reports, double alpha)
{
    if (reports.size() < 2) throw Error("comparison needs at least two systems");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
    const std::size_t pairs = reports.size() * (reports.size() - 1) / 2;
    const double adjusted = alpha / static_cast<double>(pairs);
    std::vector<SignificanceResult> out;
    for (auto m : kAllMetrics) {
        for (std::size_t i = 0; i < reports.size(); ++i) {
            for (std::size_t j = i + 1; j < reports.size(); ++j) {
                const auto& a = reports[i].per_query.at(m);
                const auto& b = reports[j].per_query.at(m);
                TTestResult t;
                try {
                    t = paired_t_test(a, b);
                } catch (const Error& e) {
                    throw Error(reports[i].system + " vs " + reports[j].system + " (" +
                                std::string(metric_label(m)) + "): " + e.what());
                }
                SignificanceResult r;
                r.system_a = reports[i].system;
                r.system_b = reports[j].system;
                r.metric = m;
                r.t_statistic = t.t;
                r.p_value = t.p;
                r.adjusted_alpha = adjusted;
                r.significant = t.p < adjusted;
                r.degenerate = t.degenerate;
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

std::map<Domain, MetricReport> domain_breakdown(const MetricReport& report, const SplitManifest& manifest)
{
    auto domain_of = [&](const std::string& qid) {
        auto it = manifest.domains.find(qid);
        if (it == manifest.domains.end()) throw Error("qid '" + qid + "' has no domain in the manifest");
        return it->second;
    };
    std::map<Domain, MetricReport> out;
    auto slot = [&](Domain d) -> MetricReport& {
        auto [it, inserted] = out.try_emplace(d);
        if (inserted) {
            it->second.system = report.system;
            it->second.config = report.config;
            for (auto m : kAllMetrics) {
                it->second.per_query[m];
                it->second.excluded[m];
            }
        }
        return it->second;
    };
    for (const auto& qid : report.evaluated_qids) slot(domain_of(qid)).evaluated_qids.push_back(qid);
    for (const auto& [m, values] : report.per_query) {
        for (const auto& [qid, v] : values) slot(domain_of(qid)).per_query[m][qid] = v;
    }
    for (const auto& [m, qids] : report.excluded) {
        for (const auto& qid : qids) slot(domain_of(qid)).excluded[m].push_back(qid);
    }
    for (auto& [d, r] : out) {
        for (auto m : kAllMetrics) {
            const auto& values = r.per_query[m];
            double sum = 0.0;
            for (const auto& [qid, v] : values) sum += v;
            r.aggregate[m] = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
        }
    }
    return out;
}

void write_per_query_tsv(const MetricReport& report, std::ostream& out)
{
    std::set<std::string> qids(report.evaluated_qids.begin(), report.evaluated_qids.end());
    for (const auto& qid : qids) {
        for (auto m : kAllMetrics) {
            const auto& values = report.per_query.at(m);
            auto it = values.find(qid);
            if (it == values.end()) continue;
            out << qid << '\t' << report.config.name(m) << '\t' << fmt_value(it->second, "%.6f") << '\n';
        }
    }
    for (auto m : kAllMetrics) {
        out << "all\t" << report.config.name(m) << '\t' << fmt_value(report.aggregate.at(m), "%.6f") << '\n';
    }
}

void write_summary_table(const std::vector<MetricReport>& reports, std::ostream& out)
{
    if (reports.empty()) return;
    std::size_t width = 6;
    for (const auto& r : reports) width = std::max(width, r.system.size());
    const auto& config = reports.front().config;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    out << pad("system", width + 2);
    for (auto m : kAllMetrics) out << pad(config.name(m), 13);
    out << "queries\n";
    for (const auto& r : reports) {
        out << pad(r.system, width + 2);
        for (auto m : kAllMetrics) out << pad(fmt_value(r.aggregate.at(m)), 13);
        out << r.evaluated_qids.size() << '\n';
    }
}

void write_significance_tsv(const std::vector<SignificanceResult>& results, std::ostream& out)
{
    out << "system_a\tsystem_b\tmetric\tt\tp\tadjusted_alpha\tsignificant\n";
    for (const auto& r : results) {
        out << r.system_a << '\t' << r.system_b << '\t' << metric_label(r.metric) << '\t'
            << fmt_value(r.t_statistic, "%.6f") << '\t' << fmt_value(r.p_value, "%.6g") << '\t'
            << fmt_value(r.adjusted_alpha, "%.6g") << '\t' << (r.significant ? "true" : "false") << '\n';
    }
}

}  // namespace qarank
