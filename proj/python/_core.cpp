#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qarank/bm25.hpp"
#include "qarank/dataset.hpp"
#include "qarank/error.hpp"
#include "qarank/eval.hpp"
#include "qarank/io.hpp"
#include "qarank/overlap.hpp"
#include "qarank/rerank.hpp"

namespace py = pybind11;
using namespace qarank;

namespace {

Collection to_collection(const std::vector<std::pair<std::string, std::string>>& docs)
{
    Collection c;
    for (const auto& [id, text] : docs) c.add(Document{id, text, source_from_docid(id).value_or(Source::human)});
    return c;
}

std::vector<std::pair<std::string, double>> pairs(const std::vector<ScoredDoc>& docs)
{
    std::vector<std::pair<std::string, double>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.emplace_back(d.docid, d.score);
    return out;
}

Metric parse_metric(const std::string& name)
{
    for (auto m : kAllMetrics) {
        if (metric_label(m) == name) return m;
    }
    throw ConfigError("unknown metric '" + name + "'");
}

MetricConfig metric_config(std::size_t map_cutoff, std::size_t ndcg_cutoff, std::size_t mrr_cutoff,
                           std::size_t recall_cutoff, int threshold, const std::string& gain)
{
    MetricConfig c{map_cutoff, ndcg_cutoff, mrr_cutoff, recall_cutoff, threshold,
                   gain == "linear" ? Gain::linear : Gain::exponential};
    if (gain != "exp" && gain != "linear") throw ConfigError("gain must be 'exp' or 'linear'");
    c.validate();
    return c;
}

py::dict report_dict(const MetricReport& r)
{
    py::dict out;
    py::dict aggregate, per_query, excluded;
    for (auto m : kAllMetrics) {
        const auto name = r.config.name(m);
        aggregate[py::str(name)] = r.aggregate.at(m);
        per_query[py::str(name)] = r.per_query.at(m);
        excluded[py::str(name)] = r.excluded.count(m) ? r.excluded.at(m) : std::vector<std::string>{};
    }
    out["system"] = r.system;
    out["aggregate"] = aggregate;
    out["per_query"] = per_query;
    out["excluded"] = excluded;
    out["evaluated_qids"] = r.evaluated_qids;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "BM25 retrieval, dataset building and IR evaluation";

    static py::exception<Error> error(m, "QarankError", PyExc_RuntimeError);
    static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
    static py::exception<ParseError> parse_error(m, "ParseError", error.ptr());
    static py::exception<IntegrityError> integrity_error(m, "IntegrityError", error.ptr());
    static py::exception<ProtocolError> protocol_error(m, "ProtocolError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            config_error(e.what());
        } catch (const ParseError& e) {
            parse_error(e.what());
        } catch (const IntegrityError& e) {
            integrity_error(e.what());
        } catch (const ProtocolError& e) {
            protocol_error(e.what());
        } catch (const Error& e) {
            error(e.what());
        }
    });

    m.def(
        "tokenize", [](const std::string& text, bool stem, bool stopwords) { return tokenize(text, {stem, stopwords}); },
        py::arg("text"), py::arg("stem") = false, py::arg("stopwords") = false);
    m.def("porter_stem", &porter_stem, py::arg("word"));

    py::class_<Bm25Index>(m, "Bm25Index")
        .def_static(
            "build",
            [](const std::vector<std::pair<std::string, std::string>>& docs, bool stem, bool stopwords, unsigned threads) {
                auto c = to_collection(docs);
                py::gil_scoped_release release;
                return Bm25Index::build(c, {stem, stopwords}, threads);
            },
            py::arg("docs"), py::arg("stem") = false, py::arg("stopwords") = false, py::arg("threads") = 0,
            "Index (docid, text) pairs.")
        .def_static("load", &Bm25Index::load, py::arg("path"))
        .def("save", &Bm25Index::save, py::arg("path"))
        .def_property_readonly("num_docs", &Bm25Index::num_docs)
        .def_property_readonly("avg_len", [](const Bm25Index& i) { return i.stats().avg_len; })
        .def_property_readonly("num_terms", [](const Bm25Index& i) { return i.stats().num_terms; })
        .def("df", &Bm25Index::df, py::arg("term"))
        .def("doc_len", py::overload_cast<std::string_view>(&Bm25Index::doc_len, py::const_), py::arg("docid"))
        .def(
            "search",
            [](const Bm25Index& idx, const std::string& query, std::size_t k, double k1, double b) {
                Bm25Params p{k1, b};
                p.validate();
                py::gil_scoped_release release;
                return pairs(idx.search(idx.analyze(query), k, p));
            },
            py::arg("query"), py::arg("k") = 1000, py::arg("k1") = 1.2, py::arg("b") = 0.75,
            "Top-k (docid, score) pairs, best first.")
        .def(
            "score",
            [](const Bm25Index& idx, const std::string& query, const std::string& docid, double k1, double b) {
                Bm25Params p{k1, b};
                p.validate();
                return idx.score(idx.analyze(query), docid, p);
            },
            py::arg("query"), py::arg("docid"), py::arg("k1") = 1.2, py::arg("b") = 0.75);

    m.def("average_precision", &average_precision, py::arg("ranking"), py::arg("judged"), py::arg("cutoff") = 1000,
          py::arg("threshold") = 1);
    m.def(
        "ndcg_at_k",
        [](const std::vector<std::string>& ranking, const Qrels::Judgments& judged, std::size_t k, const std::string& gain) {
            return ndcg_at_k(ranking, judged, k, gain == "linear" ? Gain::linear : Gain::exponential);
        },
        py::arg("ranking"), py::arg("judged"), py::arg("k") = 10, py::arg("gain") = "exp");
    m.def("mrr_at_k", &mrr_at_k, py::arg("ranking"), py::arg("judged"), py::arg("k") = 10, py::arg("threshold") = 1);
    m.def("recall_at_k", &recall_at_k, py::arg("ranking"), py::arg("judged"), py::arg("k") = 1000,
          py::arg("threshold") = 1);

    m.def(
        "evaluate",
        [](const std::filesystem::path& run, const std::filesystem::path& qrels, std::size_t map_cutoff,
           std::size_t ndcg_cutoff, std::size_t mrr_cutoff, std::size_t recall_cutoff, int threshold,
           const std::string& gain) {
            auto cfg = metric_config(map_cutoff, ndcg_cutoff, mrr_cutoff, recall_cutoff, threshold, gain);
            return report_dict(evaluate_run(read_run(run), read_qrels(qrels), cfg));
        },
        py::arg("run"), py::arg("qrels"), py::arg("map_cutoff") = 1000, py::arg("ndcg_cutoff") = 10,
        py::arg("mrr_cutoff") = 10, py::arg("recall_cutoff") = 1000, py::arg("threshold") = 1, py::arg("gain") = "exp",
        "Evaluate a TREC run file against a qrels file.");

    m.def(
        "paired_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            auto r = paired_t_test(a, b);
            return py::make_tuple(r.t, r.p);
        },
        py::arg("a"), py::arg("b"), "Two-sided paired t-test; returns (t, p).");
    m.def(
        "compare",
        [](const std::vector<std::filesystem::path>& runs, const std::filesystem::path& qrels_path, double alpha) {
            auto qrels = read_qrels(qrels_path);
            std::vector<MetricReport> reports;
            for (const auto& r : runs) reports.push_back(evaluate_run(read_run(r), qrels));
            py::list out;
            for (const auto& s : compare_systems(reports, alpha)) {
                py::dict d;
                d["system_a"] = s.system_a;
                d["system_b"] = s.system_b;
                d["metric"] = std::string(metric_label(s.metric));
                d["t"] = s.t_statistic;
                d["p"] = s.p_value;
                d["adjusted_alpha"] = s.adjusted_alpha;
                d["significant"] = s.significant;
                out.append(d);
            }
            return out;
        },
        py::arg("runs"), py::arg("qrels"), py::arg("alpha") = 0.05);

    m.def(
        "query_coverage",
        [](const std::string& q, const std::string& d, bool stem, bool stopwords) {
            return query_coverage(q, d, {stem, stopwords});
        },
        py::arg("query"), py::arg("document"), py::arg("stem") = false, py::arg("stopwords") = false);

    m.def(
        "build_dataset",
        [](const std::filesystem::path& input, const std::filesystem::path& out, std::uint64_t seed,
           std::size_t negatives, std::size_t triples_per_positive, const std::string& targets) {
            py::gil_scoped_release release;
            auto data = build_collections(read_hc3_jsonl(input));
            auto t = targets == "hc3" ? SplitTargets::hc3() : SplitTargets::proportional(data.queries);
            auto manifest = split_dataset(data.queries, t, seed);
            DatasetBuildConfig cfg;
            cfg.sampling = {negatives, seed};
            cfg.sampling.validate();
            cfg.triples_per_positive = triples_per_positive;
            write_dataset(data, manifest, cfg, out);
            py::gil_scoped_acquire acquire;
            py::dict d;
            d["queries"] = data.queries.size();
            d["human_documents"] = data.human.size();
            d["llm_documents"] = data.llm.size();
            d["train"] = manifest.count(Split::train);
            d["validation"] = manifest.count(Split::validation);
            d["test"] = manifest.count(Split::test);
            d["warnings"] = data.warnings;
            return d;
        },
        py::arg("input"), py::arg("out"), py::arg("seed") = 42, py::arg("negatives") = 1000,
        py::arg("triples_per_positive") = 4, py::arg("targets") = "proportional",
        "Build the two-collection dataset from HC3-format JSON lines.");

    m.def(
        "encode_request",
        [](std::uint64_t id, const std::string& q, const std::string& p) { return encode_request({id, q, p}); },
        py::arg("id"), py::arg("query"), py::arg("passage"));
    m.def(
        "decode_response",
        [](const std::string& line) {
            auto r = decode_response(line);
            return py::make_tuple(r.id, r.score);
        },
        py::arg("line"));
}
