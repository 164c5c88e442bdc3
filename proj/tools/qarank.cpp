// qarank: dataset building, BM25 retrieval, re-ranking and evaluation from the shell.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "provenance.hpp"
#include "qarank/bm25.hpp"
#include "qarank/dataset.hpp"
#include "qarank/error.hpp"
#include "qarank/eval.hpp"
#include "qarank/io.hpp"
#include "qarank/overlap.hpp"
#include "qarank/rerank.hpp"

namespace fs = std::filesystem;
using namespace qarank;
using qarank::cli::Provenance;
using qarank::cli::require_writable;

namespace {

std::vector<std::string> g_argv;

Provenance provenance(const std::string& sub)
{
    Provenance p;
    p.subcommand = sub;
    p.argv = g_argv;
    return p;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    AtomicFile f(path);
    f.stream() << text;
    f.commit();
}

struct MetricFlags {
    MetricConfig config;
    std::string gain = "exp";

    void add(CLI::App* app)
    {
        app->add_option("--map-cutoff", config.map_cutoff, "MAP cutoff")->envname("QARANK_MAP_CUTOFF")->capture_default_str();
        app->add_option("--ndcg-cutoff", config.ndcg_cutoff, "NDCG cutoff")->envname("QARANK_NDCG_CUTOFF")->capture_default_str();
        app->add_option("--mrr-cutoff", config.mrr_cutoff, "MRR cutoff")->envname("QARANK_MRR_CUTOFF")->capture_default_str();
        app->add_option("--recall-cutoff", config.recall_cutoff, "Recall cutoff")->envname("QARANK_RECALL_CUTOFF")->capture_default_str();
        app->add_option("--threshold", config.relevance_threshold, "Minimum relevant grade")
            ->envname("QARANK_THRESHOLD")
            ->capture_default_str();
        app->add_option("--gain", gain, "NDCG gain")->check(CLI::IsMember({"exp", "linear"}))->envname("QARANK_GAIN")->capture_default_str();
    }

    MetricConfig resolve()
    {
        config.gain = gain == "linear" ? Gain::linear : Gain::exponential;
        config.validate();
        return config;
    }

    void record(Provenance& p) const
    {
        p.params["map_cutoff"] = std::to_string(config.map_cutoff);
        p.params["ndcg_cutoff"] = std::to_string(config.ndcg_cutoff);
        p.params["mrr_cutoff"] = std::to_string(config.mrr_cutoff);
        p.params["recall_cutoff"] = std::to_string(config.recall_cutoff);
        p.params["threshold"] = std::to_string(config.relevance_threshold);
        p.params["gain"] = gain;
    }
};

QuerySet with_domains(const QuerySet& queries, const SplitManifest& manifest)
{
    QuerySet out;
    for (auto q : queries.queries()) {
        auto it = manifest.domains.find(q.qid);
        if (it != manifest.domains.end()) q.domain = it->second;
        auto s = manifest.assignment.find(q.qid);
        if (s != manifest.assignment.end()) q.split = s->second;
        out.add(std::move(q));
    }
    return out;
}

bool matches_hc3(const QuerySet& queries)
{
    auto t = SplitTargets::hc3();
    std::map<Domain, std::size_t> have;
    for (const auto& q : queries.queries()) {
        if (q.domain) ++have[*q.domain];
    }
    for (auto d : kAllDomains) {
        std::size_t want = 0;
        for (auto s : kAllSplits) want += t.get(d, s);
        if (have[d] != want) return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv)
{
    g_argv.assign(argv, argv + argc);
    CLI::App app{"Retrieval experiments over human- and LLM-written answer collections"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "qarank 0.1.0");
    bool force = false;
    app.add_flag("--force", force, "Overwrite existing outputs")->envname("QARANK_FORCE");

    std::function<void()> action;

    // build-dataset
    auto* build = app.add_subcommand("build-dataset", "Build human and LLM collections, qrels, splits and triples");
    fs::path hc3_path, dataset_out, manifest_in;
    std::string targets_name = "auto";
    DatasetBuildConfig build_cfg;
    bool no_triples = false;
    build->add_option("--input", hc3_path, "HC3-format JSON lines")->required()->check(CLI::ExistingFile);
    build->add_option("--out", dataset_out, "Output directory")->required();
    build->add_option("--seed", build_cfg.sampling.seed, "Seed for splits and negative sampling")
        ->envname("QARANK_SEED")
        ->capture_default_str();
    build->add_option("--manifest", manifest_in, "Explicit split manifest (qid, split, domain)")
        ->envname("QARANK_MANIFEST")
        ->check(CLI::ExistingFile);
    build->add_option("--targets", targets_name, "Split sizes when no manifest is given")
        ->check(CLI::IsMember({"auto", "hc3", "proportional"}))
        ->capture_default_str();
    build->add_option("--negatives", build_cfg.sampling.negatives_per_query, "Sampled negatives per query")
        ->envname("QARANK_NEGATIVES")
        ->capture_default_str();
    build->add_option("--triples-per-positive", build_cfg.triples_per_positive, "Training triples per positive")
        ->envname("QARANK_TRIPLES_PER_POSITIVE")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    build->add_flag("--no-triples", no_triples, "Skip training triples");
    build->callback([&] {
        action = [&] {
            require_writable(dataset_out, force);
            build_cfg.sampling.validate();
            build_cfg.emit_triples = !no_triples;
            auto data = build_collections(read_hc3_jsonl(hc3_path));
            for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
            SplitManifest manifest;
            auto p = provenance("build-dataset");
            p.inputs["input"] = hc3_path;
            if (!manifest_in.empty()) {
                manifest = split_from_manifest(data.queries, read_manifest(manifest_in));
                p.inputs["manifest"] = manifest_in;
                p.params["split"] = "manifest";
            } else {
                bool hc3 = targets_name == "hc3" || (targets_name == "auto" && matches_hc3(data.queries));
                auto targets = hc3 ? SplitTargets::hc3() : SplitTargets::proportional(data.queries);
                manifest = split_dataset(data.queries, targets, build_cfg.sampling.seed);
                p.params["split"] = hc3 ? "hc3" : "proportional";
            }
            write_dataset(data, manifest, build_cfg, dataset_out);
            p.params["seed"] = std::to_string(build_cfg.sampling.seed);
            p.params["negatives"] = std::to_string(build_cfg.sampling.negatives_per_query);
            p.params["triples_per_positive"] = std::to_string(build_cfg.triples_per_positive);
            p.write(dataset_out);
            std::cout << "queries " << data.queries.size() << " (train " << manifest.count(Split::train)
                      << ", validation " << manifest.count(Split::validation) << ", test "
                      << manifest.count(Split::test) << ")\nhuman documents " << data.human.size()
                      << "\nllm documents " << data.llm.size() << '\n';
        };
    });

    // index
    auto* index = app.add_subcommand("index", "Build a BM25 index over a collection");
    fs::path coll_path, index_out;
    TokenizerConfig tok;
    unsigned threads = 0;
    index->add_option("--collection", coll_path, "Collection TSV")->required()->check(CLI::ExistingFile);
    index->add_option("--out", index_out, "Index file")->required();
    index->add_flag("--stem", tok.stem, "Porter stemming");
    index->add_flag("--stopwords", tok.stopwords, "Drop English stopwords");
    index->add_option("--threads", threads, "Worker threads (0 = all cores)")->envname("QARANK_THREADS");
    index->callback([&] {
        action = [&] {
            require_writable(index_out, force);
            auto idx = Bm25Index::build(read_collection(coll_path), tok, threads);
            idx.save(index_out);
            auto p = provenance("index");
            p.inputs["collection"] = coll_path;
            p.params["stem"] = tok.stem ? "true" : "false";
            p.params["stopwords"] = tok.stopwords ? "true" : "false";
            p.write(index_out);
            const auto& s = idx.stats();
            std::cout << "documents " << s.num_docs << "\nterms " << s.num_terms << "\navg_len " << s.avg_len << '\n';
        };
    });

    // search
    auto* search = app.add_subcommand("search", "Retrieve top-k documents per query with BM25");
    fs::path index_in, queries_path, run_out, top1000_out, top1000_coll;
    Bm25Params bm25;
    std::size_t depth = 1000;
    std::string tag = "bm25";
    search->add_option("--index", index_in, "Index file")->required()->check(CLI::ExistingFile);
    search->add_option("--queries", queries_path, "Queries TSV")->required()->check(CLI::ExistingFile);
    search->add_option("--out", run_out, "Run file")->required();
    search->add_option("--depth", depth, "Documents per query")->envname("QARANK_DEPTH")->capture_default_str();
    search->add_option("--k1", bm25.k1, "BM25 k1")->envname("QARANK_K1")->capture_default_str();
    search->add_option("--b", bm25.b, "BM25 b")->envname("QARANK_B")->capture_default_str();
    search->add_option("--tag", tag, "Run tag")->capture_default_str();
    search->add_option("--threads", threads, "Worker threads (0 = all cores)")->envname("QARANK_THREADS");
    search->add_option("--top1000", top1000_out, "Also write qid/docid/query/passage candidates here");
    search->add_option("--collection", top1000_coll, "Collection TSV, required with --top1000")->check(CLI::ExistingFile);
    search->callback([&] {
        action = [&] {
            require_writable(run_out, force);
            if (!top1000_out.empty()) {
                if (top1000_coll.empty()) throw ConfigError("--top1000 needs --collection");
                require_writable(top1000_out, force);
            }
            bm25.validate();
            auto idx = Bm25Index::load(index_in);
            auto queries = read_queries(queries_path);
            auto run = idx.batch_retrieve(queries, depth, bm25, tag, threads);
            write_run(run, run_out);
            auto p = provenance("search");
            p.inputs["index"] = index_in;
            p.inputs["queries"] = queries_path;
            p.params["k1"] = fmt(bm25.k1);
            p.params["b"] = fmt(bm25.b);
            p.params["depth"] = std::to_string(depth);
            p.write(run_out);
            if (!top1000_out.empty()) {
                write_top1000(run, queries, read_collection(top1000_coll), top1000_out);
                p.inputs["collection"] = top1000_coll;
                p.write(top1000_out);
            }
            std::cout << "queries " << queries.size() << "\nentries " << run.entries.size() << '\n';
        };
    });

    // rerank
    auto* rr = app.add_subcommand("rerank", "Re-score first-stage candidates with an external scorer");
    fs::path first_run, rr_out, checkpoint;
    std::string scorer;
    RerankConfig rr_cfg;
    rr->add_option("--run", first_run, "First-stage run")->required()->check(CLI::ExistingFile);
    rr->add_option("--queries", queries_path, "Queries TSV")->required()->check(CLI::ExistingFile);
    rr->add_option("--collection", coll_path, "Collection TSV")->required()->check(CLI::ExistingFile);
    rr->add_option("--scorer", scorer, "exec:<command> or tcp:<host>:<port>")->required()->envname("QARANK_SCORER");
    rr->add_option("--out", rr_out, "Re-ranked run file")->required();
    rr->add_option("--depth", rr_cfg.depth, "Candidates per query")->envname("QARANK_DEPTH")->capture_default_str();
    rr->add_option("--max-query-tokens", rr_cfg.truncation.max_query_tokens)->capture_default_str();
    rr->add_option("--max-passage-tokens", rr_cfg.truncation.max_passage_tokens)->capture_default_str();
    rr->add_option("--tag", rr_cfg.tag, "Run tag")->capture_default_str();
    rr->add_option("--threads", rr_cfg.threads, "Queries in flight")->capture_default_str();
    rr->add_option("--checkpoint", checkpoint, "Resume file for completed queries");
    rr->callback([&] {
        action = [&] {
            require_writable(rr_out, force);
            if (!checkpoint.empty()) rr_cfg.checkpoint = checkpoint;
            auto first = read_run(first_run);
            auto queries = read_queries(queries_path);
            auto coll = read_collection(coll_path);
            auto client = StreamScorer::connect(scorer);
            qarank::Run out;
            try {
                out = rerank(first, queries, coll, *client, rr_cfg);
            } catch (...) {
                client->shutdown();
                throw;
            }
            int status = client->shutdown();
            if (status != 0) std::cerr << "warning: scorer exited with status " << status << '\n';
            write_run(out, rr_out);
            auto p = provenance("rerank");
            p.inputs["run"] = first_run;
            p.inputs["queries"] = queries_path;
            p.inputs["collection"] = coll_path;
            p.params["scorer"] = scorer;
            p.params["depth"] = std::to_string(rr_cfg.depth);
            p.params["max_query_tokens"] = std::to_string(rr_cfg.truncation.max_query_tokens);
            p.params["max_passage_tokens"] = std::to_string(rr_cfg.truncation.max_passage_tokens);
            p.write(rr_out);
            std::cout << "queries " << out.qids().size() << "\nentries " << out.entries.size() << '\n';
        };
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a run against qrels");
    fs::path run_in, qrels_path, eval_out;
    MetricFlags metric_flags;
    ev->add_option("--run", run_in, "Run file")->required()->check(CLI::ExistingFile);
    ev->add_option("--qrels", qrels_path, "Qrels")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", eval_out, "Directory for summary.txt and per_query.tsv (default: stdout)");
    metric_flags.add(ev);
    ev->callback([&] {
        action = [&] {
            if (!eval_out.empty()) require_writable(eval_out, force);
            auto config = metric_flags.resolve();
            auto report = evaluate_run(read_run(run_in), read_qrels(qrels_path), config);
            for (auto m : kAllMetrics) {
                if (!report.excluded[m].empty()) {
                    std::cerr << "warning: " << report.excluded[m].size() << " qids excluded from "
                              << config.name(m) << " (no relevant documents)\n";
                }
            }
            std::ostringstream summary, per_query;
            write_summary_table({report}, summary);
            write_per_query_tsv(report, per_query);
            std::cout << summary.str();
            if (eval_out.empty()) {
                std::cout << '\n' << per_query.str();
                return;
            }
            fs::create_directories(eval_out);
            write_text(eval_out / "summary.txt", summary.str());
            write_text(eval_out / "per_query.tsv", per_query.str());
            auto p = provenance("evaluate");
            p.inputs["run"] = run_in;
            p.inputs["qrels"] = qrels_path;
            metric_flags.record(p);
            p.write(eval_out);
        };
    });

    // compare
    auto* cmp = app.add_subcommand("compare", "Paired t-tests between runs with Bonferroni correction");
    std::vector<fs::path> runs;
    fs::path cmp_out;
    double alpha = 0.05;
    cmp->add_option("--runs", runs, "Two or more run files")->required()->expected(2, -1)->check(CLI::ExistingFile);
    cmp->add_option("--qrels", qrels_path, "Qrels")->required()->check(CLI::ExistingFile);
    cmp->add_option("--alpha", alpha, "Family-wise significance level")
        ->envname("QARANK_ALPHA")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmp->add_option("--out", cmp_out, "Significance TSV (default: stdout)");
    metric_flags.add(cmp);
    cmp->callback([&] {
        action = [&] {
            if (!cmp_out.empty()) require_writable(cmp_out, force);
            auto config = metric_flags.resolve();
            auto qrels = read_qrels(qrels_path);
            std::vector<MetricReport> reports;
            std::set<std::string> names;
            for (const auto& r : runs) {
                auto rep = evaluate_run(read_run(r), qrels, config);
                if (names.count(rep.system)) rep.system = r.filename().string();
                if (names.count(rep.system)) rep.system = r.string();
                names.insert(rep.system);
                reports.push_back(std::move(rep));
            }
            auto results = compare_systems(reports, alpha);
            std::ostringstream tsv;
            write_significance_tsv(results, tsv);
            write_summary_table(reports, std::cout);
            if (cmp_out.empty()) {
                std::cout << '\n' << tsv.str();
                return;
            }
            write_text(cmp_out, tsv.str());
            auto p = provenance("compare");
            for (std::size_t i = 0; i < runs.size(); ++i) p.inputs["run" + std::to_string(i + 1)] = runs[i];
            p.inputs["qrels"] = qrels_path;
            p.params["alpha"] = fmt(alpha);
            metric_flags.record(p);
            p.write(cmp_out);
        };
    });

    // breakdown
    auto* bd = app.add_subcommand("breakdown", "Per-domain metrics for one run");
    fs::path bd_manifest, bd_out;
    bd->add_option("--run", run_in, "Run file")->required()->check(CLI::ExistingFile);
    bd->add_option("--qrels", qrels_path, "Qrels")->required()->check(CLI::ExistingFile);
    bd->add_option("--manifest", bd_manifest, "Split manifest with domains")
        ->required()
        ->envname("QARANK_MANIFEST")
        ->check(CLI::ExistingFile);
    bd->add_option("--out", bd_out, "Summary file (default: stdout)");
    metric_flags.add(bd);
    bd->callback([&] {
        action = [&] {
            if (!bd_out.empty()) require_writable(bd_out, force);
            auto config = metric_flags.resolve();
            auto report = evaluate_run(read_run(run_in), read_qrels(qrels_path), config);
            std::vector<MetricReport> rows;
            for (auto& [domain, rep] : domain_breakdown(report, read_manifest(bd_manifest))) {
                rep.system = std::string(to_string(domain));
                rows.push_back(std::move(rep));
            }
            report.system = "all";
            rows.push_back(report);
            std::ostringstream table;
            write_summary_table(rows, table);
            std::cout << table.str();
            if (bd_out.empty()) return;
            write_text(bd_out, table.str());
            auto p = provenance("breakdown");
            p.inputs["run"] = run_in;
            p.inputs["qrels"] = qrels_path;
            p.inputs["manifest"] = bd_manifest;
            metric_flags.record(p);
            p.write(bd_out);
        };
    });

    // analyze-overlap
    auto* ov = app.add_subcommand("analyze-overlap", "Query-term coverage of positive documents, human vs LLM");
    fs::path dataset_dir, ov_out;
    std::string split_name = "all";
    ov->add_option("--dataset", dataset_dir, "Directory written by build-dataset")->required()->check(CLI::ExistingDirectory);
    ov->add_option("--split", split_name, "Restrict to one split")
        ->check(CLI::IsMember({"all", "train", "validation", "test"}))
        ->capture_default_str();
    ov->add_flag("--stem", tok.stem, "Porter stemming");
    ov->add_flag("--stopwords", tok.stopwords, "Drop English stopwords");
    ov->add_option("--out", ov_out, "Directory for per-pair TSVs and summary (default: stdout)");
    ov->callback([&] {
        action = [&] {
            if (!ov_out.empty()) require_writable(ov_out, force);
            auto manifest = read_manifest(dataset_dir / "manifest.tsv");
            auto queries = with_domains(read_queries(dataset_dir / "queries.tsv"), manifest);
            if (split_name != "all") queries = select_split(queries, manifest, *parse_split(split_name));
            std::vector<OverlapReport> reports;
            for (auto source : {Source::human, Source::llm}) {
                auto sub = dataset_dir / std::string(to_string(source));
                reports.push_back(analyze_overlap(queries, read_qrels(sub / "qrels.tsv"),
                                                  read_collection(sub / "collection.tsv", source),
                                                  std::string(to_string(source)), tok));
            }
            std::ostringstream summary;
            write_overlap_summary(reports, summary);
            std::cout << summary.str();
            if (ov_out.empty()) return;
            fs::create_directories(ov_out);
            write_text(ov_out / "summary.txt", summary.str());
            for (const auto& r : reports) {
                std::ostringstream tsv;
                write_overlap_tsv(r, tsv);
                write_text(ov_out / (r.label + ".tsv"), tsv.str());
            }
            auto p = provenance("analyze-overlap");
            p.inputs["dataset"] = dataset_dir;
            p.params["split"] = split_name;
            p.params["stem"] = tok.stem ? "true" : "false";
            p.params["stopwords"] = tok.stopwords ? "true" : "false";
            p.write(ov_out);
        };
    });

    // stats
    auto* st = app.add_subcommand("stats", "Collection size and length statistics");
    st->add_option("--dataset", dataset_dir, "Directory written by build-dataset")->required()->check(CLI::ExistingDirectory);
    st->callback([&] {
        action = [&] {
            auto queries = read_queries(dataset_dir / "queries.tsv");
            std::printf("%-8s %8s %8s %9s %6s %6s %6s %9s\n", "source", "docs", "queries", "mean_len", "q1",
                        "median", "q3", "resp/q");
            for (auto source : {Source::human, Source::llm}) {
                auto s = corpus_stats(read_collection(dataset_dir / std::string(to_string(source)) / "collection.tsv", source),
                                      queries);
                std::printf("%-8s %8zu %8zu %9.2f %6.1f %6.1f %6.1f %9.3f\n", std::string(to_string(source)).c_str(),
                            s.num_docs, s.num_queries, s.mean_len, s.q1_len, s.median_len, s.q3_len,
                            s.responses_per_query);
            }
        };
    });

    // validate
    auto* va = app.add_subcommand("validate", "Check a run against qrels for coverage, depth and duplicates");
    va->add_option("--run", run_in, "Run file")->required()->check(CLI::ExistingFile);
    va->add_option("--qrels", qrels_path, "Qrels")->required()->check(CLI::ExistingFile);
    va->add_option("--depth", depth, "Expected entries per query")->envname("QARANK_DEPTH")->capture_default_str();
    int validate_status = 0;
    va->callback([&] {
        action = [&] {
            auto r = validate_run(read_run(run_in), read_qrels(qrels_path), depth);
            std::cout << "qids " << r.depth_per_qid.size() << "\nunjudged " << r.unjudged_qids.size() << "\nshallow "
                      << r.shallow_qids.size() << "\nduplicates " << r.duplicates.size() << '\n';
            for (const auto& q : r.unjudged_qids) std::cout << "unjudged\t" << q << '\n';
            for (const auto& q : r.shallow_qids) std::cout << "shallow\t" << q << '\t' << r.depth_per_qid.at(q) << '\n';
            if (r.violations() > 0) validate_status = 1;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        action();
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& c : msg) {
            if (c == '\n') c = ' ';
        }
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return validate_status;
}
