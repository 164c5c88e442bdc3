#include "qarank/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "qarank/error.hpp"
#include "qarank/io.hpp"
#include "qarank/rng.hpp"
#include "qarank/summary.hpp"
#include "qarank/tokenizer.hpp"

namespace qarank {

namespace {

std::vector<std::string> read_answers(const nlohmann::json& obj, const char* key,
                                      const std::string& path, std::size_t lineno)
{
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path, lineno, std::string("missing field '") + key + "'");
    if (!it->is_array()) throw ParseError(path, lineno, std::string("'") + key + "' is not a list");
    std::vector<std::string> out;
    out.reserve(it->size());
    for (const auto& a : *it) {
        if (a.is_null()) {
            out.emplace_back();
        } else if (a.is_string()) {
            out.push_back(a.get<std::string>());
        } else {
            throw ParseError(path, lineno, std::string("'") + key + "' holds a non-string answer");
        }
    }
    return out;
}

}  // namespace

std::vector<QaRecord> read_hc3_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    std::vector<QaRecord> records;
    std::string line;
    std::size_t lineno = 0;
    const std::string name = path.string();
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(name, lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(name, lineno, "record is not a JSON object");
        QaRecord r;
        auto q = obj.find("question");
        if (q == obj.end() || !q->is_string()) {
            throw ParseError(name, lineno, "missing string field 'question'");
        }
        r.question = q->get<std::string>();
        r.human_answers = read_answers(obj, "human_answers", name, lineno);
        r.llm_answers = read_answers(obj, "chatgpt_answers", name, lineno);
        auto src = obj.find("source");
        if (src == obj.end() || !src->is_string()) {
            throw ParseError(name, lineno, "missing string field 'source'");
        }
        auto domain = parse_domain(src->get<std::string>());
        if (!domain) {
            throw ParseError(name, lineno, "unknown source '" + src->get<std::string>() + "'");
        }
        r.domain = *domain;
        records.push_back(std::move(r));
    }
    return records;
}

BuiltDataset build_collections(const std::vector<QaRecord>& records)
{
    if (records.empty()) throw Error("no QA records to build from");
    BuiltDataset out;
    std::size_t human_counter = 0;
    std::size_t llm_counter = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::string qid = "q" + std::to_string(i);
        std::string question = sanitize_text(trim(r.question));
        if (question.empty()) throw IntegrityError("record " + std::to_string(i) + " has an empty question");
        if (r.human_answers.empty() && r.llm_answers.empty()) {
            throw IntegrityError("record " + std::to_string(i) + " has no answers");
        }
        out.queries.add(Query{qid, std::move(question), r.domain, std::nullopt});

        auto add_answers = [&](const std::vector<std::string>& answers, Source source,
                               std::size_t& counter) {
            auto& collection = source == Source::human ? out.human : out.llm;
            auto& qrels = source == Source::human ? out.human_qrels : out.llm_qrels;
            const char* prefix = source == Source::human ? "h_" : "c_";
            for (std::size_t a = 0; a < answers.size(); ++a) {
                std::string text = sanitize_text(trim(answers[a]));
                if (trim(text).empty()) {
                    out.warnings.push_back("record " + std::to_string(i) + " (" + qid + "): dropped empty " +
                                           std::string(to_string(source)) + " answer " +
                                           std::to_string(a));
                    continue;
                }
                std::string docid = prefix + std::to_string(counter++);
                qrels.add(qid, docid, 1);
                collection.add(Document{std::move(docid), std::move(text), source});
            }
        };
        add_answers(r.human_answers, Source::human, human_counter);
        add_answers(r.llm_answers, Source::llm, llm_counter);
        if (!out.human_qrels.contains(qid) && !out.llm_qrels.contains(qid)) {
            out.warnings.push_back(qid + ": no non-empty answers; query has no positives");
        }
    }
    return out;
}

std::size_t SplitTargets::get(Domain d, Split s) const
{
    auto it = counts.find({d, s});
    return it == counts.end() ? 0 : it->second;
}

std::size_t SplitTargets::total(Split s) const
{
    std::size_t n = 0;
    for (auto d : kAllDomains) n += get(d, s);
    return n;
}

SplitTargets SplitTargets::hc3()
{
    SplitTargets t;
    auto set = [&](Domain d, std::size_t train, std::size_t val, std::size_t test) {
        t.counts[{d, Split::train}] = train;
        t.counts[{d, Split::validation}] = val;
        t.counts[{d, Split::test}] = test;
    };
    set(Domain::medicine, 862, 31, 355);
    set(Domain::finance, 2715, 98, 1120);
    set(Domain::reddit, 11809, 427, 4876);
    set(Domain::wiki_openqa, 820, 29, 338);
    set(Domain::wiki_csai, 582, 21, 239);
    return t;
}

SplitTargets SplitTargets::proportional(const QuerySet& queries)
{
    const auto reference = hc3();
    std::map<Domain, std::size_t> per_domain;
    for (const auto& q : queries.queries()) {
        if (!q.domain) throw ConfigError("query '" + q.qid + "' has no domain");
        ++per_domain[*q.domain];
    }
    SplitTargets t;
    for (auto [domain, n] : per_domain) {
        double ref_total = 0.0;
        for (auto s : kAllSplits) ref_total += static_cast<double>(reference.get(domain, s));
        std::vector<std::pair<double, Split>> remainders;
        std::size_t assigned = 0;
        for (auto s : kAllSplits) {
            double exact = static_cast<double>(n) * static_cast<double>(reference.get(domain, s)) / ref_total;
            auto base = static_cast<std::size_t>(std::floor(exact));
            t.counts[{domain, s}] = base;
            assigned += base;
            remainders.emplace_back(exact - static_cast<double>(base), s);
        }
        // Largest remainder; ties go to the earlier split.
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++t.counts[{domain, remainders[i].second}];
    }
    return t;
}

Split SplitManifest::split_of(std::string_view qid) const
{
    auto it = assignment.find(qid);
    if (it == assignment.end()) throw IntegrityError("qid '" + std::string(qid) + "' not in manifest");
    return it->second;
}

std::size_t SplitManifest::count(Split s) const
{
    return static_cast<std::size_t>(std::count_if(assignment.begin(), assignment.end(),
                                                  [&](const auto& kv) { return kv.second == s; }));
}

std::size_t SplitManifest::count(Domain d, Split s) const
{
    std::size_t n = 0;
    for (const auto& [qid, split] : assignment) {
        auto it = domains.find(qid);
        if (split == s && it != domains.end() && it->second == d) ++n;
    }
    return n;
}

SplitManifest split_dataset(const QuerySet& queries, const SplitTargets& targets, std::uint64_t seed)
{
    std::map<Domain, std::vector<std::string>> by_domain;
    for (const auto& q : queries.queries()) {
        if (!q.domain) throw ConfigError("query '" + q.qid + "' has no domain");
        by_domain[*q.domain].push_back(q.qid);
    }
    for (auto d : kAllDomains) {
        std::size_t want = 0;
        for (auto s : kAllSplits) want += targets.get(d, s);
        std::size_t have = by_domain.count(d) ? by_domain[d].size() : 0;
        if (want > have) {
            throw ConfigError("split targets for " + std::string(to_string(d)) + " (" +
                              std::to_string(want) + ") exceed its " + std::to_string(have) + " queries");
        }
        if (want != have) {
            throw ConfigError("split targets for " + std::string(to_string(d)) + " sum to " +
                              std::to_string(want) + " but the domain has " + std::to_string(have) +
                              " queries");
        }
    }

    SplitManifest m;
    m.seed = seed;
    for (const auto& q : queries.queries()) {
        m.qids.push_back(q.qid);
        m.domains[q.qid] = *q.domain;
    }
    for (auto& [domain, qids] : by_domain) {
        auto rng = Xoshiro256::for_key(seed, to_string(domain));
        rng.shuffle(std::span<std::string>(qids));
        std::size_t pos = 0;
        for (auto s : kAllSplits) {
            const std::size_t n = targets.get(domain, s);
            for (std::size_t i = 0; i < n; ++i) m.assignment[qids[pos++]] = s;
        }
    }
    return m;
}

SplitManifest split_from_manifest(const QuerySet& queries, const SplitManifest& manifest)
{
    SplitManifest m;
    m.seed = manifest.seed;
    m.from_file = true;
    for (const auto& q : queries.queries()) {
        auto it = manifest.assignment.find(q.qid);
        if (it == manifest.assignment.end()) {
            throw IntegrityError("manifest has no split for qid '" + q.qid + "'");
        }
        m.qids.push_back(q.qid);
        m.assignment[q.qid] = it->second;
        auto d = manifest.domains.find(q.qid);
        if (d != manifest.domains.end()) {
            m.domains[q.qid] = d->second;
        } else if (q.domain) {
            m.domains[q.qid] = *q.domain;
        }
    }
    if (manifest.assignment.size() != m.assignment.size()) {
        throw IntegrityError("manifest lists " + std::to_string(manifest.assignment.size()) +
                             " qids but the query set has " + std::to_string(m.assignment.size()));
    }
    return m;
}

SplitManifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    SplitManifest m;
    m.from_file = true;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto f = split_fields(line, '\t');
        if (f.size() != 3) {
            throw ParseError(path.string(), lineno,
                             "expected 3 tab-separated fields, got " + std::to_string(f.size()));
        }
        auto split = parse_split(f[1]);
        if (!split) throw ParseError(path.string(), lineno, "unknown split '" + std::string(f[1]) + "'");
        auto domain = parse_domain(f[2]);
        if (!domain) throw ParseError(path.string(), lineno, "unknown domain '" + std::string(f[2]) + "'");
        std::string qid(f[0]);
        if (!m.assignment.emplace(qid, *split).second) {
            throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": duplicate qid '" + qid + "'");
        }
        m.domains[qid] = *domain;
        m.qids.push_back(std::move(qid));
    }
    return m;
}

void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path)
{
    AtomicFile file(path);
    for (const auto& qid : manifest.qids) {
        auto d = manifest.domains.find(qid);
        if (d == manifest.domains.end()) throw IntegrityError("no domain for qid '" + qid + "'");
        file.stream() << qid << '\t' << to_string(manifest.split_of(qid)) << '\t' << to_string(d->second)
                      << '\n';
    }
    file.commit();
}

QuerySet select_split(const QuerySet& queries, const SplitManifest& manifest, Split split)
{
    QuerySet out;
    for (const auto& q : queries.queries()) {
        if (manifest.split_of(q.qid) != split) continue;
        Query copy = q;
        copy.split = split;
        auto d = manifest.domains.find(q.qid);
        if (d != manifest.domains.end()) copy.domain = d->second;
        out.add(std::move(copy));
    }
    return out;
}

Qrels restrict_qrels(const Qrels& qrels, const QuerySet& queries)
{
    Qrels out;
    for (const auto& q : queries.queries()) {
        if (const auto* j = qrels.judgments(q.qid)) {
            for (const auto& [docid, grade] : *j) out.add(q.qid, docid, grade);
        }
    }
    return out;
}

void SamplingConfig::validate() const
{
    if (negatives_per_query < 1) throw ConfigError("negatives_per_query must be >= 1");
}

NegativeSample sample_negatives(const std::string& qid, const Qrels& qrels, const Collection& collection,
                                const SamplingConfig& config, std::string_view salt)
{
    config.validate();
    const auto* judged = qrels.judgments(qid);
    if (judged == nullptr) throw Error("qid '" + qid + "' has no qrels; positives unknown");

    std::vector<std::size_t> positives;
    for (const auto& [docid, grade] : *judged) {
        if (grade < 1) continue;
        if (auto idx = collection.index_of(docid)) positives.push_back(*idx);
    }
    std::sort(positives.begin(), positives.end());
    positives.erase(std::unique(positives.begin(), positives.end()), positives.end());

    const std::size_t available = collection.size() - positives.size();
    const std::size_t want = std::min(config.negatives_per_query, available);
    std::string key(salt);
    key += ':';
    key += qid;
    auto rng = Xoshiro256::for_key(config.seed, key);

    // Draw ranks in [0, available) (Floyd's algorithm), then map rank r to the r-th
    // non-positive document in collection order.
    std::vector<std::size_t> ranks;
    ranks.reserve(want);
    if (want == available) {
        ranks.resize(available);
        std::iota(ranks.begin(), ranks.end(), std::size_t{0});
    } else {
        std::unordered_set<std::size_t> chosen;
        chosen.reserve(want * 2);
        for (std::size_t j = available - want; j < available; ++j) {
            auto t = static_cast<std::size_t>(rng.below(j + 1));
            if (chosen.insert(t).second) {
                ranks.push_back(t);
            } else {
                chosen.insert(j);
                ranks.push_back(j);
            }
        }
    }
    rng.shuffle(std::span<std::size_t>(ranks));

    NegativeSample out;
    out.short_pool = available < config.negatives_per_query;
    out.docids.reserve(ranks.size());
    for (auto r : ranks) {
        std::size_t idx = r;
        for (auto p : positives) {
            if (p <= idx) {
                ++idx;
            } else {
                break;
            }
        }
        out.docids.push_back(collection[idx].docid);
    }
    return out;
}

TriplesSummary build_triples(const QuerySet& train, const Qrels& qrels, const Collection& collection,
                             const SamplingConfig& config, std::size_t triples_per_positive,
                             const std::function<void(const Triple&)>& sink, std::string_view salt)
{
    config.validate();
    if (train.empty()) throw Error("training split is empty");
    if (triples_per_positive < 1) throw ConfigError("triples_per_positive must be >= 1");
    TriplesSummary summary;
    for (const auto& q : train.queries()) {
        const auto positives = qrels.relevant(q.qid, 1);
        if (positives.empty()) continue;
        for (const auto& p : positives) {
            if (collection.find(p) == nullptr) {
                throw IntegrityError("positive '" + p + "' of " + q.qid + " is not in the collection");
            }
        }
        auto pool = sample_negatives(q.qid, qrels, collection, config, salt);
        if (pool.short_pool) ++summary.short_pools;
        const std::size_t per = std::min(triples_per_positive, pool.docids.size());
        for (std::size_t j = 0; j < positives.size(); ++j) {
            ++summary.positives;
            for (std::size_t i = 0; i < per; ++i) {
                const auto& neg = pool.docids[(j * triples_per_positive + i) % pool.docids.size()];
                sink(Triple{q.qid, positives[j], neg});
                ++summary.triples;
            }
        }
    }
    return summary;
}

TriplesSummary write_triples(const QuerySet& train, const Qrels& qrels, const Collection& collection,
                             const SamplingConfig& config, std::size_t triples_per_positive,
                             const std::filesystem::path& ids_path, const std::filesystem::path& text_path,
                             std::string_view salt)
{
    AtomicFile ids(ids_path);
    AtomicFile text(text_path);
    auto summary = build_triples(
        train, qrels, collection, config, triples_per_positive,
        [&](const Triple& t) {
            ids.stream() << t.qid << '\t' << t.positive_docid << '\t' << t.negative_docid << '\n';
            text.stream() << sanitize_text(train.find(t.qid)->text) << '\t'
                          << sanitize_text(collection.find(t.positive_docid)->text) << '\t'
                          << sanitize_text(collection.find(t.negative_docid)->text) << '\n';
        },
        salt);
    ids.commit();
    text.commit();
    return summary;
}

StatsReport corpus_stats(const Collection& collection, const QuerySet& queries)
{
    StatsReport r;
    r.num_docs = collection.size();
    r.num_queries = queries.size();
    std::vector<double> lens;
    lens.reserve(collection.size());
    for (const auto& d : collection.documents()) {
        lens.push_back(static_cast<double>(whitespace_tokens(d.text).size()));
    }
    r.mean_len = mean(lens);
    auto q = tukey_hinges(std::move(lens));
    r.q1_len = q.q1;
    r.median_len = q.median;
    r.q3_len = q.q3;
    r.responses_per_query =
        queries.empty() ? 0.0 : static_cast<double>(collection.size()) / static_cast<double>(queries.size());
    return r;
}

void write_dataset(const BuiltDataset& data, const SplitManifest& manifest, const DatasetBuildConfig& config,
                   const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_queries(data.queries, dir / "queries.tsv");
    write_manifest(manifest, dir / "manifest.tsv");
    std::map<Split, QuerySet> splits;
    for (auto s : kAllSplits) {
        splits[s] = select_split(data.queries, manifest, s);
        write_queries(splits[s], dir / ("queries." + std::string(to_string(s)) + ".tsv"));
    }

    std::map<Source, TriplesSummary> triples;
    for (auto source : {Source::human, Source::llm}) {
        const fs::path sub = dir / std::string(to_string(source));
        fs::create_directories(sub);
        write_collection(data.collection(source), sub / "collection.tsv");
        write_qrels(data.qrels(source), sub / "qrels.tsv");
        for (auto s : kAllSplits) {
            write_qrels(restrict_qrels(data.qrels(source), splits[s]),
                        sub / ("qrels." + std::string(to_string(s)) + ".tsv"));
        }
        if (config.emit_triples && !splits[Split::train].empty()) {
            triples[source] = write_triples(splits[Split::train], data.qrels(source), data.collection(source),
                                            config.sampling, config.triples_per_positive,
                                            sub / "triples.train.ids.tsv", sub / "triples.train.text.tsv",
                                            to_string(source));
        }
    }

    AtomicFile meta(dir / "build-metadata.txt");
    auto& out = meta.stream();
    out << "format_version\t1\n";
    out << "split_mechanism\t" << (manifest.from_file ? "manifest" : "seeded-stratified") << '\n';
    if (!manifest.from_file) out << "split_seed\t" << manifest.seed << '\n';
    out << "sampling_seed\t" << config.sampling.seed << '\n';
    out << "sampling_rng\txoshiro256** seeded via splitmix64(seed ^ fnv1a64(source:qid))\n";
    out << "negatives_per_query\t" << config.sampling.negatives_per_query << '\n';
    out << "triples_per_positive\t" << config.triples_per_positive << '\n';
    out << "queries\t" << data.queries.size() << '\n';
    for (auto s : kAllSplits) out << "queries." << to_string(s) << '\t' << manifest.count(s) << '\n';
    for (auto source : {Source::human, Source::llm}) {
        out << to_string(source) << ".documents\t" << data.collection(source).size() << '\n';
        out << to_string(source) << ".qrels\t" << data.qrels(source).num_entries() << '\n';
        if (triples.count(source)) {
            out << to_string(source) << ".triples\t" << triples[source].triples << '\n';
            out << to_string(source) << ".short_pools\t" << triples[source].short_pools << '\n';
        }
    }
    meta.commit();
}

}  // namespace qarank
