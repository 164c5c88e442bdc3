#include "qarank/bm25.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "qarank/error.hpp"
#include "qarank/io.hpp"

namespace qarank {

namespace {

constexpr char kMagic[8] = {'Q', 'A', 'R', 'K', 'B', 'M', '2', '5'};

unsigned resolve_threads(unsigned requested, std::size_t work)
{
    unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(1, work)));
}

// Runs fn(i) for i in [0, n) over a fixed pool of threads. Rethrows the first exception.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    threads = resolve_threads(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

template <typename T>
void write_pod(std::ostream& out, T value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

void write_str(std::ostream& out, const std::string& s)
{
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path)
{
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
        throw ParseError(path + ": truncated index file");
    }
    return value;
}

std::string read_str(std::istream& in, const std::string& path)
{
    auto len = read_pod<std::uint32_t>(in, path);
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) throw ParseError(path + ": truncated index file");
    return s;
}

}  // namespace

void Bm25Params::validate() const
{
    if (!(k1 > 0.0) || !std::isfinite(k1)) {
        throw ConfigError("k1 must be > 0, got " + std::to_string(k1));
    }
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("b must be in [0, 1], got " + std::to_string(b));
}

std::vector<std::string> unique_terms(const std::vector<std::string>& terms)
{
    std::vector<std::string> out;
    std::unordered_set<std::string_view> seen;
    for (const auto& t : terms) {
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

Bm25Index Bm25Index::build(const Collection& collection, const TokenizerConfig& tokenizer,
                           unsigned threads)
{
    if (collection.empty()) throw Error("cannot index an empty collection");

    const std::size_t n = collection.size();
    // Per-document (term, tf) lists, tokenized in parallel and merged in document order.
    std::vector<std::vector<std::pair<std::string, std::uint32_t>>> doc_terms(n);
    std::vector<std::uint32_t> lens(n);
    parallel_for(n, threads, [&](std::size_t i) {
        auto tokens = tokenize(collection[i].text, tokenizer);
        lens[i] = static_cast<std::uint32_t>(tokens.size());
        std::unordered_map<std::string, std::uint32_t> tf;
        std::vector<std::string> order;
        for (auto& tok : tokens) {
            auto [it, inserted] = tf.try_emplace(tok, 0);
            if (inserted) order.push_back(tok);
            ++it->second;
        }
        auto& out = doc_terms[i];
        out.reserve(order.size());
        for (auto& t : order) out.emplace_back(t, tf[t]);
    });

    Bm25Index index;
    index.tokenizer_ = tokenizer;
    index.docids_.reserve(n);
    index.doc_numbers_.reserve(n);
    index.doc_len_ = std::move(lens);
    for (std::size_t i = 0; i < n; ++i) {
        index.docids_.push_back(collection[i].docid);
        index.doc_numbers_.emplace(collection[i].docid, static_cast<std::uint32_t>(i));
        for (auto& [term, tf] : doc_terms[i]) {
            auto [it, inserted] =
                index.term_ids_.try_emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
            if (inserted) {
                index.terms_.push_back(term);
                index.postings_.emplace_back();
            }
            index.postings_[it->second].push_back(Posting{static_cast<std::uint32_t>(i), tf});
        }
        doc_terms[i].clear();
        doc_terms[i].shrink_to_fit();
    }
    index.stats_.num_docs = n;
    for (auto len : index.doc_len_) index.stats_.total_len += len;
    index.stats_.avg_len = static_cast<double>(index.stats_.total_len) / static_cast<double>(n);
    index.stats_.num_terms = index.terms_.size();
    return index;
}

std::optional<std::uint32_t> Bm25Index::doc_number(std::string_view docid) const
{
    auto it = doc_numbers_.find(std::string(docid));
    if (it == doc_numbers_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Bm25Index::doc_len(std::string_view docid) const
{
    auto doc = doc_number(docid);
    if (!doc) throw Error("unknown docid '" + std::string(docid) + "'");
    return doc_len_[*doc];
}

std::optional<std::uint32_t> Bm25Index::term_id(std::string_view term) const
{
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Bm25Index::df(std::string_view term) const
{
    auto id = term_id(term);
    return id ? static_cast<std::uint32_t>(postings_[*id].size()) : 0;
}

double Bm25Index::term_weight(std::uint32_t df) const
{
    const double n = static_cast<double>(stats_.num_docs);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Bm25Index::rsj(std::string_view term) const { return term_weight(df(term)); }

PostingList Bm25Index::postings(std::string_view term) const
{
    PostingList list{std::string(term), {}};
    if (auto id = term_id(term)) {
        list.postings.reserve(postings_[*id].size());
        for (const auto& p : postings_[*id]) list.postings.emplace_back(docids_[p.doc], p.tf);
    }
    return list;
}

double Bm25Index::score(const std::vector<std::string>& query_terms, std::string_view docid,
                        const Bm25Params& params) const
{
    params.validate();
    auto doc = doc_number(docid);
    if (!doc) throw Error("unknown docid '" + std::string(docid) + "'");
    const double len = static_cast<double>(doc_len_[*doc]);
    const double avg = stats_.avg_len;
    double total = 0.0;
    for (const auto& term : unique_terms(query_terms)) {
        auto id = term_id(term);
        if (!id) continue;
        const auto& list = postings_[*id];
        auto it = std::lower_bound(list.begin(), list.end(), *doc,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == list.end() || it->doc != *doc) continue;
        const double tf = it->tf;
        const double w = term_weight(static_cast<std::uint32_t>(list.size()));
        total += w * (tf / (tf + params.k1 * ((1.0 - params.b) + params.b * len / avg)));
    }
    return total;
}

std::vector<ScoredDoc> Bm25Index::search(const std::vector<std::string>& query_terms,
                                         std::size_t k, const Bm25Params& params) const
{
    params.validate();
    if (k < 1) throw ConfigError("k must be >= 1");
    const double avg = stats_.avg_len;

    // Term-at-a-time accumulation; terms are visited in query order so each document's
    // sum is formed in the same order as a per-document evaluation.
    std::vector<double> acc(docids_.size(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<char> seen(docids_.size(), 0);
    for (const auto& term : unique_terms(query_terms)) {
        auto id = term_id(term);
        if (!id) continue;
        const auto& list = postings_[*id];
        const double w = term_weight(static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            const double tf = p.tf;
            const double len = static_cast<double>(doc_len_[p.doc]);
            acc[p.doc] += w * (tf / (tf + params.k1 * ((1.0 - params.b) + params.b * len / avg)));
            if (!seen[p.doc]) {
                seen[p.doc] = 1;
                touched.push_back(p.doc);
            }
        }
    }

    auto before = [&](std::uint32_t a, std::uint32_t b) {
        return ranks_before(acc[a], docids_[a], acc[b], docids_[b]);
    };
    std::erase_if(touched, [&](std::uint32_t d) { return !(acc[d] > 0.0); });
    if (touched.size() > k) {
        std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(k),
                          touched.end(), before);
        touched.resize(k);
    } else {
        std::sort(touched.begin(), touched.end(), before);
    }
    std::vector<ScoredDoc> out;
    out.reserve(touched.size());
    for (auto d : touched) out.push_back(ScoredDoc{docids_[d], acc[d]});
    return out;
}

Run Bm25Index::search_topk(const Query& query, std::size_t k, const Bm25Params& params,
                           const std::string& tag) const
{
    Run run;
    append_ranking(run, query.qid, search(analyze(query.text), k, params), tag);
    return run;
}

Run Bm25Index::batch_retrieve(const QuerySet& queries, std::size_t k, const Bm25Params& params,
                              const std::string& tag, unsigned threads) const
{
    params.validate();
    if (k < 1) throw ConfigError("k must be >= 1");
    std::vector<std::vector<ScoredDoc>> results(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        results[i] = search(analyze(queries[i].text), k, params);
    });
    Run run;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        append_ranking(run, queries[i].qid, std::move(results[i]), tag);
    }
    return run;
}

void Bm25Index::save(const std::filesystem::path& path) const
{
    AtomicFile file(path);
    auto& out = file.stream();
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<std::uint8_t>(tokenizer_.stem));
    write_pod(out, static_cast<std::uint8_t>(tokenizer_.stopwords));
    write_pod(out, static_cast<std::uint64_t>(docids_.size()));
    for (std::size_t i = 0; i < docids_.size(); ++i) {
        write_pod(out, doc_len_[i]);
        write_str(out, docids_[i]);
    }
    write_pod(out, static_cast<std::uint64_t>(terms_.size()));
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        write_str(out, terms_[t]);
        write_pod(out, static_cast<std::uint32_t>(postings_[t].size()));
        for (const auto& p : postings_[t]) {
            write_pod(out, p.doc);
            write_pod(out, p.tf);
        }
    }
    file.commit();
}

Bm25Index Bm25Index::load(const std::filesystem::path& path)
{
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + name + "' for reading");
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw ParseError(name + ": not a qarank BM25 index");
    }
    auto version = read_pod<std::uint32_t>(in, name);
    if (version != kFormatVersion) {
        throw ParseError(name + ": unsupported index version " + std::to_string(version));
    }
    Bm25Index index;
    index.tokenizer_.stem = read_pod<std::uint8_t>(in, name) != 0;
    index.tokenizer_.stopwords = read_pod<std::uint8_t>(in, name) != 0;
    auto num_docs = read_pod<std::uint64_t>(in, name);
    if (num_docs == 0) throw ParseError(name + ": index has no documents");
    index.docids_.reserve(num_docs);
    index.doc_len_.reserve(num_docs);
    for (std::uint64_t i = 0; i < num_docs; ++i) {
        index.doc_len_.push_back(read_pod<std::uint32_t>(in, name));
        index.docids_.push_back(read_str(in, name));
        if (!index.doc_numbers_.emplace(index.docids_.back(), static_cast<std::uint32_t>(i)).second) {
            throw IntegrityError(name + ": duplicate docid '" + index.docids_.back() + "'");
        }
    }
    auto num_terms = read_pod<std::uint64_t>(in, name);
    index.terms_.reserve(num_terms);
    index.postings_.resize(num_terms);
    for (std::uint64_t t = 0; t < num_terms; ++t) {
        index.terms_.push_back(read_str(in, name));
        index.term_ids_.emplace(index.terms_.back(), static_cast<std::uint32_t>(t));
        auto df = read_pod<std::uint32_t>(in, name);
        auto& list = index.postings_[t];
        list.reserve(df);
        for (std::uint32_t j = 0; j < df; ++j) {
            Posting p{read_pod<std::uint32_t>(in, name), read_pod<std::uint32_t>(in, name)};
            if (p.doc >= num_docs || p.tf == 0 || (!list.empty() && p.doc <= list.back().doc)) {
                throw IntegrityError(name + ": corrupt posting list for '" + index.terms_.back() + "'");
            }
            list.push_back(p);
        }
    }
    index.stats_.num_docs = num_docs;
    for (auto len : index.doc_len_) index.stats_.total_len += len;
    index.stats_.avg_len =
        static_cast<double>(index.stats_.total_len) / static_cast<double>(num_docs);
    index.stats_.num_terms = num_terms;
    return index;
}

}  // namespace qarank
