#include "qarank/types.hpp"

#include <algorithm>
#include <set>

#include "qarank/error.hpp"

namespace qarank {

std::string_view to_string(Domain d)
{
    switch (d) {
    case Domain::medicine: return "medicine";
    case Domain::finance: return "finance";
    case Domain::reddit: return "reddit";
    case Domain::wiki_openqa: return "wiki_openqa";
    case Domain::wiki_csai: return "wiki_csai";
    }
    return "unknown";
}

std::string_view to_string(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "unknown";
}

std::string_view to_string(Source s) { return s == Source::human ? "human" : "llm"; }

std::optional<Domain> parse_domain(std::string_view name)
{
    if (name == "medicine") return Domain::medicine;
    if (name == "finance") return Domain::finance;
    if (name == "reddit" || name == "reddit_eli5") return Domain::reddit;
    if (name == "wiki_openqa" || name == "open_qa") return Domain::wiki_openqa;
    if (name == "wiki_csai") return Domain::wiki_csai;
    return std::nullopt;
}

std::optional<Split> parse_split(std::string_view name)
{
    if (name == "train") return Split::train;
    if (name == "validation" || name == "dev") return Split::validation;
    if (name == "test") return Split::test;
    return std::nullopt;
}

std::optional<Source> parse_source(std::string_view name)
{
    if (name == "human") return Source::human;
    if (name == "llm" || name == "chatgpt") return Source::llm;
    return std::nullopt;
}

std::optional<Source> source_from_docid(std::string_view docid)
{
    if (docid.starts_with("h_")) return Source::human;
    if (docid.starts_with("c_")) return Source::llm;
    return std::nullopt;
}

Collection::Collection(std::vector<Document> docs)
{
    docs_.reserve(docs.size());
    by_id_.reserve(docs.size());
    for (auto& d : docs) add(std::move(d));
}

void Collection::add(Document doc)
{
    auto [it, inserted] = by_id_.emplace(doc.docid, docs_.size());
    if (!inserted) throw IntegrityError("duplicate docid '" + doc.docid + "'");
    docs_.push_back(std::move(doc));
}

const Document* Collection::find(std::string_view docid) const
{
    auto it = by_id_.find(std::string(docid));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::optional<std::size_t> Collection::index_of(std::string_view docid) const
{
    auto it = by_id_.find(std::string(docid));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

QuerySet::QuerySet(std::vector<Query> queries)
{
    queries_.reserve(queries.size());
    for (auto& q : queries) add(std::move(q));
}

void QuerySet::add(Query q)
{
    if (q.qid.empty()) throw IntegrityError("empty qid");
    if (trim(q.text).empty()) throw IntegrityError("query '" + q.qid + "' has empty text");
    auto [it, inserted] = by_id_.emplace(q.qid, queries_.size());
    if (!inserted) throw IntegrityError("duplicate qid '" + q.qid + "'");
    queries_.push_back(std::move(q));
}

const Query* QuerySet::find(std::string_view qid) const
{
    auto it = by_id_.find(std::string(qid));
    return it == by_id_.end() ? nullptr : &queries_[it->second];
}

void Qrels::add(const std::string& qid, const std::string& docid, int grade)
{
    if (grade < 0) {
        throw IntegrityError("negative grade " + std::to_string(grade) + " for (" + qid + ", " +
                             docid + ")");
    }
    auto& judged = by_qid_[qid];
    auto [it, inserted] = judged.emplace(docid, grade);
    if (!inserted) throw IntegrityError("duplicate judgment (" + qid + ", " + docid + ")");
    ++count_;
}

const Qrels::Judgments* Qrels::judgments(std::string_view qid) const
{
    auto it = by_qid_.find(qid);
    return it == by_qid_.end() ? nullptr : &it->second;
}

int Qrels::grade(std::string_view qid, std::string_view docid) const
{
    const auto* j = judgments(qid);
    if (j == nullptr) return 0;
    auto it = j->find(docid);
    return it == j->end() ? 0 : it->second;
}

std::vector<std::string> Qrels::relevant(std::string_view qid, int threshold) const
{
    std::vector<std::string> out;
    if (const auto* j = judgments(qid)) {
        for (const auto& [docid, g] : *j) {
            if (g >= threshold) out.push_back(docid);
        }
    }
    return out;
}

std::vector<std::string> Run::qids() const
{
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    for (const auto& e : entries) {
        if (seen.insert(e.qid).second) out.push_back(e.qid);
    }
    return out;
}

std::map<std::string, std::vector<std::string>, std::less<>> Run::rankings() const
{
    std::map<std::string, std::vector<const RunEntry*>, std::less<>> grouped;
    for (const auto& e : entries) grouped[e.qid].push_back(&e);
    std::map<std::string, std::vector<std::string>, std::less<>> out;
    for (auto& [qid, list] : grouped) {
        std::stable_sort(list.begin(), list.end(),
                         [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
        auto& docs = out[qid];
        docs.reserve(list.size());
        for (const auto* e : list) docs.push_back(e->docid);
    }
    return out;
}

void append_ranking(Run& run, const std::string& qid, std::vector<ScoredDoc> docs,
                    const std::string& tag)
{
    std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        return ranks_before(a.score, a.docid, b.score, b.docid);
    });
    int rank = 1;
    for (auto& d : docs) {
        run.entries.push_back(RunEntry{qid, std::move(d.docid), rank++, d.score, tag});
    }
}

std::string sanitize_text(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool in_break = false;
    for (char c : text) {
        if (c == '\t' || c == '\n' || c == '\r') {
            if (!in_break) out.push_back(' ');
            in_break = true;
        } else {
            out.push_back(c);
            in_break = false;
        }
    }
    return out;
}

std::string_view trim(std::string_view text)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    auto last = text.find_last_not_of(ws);
    return text.substr(first, last - first + 1);
}

}  // namespace qarank
