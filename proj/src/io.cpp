#include "qarank/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include "qarank/error.hpp"

namespace qarank {

namespace {

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return in;
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn)
{
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        fn(lineno, std::string_view(line));
    }
}

int parse_int(std::string_view field, const fs::path& path, std::size_t lineno,
              const char* what)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(path.string(), lineno,
                         std::string(what) + " '" + std::string(field) + "' is not an integer");
    }
    return value;
}

double parse_double(std::string_view field, const fs::path& path, std::size_t lineno)
{
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError(path.string(), lineno,
                         "score '" + std::string(field) + "' is not a number");
    }
    return value;
}

}  // namespace

AtomicFile::AtomicFile(fs::path path) : path_(std::move(path)), tmp_(path_)
{
    tmp_ += ".tmp";
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot open '" + tmp_.string() + "' for writing");
}

AtomicFile::~AtomicFile()
{
    if (!committed_) {
        out_.close();
        std::error_code ec;
        fs::remove(tmp_, ec);
    }
}

void AtomicFile::commit()
{
    out_.flush();
    if (!out_) throw Error("write to '" + tmp_.string() + "' failed");
    out_.close();
    fs::rename(tmp_, path_);
    committed_ = true;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string_view> split_whitespace(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (i < line.size()) {
        while (i < line.size() && is_sep(line[i])) ++i;
        auto start = i;
        while (i < line.size() && !is_sep(line[i])) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

Collection read_collection(const fs::path& path, Source default_source)
{
    Collection collection;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto fields = split_fields(line, '\t');
        if (fields.size() != 2) {
            throw ParseError(path.string(), lineno,
                             "expected 2 tab-separated fields, got " +
                                 std::to_string(fields.size()));
        }
        if (fields[0].empty()) throw ParseError(path.string(), lineno, "empty docid");
        Document doc{std::string(fields[0]), std::string(fields[1]),
                     source_from_docid(fields[0]).value_or(default_source)};
        try {
            collection.add(std::move(doc));
        } catch (const IntegrityError& e) {
            throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return collection;
}

void write_collection(const Collection& collection, const fs::path& path)
{
    AtomicFile file(path);
    auto& out = file.stream();
    for (const auto& d : collection.documents()) {
        out << d.docid << '\t' << sanitize_text(d.text) << '\n';
    }
    file.commit();
}

QuerySet read_queries(const fs::path& path)
{
    QuerySet queries;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto fields = split_fields(line, '\t');
        if (fields.size() != 2) {
            throw ParseError(path.string(), lineno,
                             "expected 2 tab-separated fields, got " +
                                 std::to_string(fields.size()));
        }
        try {
            queries.add(Query{std::string(fields[0]), std::string(fields[1]), {}, {}});
        } catch (const IntegrityError& e) {
            throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return queries;
}

void write_queries(const QuerySet& queries, const fs::path& path)
{
    AtomicFile file(path);
    for (const auto& q : queries.queries()) {
        file.stream() << q.qid << '\t' << sanitize_text(q.text) << '\n';
    }
    file.commit();
}

Qrels read_qrels(const fs::path& path)
{
    Qrels qrels;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto fields = split_whitespace(line);
        if (fields.empty()) return;
        if (fields.size() != 4) {
            throw ParseError(path.string(), lineno,
                             "expected 4 fields, got " + std::to_string(fields.size()));
        }
        int grade = parse_int(fields[3], path, lineno, "grade");
        try {
            qrels.add(std::string(fields[0]), std::string(fields[2]), grade);
        } catch (const IntegrityError& e) {
            throw IntegrityError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return qrels;
}

void write_qrels(const Qrels& qrels, const fs::path& path)
{
    AtomicFile file(path);
    for (const auto& [qid, judged] : qrels.entries()) {
        for (const auto& [docid, grade] : judged) {
            file.stream() << qid << " 0 " << docid << ' ' << grade << '\n';
        }
    }
    file.commit();
}

std::string format_run_line(const RunEntry& e)
{
    char score[64];
    std::snprintf(score, sizeof score, "%.6f", e.score);
    std::string line;
    line.reserve(e.qid.size() + e.docid.size() + e.tag.size() + 32);
    line += e.qid;
    line += " Q0 ";
    line += e.docid;
    line += ' ';
    line += std::to_string(e.rank);
    line += ' ';
    line += score;
    line += ' ';
    line += e.tag;
    return line;
}

void check_run_integrity(const Run& run)
{
    struct Seen {
        std::vector<const RunEntry*> entries;
    };
    std::map<std::string_view, Seen> by_qid;
    std::set<std::pair<std::string_view, std::string_view>> pairs;
    for (const auto& e : run.entries) {
        if (e.tag.empty() || e.tag.find_first_of(" \t\r\n") != std::string::npos) {
            throw IntegrityError("run tag '" + e.tag + "' must be a non-empty token");
        }
        if (!pairs.emplace(e.qid, e.docid).second) {
            throw IntegrityError("duplicate (" + e.qid + ", " + e.docid + ") in run");
        }
        by_qid[e.qid].entries.push_back(&e);
    }
    for (auto& [qid, seen] : by_qid) {
        auto& list = seen.entries;
        std::sort(list.begin(), list.end(),
                  [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i]->rank != static_cast<int>(i + 1)) {
                throw IntegrityError("qid " + std::string(qid) + ": expected rank " +
                                     std::to_string(i + 1) + ", found " +
                                     std::to_string(list[i]->rank));
            }
            if (i > 0 && list[i]->score > list[i - 1]->score) {
                throw IntegrityError("qid " + std::string(qid) + ": score increases at rank " +
                                     std::to_string(i + 1));
            }
        }
    }
}

void write_run(const Run& run, std::ostream& out)
{
    check_run_integrity(run);
    for (const auto& e : run.entries) out << format_run_line(e) << '\n';
}

void write_run(const Run& run, const fs::path& path)
{
    check_run_integrity(run);
    AtomicFile file(path);
    for (const auto& e : run.entries) file.stream() << format_run_line(e) << '\n';
    file.commit();
}

Run read_run(const fs::path& path)
{
    Run run;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto fields = split_whitespace(line);
        if (fields.empty()) return;
        if (fields.size() != 6) {
            throw ParseError(path.string(), lineno,
                             "expected 6 fields, got " + std::to_string(fields.size()));
        }
        RunEntry e;
        e.qid = std::string(fields[0]);
        e.docid = std::string(fields[2]);
        e.rank = parse_int(fields[3], path, lineno, "rank");
        e.score = parse_double(fields[4], path, lineno);
        e.tag = std::string(fields[5]);
        run.entries.push_back(std::move(e));
    });
    try {
        check_run_integrity(run);
    } catch (const IntegrityError& e) {
        throw IntegrityError(path.string() + ": " + e.what());
    }
    return run;
}

ValidationReport validate_run(const Run& run, const Qrels& qrels, std::size_t depth)
{
    ValidationReport report;
    report.requested_depth = depth;
    std::set<std::pair<std::string_view, std::string_view>> pairs;
    for (const auto& e : run.entries) {
        ++report.depth_per_qid[e.qid];
        if (!pairs.emplace(e.qid, e.docid).second) report.duplicates.emplace_back(e.qid, e.docid);
    }
    for (const auto& qid : run.qids()) {
        if (!qrels.contains(qid)) report.unjudged_qids.push_back(qid);
        if (report.depth_per_qid[qid] < depth) report.shallow_qids.push_back(qid);
    }
    return report;
}

std::vector<Triple> read_triples_ids(const fs::path& path)
{
    std::vector<Triple> out;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split_fields(line, '\t');
        if (f.size() != 3) {
            throw ParseError(path.string(), lineno,
                             "expected 3 tab-separated fields, got " + std::to_string(f.size()));
        }
        out.push_back(Triple{std::string(f[0]), std::string(f[1]), std::string(f[2])});
    });
    return out;
}

std::vector<TextTriple> read_triples_text(const fs::path& path)
{
    std::vector<TextTriple> out;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split_fields(line, '\t');
        if (f.size() != 3) {
            throw ParseError(path.string(), lineno,
                             "expected 3 tab-separated fields, got " + std::to_string(f.size()));
        }
        out.push_back(TextTriple{std::string(f[0]), std::string(f[1]), std::string(f[2])});
    });
    return out;
}

void write_top1000(const Run& run, const QuerySet& queries, const Collection& collection,
                   const fs::path& path)
{
    AtomicFile file(path);
    for (const auto& e : run.entries) {
        const auto* q = queries.find(e.qid);
        if (q == nullptr) throw IntegrityError("run qid '" + e.qid + "' not in query set");
        const auto* d = collection.find(e.docid);
        if (d == nullptr) throw IntegrityError("run docid '" + e.docid + "' not in collection");
        file.stream() << e.qid << '\t' << e.docid << '\t' << sanitize_text(q->text) << '\t'
                      << sanitize_text(d->text) << '\n';
    }
    file.commit();
}

std::vector<CandidateRow> read_top1000(const fs::path& path)
{
    std::vector<CandidateRow> out;
    for_each_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split_fields(line, '\t');
        if (f.size() != 4) {
            throw ParseError(path.string(), lineno,
                             "expected 4 tab-separated fields, got " + std::to_string(f.size()));
        }
        out.push_back(CandidateRow{std::string(f[0]), std::string(f[1]), std::string(f[2]),
                                   std::string(f[3])});
    });
    return out;
}

}  // namespace qarank
