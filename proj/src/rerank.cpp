#include "qarank/rerank.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_set>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "qarank/error.hpp"
#include "qarank/io.hpp"
#include "qarank/tokenizer.hpp"

extern char** environ;

namespace qarank {

using ordered_json = nlohmann::ordered_json;

void TruncationConfig::validate() const
{
    if (max_query_tokens < 1 || max_passage_tokens < 1) {
        throw ConfigError("truncation limits must be >= 1");
    }
}

std::string truncate_tokens(std::string_view text, std::size_t limit)
{
    auto tokens = whitespace_tokens(text);
    if (tokens.size() <= limit) return std::string(text);
    std::string out;
    for (std::size_t i = 0; i < limit; ++i) {
        if (i > 0) out.push_back(' ');
        out.append(tokens[i]);
    }
    return out;
}

// --- wire format ------------------------------------------------------------------------

namespace {

std::string dump(const ordered_json& j)
{
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ordered_json parse_line(std::string_view line)
{
    try {
        return ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError("malformed message '" + std::string(line.substr(0, 200)) + "': " + e.what());
    }
}

std::uint64_t read_id(const ordered_json& j)
{
    auto it = j.find("id");
    if (it != j.end() && it->is_number_unsigned()) return it->get<std::uint64_t>();
    throw ProtocolError("message has no non-negative integer id");
}

}  // namespace

std::string encode_request(const ScoreRequest& r)
{
    ordered_json j;
    j["id"] = r.id;
    j["query"] = r.query;
    j["passage"] = r.passage;
    return dump(j);
}

std::string encode_response(const ScoreResponse& r)
{
    ordered_json j;
    j["id"] = r.id;
    j["score"] = r.score;
    return dump(j);
}

std::string encode_shutdown() { return R"({"cmd":"shutdown"})"; }

ScoreResponse decode_response(std::string_view line)
{
    auto j = parse_line(line);
    if (!j.is_object()) throw ProtocolError("response is not a JSON object");
    ScoreResponse r;
    r.id = read_id(j);
    auto it = j.find("score");
    if (it == j.end()) {
        auto err = j.find("error");
        std::string why = err != j.end() && err->is_string() ? err->get<std::string>() : "no score";
        throw ProtocolError("scorer failed request " + std::to_string(r.id) + ": " + why);
    }
    if (!it->is_number()) throw ProtocolError("score of request " + std::to_string(r.id) + " is not a number");
    r.score = it->get<double>();
    if (!std::isfinite(r.score)) {
        throw ProtocolError("non-finite score for request " + std::to_string(r.id));
    }
    return r;
}

std::variant<ScoreRequest, ShutdownCommand> decode_request(std::string_view line)
{
    auto j = parse_line(line);
    if (!j.is_object()) throw ProtocolError("request is not a JSON object");
    if (auto cmd = j.find("cmd"); cmd != j.end()) {
        if (cmd->is_string() && cmd->get<std::string>() == "shutdown") return ShutdownCommand{};
        throw ProtocolError("unknown command");
    }
    ScoreRequest r;
    r.id = read_id(j);
    auto q = j.find("query");
    auto p = j.find("passage");
    if (q == j.end() || !q->is_string() || p == j.end() || !p->is_string()) {
        throw ProtocolError("request " + std::to_string(r.id) + " lacks string query/passage");
    }
    r.query = q->get<std::string>();
    r.passage = p->get<std::string>();
    return r;
}

void check_request_ids(std::span<const ScoreRequest> requests)
{
    std::unordered_set<std::uint64_t> ids;
    ids.reserve(requests.size());
    for (const auto& r : requests) {
        if (!ids.insert(r.id).second) throw ProtocolError("duplicate request id " + std::to_string(r.id));
    }
}

std::vector<ScoreResponse> match_responses(std::span<const ScoreRequest> requests,
                                           std::vector<ScoreResponse> responses)
{
    std::map<std::uint64_t, double> by_id;
    for (const auto& r : responses) {
        if (!std::isfinite(r.score)) throw ProtocolError("non-finite score for request " + std::to_string(r.id));
        if (!by_id.emplace(r.id, r.score).second) {
            throw ProtocolError("duplicate response id " + std::to_string(r.id));
        }
    }
    std::vector<ScoreResponse> out;
    out.reserve(requests.size());
    for (const auto& q : requests) {
        auto it = by_id.find(q.id);
        if (it == by_id.end()) throw ProtocolError("no response for request " + std::to_string(q.id));
        out.push_back(ScoreResponse{q.id, it->second});
        by_id.erase(it);
    }
    if (!by_id.empty()) {
        throw ProtocolError("response for unknown request " + std::to_string(by_id.begin()->first));
    }
    return out;
}

std::vector<ScoreResponse> FunctionScorer::score(std::span<const ScoreRequest> requests)
{
    check_request_ids(requests);
    std::vector<ScoreResponse> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(ScoreResponse{r.id, fn_(r)});
    return match_responses(requests, std::move(out));
}

// --- transport --------------------------------------------------------------------------

LineChannel::LineChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd)
{
    struct stat st {};
    socket_ = write_fd_ >= 0 && fstat(write_fd_, &st) == 0 && S_ISSOCK(st.st_mode);
}

LineChannel::~LineChannel()
{
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

bool LineChannel::fill(int timeout_ms)
{
    if (eof_) return false;
    pollfd pfd{read_fd_, POLLIN, 0};
    int rc = 0;
    do {
        rc = ::poll(&pfd, 1, timeout_ms);
    } while (rc < 0 && errno == EINTR);
    if (rc < 0) throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
    if (rc == 0) return false;
    char chunk[65536];
    ssize_t n = 0;
    do {
        n = ::read(read_fd_, chunk, sizeof chunk);
    } while (n < 0 && errno == EINTR);
    if (n < 0) throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
    if (n == 0) {
        eof_ = true;
        return false;
    }
    if (pos_ > 0 && pos_ * 2 > buffer_.size()) {
        buffer_.erase(0, pos_);
        pos_ = 0;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
    return true;
}

bool LineChannel::read_line(std::string& line)
{
    while (true) {
        auto nl = buffer_.find('\n', pos_);
        if (nl != std::string::npos) {
            line.assign(buffer_, pos_, nl - pos_);
            pos_ = nl + 1;
            return true;
        }
        if (eof_) {
            if (pos_ < buffer_.size()) {
                line.assign(buffer_, pos_, std::string::npos);
                pos_ = buffer_.size();
                return true;
            }
            return false;
        }
        fill(-1);
    }
}

bool LineChannel::line_ready()
{
    if (buffer_.find('\n', pos_) != std::string::npos) return true;
    while (fill(0)) {
        if (buffer_.find('\n', pos_) != std::string::npos) return true;
    }
    return eof_ && pos_ < buffer_.size();
}

void LineChannel::write(std::string_view data)
{
    while (!data.empty()) {
        ssize_t n = socket_ ? ::send(write_fd_, data.data(), data.size(), MSG_NOSIGNAL)
                            : ::write(write_fd_, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("write to scorer failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void LineChannel::close_write()
{
    if (write_fd_ < 0) return;
    if (socket_) {
        ::shutdown(write_fd_, SHUT_WR);
    } else if (write_fd_ != read_fd_) {
        ::close(write_fd_);
        write_fd_ = -1;
    }
}

std::unique_ptr<StreamScorer> StreamScorer::connect(const std::string& endpoint, ScorerClientOptions options)
{
    if (options.batch_size < 1) throw ConfigError("scorer batch size must be >= 1");
    if (endpoint.starts_with("exec:")) {
        const std::string command = endpoint.substr(5);
        int to_child[2];
        int from_child[2];
        if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
            throw ProtocolError(std::string("pipe failed: ") + std::strerror(errno));
        }
        // A dead scorer must surface as a write error, not kill the process.
        std::signal(SIGPIPE, SIG_IGN);
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
        const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
        pid_t pid = 0;
        int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(to_child[0]);
        ::close(from_child[1]);
        if (rc != 0) {
            ::close(to_child[1]);
            ::close(from_child[0]);
            throw ProtocolError("cannot start scorer '" + command + "': " + std::strerror(rc));
        }
        return std::make_unique<StreamScorer>(std::make_unique<LineChannel>(from_child[0], to_child[1]), pid,
                                              options);
    }
    if (endpoint.starts_with("tcp:")) {
        const std::string rest = endpoint.substr(4);
        auto colon = rest.rfind(':');
        if (colon == std::string::npos) throw ConfigError("tcp endpoint must be tcp:<host>:<port>");
        const std::string host = rest.substr(0, colon);
        const std::string port = rest.substr(colon + 1);
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* result = nullptr;
        if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &result); rc != 0) {
            throw ProtocolError("cannot resolve '" + rest + "': " + gai_strerror(rc));
        }
        int fd = -1;
        for (auto* ai = result; ai != nullptr; ai = ai->ai_next) {
            fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(result);
        if (fd < 0) throw ProtocolError("cannot connect to scorer at " + rest);
        int write_fd = ::fcntl(fd, F_DUPFD_CLOEXEC, 0);
        return std::make_unique<StreamScorer>(std::make_unique<LineChannel>(fd, write_fd), -1, options);
    }
    throw ConfigError("scorer endpoint must start with exec: or tcp:, got '" + endpoint + "'");
}

StreamScorer::StreamScorer(std::unique_ptr<LineChannel> channel, int child_pid, ScorerClientOptions options)
    : channel_(std::move(channel)), child_pid_(child_pid), options_(options)
{
    reader_ = std::thread([this] { reader_loop(); });
}

StreamScorer::~StreamScorer()
{
    try {
        shutdown();
    } catch (...) {
    }
}

void StreamScorer::fail(const std::string& why)
{
    std::lock_guard lock(state_mutex_);
    if (!failure_) failure_ = why;
    done_cv_.notify_all();
}

void StreamScorer::reader_loop()
{
    std::string line;
    try {
        while (channel_->read_line(line)) {
            if (trim(line).empty()) continue;
            auto response = decode_response(line);
            std::lock_guard lock(state_mutex_);
            auto it = pending_.find(response.id);
            if (it == pending_.end() || it->second.has_value()) {
                if (!failure_) failure_ = "unexpected response id " + std::to_string(response.id);
                done_cv_.notify_all();
                continue;
            }
            it->second = response.score;
            done_cv_.notify_all();
        }
        fail("scorer closed the stream");
    } catch (const std::exception& e) {
        fail(e.what());
    }
}

std::vector<ScoreResponse> StreamScorer::score(std::span<const ScoreRequest> requests)
{
    check_request_ids(requests);
    {
        std::lock_guard lock(state_mutex_);
        if (failure_) throw ProtocolError(*failure_);
        if (shut_down_) throw ProtocolError("scorer connection is shut down");
        for (const auto& r : requests) {
            if (pending_.count(r.id)) throw ProtocolError("request id " + std::to_string(r.id) + " already in flight");
        }
        for (const auto& r : requests) pending_.emplace(r.id, std::nullopt);
    }
    auto release = [&] {
        std::lock_guard lock(state_mutex_);
        for (const auto& r : requests) pending_.erase(r.id);
    };

    try {
        for (std::size_t start = 0; start < requests.size(); start += options_.batch_size) {
            const std::size_t end = std::min(requests.size(), start + options_.batch_size);
            std::string batch;
            for (std::size_t i = start; i < end; ++i) {
                batch += encode_request(requests[i]);
                batch += '\n';
            }
            std::lock_guard lock(write_mutex_);
            channel_->write(batch);
        }
    } catch (const ProtocolError& e) {
        release();
        throw;
    }

    std::unique_lock lock(state_mutex_);
    auto complete = [&] {
        if (failure_) return true;
        for (const auto& r : requests) {
            if (!pending_.at(r.id).has_value()) return false;
        }
        return true;
    };
    if (!done_cv_.wait_for(lock, options_.timeout, complete)) {
        for (const auto& r : requests) pending_.erase(r.id);
        throw ProtocolError("timed out waiting for scorer responses");
    }
    std::vector<ScoreResponse> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        auto& slot = pending_.at(r.id);
        if (slot) out.push_back(ScoreResponse{r.id, *slot});
    }
    for (const auto& r : requests) pending_.erase(r.id);
    if (out.size() != requests.size()) throw ProtocolError(failure_.value_or("scorer failed"));
    return out;
}

int StreamScorer::shutdown()
{
    {
        std::lock_guard lock(state_mutex_);
        if (shut_down_) return 0;
        shut_down_ = true;
    }
    try {
        std::lock_guard lock(write_mutex_);
        channel_->write(encode_shutdown() + "\n");
    } catch (const ProtocolError&) {
        // Scorer already gone; still reap it below.
    }
    channel_->close_write();
    if (reader_.joinable()) reader_.join();
    int status = 0;
    if (child_pid_ > 0) {
        while (::waitpid(child_pid_, &status, 0) < 0 && errno == EINTR) {
        }
        child_pid_ = -1;
        if (WIFEXITED(status)) return WEXITSTATUS(status);
        return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    }
    return 0;
}

bool serve_protocol(LineChannel& channel, const std::function<double(const ScoreRequest&)>& fn,
                    ServeOptions options)
{
    std::string line;
    std::vector<std::string> replies;
    auto flush = [&] {
        if (replies.empty()) return;
        if (options.reverse_order) std::reverse(replies.begin(), replies.end());
        std::string out;
        for (auto& r : replies) {
            out += r;
            out += '\n';
        }
        channel.write(out);
        replies.clear();
    };
    while (channel.read_line(line)) {
        if (!trim(line).empty()) {
            try {
                auto msg = decode_request(line);
                if (std::holds_alternative<ShutdownCommand>(msg)) {
                    flush();
                    return true;
                }
                const auto& req = std::get<ScoreRequest>(msg);
                replies.push_back(encode_response(ScoreResponse{req.id, fn(req)}));
            } catch (const std::exception& e) {
                try {
                    auto j = ordered_json::parse(line);
                    ordered_json err;
                    err["id"] = read_id(j);
                    err["error"] = e.what();
                    replies.push_back(dump(err));
                } catch (...) {
                    // No readable id; nothing to answer.
                }
            }
        }
        if (!options.reverse_order || !channel.line_ready()) flush();
    }
    flush();
    return false;
}

// --- re-ranking -------------------------------------------------------------------------

namespace {

struct Job {
    std::string qid;
    const std::string* query = nullptr;
    std::vector<std::pair<std::string, const std::string*>> candidates;  // docid, text
};

std::map<std::string, std::vector<RunEntry>> load_checkpoint(const std::filesystem::path& path)
{
    std::map<std::string, std::vector<RunEntry>> done;
    std::ifstream in(path, std::ios::binary);
    if (!in) return done;
    std::map<std::string, std::vector<RunEntry>> staged;
    std::string line;
    while (std::getline(in, line)) {
        auto f = split_whitespace(line);
        if (f.empty()) continue;
        if (f[0] == "#done" && f.size() == 3) {
            std::string qid(f[1]);
            std::size_t n = 0;
            auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), n);
            if (ec != std::errc{} || ptr != f[2].data() + f[2].size()) continue;
            auto it = staged.find(qid);
            std::size_t have = it == staged.end() ? 0 : it->second.size();
            if (have == n) done[qid] = it == staged.end() ? std::vector<RunEntry>{} : std::move(it->second);
            staged.erase(qid);
            continue;
        }
        if (f.size() != 6) continue;  // torn write from an aborted run
        RunEntry e;
        e.qid = std::string(f[0]);
        e.docid = std::string(f[2]);
        try {
            e.rank = std::stoi(std::string(f[3]));
            e.score = std::stod(std::string(f[4]));
        } catch (const std::exception&) {
            continue;
        }
        e.tag = std::string(f[5]);
        auto& entries = staged[e.qid];
        if (e.rank == 1) entries.clear();  // a rewrite after a torn write
        entries.push_back(std::move(e));
    }
    return done;
}

}  // namespace

Run rerank(const Run& first_stage, const QuerySet& queries, const Collection& collection, Scorer& scorer,
           const RerankConfig& config)
{
    config.truncation.validate();
    if (config.depth < 1) throw ConfigError("re-ranking depth must be >= 1");

    const auto order = first_stage.qids();
    const auto rankings = first_stage.rankings();
    std::vector<Job> jobs;
    jobs.reserve(order.size());
    for (const auto& qid : order) {
        const auto* q = queries.find(qid);
        if (q == nullptr) throw IntegrityError("no query text for qid '" + qid + "'");
        Job job{qid, &q->text, {}};
        const auto& docs = rankings.at(qid);
        for (std::size_t i = 0; i < std::min(config.depth, docs.size()); ++i) {
            const auto* d = collection.find(docs[i]);
            if (d == nullptr) throw IntegrityError("no text for docid '" + docs[i] + "' (qid " + qid + ")");
            job.candidates.emplace_back(docs[i], &d->text);
        }
        jobs.push_back(std::move(job));
    }

    std::map<std::string, std::vector<RunEntry>> finished;
    std::ofstream checkpoint;
    if (config.checkpoint) {
        finished = load_checkpoint(*config.checkpoint);
        if (config.checkpoint->has_parent_path()) std::filesystem::create_directories(config.checkpoint->parent_path());
        checkpoint.open(*config.checkpoint, std::ios::binary | std::ios::app);
        if (!checkpoint) throw Error("cannot open checkpoint '" + config.checkpoint->string() + "'");
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!finished.count(jobs[i].qid)) todo.push_back(i);
    }

    std::mutex result_mutex;
    std::atomic<std::uint64_t> next_id{0};
    std::atomic<std::size_t> next_job{0};
    std::atomic<bool> stop{false};
    std::optional<std::string> error;
    std::size_t completed = finished.size();

    auto work = [&] {
        while (!stop) {
            std::size_t k = next_job.fetch_add(1);
            if (k >= todo.size()) return;
            const Job& job = jobs[todo[k]];
            try {
                std::vector<ScoreRequest> requests;
                requests.reserve(job.candidates.size());
                const std::string query = truncate_tokens(*job.query, config.truncation.max_query_tokens);
                for (const auto& [docid, text] : job.candidates) {
                    requests.push_back(ScoreRequest{next_id.fetch_add(1), query,
                                                    truncate_tokens(*text, config.truncation.max_passage_tokens)});
                }
                std::vector<ScoreResponse> responses;
                if (!requests.empty()) responses = match_responses(requests, scorer.score(requests));
                std::vector<ScoredDoc> scored;
                scored.reserve(responses.size());
                for (std::size_t i = 0; i < responses.size(); ++i) {
                    scored.push_back(ScoredDoc{job.candidates[i].first, responses[i].score});
                }
                Run ranked;
                append_ranking(ranked, job.qid, std::move(scored), config.tag);

                std::lock_guard lock(result_mutex);
                if (checkpoint.is_open()) {
                    for (const auto& e : ranked.entries) checkpoint << format_run_line(e) << '\n';
                    checkpoint << "#done " << job.qid << ' ' << ranked.entries.size() << '\n';
                    checkpoint.flush();
                }
                finished[job.qid] = std::move(ranked.entries);
                ++completed;
            } catch (const std::exception& e) {
                std::lock_guard lock(result_mutex);
                if (!error) error = "qid " + job.qid + ": " + e.what();
                stop = true;
                return;
            }
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(std::max<std::size_t>(1, todo.size()))));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (error) throw RerankAborted("re-ranking aborted after " + std::to_string(completed) + " qids: " + *error, completed);

    Run out;
    for (const auto& job : jobs) {
        for (auto e : finished.at(job.qid)) {
            e.tag = config.tag;
            out.entries.push_back(std::move(e));
        }
    }
    return out;
}

}  // namespace qarank
