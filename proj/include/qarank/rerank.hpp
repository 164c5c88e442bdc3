#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "qarank/types.hpp"

namespace qarank {

struct TruncationConfig {
    std::size_t max_query_tokens = 30;
    std::size_t max_passage_tokens = 200;

    void validate() const;
};

/// First `limit` whitespace tokens joined by single spaces. Text with at most `limit`
/// tokens is returned unchanged.
std::string truncate_tokens(std::string_view text, std::size_t limit);

struct ScoreRequest {
    std::uint64_t id = 0;
    std::string query;
    std::string passage;
};

struct ScoreResponse {
    std::uint64_t id = 0;
    double score = 0.0;
};

struct ShutdownCommand {};

// Wire format: one JSON object per line.
//   request  {"id":<int>,"query":"<text>","passage":"<text>"}
//   response {"id":<int>,"score":<float>}
//   shutdown {"cmd":"shutdown"}
std::string encode_request(const ScoreRequest& request);
std::string encode_response(const ScoreResponse& response);
std::string encode_shutdown();
/// Throws ProtocolError on malformed lines or non-finite scores.
ScoreResponse decode_response(std::string_view line);
std::variant<ScoreRequest, ShutdownCommand> decode_request(std::string_view line);

/// Throws ProtocolError on duplicate ids.
void check_request_ids(std::span<const ScoreRequest> requests);
/// Orders responses to match `requests`. Throws ProtocolError on missing, extra,
/// duplicate ids or non-finite scores.
std::vector<ScoreResponse> match_responses(std::span<const ScoreRequest> requests,
                                           std::vector<ScoreResponse> responses);

/// Scores (query, passage) pairs. Implementations must be safe to call from several
/// threads at once.
class Scorer {
  public:
    virtual ~Scorer() = default;
    /// One response per request, in request order.
    virtual std::vector<ScoreResponse> score(std::span<const ScoreRequest> requests) = 0;
};

/// In-process scorer around a plain function.
class FunctionScorer : public Scorer {
  public:
    using Fn = std::function<double(const ScoreRequest&)>;
    explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
    std::vector<ScoreResponse> score(std::span<const ScoreRequest> requests) override;

  private:
    Fn fn_;
};

/// Buffered line I/O over file descriptors. Owns the descriptors.
class LineChannel {
  public:
    LineChannel(int read_fd, int write_fd);
    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;
    ~LineChannel();

    /// False on end of stream. Throws ProtocolError on read failure.
    bool read_line(std::string& line);
    /// True when a complete line can be read without blocking.
    bool line_ready();
    void write(std::string_view data);
    void close_write();

  private:
    bool fill(int timeout_ms);

    int read_fd_;
    int write_fd_;
    bool socket_;
    std::string buffer_;
    std::size_t pos_ = 0;
    bool eof_ = false;
};

struct ScorerClientOptions {
    std::size_t batch_size = 32;  // requests per flush
    std::chrono::milliseconds timeout{300000};
};

/// Client for the line protocol over a child process (`exec:<shell command>`) or a TCP
/// socket (`tcp:<host>:<port>`). Requests are pipelined; responses are matched by id and
/// may arrive in any order. Concurrent score() calls share the connection.
class StreamScorer : public Scorer {
  public:
    static std::unique_ptr<StreamScorer> connect(const std::string& endpoint,
                                                 ScorerClientOptions options = {});
    StreamScorer(std::unique_ptr<LineChannel> channel, int child_pid, ScorerClientOptions options);
    ~StreamScorer() override;

    std::vector<ScoreResponse> score(std::span<const ScoreRequest> requests) override;

    /// Sends the shutdown command, closes the stream and reaps the child. Returns the
    /// child's exit status (0 for sockets).
    int shutdown();

  private:
    void reader_loop();
    void fail(const std::string& why);

    std::unique_ptr<LineChannel> channel_;
    int child_pid_;
    ScorerClientOptions options_;
    std::mutex write_mutex_;
    std::mutex state_mutex_;
    std::condition_variable done_cv_;
    std::map<std::uint64_t, std::optional<double>> pending_;
    std::optional<std::string> failure_;
    std::thread reader_;
    bool shut_down_ = false;
};

struct ServeOptions {
    /// Answer every group of immediately available requests in reverse order.
    bool reverse_order = false;
};

/// Reference server loop for the line protocol, used by stub scorers. Returns when the
/// shutdown command arrives (true) or the input ends (false). Malformed lines are
/// answered with {"id":<id>,"error":"..."} when the id is readable and skipped otherwise.
bool serve_protocol(LineChannel& channel, const std::function<double(const ScoreRequest&)>& fn,
                    ServeOptions options = {});

struct RerankConfig {
    std::size_t depth = 1000;
    TruncationConfig truncation;
    std::string tag = "rerank";
    unsigned threads = 1;  // qids re-ranked concurrently against the scorer
    std::optional<std::filesystem::path> checkpoint;
};

/// Raised when scoring fails part way. Qids finished before the failure are in the
/// checkpoint (when configured); no partial ranking of a failed qid is kept.
class RerankAborted : public std::runtime_error {
  public:
    RerankAborted(const std::string& what, std::size_t completed)
        : std::runtime_error(what), completed_(completed)
    {}
    std::size_t completed() const noexcept { return completed_; }

  private:
    std::size_t completed_;
};

/// Re-scores the top `depth` candidates of each qid and orders them by descending
/// scorer score (ties by descending docid). Candidates beyond depth are dropped; ranks
/// are renumbered. Throws IntegrityError when a qid or docid has no text.
Run rerank(const Run& first_stage, const QuerySet& queries, const Collection& collection,
           Scorer& scorer, const RerankConfig& config = {});

}  // namespace qarank
