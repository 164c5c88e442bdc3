// Deterministic scorer speaking the line protocol on stdin/stdout or a TCP port.
//
//   qarank-stub-scorer --mode constant|id|passage-number|overlap [--reverse] [--listen PORT]
//                      [--fail-after N]

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <unordered_set>

#include <CLI11.hpp>

#include "qarank/rerank.hpp"
#include "qarank/tokenizer.hpp"

namespace {

double passage_number(const std::string& text)
{
    auto pos = text.find_first_of("0123456789");
    if (pos == std::string::npos) return 0.0;
    return std::strtod(text.c_str() + pos, nullptr);
}

double overlap(const std::string& query, const std::string& passage)
{
    auto q = qarank::tokenize(query);
    auto p = qarank::tokenize(passage);
    std::unordered_set<std::string> terms(p.begin(), p.end());
    double hits = 0.0;
    for (const auto& t : q) hits += terms.count(t);
    return hits;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stub cross-encoder scorer for the qarank line protocol"};
    std::string mode = "constant";
    double constant = 1.0;
    bool reverse = false;
    int port = -1;
    long fail_after = -1;
    app.add_option("--mode", mode, "Scoring rule")
        ->check(CLI::IsMember({"constant", "id", "passage-number", "overlap"}));
    app.add_option("--value", constant, "Score for --mode constant");
    app.add_flag("--reverse", reverse, "Answer queued requests in reverse order");
    app.add_option("--listen", port, "Serve one TCP connection on this port (0 picks one; printed on stdout)");
    app.add_option("--fail-after", fail_after, "Exit with status 3 after this many responses");
    CLI11_PARSE(app, argc, argv);

    long served = 0;
    auto fn = [&](const qarank::ScoreRequest& r) -> double {
        if (fail_after >= 0 && served++ >= fail_after) std::_Exit(3);
        if (mode == "id") return static_cast<double>(r.id);
        if (mode == "passage-number") return passage_number(r.passage);
        if (mode == "overlap") return overlap(r.query, r.passage);
        return constant;
    };

    try {
        if (port < 0) {
            qarank::LineChannel channel(0, 1);
            qarank::serve_protocol(channel, fn, {reverse});
            return 0;
        }
        int srv = ::socket(AF_INET, SOCK_STREAM, 0);
        int yes = 1;
        ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 1) != 0) {
            std::perror("listen");
            return 1;
        }
        socklen_t len = sizeof addr;
        ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
        std::cout << ntohs(addr.sin_port) << std::endl;
        int fd = ::accept(srv, nullptr, nullptr);
        ::close(srv);
        if (fd < 0) {
            std::perror("accept");
            return 1;
        }
        qarank::LineChannel channel(fd, fd);
        qarank::serve_protocol(channel, fn, {reverse});
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
