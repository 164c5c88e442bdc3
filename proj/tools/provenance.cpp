#include "provenance.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "qarank/error.hpp"
#include "qarank/io.hpp"

namespace qarank::cli {

namespace fs = std::filesystem;

namespace {

void digest_into(EVP_MD_CTX* ctx, const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for hashing");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
}

std::string utc_now()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char out[32];
    std::strftime(out, sizeof out, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return out;
}

}  // namespace

std::string sha256_file(const fs::path& path)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(path)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto rel = fs::relative(f, path).generic_string();
            EVP_DigestUpdate(ctx.get(), rel.data(), rel.size() + 1);
            digest_into(ctx.get(), f);
        }
    } else {
        digest_into(ctx.get(), path);
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string hex;
    char byte[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", md[i]);
        hex += byte;
    }
    return hex;
}

fs::path Provenance::metadata_path(const fs::path& artifact)
{
    if (fs::is_directory(artifact)) return artifact / "metadata.json";
    return fs::path(artifact.string() + ".meta.json");
}

void Provenance::write(const fs::path& artifact) const
{
    nlohmann::ordered_json j;
    j["tool"] = "qarank";
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    j["params"] = params;
    auto& in = j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [name, path] : inputs) {
        in[name] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
    }
    j["timestamp"] = utc_now();
    AtomicFile out(metadata_path(artifact));
    out.stream() << j.dump(2) << '\n';
    out.commit();
}

void require_writable(const fs::path& path, bool force)
{
    if (force || !fs::exists(path)) return;
    if (fs::is_directory(path) && fs::is_empty(path)) return;
    throw ConfigError("output '" + path.string() + "' exists; pass --force to overwrite");
}

}  // namespace qarank::cli
