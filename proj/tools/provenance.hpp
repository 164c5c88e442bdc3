#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace qarank::cli {

/// Hex SHA-256 of a file's bytes. Directories hash their regular files in path order.
std::string sha256_file(const std::filesystem::path& path);

/// Sidecar metadata for one output artifact: command line, seeds and parameters,
/// digests of every input, and a UTC timestamp.
struct Provenance {
    std::string subcommand;
    std::vector<std::string> argv;
    std::map<std::string, std::string> params;
    std::map<std::string, std::filesystem::path> inputs;

    /// `<dir>/metadata.json` for directories, `<file>.meta.json` otherwise.
    static std::filesystem::path metadata_path(const std::filesystem::path& artifact);
    void write(const std::filesystem::path& artifact) const;
};

/// Throws ConfigError when `path` exists (a non-empty directory, for directories) and
/// `force` is not set.
void require_writable(const std::filesystem::path& path, bool force);

}  // namespace qarank::cli
