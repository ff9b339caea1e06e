#pragma once

// Reproducibility record written beside every artifact a command produces.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tiltxter::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct FileDigest {
    std::string path;
    std::string sha256;  // lowercase hex
    std::uintmax_t bytes = 0;
};

/// Throws std::runtime_error when the file cannot be read.
FileDigest digest_file(const std::string& path);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json seeds = nlohmann::json::object();
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    nlohmann::json results = nlohmann::json::object();

    nlohmann::json to_json() const;
};

std::string manifest_path_for(const std::string& output);
/// Writes `<output>.manifest.json` and returns its path.
std::string write_manifest(const RunManifest& m, const std::string& output);

}  // namespace tiltxter::cli
