#include "tiltxter/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <openssl/evp.h>

#include "tiltxter/bytes.hpp"

namespace tiltxter::cli {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

FileDigest digest_file(const std::string& path) {
    const auto bytes = read_file(path);
    return {path, sha256_hex(bytes), bytes.size()};
}

nlohmann::json RunManifest::to_json() const {
    auto files = [](const std::vector<FileDigest>& v) {
        auto arr = nlohmann::json::array();
        for (const auto& f : v) arr.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        return arr;
    };
    return {{"tool", "tiltxter"},   {"version", kToolVersion}, {"command", command}, {"config", config},
            {"seeds", seeds},       {"inputs", files(inputs)}, {"outputs", files(outputs)},
            {"results", results}};
}

std::string manifest_path_for(const std::string& output) { return output + ".manifest.json"; }

std::string write_manifest(const RunManifest& m, const std::string& output) {
    const auto path = manifest_path_for(output);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << m.to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
    return path;
}

}  // namespace tiltxter::cli
