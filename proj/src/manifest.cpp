#include "nqad/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "nqad/error.hpp"

namespace nqad {

uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for digest");
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    return h;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& resolved_config, uint64_t seed,
                    const std::vector<ManifestInput>& inputs) {
    nlohmann::json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = resolved_config;
    const auto now = std::chrono::system_clock::now();
    j["timestamp_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    auto arr = nlohmann::json::array();
    for (const auto& input : inputs) {
        char digest[20];
        snprintf(digest, sizeof(digest), "%016llx", static_cast<unsigned long long>(input.digest));
        arr.push_back({{"path", input.path}, {"fnv1a64", digest}});
    }
    j["inputs"] = arr;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest '" + path + "'");
    out << j.dump(2) << "\n";
}

}  // namespace nqad
