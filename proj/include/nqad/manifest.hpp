#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nqad {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// FNV-1a 64 over the file bytes; fast reproducibility check, not a
/// cryptographic digest.
uint64_t file_digest(const std::string& path);

struct ManifestInput {
    std::string path;
    uint64_t digest = 0;
};

/// Writes a JSON run manifest (resolved config, seed, input digests,
/// artifact version, timestamp). Called before any compute starts.
void write_manifest(const std::string& path, const std::string& command,
                    const std::string& resolved_config, uint64_t seed,
                    const std::vector<ManifestInput>& inputs);

}  // namespace nqad
