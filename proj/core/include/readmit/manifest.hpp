#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace readmit {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::uint64_t fnv1a_hash(std::string_view bytes);
std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::filesystem::path& file);

// Writes the run manifest next to a command's outputs: the fully resolved
// configuration, its hash, the tool version, and the produced files.
// Re-running the subcommand with the manifest as its --config reproduces the
// outputs byte-identically.
void write_manifest(const std::filesystem::path& manifest_file,
                    const std::string& subcommand,
                    const std::string& resolved_config_json,
                    const std::vector<std::filesystem::path>& outputs);

// Reads a config file that may be either a plain config document or a
// manifest; for manifests the embedded resolved config is returned.
std::string load_config_text(const std::filesystem::path& file);

}  // namespace readmit
