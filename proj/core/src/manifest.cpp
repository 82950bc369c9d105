#include "readmit/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"

namespace readmit {

std::uint64_t fnv1a_hash(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for hashing: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hash(buf.str());
}

void write_manifest(const std::filesystem::path& manifest_file,
                    const std::string& subcommand,
                    const std::string& resolved_config_json,
                    const std::vector<std::filesystem::path>& outputs) {
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(resolved_config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: resolved config is not JSON: ") +
                      e.what());
  }
  nlohmann::json out_entries = nlohmann::json::array();
  for (const auto& path : outputs) {
    out_entries.push_back({{"path", path.string()},
                           {"content_hash", hash_hex(hash_file(path))}});
  }
  nlohmann::json doc = {
      {"schema_version", 1},
      {"tool", "readmit"},
      {"tool_version", std::string(kToolVersion)},
      {"subcommand", subcommand},
      {"config", std::move(config)},
      {"config_hash", hash_hex(fnv1a_hash(resolved_config_json))},
      {"outputs", std::move(out_entries)},
  };
  std::ofstream out(manifest_file, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write manifest: " + manifest_file.string());
  }
  out << doc.dump(2) << '\n';
}

std::string load_config_text(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + file.string() + " is not valid JSON: " +
                      e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc.contains("subcommand") &&
      doc.contains("tool")) {
    return doc["config"].dump();
  }
  return text;
}

}  // namespace readmit
