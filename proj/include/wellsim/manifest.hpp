#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace wellsim {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestFormatVersion = 1;

std::string sha256_hex(const std::string& data);

/// Hash of the canonical (sorted-key, compact) JSON text.
std::string config_hash(const nlohmann::json& config);

std::string utc_timestamp();

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
};

}  // namespace wellsim
