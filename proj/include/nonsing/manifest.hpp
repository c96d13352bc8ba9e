#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace nonsing {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything needed to rerun one CLI invocation.
struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();  // every option, defaults included
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::string tool_version = kToolVersion;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// `out.json` -> `out.json.manifest.json`.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

/// Writes the manifest beside `output`; returns the path written.
std::filesystem::path write_manifest(const RunManifest& m, const std::filesystem::path& output);

}  // namespace nonsing
