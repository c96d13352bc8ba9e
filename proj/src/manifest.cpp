#include "nonsing/manifest.hpp"

#include <fstream>

#include "nonsing/errors.hpp"
#include "nonsing/rng.hpp"

namespace nonsing {

nlohmann::json to_json(const RunManifest& m) {
  return {{"subcommand", m.subcommand}, {"config", m.config},   {"seed", m.seed},
          {"rng", CounterRng::kAlgorithm}, {"inputs", m.inputs}, {"outputs", m.outputs},
          {"tool_version", m.tool_version}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

std::filesystem::path write_manifest(const RunManifest& m, const std::filesystem::path& output) {
  const auto path = manifest_path_for(output);
  std::ofstream f(path);
  if (!f) throw Error("cannot write manifest " + path.string());
  f << to_json(m).dump(2) << '\n';
  if (!f) throw Error("failed writing manifest " + path.string());
  return path;
}

}  // namespace nonsing
