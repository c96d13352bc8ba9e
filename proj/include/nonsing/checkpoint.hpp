#pragma once

#include <filesystem>

#include <json.hpp>

#include "nonsing/network.hpp"

namespace nonsing {

inline constexpr int kCheckpointFormatVersion = 1;

/// {"layers": [W^1, ..., W^L], "format_version": 1}, matrices as nested row arrays.
nlohmann::json checkpoint_to_json(const Mlp<double>& net);

/// Validates format version, rectangular rows, chain compatibility and finiteness.
Mlp<double> checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const Mlp<double>& net, const std::filesystem::path& path);
Mlp<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace nonsing
