#include "nonsing/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace nonsing {

nlohmann::json checkpoint_to_json(const Mlp<double>& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& w : net.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c) row[static_cast<std::size_t>(c)] = w(r, c);
      rows.push_back(std::move(row));
    }
    layers.push_back(std::move(rows));
  }
  return {{"format_version", kCheckpointFormatVersion}, {"layers", std::move(layers)}};
}

Mlp<double> checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("checkpoint: top level must be an object");
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != kCheckpointFormatVersion) {
    throw FormatError("checkpoint: format_version must be " + std::to_string(kCheckpointFormatVersion));
  }
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw FormatError("checkpoint: missing layers array");

  std::vector<Matrix<double>> layers;
  std::size_t index = 0;
  for (const auto& rows : doc["layers"]) {
    ++index;
    const std::string where = "checkpoint: layer " + std::to_string(index);
    if (!rows.is_array() || rows.empty()) throw FormatError(where + " must be a nonempty array of rows");
    const std::size_t cols = rows.front().is_array() ? rows.front().size() : 0;
    if (cols == 0) throw FormatError(where + " has an empty or non-array row");
    Matrix<double> w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (!row.is_array() || row.size() != cols) {
        throw FormatError(where + " row " + std::to_string(r) + " has length " +
                          std::to_string(row.is_array() ? row.size() : 0) + ", expected " + std::to_string(cols));
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row[c].is_number()) throw FormatError(where + " has a non-numeric entry");
        const double v = row[c].get<double>();
        if (!std::isfinite(v)) throw FormatError(where + " has a non-finite entry");
        w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
    }
    layers.push_back(std::move(w));
  }
  try {
    return Mlp<double>(std::move(layers));
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Mlp<double>& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(net).dump() << '\n';
}

Mlp<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace nonsing
