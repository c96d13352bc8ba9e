#include "nonsing/dataset.hpp"

#include <numeric>

#include "nonsing/errors.hpp"
#include "nonsing/rng.hpp"

namespace nonsing {

void Dataset::validate(int classes) const {
  if (labels.empty()) throw ConfigError("dataset is empty");
  if (inputs.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw DimensionError("dataset: input columns vs labels", static_cast<long>(labels.size()), inputs.cols());
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ConfigError("dataset: label " + std::to_string(labels[i]) + " of example " + std::to_string(i) +
                        " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.split = data.split;
  out.inputs.resize(data.inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= data.size()) throw IndexError("subset: example", static_cast<long>(i), static_cast<long>(data.size()));
    out.inputs.col(static_cast<Eigen::Index>(k)) = data.inputs.col(static_cast<Eigen::Index>(i));
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count >= n) return idx;
  CounterRng rng(seed, /*stream=*/0x5A3D1E);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(count);
  return idx;
}

}  // namespace nonsing
