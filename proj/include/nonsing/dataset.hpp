#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nonsing {

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

/// Labelled examples stored column-wise: inputs.col(i) is example i.
struct Dataset {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
  Eigen::Index input_dim() const noexcept { return inputs.rows(); }
  bool empty() const noexcept { return labels.empty(); }

  /// Throws ConfigError unless nonempty, consistent, and labels < classes.
  void validate(int classes) const;
};

/// Examples at `indices`, in that order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// First `count` positions of a seeded permutation of [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace nonsing
