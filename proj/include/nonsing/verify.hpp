#pragma once

// Empirical check that the margin bounds dominate the margins actually
// reachable inside the perturbation balls. Candidates are random points
// (uniform interior, random corners, and every corner when few coordinates
// move) plus a signed-gradient ascent on each pairwise margin.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "nonsing/bounds.hpp"
#include "nonsing/network.hpp"

namespace nonsing {

struct VerifyOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  int pgd_steps = 100;
  bool include_pgd = true;
  /// Enumerate all corners when at most this many coordinates move.
  std::size_t corner_enumeration_limit = 12;
  double slack = 1e-9;
  /// Test hook: multiplies tau before comparing. Anything but 1 corrupts the bound.
  double tau_scale = 1.0;
};

struct PairCheck {
  Eigen::Index class_i = 0;
  Eigen::Index class_j = 0;
  double clean_margin = 0.0;
  double bound = 0.0;
  double max_observed = 0.0;
};

struct Violation {
  Eigen::Index class_i = 0;
  Eigen::Index class_j = 0;
  double observed = 0.0;
  double bound = 0.0;
  long sample = -1;  // -1 for the gradient-ascent point
  Eigen::VectorXd input;
  std::vector<Eigen::MatrixXd> weights;
};

struct VerifyReport {
  std::vector<PairCheck> pairs;
  std::size_t candidates = 0;
  std::size_t violations = 0;
  std::optional<Violation> first_violation;

  bool ok() const { return violations == 0; }
};

/// Bound on f^{ij} for one ordered class pair.
using PairBound = std::function<double(Eigen::Index, Eigen::Index)>;

/// Checks `bound` against candidates drawn from the element-wise balls of
/// `budget` around (x, W).
VerifyReport verify_against(const Mlp<double>& net, const Eigen::VectorXd& x, const PerturbationBudget<double>& budget,
                            const PairBound& bound, const VerifyOptions& options);

/// Joint bound margin + tau + zeta.
VerifyReport verify_bound(const Mlp<double>& net, const Eigen::VectorXd& x, const PerturbationBudget<double>& budget,
                          const VerifyOptions& options);

/// Single-layer bound for W^N (1-based) and the input.
VerifyReport verify_single_layer_bound(const Mlp<double>& net, const Eigen::VectorXd& x, std::size_t n, double eps_n,
                                       double eps_x, const VerifyOptions& options);

nlohmann::json to_json(const VerifyReport& report);

}  // namespace nonsing
