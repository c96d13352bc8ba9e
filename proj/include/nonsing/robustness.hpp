#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "nonsing/attack.hpp"
#include "nonsing/dataset.hpp"
#include "nonsing/network.hpp"

namespace nonsing {

/// n evenly spaced values from 0 to `max` inclusive.
std::vector<double> linspace_from_zero(double max, int n);

struct GridSpec {
  std::vector<double> eps_x_values = linspace_from_zero(0.30, 7);
  std::vector<double> eps_w_values = linspace_from_zero(0.030, 7);
  AttackConfig attack;  // joint mode; radii are overwritten per cell
  std::size_t sample_count = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GridCell {
  double eps_x = 0.0;
  double eps_w = 0.0;
  double accuracy = 0.0;
};

struct GridEvalResult {
  std::vector<GridCell> cells;  // eps_x outer, eps_w inner
  double auc = 0.0;
};

/// Fraction of `data` still classified correctly after a per-example attack
/// at radii (eps_x, eps_w); each example starts again from the clean weights.
double eval_cell(const Mlp<double>& net, const Dataset& data, double eps_x, double eps_w,
                 const AttackConfig& attack_template);

/// 100 x mean cell accuracy. Throws ConfigError unless the cells cover the
/// full eps_x_count x eps_w_count lattice exactly once.
double auc_score(const std::vector<GridCell>& cells, std::size_t eps_x_count, std::size_t eps_w_count);

/// Evaluates every cell on a seeded subset of `data`.
GridEvalResult run_grid(const Mlp<double>& net, const Dataset& data, const GridSpec& spec);

void write_grid_csv(const GridEvalResult& result, std::ostream& out);

nlohmann::json grid_spec_to_json(const GridSpec& spec);

}  // namespace nonsing
