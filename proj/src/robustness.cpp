#include "nonsing/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <utility>

#include "nonsing/errors.hpp"

namespace nonsing {

std::vector<double> linspace_from_zero(double max, int n) {
  if (n < 1) throw ConfigError("linspace_from_zero: need at least one value");
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (int k = 1; k < n; ++k) v[static_cast<std::size_t>(k)] = max * k / (n - 1);
  return v;
}

namespace {

void check_axis(const std::vector<double>& values, const char* name) {
  if (values.empty()) throw ConfigError(std::string("GridSpec: ") + name + " is empty");
  if (values.front() != 0.0) throw ConfigError(std::string("GridSpec: ") + name + " must start at 0");
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (!(values[k] > values[k - 1])) throw ConfigError(std::string("GridSpec: ") + name + " must be increasing");
  }
}

}  // namespace

void GridSpec::validate() const {
  check_axis(eps_x_values, "eps_x_values");
  check_axis(eps_w_values, "eps_w_values");
  if (sample_count == 0) throw ConfigError("GridSpec: sample_count must be positive");
  if (attack.mode != AttackMode::joint) throw ConfigError("GridSpec: the grid attack must be joint");
  attack.validate();
}

double eval_cell(const Mlp<double>& net, const Dataset& data, double eps_x, double eps_w,
                 const AttackConfig& attack_template) {
  if (data.empty()) throw ConfigError("eval_cell: empty subset");
  AttackConfig cfg = attack_template;
  cfg.eps_x = eps_x;
  cfg.eps_w = eps_w;
  cfg.validate();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto col = data.inputs.col(static_cast<Eigen::Index>(i));
    const int y = data.labels[i];
    const auto r = pgd(net, col, y, cfg);
    if (r.attacked_prediction == y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double auc_score(const std::vector<GridCell>& cells, std::size_t eps_x_count, std::size_t eps_w_count) {
  if (eps_x_count == 0 || eps_w_count == 0) throw ConfigError("auc_score: empty grid");
  if (cells.size() != eps_x_count * eps_w_count) {
    throw ConfigError("auc_score: expected " + std::to_string(eps_x_count * eps_w_count) + " cells, got " +
                      std::to_string(cells.size()));
  }
  std::set<std::pair<double, double>> seen;
  std::set<double> xs, ws;
  double sum = 0.0;
  for (const auto& c : cells) {
    if (!seen.emplace(c.eps_x, c.eps_w).second) throw ConfigError("auc_score: duplicate cell");
    xs.insert(c.eps_x);
    ws.insert(c.eps_w);
    sum += c.accuracy;
  }
  if (xs.size() != eps_x_count || ws.size() != eps_w_count) throw ConfigError("auc_score: missing cells");
  return 100.0 * sum / static_cast<double>(cells.size());
}

GridEvalResult run_grid(const Mlp<double>& net, const Dataset& data, const GridSpec& spec) {
  spec.validate();
  if (data.empty()) throw ConfigError("run_grid: empty dataset");
  const auto indices = sample_indices(data.size(), spec.sample_count, spec.seed);
  const Dataset sample = subset(data, indices);

  GridEvalResult out;
  for (double ex : spec.eps_x_values) {
    for (double ew : spec.eps_w_values) out.cells.push_back({ex, ew, eval_cell(net, sample, ex, ew, spec.attack)});
  }
  out.auc = auc_score(out.cells, spec.eps_x_values.size(), spec.eps_w_values.size());
  return out;
}

void write_grid_csv(const GridEvalResult& result, std::ostream& out) {
  out << "eps_x,eps_w,accuracy\n";
  out << std::setprecision(17);
  for (const auto& c : result.cells) out << c.eps_x << ',' << c.eps_w << ',' << c.accuracy << '\n';
}

nlohmann::json grid_spec_to_json(const GridSpec& spec) {
  return {{"eps_x_values", spec.eps_x_values},
          {"eps_w_values", spec.eps_w_values},
          {"sample_count", spec.sample_count},
          {"seed", spec.seed},
          {"attack",
           {{"mode", to_string(spec.attack.mode)},
            {"steps", spec.attack.steps},
            {"step_x", spec.attack.step_x},
            {"step_w", spec.attack.step_w},
            {"input_clamp", spec.attack.input_clamp
                                ? nlohmann::json::array({spec.attack.input_clamp->lo, spec.attack.input_clamp->hi})
                                : nlohmann::json()}}}};
}

}  // namespace nonsing
