#include "nonsing/verify.hpp"

#include <algorithm>
#include <cmath>

#include "nonsing/attack.hpp"
#include "nonsing/errors.hpp"
#include "nonsing/linalg.hpp"
#include "nonsing/rng.hpp"

namespace nonsing {

namespace {

struct Point {
  Eigen::VectorXd x;
  std::vector<Eigen::MatrixXd> w;
};

Eigen::VectorXd logits_of(const Point& p) {
  Eigen::VectorXd a = p.x;
  for (std::size_t m = 0; m + 1 < p.w.size(); ++m) a = (p.w[m] * a).cwiseMax(0.0);
  return p.w.back() * a;
}

// Gradient of logit_i - logit_j with respect to the input and every matrix.
Point margin_gradient(const Point& p, Eigen::Index i, Eigen::Index j) {
  const std::size_t depth = p.w.size();
  std::vector<Eigen::VectorXd> acts{p.x};
  std::vector<Eigen::VectorXd> pre;
  for (std::size_t m = 0; m + 1 < depth; ++m) {
    pre.push_back(p.w[m] * acts.back());
    acts.push_back(pre.back().cwiseMax(0.0));
  }
  Point g;
  g.w.resize(depth);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(p.w.back().rows());
  delta(i) += 1.0;
  delta(j) -= 1.0;
  for (std::size_t m = depth; m-- > 0;) {
    g.w[m] = delta * acts[m].transpose();
    delta = p.w[m].transpose() * delta;
    if (m > 0) delta = delta.cwiseProduct((pre[m - 1].array() > 0.0).cast<double>().matrix());
  }
  g.x = delta;
  return g;
}

class Checker {
 public:
  Checker(const Mlp<double>& net, const Eigen::VectorXd& x, const PairBound& bound, double slack)
      : slack_(slack) {
    const Eigen::Index k = net.class_count();
    const Eigen::VectorXd clean = forward(net, x);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) continue;
        const double margin = clean(i) - clean(j);
        report_.pairs.push_back({i, j, margin, bound(i, j), margin});
      }
    }
  }

  void check(const Point& p, long sample) {
    ++report_.candidates;
    const Eigen::VectorXd z = logits_of(p);
    for (auto& pc : report_.pairs) {
      const double f = z(pc.class_i) - z(pc.class_j);
      pc.max_observed = std::max(pc.max_observed, f);
      if (!(f <= pc.bound + slack_)) {
        ++report_.violations;
        if (!report_.first_violation) {
          report_.first_violation = Violation{pc.class_i, pc.class_j, f, pc.bound, sample, p.x, p.w};
        }
      }
    }
  }

  VerifyReport take() { return std::move(report_); }

 private:
  double slack_;
  VerifyReport report_;
};

// Builds a point whose every moving coordinate is center + draw(radius).
template <typename Draw>
Point perturbed(const Mlp<double>& net, const Eigen::VectorXd& x, const PerturbationBudget<double>& budget,
                Draw&& draw) {
  Point p{x, net.layers()};
  if (budget.eps_x > 0) {
    for (Eigen::Index c = 0; c < p.x.size(); ++c) p.x(c) += draw(budget.eps_x);
  }
  for (std::size_t m = 0; m < p.w.size(); ++m) {
    const double r = budget.eps_layers[m];
    if (r <= 0) continue;
    for (Eigen::Index c = 0; c < p.w[m].size(); ++c) p.w[m].data()[c] += draw(r);
  }
  return p;
}

std::size_t moving_coordinates(const Mlp<double>& net, const PerturbationBudget<double>& budget) {
  std::size_t n = budget.eps_x > 0 ? static_cast<std::size_t>(net.input_dim()) : 0;
  for (std::size_t m = 0; m < net.depth(); ++m) {
    if (budget.eps_layers[m] > 0) n += static_cast<std::size_t>(net.layers()[m].size());
  }
  return n;
}

void ascend(const Mlp<double>& net, const Eigen::VectorXd& x, const PerturbationBudget<double>& budget,
            Eigen::Index i, Eigen::Index j, int steps, Checker& checker) {
  Point p{x, net.layers()};
  const double step_x = 2.5 * budget.eps_x / steps;
  for (int s = 0; s < steps; ++s) {
    const Point g = margin_gradient(p, i, j);
    if (budget.eps_x > 0) {
      p.x = clip_to_ball(p.x + step_x * g.x.unaryExpr([](double v) { return sign(v); }), x, budget.eps_x);
    }
    for (std::size_t m = 0; m < p.w.size(); ++m) {
      const double r = budget.eps_layers[m];
      if (r <= 0) continue;
      const double step = 2.5 * r / steps;
      p.w[m] = clip_to_ball(p.w[m] + step * g.w[m].unaryExpr([](double v) { return sign(v); }),
                            net.layers()[m], r);
    }
  }
  checker.check(p, -1);
}

}  // namespace

VerifyReport verify_against(const Mlp<double>& net, const Eigen::VectorXd& x, const PerturbationBudget<double>& budget,
                            const PairBound& bound, const VerifyOptions& options) {
  detail::check_input(net, x, "verify: input length");
  budget.validate(net.depth());
  if (options.pgd_steps < 1) throw ConfigError("verify: pgd_steps must be >= 1");

  Checker checker(net, x, bound, options.slack);
  checker.check(Point{x, net.layers()}, 0);

  CounterRng rng(options.seed, 0xB0D5);
  for (std::size_t s = 0; s < options.samples; ++s) {
    Point p;
    switch (s % 3) {
      case 0: p = perturbed(net, x, budget, [&](double r) { return rng.uniform(-r, r); }); break;
      case 1: p = perturbed(net, x, budget, [&](double r) { return r * rng.sign(); }); break;
      default: p = perturbed(net, x, budget, [&](double r) { return r * (static_cast<double>(rng.below(3)) - 1.0); });
    }
    checker.check(p, static_cast<long>(s) + 1);
  }

  const std::size_t n = moving_coordinates(net, budget);
  if (n > 0 && n <= options.corner_enumeration_limit) {
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      std::size_t bit = 0;
      const Point p = perturbed(net, x, budget, [&](double r) { return ((mask >> bit++) & 1U) ? r : -r; });
      checker.check(p, static_cast<long>(options.samples + 1 + mask));
    }
  }

  if (options.include_pgd && n > 0) {
    const Eigen::Index k = net.class_count();
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i != j) ascend(net, x, budget, i, j, options.pgd_steps, checker);
      }
    }
  }
  return checker.take();
}

VerifyReport verify_bound(const Mlp<double>& net, const Eigen::VectorXd& x, const PerturbationBudget<double>& budget,
                          const VerifyOptions& options) {
  const double scale = options.tau_scale;
  const PairBound bound = [&](Eigen::Index i, Eigen::Index j) {
    const auto r = margin_bound_joint(net, x, budget, i, j);
    return r.margin + scale * r.tau + r.zeta;
  };
  return verify_against(net, x, budget, bound, options);
}

VerifyReport verify_single_layer_bound(const Mlp<double>& net, const Eigen::VectorXd& x, std::size_t n, double eps_n,
                                       double eps_x, const VerifyOptions& options) {
  if (n < 1 || n > net.depth()) {
    throw IndexError("verify_single_layer_bound: layer N", static_cast<long>(n), static_cast<long>(net.depth()) + 1);
  }
  const auto budget = PerturbationBudget<double>::single_layer(net.depth(), n, eps_n, eps_x);
  const PairBound bound = [&](Eigen::Index i, Eigen::Index j) {
    return margin_bound_single_layer(net, x, n, eps_n, eps_x, i, j);
  };
  return verify_against(net, x, budget, bound, options);
}

nlohmann::json to_json(const VerifyReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.pairs) {
    pairs.push_back({{"i", p.class_i},
                     {"j", p.class_j},
                     {"clean_margin", p.clean_margin},
                     {"bound", p.bound},
                     {"max_observed", p.max_observed}});
  }
  nlohmann::json out{{"candidates", report.candidates}, {"violations", report.violations}, {"pairs", pairs}};
  if (report.first_violation) {
    const auto& v = *report.first_violation;
    out["first_violation"] = {
        {"i", v.class_i}, {"j", v.class_j}, {"observed", v.observed}, {"bound", v.bound}, {"sample", v.sample}};
  }
  return out;
}

}  // namespace nonsing
