#pragma once

// Signed-gradient PGD on the input, the weights, or both at once. Each step
// takes one joint gradient of the cross-entropy at the current (W~, X~) and
// moves both iterates from it; there is no random start.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nonsing/errors.hpp"
#include "nonsing/linalg.hpp"
#include "nonsing/loss.hpp"
#include "nonsing/network.hpp"

namespace nonsing {

enum class AttackMode { input_only, weight_only, joint };

inline const char* to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::input_only: return "input_only";
    case AttackMode::weight_only: return "weight_only";
    case AttackMode::joint: return "joint";
  }
  return "?";
}

inline AttackMode parse_attack_mode(const std::string& s) {
  if (s == "input_only" || s == "input") return AttackMode::input_only;
  if (s == "weight_only" || s == "weight") return AttackMode::weight_only;
  if (s == "joint") return AttackMode::joint;
  throw ConfigError("unknown attack mode '" + s + "'");
}

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct AttackConfig {
  int steps = 100;
  double step_x = 0.01;
  double step_w = 0.0005;
  double eps_x = 0.0;
  double eps_w = 0.0;
  AttackMode mode = AttackMode::joint;
  std::optional<ValueRange> input_clamp = ValueRange{};

  bool moves_input() const { return mode != AttackMode::weight_only; }
  bool moves_weights() const { return mode != AttackMode::input_only; }

  void validate() const {
    if (steps < 1) throw ConfigError("AttackConfig: steps must be >= 1");
    if (!(step_x >= 0) || !(step_w >= 0)) throw ConfigError("AttackConfig: step sizes must be >= 0");
    if (!(eps_x >= 0) || !(eps_w >= 0)) throw ConfigError("AttackConfig: radii must be >= 0");
    if (input_clamp && !(input_clamp->lo <= input_clamp->hi)) {
      throw ConfigError("AttackConfig: input clamp needs lo <= hi");
    }
  }
};

template <typename Scalar>
struct AttackResult {
  Vector<Scalar> perturbed_input;
  std::vector<Matrix<Scalar>> perturbed_weights;
  Scalar final_loss{0};
  Eigen::Index clean_prediction{0};
  Eigen::Index attacked_prediction{0};
  bool prediction_flipped{false};
};

/// Element-wise projection of `value` onto [center - radius, center + radius].
template <typename DerivedV, typename DerivedC>
auto clip_to_ball(const Eigen::MatrixBase<DerivedV>& value, const Eigen::MatrixBase<DerivedC>& center,
                  typename DerivedV::Scalar radius) {
  using Scalar = typename DerivedV::Scalar;
  if (value.rows() != center.rows() || value.cols() != center.cols()) {
    throw DimensionError("clip_to_ball: shape", center.size(), value.size());
  }
  if (!(radius >= Scalar(0))) throw ConfigError("clip_to_ball: radius must be >= 0");
  return value.derived().array().max(center.array() - radius).min(center.array() + radius).matrix().eval();
}

/// Called after every iteration with (step index, X~, W~).
template <typename Scalar>
using PgdObserver =
    std::function<void(int, const Vector<Scalar>&, const std::vector<Matrix<Scalar>>&)>;

template <typename Scalar, typename Derived>
AttackResult<Scalar> pgd(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x, Eigen::Index y,
                         const AttackConfig& cfg, const PgdObserver<Scalar>& observer = {}) {
  cfg.validate();
  detail::check_input(net, x, "pgd: input length");
  detail::check_class(net, y, "pgd: label");
  const Scalar eps_x = static_cast<Scalar>(cfg.eps_x);
  const Scalar eps_w = static_cast<Scalar>(cfg.eps_w);
  const Scalar step_x = static_cast<Scalar>(cfg.step_x);
  const Scalar step_w = static_cast<Scalar>(cfg.step_w);

  const Vector<Scalar> clean_x = x;
  Vector<Scalar> xt = clean_x;
  std::vector<Matrix<Scalar>> weights = net.layers();
  const std::size_t depth = weights.size();

  // A zero radius pins that iterate at its center, so skip its gradient.
  const bool move_x = cfg.moves_input() && eps_x > Scalar(0);
  const bool move_w = cfg.moves_weights() && eps_w > Scalar(0);

  std::vector<Matrix<Scalar>> lo, hi;
  if (move_w) {
    for (const auto& w : net.layers()) {
      lo.push_back((w.array() - eps_w).matrix());
      hi.push_back((w.array() + eps_w).matrix());
    }
  }

  // The weight gradient of layer m is delta * a^T, so its sign is
  // sign(delta) * sign(a)^T and columns with a zero activation stay put.
  std::vector<Vector<Scalar>> acts(depth);
  Vector<Scalar> delta, back;
  for (int t = 0; t < cfg.steps && (move_x || move_w); ++t) {
    acts[0] = xt;
    for (std::size_t m = 1; m < depth; ++m) acts[m] = relu(weights[m - 1] * acts[m - 1]);
    const Vector<Scalar> logits = weights[depth - 1] * acts[depth - 1];
    const Scalar top = logits.maxCoeff();
    delta = (logits.array() - top).exp();
    delta /= delta.sum();
    delta(y) -= Scalar(1);

    for (std::size_t m = depth; m >= 1; --m) {
      auto& w = weights[m - 1];
      if (m > 1 || move_x) {
        back.noalias() = w.transpose() * delta;
        if (m > 1) back = (acts[m - 1].array() > Scalar(0)).select(back, Scalar(0));
      }
      if (move_w) {
        const Vector<Scalar> row_step = step_w * cwise_sign(delta);
        const auto& a = acts[m - 1];
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          const Scalar sa = sign(a(c));
          if (sa == Scalar(0)) continue;
          w.col(c) = (w.col(c) + sa * row_step).cwiseMax(lo[m - 1].col(c)).cwiseMin(hi[m - 1].col(c));
        }
      }
      if (m > 1 || move_x) delta.swap(back);
    }
    if (move_x) {
      xt = clip_to_ball((xt + step_x * cwise_sign(delta)).eval(), clean_x, eps_x);
      if (cfg.input_clamp) {
        xt = xt.cwiseMax(Scalar(cfg.input_clamp->lo)).cwiseMin(Scalar(cfg.input_clamp->hi));
      }
    }
    if (observer) observer(t, xt, weights);
  }

  AttackResult<Scalar> r;
  const auto logits = forward(Mlp<Scalar>(weights), xt);
  r.final_loss = cross_entropy(logits, y);
  r.clean_prediction = predict(net, clean_x);
  r.attacked_prediction = argmax(logits);
  r.prediction_flipped = r.clean_prediction != r.attacked_prediction;
  r.perturbed_input = std::move(xt);
  r.perturbed_weights = std::move(weights);
  return r;
}

/// Input-only PGD applied to every column of `xs` with shared clean weights.
/// Column b follows the same iteration as pgd(net, xs.col(b), labels[b], cfg)
/// with mode input_only; the batch is just evaluated together.
template <typename Scalar, typename Derived>
Matrix<Scalar> pgd_input_batch(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& xs,
                               std::span<const int> labels, const AttackConfig& cfg) {
  cfg.validate();
  const Matrix<Scalar> clean = xs;
  Matrix<Scalar> xt = clean;
  const Scalar eps_x = static_cast<Scalar>(cfg.eps_x);
  if (!(eps_x > Scalar(0))) return xt;
  const Scalar step_x = static_cast<Scalar>(cfg.step_x);
  for (int t = 0; t < cfg.steps; ++t) {
    const auto g = cross_entropy_batch(net, xt, labels, GradientRequest{false, true});
    xt = clip_to_ball((xt + step_x * cwise_sign(g.input_grads)).eval(), clean, eps_x);
    if (cfg.input_clamp) {
      xt = xt.cwiseMax(Scalar(cfg.input_clamp->lo)).cwiseMin(Scalar(cfg.input_clamp->hi));
    }
  }
  return xt;
}

}  // namespace nonsing
