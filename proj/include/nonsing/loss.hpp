#pragma once

// Cross-entropy, the tau/zeta regularized objective
//
//   l'(x, y) = CE(f(x), y) + alpha * max_{y' != y} tau^{y'y} + beta * max_{y' != y} zeta^{y'y}
//
// and its (sub)gradients with respect to every weight and the input.
// Subgradient conventions: relu'(0) = 0, d|v|/dv = sign(v) with sign(0) = 0,
// and every max (row max inside ||W||_inf, class max over y') differentiates
// through its smallest-index maximizer only.
//
// The batch routines below are the workhorse; the per-example functions are
// batches of one.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nonsing/bounds.hpp"
#include "nonsing/errors.hpp"
#include "nonsing/linalg.hpp"
#include "nonsing/network.hpp"

namespace nonsing {

template <typename Scalar>
struct LossConfig {
  Scalar alpha{0};
  Scalar beta{0};
  PerturbationBudget<Scalar> budget;

  bool regularized() const { return alpha != Scalar(0) || beta != Scalar(0); }

  void validate(std::size_t depth) const {
    if (!(alpha >= 0) || !(beta >= 0)) throw ConfigError("LossConfig: alpha and beta must be >= 0");
    budget.validate(depth);
  }
};

template <typename Scalar>
struct GradientBundle {
  Scalar loss_value{0};
  std::vector<Matrix<Scalar>> weight_grads;
  Vector<Scalar> input_grad;
};

/// Which gradients a batch evaluation has to produce.
struct GradientRequest {
  bool weights = true;
  bool inputs = true;
};

/// Losses and gradients summed over a batch; input gradients stay per column.
template <typename Scalar>
struct BatchGradient {
  Scalar loss_sum{0};
  std::vector<Matrix<Scalar>> weight_grads;
  Matrix<Scalar> input_grads;
};

/// -log softmax(logits)[y], max-shifted.
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& logits, Eigen::Index y) {
  using Scalar = typename Derived::Scalar;
  if (y < 0 || y >= logits.size()) throw IndexError("cross_entropy: label", y, logits.size());
  const Scalar top = logits.maxCoeff();
  const Scalar log_sum = top + std::log((logits.array() - top).exp().sum());
  return log_sum - logits(y);
}

namespace detail {

template <typename Scalar>
void check_labels(const Mlp<Scalar>& net, Eigen::Index batch, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != batch) {
    throw DimensionError("batch labels vs batch columns", batch, static_cast<long>(labels.size()));
  }
  for (int y : labels) check_class(net, y, "label");
}

template <typename Scalar>
std::vector<Matrix<Scalar>> zero_like(const Mlp<Scalar>& net) {
  std::vector<Matrix<Scalar>> out;
  out.reserve(net.depth());
  for (const auto& w : net.layers()) out.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
  return out;
}

/// Adds to `acc` the regularizer alpha*tau_max + beta*zeta_max of every column,
/// plus its gradients. Shifted activations use the rank-one identity
/// W^{m*} h = W^m h + eps_m * sum(h) (and sgn(x)^T x = ||x||_1 for the first layer).
template <typename Scalar, typename Derived>
void add_regularizer(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& xs, std::span<const int> labels,
                     const LossConfig<Scalar>& cfg, const GradientRequest& want, BatchGradient<Scalar>& acc) {
  const std::size_t depth = net.depth();
  const Eigen::Index batch = xs.cols();
  const Eigen::Index classes = net.class_count();
  const auto& budget = cfg.budget;
  const Matrix<Scalar>& last = net.layer(depth);

  // Layer norms. Index m is 1-based; entry 0 unused.
  std::vector<Scalar> inf_norms(depth, Scalar(0));
  std::vector<Eigen::Index> inf_rows(depth, 0);
  std::vector<Scalar> shifted_norms(depth, Scalar(0));
  for (std::size_t m = 1; m < depth; ++m) {
    inf_norms[m] = mat_inf_norm(net.layer(m));
    inf_rows[m] = mat_inf_norm_row(net.layer(m));
    shifted_norms[m] = inf_norms[m] + static_cast<Scalar>(net.row_dim(m)) * budget.layer(m);
  }
  // suffix[k] = prod_{m=k+1}^{L-1} ||W^m||_inf, k = 0..L-1.
  std::vector<Scalar> suffix(depth, Scalar(1));
  for (std::size_t k = depth - 1; k-- > 0;) suffix[k] = suffix[k + 1] * inf_norms[k + 1];

  const auto tp = tau_parts(net, budget);

  // Shifted forward pass. acts[k] = h^{k*} (acts[0] = x), pre[k] its pre-activation.
  std::vector<Matrix<Scalar>> acts(depth);
  std::vector<Matrix<Scalar>> pre(depth);
  acts[0] = xs;
  std::vector<Vector<Scalar>> mass(depth);  // mass[k](b) = ||h^{k*}_b||_1
  mass[0] = xs.cwiseAbs().colwise().sum().transpose();
  for (std::size_t k = 1; k < depth; ++k) {
    pre[k] = net.layer(k) * acts[k - 1];
    pre[k].rowwise() += (budget.layer(k) * mass[k - 1]).transpose();
    acts[k] = relu(pre[k]);
    mass[k] = acts[k].colwise().sum().transpose();
  }

  // Per-column zeta pieces and the chosen classes.
  // Same left-to-right products as zeta_parts, so values agree with zeta().
  Vector<Scalar> chain(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    Scalar c = 0;
    for (std::size_t k = 1; k < depth; ++k) {
      Scalar term = budget.layer(k) * mass[k - 1](b);
      for (std::size_t m = k + 1; m < depth; ++m) term *= inf_norms[m];
      c += term;
    }
    chain(b) = c;
  }
  const Vector<Scalar> tail = (Scalar(2) * budget.layer(depth)) * mass[depth - 1];

  std::vector<Eigen::Index> zeta_class(batch);
  Vector<Scalar> zeta_rowdiff(batch);
  std::vector<Eigen::Index> tau_class_of(classes, -1);
  std::vector<Scalar> tau_rowdiff_of(classes, Scalar(0));
  std::vector<Scalar> tau_count(classes, Scalar(0));

  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Index y = labels[b];
    bool first = true;
    Scalar best_tau = 0, best_zeta = 0, best_tau_r = 0, best_zeta_r = 0;
    Eigen::Index tc = 0, zc = 0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (c == y) continue;
      const Scalar r = row_diff_l1(last, c, y);
      const Scalar t = tp.value(r);
      const Scalar z = r * chain(b) + tail(b);
      if (first || t > best_tau) { best_tau = t; tc = c; best_tau_r = r; }
      if (first || z > best_zeta) { best_zeta = z; zc = c; best_zeta_r = r; }
      first = false;
    }
    acc.loss_sum += cfg.alpha * best_tau + cfg.beta * best_zeta;
    tau_class_of[y] = tc;
    tau_rowdiff_of[y] = best_tau_r;
    tau_count[y] += Scalar(1);
    zeta_class[b] = zc;
    zeta_rowdiff(b) = best_zeta_r;
  }

  if (!want.weights && !want.inputs) return;

  // d/dW^L through the row differences ||W^L_c - W^L_y||_1.
  auto add_row_diff = [&](Eigen::Index c, Eigen::Index y, Scalar coeff) {
    if (coeff == Scalar(0)) return;
    const Vector<Scalar> s = cwise_sign(last.row(c) - last.row(y)).transpose();
    acc.weight_grads[depth - 1].row(c) += coeff * s.transpose();
    acc.weight_grads[depth - 1].row(y) -= coeff * s.transpose();
  };

  // dLoss/d||W^m||_inf accumulated over the batch, m = 1..L-1.
  std::vector<Scalar> norm_coeff(depth, Scalar(0));

  if (want.weights && cfg.alpha != Scalar(0)) {
    for (Eigen::Index y = 0; y < classes; ++y) {
      if (tau_count[y] == Scalar(0)) continue;
      const Scalar weight = cfg.alpha * tau_count[y];
      add_row_diff(tau_class_of[y], y, weight * tp.eps_x * tp.product);
      const Scalar outer = tp.eps_x * (tau_rowdiff_of[y] + tp.row_slack);
      for (std::size_t m = 1; m < depth; ++m) {
        Scalar others = 1;
        for (std::size_t l = 1; l < depth; ++l) {
          if (l != m) others *= shifted_norms[l];
        }
        norm_coeff[m] += weight * outer * others;
      }
    }
  }

  if (cfg.beta == Scalar(0)) {
    if (want.weights) {
      for (std::size_t m = 1; m < depth; ++m) {
        if (norm_coeff[m] == Scalar(0)) continue;
        const Matrix<Scalar>& w = net.layer(m);
        acc.weight_grads[m - 1].row(inf_rows[m]) += norm_coeff[m] * cwise_sign(w.row(inf_rows[m]));
      }
    }
    return;
  }

  const Scalar beta = cfg.beta;
  if (want.weights) {
    for (Eigen::Index b = 0; b < batch; ++b) add_row_diff(zeta_class[b], labels[b], beta * chain(b));
    // chain depends on ||W^m||_inf for m >= 2.
    for (std::size_t m = 2; m < depth; ++m) {
      Scalar coeff = 0;
      for (Eigen::Index b = 0; b < batch; ++b) {
        Scalar d = 0;
        for (std::size_t k = 1; k < m; ++k) {
          Scalar term = budget.layer(k) * mass[k - 1](b);
          for (std::size_t l = k + 1; l < depth; ++l) {
            if (l != m) term *= inf_norms[l];
          }
          d += term;
        }
        coeff += zeta_rowdiff(b) * d;
      }
      norm_coeff[m] += beta * coeff;
    }
    for (std::size_t m = 1; m < depth; ++m) {
      if (norm_coeff[m] == Scalar(0)) continue;
      const Matrix<Scalar>& w = net.layer(m);
      acc.weight_grads[m - 1].row(inf_rows[m]) += norm_coeff[m] * cwise_sign(w.row(inf_rows[m]));
    }
  }

  // Backward through the shifted network. seed[k](b) = dLoss/d||h^{k*}_b||_1.
  auto seed = [&](std::size_t k) -> Vector<Scalar> {
    if (k == depth - 1) {
      Vector<Scalar> s = Vector<Scalar>::Constant(batch, beta * Scalar(2) * budget.layer(depth));
      if (k + 1 < depth) s += zeta_rowdiff * (beta * budget.layer(k + 1) * suffix[k + 1]);
      return s;
    }
    return zeta_rowdiff * (beta * budget.layer(k + 1) * suffix[k + 1]);
  };

  Matrix<Scalar> grad_act;  // dLoss/dh^{k*}
  for (std::size_t k = depth - 1; k >= 1; --k) {
    const Vector<Scalar> s = seed(k);
    if (k == depth - 1) {
      grad_act = Vector<Scalar>::Ones(acts[k].rows()) * s.transpose();
    } else {
      grad_act.rowwise() += s.transpose();
    }
    const Matrix<Scalar> delta = (pre[k].array() > Scalar(0)).select(grad_act, Scalar(0));
    if (want.weights) acc.weight_grads[k - 1].noalias() += delta * acts[k - 1].transpose();
    // Back through W^{k*}: W^T delta + eps_k * sgn(h^{(k-1)*}) * colsum(delta).
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> colsum = delta.colwise().sum();
    Matrix<Scalar> back = net.layer(k).transpose() * delta;
    if (k > 1) {
      back.rowwise() += budget.layer(k) * colsum;
      grad_act = std::move(back);
    } else if (want.inputs) {
      const Matrix<Scalar> sgn = cwise_sign(xs);
      back += sgn * (budget.layer(1) * colsum).asDiagonal();
      // ||x||_1 enters the chain term with weight eps_1 * suffix[1].
      const Vector<Scalar> direct = zeta_rowdiff * (beta * budget.layer(1) * suffix[1]);
      back += sgn * direct.asDiagonal();
      acc.input_grads += back;
    }
    if (k == 1) break;
  }
}

}  // namespace detail

namespace detail {

/// Cross-entropy over a batch for a raw layer list (already validated).
template <typename Scalar, typename Derived>
BatchGradient<Scalar> cross_entropy_layers(const std::vector<Matrix<Scalar>>& layers,
                                           const Eigen::MatrixBase<Derived>& xs, std::span<const int> labels,
                                           const GradientRequest& want) {
  const std::size_t depth = layers.size();
  const Eigen::Index batch = xs.cols();

  // acts[m] = z^m (acts[0] = x); only hidden layers need the mask.
  std::vector<Matrix<Scalar>> acts(depth);
  acts[0] = xs;
  for (std::size_t m = 1; m < depth; ++m) acts[m] = relu(layers[m - 1] * acts[m - 1]);
  const Matrix<Scalar> logits = layers[depth - 1] * acts[depth - 1];

  BatchGradient<Scalar> out;
  Matrix<Scalar> delta(logits.rows(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto col = logits.col(b);
    const Scalar top = col.maxCoeff();
    const auto shifted = (col.array() - top).exp().eval();
    const Scalar total = shifted.sum();
    out.loss_sum += (top + std::log(total)) - col(labels[b]);
    delta.col(b) = shifted / total;
    delta(labels[b], b) -= Scalar(1);
  }
  if (!want.weights && !want.inputs) return out;

  if (want.weights) out.weight_grads.resize(depth);
  for (std::size_t m = depth; m >= 1; --m) {
    if (want.weights) out.weight_grads[m - 1].noalias() = delta * acts[m - 1].transpose();
    if (m == 1) break;
    Matrix<Scalar> back = layers[m - 1].transpose() * delta;
    delta = (acts[m - 1].array() > Scalar(0)).select(back, Scalar(0));
  }
  if (want.inputs) out.input_grads = layers[0].transpose() * delta;
  return out;
}

}  // namespace detail

/// Cross-entropy summed over the columns of `xs`, with gradients.
template <typename Scalar, typename Derived>
BatchGradient<Scalar> cross_entropy_batch(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& xs,
                                          std::span<const int> labels, const GradientRequest& want = {}) {
  detail::check_input(net, xs, "cross_entropy_batch: input length");
  detail::check_labels(net, xs.cols(), labels);
  return detail::cross_entropy_layers(net.layers(), xs, labels, want);
}

/// Regularized objective summed over the columns of `xs`, with gradients. The
/// regularizers are evaluated at `reg_xs` (the clean inputs) while the
/// classification term is evaluated at `xs` (possibly adversarial). Input
/// gradients of the two parts land in the same per-column matrix.
template <typename Scalar, typename DerivedA, typename DerivedB>
BatchGradient<Scalar> regularized_batch(const Mlp<Scalar>& net, const Eigen::MatrixBase<DerivedA>& xs,
                                        const Eigen::MatrixBase<DerivedB>& reg_xs, std::span<const int> labels,
                                        const LossConfig<Scalar>& cfg, const GradientRequest& want = {}) {
  auto out = cross_entropy_batch(net, xs, labels, want);
  if (!cfg.regularized()) return out;
  cfg.validate(net.depth());
  detail::check_input(net, reg_xs, "regularized_batch: regularizer input length");
  if (reg_xs.cols() != xs.cols()) throw DimensionError("regularized_batch: batch sizes", xs.cols(), reg_xs.cols());
  if (net.class_count() < 2) throw ConfigError("regularized loss needs at least 2 classes");
  detail::add_regularizer(net, reg_xs, labels, cfg, want, out);
  return out;
}

template <typename Scalar, typename Derived>
GradientBundle<Scalar> backprop(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x, Eigen::Index y) {
  detail::check_class(net, y, "backprop: label");
  const int label = static_cast<int>(y);
  auto g = cross_entropy_batch(net, x, std::span<const int>(&label, 1));
  return {g.loss_sum, std::move(g.weight_grads), g.input_grads.col(0)};
}

template <typename Scalar, typename Derived>
Scalar regularized_loss(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x, Eigen::Index y,
                        const LossConfig<Scalar>& cfg) {
  const Scalar ce = cross_entropy(forward(net, x), y);
  if (!cfg.regularized()) return ce;
  cfg.validate(net.depth());
  const auto pair = worst_regularizer_pair(net, x, cfg.budget, y);
  return ce + cfg.alpha * pair.tau_max + cfg.beta * pair.zeta_max;
}

template <typename Scalar, typename Derived>
GradientBundle<Scalar> regularized_backprop(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                            Eigen::Index y, const LossConfig<Scalar>& cfg) {
  detail::check_class(net, y, "regularized_backprop: label");
  const int label = static_cast<int>(y);
  auto g = regularized_batch(net, x, x, std::span<const int>(&label, 1), cfg);
  return {g.loss_sum, std::move(g.weight_grads), g.input_grads.col(0)};
}

}  // namespace nonsing
