#pragma once

// Upper bounds on the pairwise margin f^{ij} of a perturbed network.
//
// Two families are provided:
//  * the joint bound margin + tau + zeta, where every weight matrix W^m may
//    move by eps_m element-wise and the input by eps_x;
//  * the single-layer bound, where only W^N and the input move.
//
// Conventions: empty products are 1, empty sums are 0, sign(0) = 0, and the
// layer-0 activation is the input itself.

#include <cstddef>
#include <string>
#include <vector>

#include "nonsing/errors.hpp"
#include "nonsing/linalg.hpp"
#include "nonsing/network.hpp"

namespace nonsing {

/// Element-wise l-inf radii for the input and for each of the L weight matrices.
template <typename Scalar>
struct PerturbationBudget {
  Scalar eps_x{0};
  std::vector<Scalar> eps_layers;  // eps_layers[m-1] is the radius of W^m

  static PerturbationBudget zero(std::size_t depth) { return {Scalar(0), std::vector<Scalar>(depth, 0)}; }

  static PerturbationBudget uniform(std::size_t depth, Scalar eps_x, Scalar eps_w) {
    return {eps_x, std::vector<Scalar>(depth, eps_w)};
  }

  /// Only W^N (1-based) and the input are perturbed.
  static PerturbationBudget single_layer(std::size_t depth, std::size_t n, Scalar eps_n, Scalar eps_x) {
    PerturbationBudget b = zero(depth);
    b.eps_x = eps_x;
    b.eps_layers.at(n - 1) = eps_n;
    return b;
  }

  Scalar layer(std::size_t m) const { return eps_layers.at(m - 1); }

  void validate(std::size_t depth) const {
    if (eps_layers.size() != depth) {
      throw DimensionError("PerturbationBudget: layer radii vs network depth",
                           static_cast<long>(depth), static_cast<long>(eps_layers.size()));
    }
    if (!(eps_x >= 0) || !std::isfinite(eps_x)) throw ConfigError("PerturbationBudget: eps_x must be finite and >= 0");
    for (std::size_t m = 0; m < eps_layers.size(); ++m) {
      if (!(eps_layers[m] >= 0) || !std::isfinite(eps_layers[m])) {
        throw ConfigError("PerturbationBudget: eps for layer " + std::to_string(m + 1) +
                          " must be finite and >= 0");
      }
    }
  }
};

template <typename Scalar>
struct MarginBoundReport {
  Eigen::Index class_i{0};
  Eigen::Index class_j{0};
  Scalar margin{0};
  Scalar tau{0};
  Scalar zeta{0};
  Scalar upper_bound{0};
};

template <typename Scalar>
struct RegularizerPair {
  Eigen::Index tau_class{0};
  Scalar tau_max{0};
  Eigen::Index zeta_class{0};
  Scalar zeta_max{0};
};

namespace detail {

template <typename Scalar>
void check_budget(const Mlp<Scalar>& net, const PerturbationBudget<Scalar>& budget) {
  budget.validate(net.depth());
}

/// Pieces of tau shared by every class pair: tau^{ij} = eps_x (r_ij + 2 d_L eps_L) * product.
template <typename Scalar>
struct TauParts {
  Scalar eps_x{0};
  Scalar row_slack{0};  // 2 d_L eps_L
  Scalar product{1};    // prod_{m<L} (||W^m||_inf + d_m eps_m)

  Scalar value(Scalar row_diff) const { return eps_x * (row_diff + row_slack) * product; }
};

template <typename Scalar>
TauParts<Scalar> tau_parts(const Mlp<Scalar>& net, const PerturbationBudget<Scalar>& budget) {
  const std::size_t depth = net.depth();
  TauParts<Scalar> p;
  p.eps_x = budget.eps_x;
  p.row_slack = Scalar(2) * static_cast<Scalar>(net.row_dim(depth)) * budget.layer(depth);
  for (std::size_t m = 1; m < depth; ++m) {
    p.product *= mat_inf_norm(net.layer(m)) + static_cast<Scalar>(net.row_dim(m)) * budget.layer(m);
  }
  return p;
}

/// Pieces of zeta shared by every class pair: zeta^{ij} = r_ij * chain + tail.
template <typename Scalar>
struct ZetaParts {
  Scalar chain{0};  // sum_k eps_k ||h^{(k-1)*}||_1 prod_{m=k+1}^{L-1} ||W^m||_inf
  Scalar tail{0};   // 2 eps_L ||h^{(L-1)*}||_1

  Scalar value(Scalar row_diff) const { return row_diff * chain + tail; }
};

}  // namespace detail

/// h^{k*}: hidden output of the network whose weights are shifted up by their
/// radii (the first layer shifted in the direction of sgn(x)).
template <typename Scalar, typename Derived>
Vector<Scalar> shifted_hidden(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                              const PerturbationBudget<Scalar>& budget, std::size_t k) {
  if (k < 1 || k + 1 > net.depth()) {
    throw IndexError("shifted_hidden: hidden layer", static_cast<long>(k),
                     static_cast<long>(net.depth()));
  }
  detail::check_input(net, x, "shifted_hidden: input length");
  detail::check_budget(net, budget);

  const Matrix<Scalar>& w1 = net.layer(1);
  const Vector<Scalar> x_sign = cwise_sign(x);
  const Matrix<Scalar> w1_star = w1 + budget.layer(1) * Vector<Scalar>::Ones(w1.rows()) * x_sign.transpose();
  Vector<Scalar> h = relu(w1_star * x);
  for (std::size_t m = 2; m <= k; ++m) {
    const Matrix<Scalar> w_star = net.layer(m).array() + budget.layer(m);
    h = relu(w_star * h);
  }
  return h;
}

namespace detail {

template <typename Scalar, typename Derived>
ZetaParts<Scalar> zeta_parts(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                             const PerturbationBudget<Scalar>& budget) {
  const std::size_t depth = net.depth();
  std::vector<Scalar> inf_norms(depth + 1, Scalar(0));
  for (std::size_t m = 1; m < depth; ++m) inf_norms[m] = mat_inf_norm(net.layer(m));

  // activation_l1[k] = ||h^{k*}||_1 with h^{0*} = x.
  std::vector<Scalar> activation_l1(depth, Scalar(0));
  activation_l1[0] = vec_l1(x);
  for (std::size_t k = 1; k < depth; ++k) activation_l1[k] = vec_l1(shifted_hidden(net, x, budget, k));

  ZetaParts<Scalar> p;
  for (std::size_t k = 1; k < depth; ++k) {
    Scalar term = budget.layer(k) * activation_l1[k - 1];
    for (std::size_t m = k + 1; m < depth; ++m) term *= inf_norms[m];
    p.chain += term;
  }
  p.tail = Scalar(2) * budget.layer(depth) * activation_l1[depth - 1];
  return p;
}

}  // namespace detail

template <typename Scalar>
Scalar tau(const Mlp<Scalar>& net, const PerturbationBudget<Scalar>& budget, Eigen::Index i,
           Eigen::Index j) {
  detail::check_class(net, i, "tau: class i");
  detail::check_class(net, j, "tau: class j");
  detail::check_budget(net, budget);
  return detail::tau_parts(net, budget).value(row_diff_l1(net.layer(net.depth()), i, j));
}

/// Does not read budget.eps_x.
template <typename Scalar, typename Derived>
Scalar zeta(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
            const PerturbationBudget<Scalar>& budget, Eigen::Index i, Eigen::Index j) {
  detail::check_class(net, i, "zeta: class i");
  detail::check_class(net, j, "zeta: class j");
  detail::check_input(net, x, "zeta: input length");
  detail::check_budget(net, budget);
  return detail::zeta_parts(net, x, budget).value(row_diff_l1(net.layer(net.depth()), i, j));
}

/// Upper bound on f^{ij} over all inputs in B(x, eps_x) and weights in B(W^m, eps_m).
template <typename Scalar, typename Derived>
MarginBoundReport<Scalar> margin_bound_joint(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                             const PerturbationBudget<Scalar>& budget, Eigen::Index i,
                                             Eigen::Index j) {
  MarginBoundReport<Scalar> r;
  r.class_i = i;
  r.class_j = j;
  r.margin = pairwise_margin(net, x, i, j);
  r.tau = tau(net, budget, i, j);
  r.zeta = zeta(net, x, budget, i, j);
  r.upper_bound = r.margin + r.tau + r.zeta;
  return r;
}

/// Upper bound on f^{ij} when only W^N (1-based) moves by eps_n and the input by eps_x.
template <typename Scalar, typename Derived>
Scalar margin_bound_single_layer(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                 std::size_t n, Scalar eps_n, Scalar eps_x, Eigen::Index i,
                                 Eigen::Index j) {
  const std::size_t depth = net.depth();
  if (n < 1 || n > depth) {
    throw IndexError("margin_bound_single_layer: layer N", static_cast<long>(n), static_cast<long>(depth) + 1);
  }
  if (!(eps_n >= 0) || !(eps_x >= 0)) throw ConfigError("margin_bound_single_layer: radii must be >= 0");
  const Scalar margin = pairwise_margin(net, x, i, j);
  const Scalar row_diff = row_diff_l1(net.layer(depth), i, j);

  if (n == depth) {
    Scalar inf_product = 1;
    Scalar one_product = 1;
    for (std::size_t m = 1; m < depth; ++m) {
      inf_product *= mat_inf_norm(net.layer(m));
      one_product *= mat_one_norm(net.layer(m));
    }
    const Scalar input_mass = vec_l1(x) + static_cast<Scalar>(net.input_dim()) * eps_x;
    return margin + eps_x * row_diff * inf_product + Scalar(2) * eps_n * one_product * input_mass;
  }

  const Vector<Scalar> z_prev = n == 1 ? Vector<Scalar>(x) : layer_output(net, x, n - 1);
  Scalar below = 1;
  for (std::size_t m = 1; m < n; ++m) below *= mat_inf_norm(net.layer(m));
  const Scalar perturbed_norm = mat_inf_norm(net.layer(n)) + static_cast<Scalar>(net.row_dim(n)) * eps_n;
  Scalar above = 1;
  for (std::size_t m = n + 1; m < depth; ++m) above *= mat_inf_norm(net.layer(m));
  const Scalar inner = eps_n * vec_l1(z_prev) + eps_x * below * perturbed_norm;
  return margin + row_diff * above * inner;
}

/// Worst competing class y' != y for tau^{y'y} and zeta^{y'y} independently;
/// smallest class index on ties.
template <typename Scalar, typename Derived>
RegularizerPair<Scalar> worst_regularizer_pair(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                               const PerturbationBudget<Scalar>& budget, Eigen::Index y) {
  const Eigen::Index k = net.class_count();
  if (k < 2) throw ConfigError("worst_regularizer_pair: needs at least 2 classes");
  detail::check_class(net, y, "worst_regularizer_pair: true class");
  detail::check_input(net, x, "worst_regularizer_pair: input length");
  detail::check_budget(net, budget);

  const auto tp = detail::tau_parts(net, budget);
  const auto zp = detail::zeta_parts(net, x, budget);
  const Matrix<Scalar>& last = net.layer(net.depth());

  RegularizerPair<Scalar> out;
  bool first = true;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (c == y) continue;
    const Scalar r = row_diff_l1(last, c, y);
    const Scalar t = tp.value(r);
    const Scalar z = zp.value(r);
    if (first || t > out.tau_max) {
      out.tau_class = c;
      out.tau_max = t;
    }
    if (first || z > out.zeta_max) {
      out.zeta_class = c;
      out.zeta_max = z;
    }
    first = false;
  }
  return out;
}

}  // namespace nonsing
