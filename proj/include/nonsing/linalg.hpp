#pragma once

// Dense arithmetic and the handful of norms the margin bounds are built from.
// Everything here is a free function over Eigen dense types so that callers
// can hand in blocks, maps and expressions without copies.

#include <Eigen/Dense>

#include <cmath>

#include "nonsing/errors.hpp"

namespace nonsing {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& a) {
  return a.allFinite();
}

template <typename DerivedW, typename DerivedX>
Vector<typename DerivedW::Scalar> mat_vec_mul(const Eigen::MatrixBase<DerivedW>& w,
                                              const Eigen::MatrixBase<DerivedX>& x) {
  if (w.cols() != x.size()) {
    throw DimensionError("mat_vec_mul: matrix columns vs vector length", w.cols(), x.size());
  }
  return w * x;
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

template <typename Derived>
typename Derived::Scalar vec_l1(const Eigen::MatrixBase<Derived>& x) {
  return x.template lpNorm<1>();
}

template <typename Derived>
typename Derived::Scalar vec_inf(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() == 0) return typename Derived::Scalar(0);
  return x.template lpNorm<Eigen::Infinity>();
}

/// Induced (inf, inf) norm: maximum absolute row sum.
template <typename Derived>
typename Derived::Scalar mat_inf_norm(const Eigen::MatrixBase<Derived>& w) {
  if (w.rows() == 0) return typename Derived::Scalar(0);
  return w.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Row attaining mat_inf_norm; smallest index on ties.
template <typename Derived>
Eigen::Index mat_inf_norm_row(const Eigen::MatrixBase<Derived>& w) {
  const auto sums = w.cwiseAbs().rowwise().sum().eval();
  Eigen::Index best = 0;
  for (Eigen::Index r = 1; r < sums.size(); ++r) {
    if (sums(r) > sums(best)) best = r;
  }
  return best;
}

/// Induced (1, 1) norm: maximum absolute column sum.
template <typename Derived>
typename Derived::Scalar mat_one_norm(const Eigen::MatrixBase<Derived>& w) {
  if (w.cols() == 0) return typename Derived::Scalar(0);
  return w.cwiseAbs().colwise().sum().maxCoeff();
}

/// l1 norm of the difference of two rows of `w`.
template <typename Derived>
typename Derived::Scalar row_diff_l1(const Eigen::MatrixBase<Derived>& w, Eigen::Index i,
                                     Eigen::Index j) {
  if (i < 0 || i >= w.rows()) throw IndexError("row_diff_l1: row i", i, w.rows());
  if (j < 0 || j >= w.rows()) throw IndexError("row_diff_l1: row j", j, w.rows());
  return (w.row(i) - w.row(j)).template lpNorm<1>();
}

/// sign with sign(0) = 0.
template <typename Scalar>
constexpr Scalar sign(Scalar v) {
  return static_cast<Scalar>((Scalar(0) < v) - (v < Scalar(0)));
}

template <typename Derived>
auto cwise_sign(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return a.unaryExpr([](Scalar v) { return sign(v); });
}

/// Smallest index of the maximum entry.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

}  // namespace nonsing
