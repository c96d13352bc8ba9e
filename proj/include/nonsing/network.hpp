#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "nonsing/errors.hpp"
#include "nonsing/linalg.hpp"

namespace nonsing {

/// Bias-free feed-forward ReLU network f(x) = W^L relu(W^{L-1} ... relu(W^1 x)).
///
/// layers()[0] is W^1. Layer numbers in the public functions below are
/// 1-based (layer k means W^k) to keep them aligned with the bound formulas.
template <typename Scalar>
class Mlp {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  Mlp() = default;

  explicit Mlp(std::vector<MatrixType> layers) : layers_(std::move(layers)) { validate(); }

  const std::vector<MatrixType>& layers() const noexcept { return layers_; }
  const MatrixType& layer(std::size_t k) const { return layers_.at(k - 1); }

  /// L, the number of weight matrices.
  std::size_t depth() const noexcept { return layers_.size(); }
  Eigen::Index input_dim() const { return layers_.front().cols(); }
  Eigen::Index class_count() const { return layers_.back().rows(); }

  /// d_m: row-vector length (= column count) of W^m.
  Eigen::Index row_dim(std::size_t k) const { return layer(k).cols(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : layers_) n += static_cast<std::size_t>(w.size());
    return n;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t m = 0; m < a.layers_.size(); ++m) {
      const auto& x = a.layers_[m];
      const auto& y = b.layers_[m];
      if (x.rows() != y.rows() || x.cols() != y.cols() || x != y) return false;
    }
    return true;
  }

 private:
  void validate() const {
    if (layers_.size() < 2) {
      throw ConfigError("Mlp needs at least 2 layers, got " + std::to_string(layers_.size()));
    }
    for (std::size_t m = 0; m < layers_.size(); ++m) {
      const auto& w = layers_[m];
      if (w.rows() == 0 || w.cols() == 0) {
        throw ConfigError("Mlp layer " + std::to_string(m + 1) + " is empty");
      }
      if (!all_finite(w)) {
        throw ConfigError("Mlp layer " + std::to_string(m + 1) + " has non-finite entries");
      }
      if (m > 0 && w.cols() != layers_[m - 1].rows()) {
        throw DimensionError("Mlp chain: W^" + std::to_string(m + 1) + " columns vs W^" +
                                 std::to_string(m) + " rows",
                             layers_[m - 1].rows(), w.cols());
      }
    }
  }

  std::vector<MatrixType> layers_;
};

namespace detail {

template <typename Scalar, typename Derived>
void check_input(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x, const char* who) {
  if (x.rows() != net.input_dim()) throw DimensionError(who, net.input_dim(), x.rows());
}

template <typename Scalar>
void check_class(const Mlp<Scalar>& net, Eigen::Index c, const char* who) {
  if (c < 0 || c >= net.class_count()) throw IndexError(who, c, net.class_count());
}

}  // namespace detail

/// z^k: hidden activation after layer k, 1 <= k <= L-1.
template <typename Scalar, typename Derived>
Vector<Scalar> layer_output(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                            std::size_t k) {
  if (k < 1 || k + 1 > net.depth()) {
    throw IndexError("layer_output: hidden layer", static_cast<long>(k),
                     static_cast<long>(net.depth()));
  }
  detail::check_input(net, x, "layer_output: input length");
  Vector<Scalar> z = x;
  for (std::size_t m = 1; m <= k; ++m) z = relu(net.layer(m) * z);
  return z;
}

template <typename Scalar, typename Derived>
Vector<Scalar> forward(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(net, x, "forward: input length");
  Vector<Scalar> z = x;
  const std::size_t last = net.depth();
  for (std::size_t m = 1; m < last; ++m) z = relu(net.layer(m) * z);
  return net.layer(last) * z;
}

/// Column-wise forward pass over a batch (one example per column).
template <typename Scalar, typename Derived>
Matrix<Scalar> forward_batch(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& xs) {
  detail::check_input(net, xs, "forward_batch: input length");
  Matrix<Scalar> z = xs;
  const std::size_t last = net.depth();
  for (std::size_t m = 1; m < last; ++m) z = relu(net.layer(m) * z);
  return net.layer(last) * z;
}

/// f^{ij}(x) = [f(x)]_i - [f(x)]_j.
template <typename Scalar, typename Derived>
Scalar pairwise_margin(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                       Eigen::Index i, Eigen::Index j) {
  detail::check_class(net, i, "pairwise_margin: class i");
  detail::check_class(net, j, "pairwise_margin: class j");
  const auto logits = forward(net, x);
  return logits(i) - logits(j);
}

/// Argmax of the logits, smallest index on ties.
template <typename Scalar, typename Derived>
Eigen::Index predict(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  return argmax(forward(net, x));
}

}  // namespace nonsing
