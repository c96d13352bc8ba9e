#include <gtest/gtest.h>

#include <algorithm>

#include "nonsing/bounds.hpp"
#include "test_support.hpp"

using namespace nonsing;
using nonsing::fixtures::mat;
using nonsing::fixtures::toy_net;
using nonsing::fixtures::toy_net_tau;
using nonsing::fixtures::vec;

namespace {

using Budget = PerturbationBudget<double>;

Budget budget_of(double eps_x, std::vector<double> layers) { return Budget{eps_x, std::move(layers)}; }

// Scalar-loop reference implementations, written without the library norms.
double ref_inf_norm(const Eigen::MatrixXd& w) {
  double best = 0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    double s = 0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) s += std::abs(w(r, c));
    best = std::max(best, s);
  }
  return best;
}

double ref_l1(const Eigen::VectorXd& v) {
  double s = 0;
  for (Eigen::Index k = 0; k < v.size(); ++k) s += std::abs(v(k));
  return s;
}

double ref_row_diff(const Eigen::MatrixXd& w, Eigen::Index i, Eigen::Index j) {
  double s = 0;
  for (Eigen::Index c = 0; c < w.cols(); ++c) s += std::abs(w(i, c) - w(j, c));
  return s;
}

// h^{k*} computed with explicit element loops.
std::vector<Eigen::VectorXd> ref_shifted(const Mlp<double>& net, const Eigen::VectorXd& x, const Budget& b) {
  std::vector<Eigen::VectorXd> h{x};
  for (std::size_t m = 1; m < net.depth(); ++m) {
    const auto& w = net.layer(m);
    Eigen::VectorXd out(w.rows());
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = 0;
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double shift = m == 1 ? b.layer(1) * sign(x(c)) : b.layer(m);
        s += (w(r, c) + shift) * h.back()(c);
      }
      out(r) = std::max(0.0, s);
    }
    h.push_back(out);
  }
  return h;
}

double ref_tau(const Mlp<double>& net, const Budget& b, Eigen::Index i, Eigen::Index j) {
  const std::size_t depth = net.depth();
  double prod = 1;
  for (std::size_t m = 1; m < depth; ++m) prod *= ref_inf_norm(net.layer(m)) + net.layer(m).cols() * b.layer(m);
  return b.eps_x * (ref_row_diff(net.layer(depth), i, j) + 2.0 * net.layer(depth).cols() * b.layer(depth)) * prod;
}

std::vector<double> ref_zeta_terms(const Mlp<double>& net, const Eigen::VectorXd& x, const Budget& b, Eigen::Index i,
                                   Eigen::Index j) {
  const std::size_t depth = net.depth();
  const auto h = ref_shifted(net, x, b);
  const double r = ref_row_diff(net.layer(depth), i, j);
  std::vector<double> terms;
  for (std::size_t k = 1; k < depth; ++k) {
    double t = r * b.layer(k) * ref_l1(h[k - 1]);
    for (std::size_t m = k + 1; m < depth; ++m) t *= ref_inf_norm(net.layer(m));
    terms.push_back(t);
  }
  terms.push_back(2.0 * b.layer(depth) * ref_l1(h[depth - 1]));
  return terms;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double t : v) s += t;
  return s;
}

}  // namespace

TEST(ShiftedHidden, Examples) {
  const Mlp<double> a({mat({{1, -1}}), mat({{1}, {1}})});
  EXPECT_EQ(shifted_hidden(a, vec({1, 0}), budget_of(0, {0.5, 0}), 1), vec({1.5}));
  const Mlp<double> b({mat({{-1}}), mat({{1}, {1}})});
  EXPECT_EQ(shifted_hidden(b, vec({1}), budget_of(0, {2, 0}), 1), vec({1}));
}

TEST(ShiftedHidden, ZeroBudgetIsLayerOutput) {
  CounterRng rng(10);
  for (int t = 0; t < 50; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 4, 6));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    for (std::size_t k = 1; k < net.depth(); ++k) {
      EXPECT_EQ(shifted_hidden(net, x, Budget::zero(net.depth()), k), layer_output(net, x, k));
    }
  }
}

TEST(ShiftedHidden, RankOneShiftAndDominance) {
  CounterRng rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 4, 6));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const Budget b = fixtures::random_budget(rng, net.depth(), 0.0, 0.3);
    const auto ref = ref_shifted(net, x, b);
    for (std::size_t k = 1; k < net.depth(); ++k) {
      const Eigen::VectorXd h = shifted_hidden(net, x, b, k);
      ASSERT_TRUE(h.isApprox(ref[k], 1e-12) || (h - ref[k]).norm() < 1e-12);
      // W^{k+1*} h = W^{k+1} h + eps * sum(h) on every row.
      if (k + 1 < net.depth()) {
        const Eigen::MatrixXd shifted = net.layer(k + 1).array() + b.layer(k + 1);
        const Eigen::VectorXd rank_one = (net.layer(k + 1) * h).array() + b.layer(k + 1) * h.sum();
        EXPECT_LE((shifted * h - rank_one).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
    // Weights anywhere in the balls (clean input) stay below h^{1*} after the first layer.
    for (int s = 0; s < 20; ++s) {
      std::vector<Eigen::MatrixXd> layers;
      for (std::size_t m = 1; m <= net.depth(); ++m) {
        layers.push_back(net.layer(m) + fixtures::random_matrix(rng, net.layer(m).rows(), net.layer(m).cols(), b.layer(m)));
      }
      const Mlp<double> moved(layers);
      EXPECT_TRUE((layer_output(moved, x, 1).array() <= ref[1].array() + 1e-12).all());
    }
  }
}

TEST(ShiftedHidden, DominatesEveryLayerWhenDeeperWeightsAreNonNegative) {
  CounterRng rng(17);
  for (int t = 0; t < 100; ++t) {
    const auto sizes = fixtures::random_sizes(rng, 4, 6);
    std::vector<Eigen::MatrixXd> layers;
    for (std::size_t m = 1; m < sizes.size(); ++m) {
      Eigen::MatrixXd w = fixtures::random_matrix(rng, sizes[m], sizes[m - 1]);
      if (m > 1) w = w.cwiseAbs();
      layers.push_back(w);
    }
    const Mlp<double> net(layers);
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const Budget b = fixtures::random_budget(rng, net.depth(), 0.0, 0.3);
    for (int s = 0; s < 20; ++s) {
      std::vector<Eigen::MatrixXd> moved;
      for (std::size_t m = 1; m <= net.depth(); ++m) {
        moved.push_back(net.layer(m) + fixtures::random_matrix(rng, net.layer(m).rows(), net.layer(m).cols(), b.layer(m)));
      }
      for (std::size_t k = 1; k < net.depth(); ++k) {
        EXPECT_TRUE((layer_output(Mlp<double>(moved), x, k).array() <= shifted_hidden(net, x, b, k).array() + 1e-12).all());
      }
    }
  }
}

// With mixed-sign deeper weights a perturbed hidden layer can outgrow h^{k*},
// and with a large enough last-layer radius the joint bound stops holding.
// x = 1, W^1 = [1; 1], W^2 = [1 -1], W^3 = [1; -1], eps = (0.5, 0.1, 1):
// zeta = 2 * (0.5*1*2 + 0.1*3) + 2*1*0.3 = 3.2, while
// W^1 -> [1.5; 0.5], W^2 -> [1.1 -0.9], W^3 -> [2; -2] gives f^{01} = 4 * 1.2 = 4.8.
TEST(MarginBoundJoint, KnownCounterexampleWithLargeLastLayerRadius) {
  const Mlp<double> net({mat({{1}, {1}}), mat({{1, -1}}), mat({{1}, {-1}})});
  const Budget b = budget_of(0.0, {0.5, 0.1, 1.0});
  const auto r = margin_bound_joint(net, vec({1}), b, 0, 1);
  EXPECT_NEAR(r.upper_bound, 3.2, 1e-15);
  const Mlp<double> moved({mat({{1.5}, {0.5}}), mat({{1.1, -0.9}}), mat({{2}, {-2}})});
  EXPECT_NEAR(pairwise_margin(moved, vec({1}), 0, 1), 4.8, 1e-14);
  EXPECT_GT(pairwise_margin(moved, vec({1}), 0, 1), r.upper_bound);
}

TEST(Tau, Examples) {
  EXPECT_NEAR(tau(toy_net_tau(), budget_of(0.1, {0.1, 0.1}), 0, 1), 0.242, 1e-15);
  EXPECT_EQ(tau(toy_net_tau(), budget_of(0.0, {0.1, 0.1}), 0, 1), 0.0);
  EXPECT_EQ(tau(toy_net_tau(), budget_of(0.1, {0.0, 0.0}), 1, 1), 0.0);
  EXPECT_THROW(tau(toy_net(), budget_of(0.1, {0.1}), 0, 1), DimensionError);
  EXPECT_THROW(tau(toy_net(), budget_of(-0.1, {0.1, 0.1}), 0, 1), ConfigError);
}

TEST(Zeta, Examples) {
  EXPECT_NEAR(zeta(toy_net(), vec({2}), budget_of(0.0, {0.1, 0.05}), 0, 1), 0.62, 1e-15);
  EXPECT_EQ(zeta(toy_net(), vec({2}), budget_of(0.3, {0.0, 0.0}), 0, 1), 0.0);
  // eps_x is never read.
  EXPECT_EQ(zeta(toy_net(), vec({2}), budget_of(0.7, {0.1, 0.05}), 0, 1),
            zeta(toy_net(), vec({2}), budget_of(0.0, {0.1, 0.05}), 0, 1));
}

TEST(MarginBoundJoint, SharedToyNet) {
  const auto r = margin_bound_joint(toy_net(), vec({2}), budget_of(0.1, {0.1, 0.05}), 0, 1);
  EXPECT_EQ(r.margin, 4.0);
  // 0.1 * (2 + 2*1*0.05) * (1 + 1*0.1)
  EXPECT_NEAR(r.tau, 0.231, 1e-15);
  EXPECT_NEAR(r.zeta, 0.62, 1e-15);
  EXPECT_NEAR(r.upper_bound, 4.851, 1e-14);
}

TEST(Bounds, MatchScalarReference) {
  CounterRng rng(12);
  for (int t = 0; t < 300; ++t) {
    const int depth = 2 + static_cast<int>(rng.below(3));
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, depth, 6));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const Budget b = fixtures::random_budget(rng, net.depth(), 0.3, 0.3);
    for (Eigen::Index i = 0; i < net.class_count(); ++i) {
      for (Eigen::Index j = 0; j < net.class_count(); ++j) {
        const double rt = ref_tau(net, b, i, j);
        const auto terms = ref_zeta_terms(net, x, b, i, j);
        const double z = zeta(net, x, b, i, j);
        EXPECT_NEAR(tau(net, b, i, j), rt, 1e-12 * std::max(1.0, rt));
        EXPECT_NEAR(z, sum(terms), 1e-12 * std::max(1.0, z));
        EXPECT_GE(z, 0.0);
        for (double term : terms) EXPECT_GE(z, term - 1e-12);
        // Only ||W^L_i - W^L_j||_1 depends on the order of the pair.
        EXPECT_EQ(tau(net, b, i, j), tau(net, b, j, i));
        EXPECT_EQ(z, zeta(net, x, b, j, i));
      }
    }
  }
}

TEST(Bounds, ZeroBudgetCollapsesBitExactly) {
  CounterRng rng(13);
  for (int t = 0; t < 100; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 2 + static_cast<int>(rng.below(3)), 6));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const Budget zero = Budget::zero(net.depth());
    const auto r = margin_bound_joint(net, x, zero, 0, 1);
    EXPECT_EQ(r.upper_bound, pairwise_margin(net, x, 0, 1));
    for (std::size_t n = 1; n <= net.depth(); ++n) {
      EXPECT_EQ(margin_bound_single_layer(net, x, n, 0.0, 0.0, 0, 1), pairwise_margin(net, x, 0, 1));
    }
  }
}

TEST(MarginBoundSingleLayer, ToyNetBothBranches) {
  // N = L: 4 + 0.1*2*1 + 2*0.1*1*(2 + 1*0.1)
  EXPECT_NEAR(margin_bound_single_layer(toy_net(), vec({2}), 2, 0.1, 0.1, 0, 1), 4.62, 1e-14);
  // N = 1 < L: 4 + 2 * (0.1*2 + 0.1*(1 + 1*0.1))
  EXPECT_NEAR(margin_bound_single_layer(toy_net(), vec({2}), 1, 0.1, 0.1, 0, 1), 4.62, 1e-14);
  EXPECT_NEAR(margin_bound_single_layer(toy_net(), vec({2}), 1, 0.2, 0.0, 0, 1), 4.8, 1e-14);
  EXPECT_THROW(margin_bound_single_layer(toy_net(), vec({2}), 3, 0.1, 0.1, 0, 1), IndexError);
  EXPECT_THROW(margin_bound_single_layer(toy_net(), vec({2}), 0, 0.1, 0.1, 0, 1), IndexError);
}

TEST(MarginBoundSingleLayer, FourLayerMiddleLayerMatchesDirectTerms) {
  CounterRng rng(14);
  for (int t = 0; t < 100; ++t) {
    const auto net = fixtures::random_net(rng, {5, 4, 6, 3, 4});
    const Eigen::VectorXd x = fixtures::random_vector(rng, 5);
    const double eps2 = rng.uniform(0, 0.2), eps_x = rng.uniform(0, 0.2);
    const Eigen::VectorXd z1 = (net.layer(1) * x).cwiseMax(0.0);
    const double eta = eps2 * ref_l1(z1) + eps_x * ref_inf_norm(net.layer(1)) *
                                               (ref_inf_norm(net.layer(2)) + net.layer(2).cols() * eps2);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double expect =
            pairwise_margin(net, x, i, j) + ref_row_diff(net.layer(4), i, j) * ref_inf_norm(net.layer(3)) * eta;
        EXPECT_NEAR(margin_bound_single_layer(net, x, 2, eps2, eps_x, i, j), expect, 1e-12 * std::max(1.0, std::abs(expect)));
      }
    }
  }
}

// Perturbed margins drawn directly (not through the verify module) stay below the bounds.
TEST(Bounds, DominateSampledPerturbations) {
  CounterRng rng(15);
  for (int t = 0; t < 30; ++t) {
    const int depth = 2 + static_cast<int>(rng.below(3));
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, depth, 5));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const Budget b = fixtures::random_budget(rng, net.depth(), 0.2, 0.2);
    const std::size_t n = 1 + rng.below(net.depth());
    const double eps_n = rng.uniform(0, 0.2);
    for (int s = 0; s < 200; ++s) {
      const bool corner = s % 2 == 0;
      auto draw = [&](double r) { return corner ? r * rng.sign() : rng.uniform(-r, r); };
      Eigen::VectorXd xh = x;
      for (Eigen::Index c = 0; c < xh.size(); ++c) xh(c) += draw(b.eps_x);
      std::vector<Eigen::MatrixXd> joint, single;
      for (std::size_t m = 1; m <= net.depth(); ++m) {
        Eigen::MatrixXd w = net.layer(m), v = net.layer(m);
        for (Eigen::Index c = 0; c < w.size(); ++c) {
          w.data()[c] += draw(b.layer(m));
          if (m == n) v.data()[c] += draw(eps_n);
        }
        joint.push_back(w);
        single.push_back(v);
      }
      const Mlp<double> jn(joint), sn(single);
      for (Eigen::Index i = 0; i < net.class_count(); ++i) {
        for (Eigen::Index j = 0; j < net.class_count(); ++j) {
          EXPECT_LE(pairwise_margin(jn, xh, i, j), margin_bound_joint(net, x, b, i, j).upper_bound + 1e-9);
          EXPECT_LE(pairwise_margin(sn, xh, i, j), margin_bound_single_layer(net, x, n, eps_n, b.eps_x, i, j) + 1e-9);
        }
      }
    }
  }
}

TEST(Bounds, MonotoneInEveryRadius) {
  CounterRng rng(16);
  for (int t = 0; t < 1000; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 2 + static_cast<int>(rng.below(3)), 5));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const Budget small = fixtures::random_budget(rng, net.depth(), 0.2, 0.2);
    Budget big = small;
    big.eps_x += rng.uniform(0, 0.2);
    for (auto& e : big.eps_layers) e += rng.uniform(0, 0.2);
    const std::size_t n = 1 + rng.below(net.depth());
    EXPECT_LE(tau(net, small, 0, 1), tau(net, big, 0, 1));
    EXPECT_LE(zeta(net, x, small, 0, 1), zeta(net, x, big, 0, 1));
    EXPECT_LE(margin_bound_single_layer(net, x, n, small.layer(n), small.eps_x, 0, 1),
              margin_bound_single_layer(net, x, n, big.layer(n), big.eps_x, 0, 1));
  }
}

TEST(WorstRegularizerPair, Examples) {
  const Mlp<double> two({mat({{1}}), mat({{1}, {-1}})});
  const auto p2 = worst_regularizer_pair(two, vec({1}), budget_of(0.1, {0.1, 0.1}), 0);
  EXPECT_EQ(p2.tau_class, 1);
  EXPECT_EQ(p2.zeta_class, 1);

  const Mlp<double> three({mat({{1}}), mat({{1}, {-1}, {0}})});
  const auto p3 = worst_regularizer_pair(three, vec({1}), budget_of(0.1, {0.1, 0.1}), 0);
  EXPECT_EQ(p3.zeta_class, 1);
  EXPECT_EQ(p3.tau_class, 1);
  EXPECT_EQ(p3.zeta_max, zeta(three, vec({1}), budget_of(0.1, {0.1, 0.1}), 1, 0));

  const Mlp<double> equal({mat({{1}}), mat({{2}, {2}, {2}})});
  const auto pe = worst_regularizer_pair(equal, vec({1}), budget_of(0.1, {0.1, 0.2}), 1);
  EXPECT_EQ(pe.tau_class, 0);
  EXPECT_EQ(pe.zeta_class, 0);
  // Only the 2 d_L eps_L term survives: 0.1 * (0 + 2*1*0.2) * (1 + 0.1)
  EXPECT_NEAR(pe.tau_max, 0.044, 1e-15);
}
