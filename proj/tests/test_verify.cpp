#include <gtest/gtest.h>

#include "nonsing/verify.hpp"
#include "test_support.hpp"

using namespace nonsing;

TEST(VerifyBound, ZeroBudgetCollapses) {
  CounterRng rng(70);
  const auto net = fixtures::random_net(rng, {4, 5, 3});
  const Eigen::VectorXd x = fixtures::random_vector(rng, 4);
  VerifyOptions opt;
  opt.samples = 50;
  const auto r = verify_bound(net, x, PerturbationBudget<double>::zero(2), opt);
  EXPECT_TRUE(r.ok());
  for (const auto& p : r.pairs) {
    EXPECT_EQ(p.max_observed, p.clean_margin);
    EXPECT_EQ(p.bound, p.clean_margin);
  }
}

TEST(VerifyBound, RandomTinyNetsHaveNoViolations) {
  CounterRng rng(71);
  for (int t = 0; t < 10; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 2 + static_cast<int>(rng.below(3)), 4));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    VerifyOptions opt;
    opt.seed = static_cast<std::uint64_t>(t);
    const auto r = verify_bound(net, x, fixtures::random_budget(rng, net.depth(), 0.2, 0.2), opt);
    EXPECT_TRUE(r.ok()) << nlohmann::json(to_json(r)).dump();
    EXPECT_GE(r.candidates, 1001u);
    for (const auto& p : r.pairs) EXPECT_GE(p.max_observed, p.clean_margin);
  }
}

TEST(VerifyBound, HalvedTauIsCaught) {
  // One hidden unit, all-positive weights: the worst case is the all-up corner,
  // where tau carries most of the bound.
  const Mlp<double> net({fixtures::mat({{1, 1}}), fixtures::mat({{2}, {-1}})});
  const Eigen::VectorXd x = fixtures::vec({0.5, 0.5});
  VerifyOptions opt;
  opt.samples = 1000;
  opt.tau_scale = 0.5;
  const auto r = verify_bound(net, x, PerturbationBudget<double>{0.3, {0.0, 0.0}}, opt);
  EXPECT_FALSE(r.ok());
  ASSERT_TRUE(r.first_violation.has_value());
  EXPECT_GT(r.first_violation->observed, r.first_violation->bound);
  EXPECT_EQ(r.first_violation->weights.size(), 2u);
}

TEST(VerifyBound, HalvedTauIsCaughtOnRandomNets) {
  CounterRng rng(72);
  int caught = 0;
  for (int t = 0; t < 10; ++t) {
    const auto net = fixtures::random_net(rng, {3, 3, 2});
    const Eigen::VectorXd x = fixtures::random_vector(rng, 3);
    VerifyOptions opt;
    opt.tau_scale = 0.5;
    PerturbationBudget<double> b{0.5, {0.0, 0.0}};
    if (!verify_bound(net, x, b, opt).ok()) ++caught;
  }
  EXPECT_GE(caught, 1);
}

TEST(VerifySingleLayerBound, BothBranchesHold) {
  CounterRng rng(73);
  for (int t = 0; t < 10; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 2 + static_cast<int>(rng.below(3)), 4));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    for (std::size_t n = 1; n <= net.depth(); ++n) {
      VerifyOptions opt;
      opt.samples = 300;
      const auto r = verify_single_layer_bound(net, x, n, rng.uniform(0, 0.2), rng.uniform(0, 0.2), opt);
      EXPECT_TRUE(r.ok()) << "N=" << n << " " << to_json(r).dump();
    }
  }
  CounterRng r2(74);
  const auto net = fixtures::random_net(r2, {3, 3, 2});
  EXPECT_THROW(verify_single_layer_bound(net, fixtures::vec({0, 0, 0}), 3, 0.1, 0.1, VerifyOptions{}), IndexError);
}
