#include <gtest/gtest.h>

#include "nonsing/network.hpp"
#include "test_support.hpp"

using namespace nonsing;
using nonsing::fixtures::mat;
using nonsing::fixtures::toy_net;
using nonsing::fixtures::vec;

TEST(Mlp, RejectsInvalidLayers) {
  EXPECT_THROW(Mlp<double>({mat({{1}})}), ConfigError);
  EXPECT_THROW(Mlp<double>({mat({{1, 2}}), mat({{1, 1}})}), DimensionError);
  EXPECT_THROW(Mlp<double>({mat({{1}}), Eigen::MatrixXd(0, 1)}), ConfigError);
  EXPECT_THROW(Mlp<double>({mat({{1}}), mat({{std::nan("")}})}), ConfigError);
}

TEST(Mlp, Shape) {
  const Mlp<double> net({Eigen::MatrixXd::Ones(4, 3), Eigen::MatrixXd::Ones(5, 4), Eigen::MatrixXd::Ones(2, 5)});
  EXPECT_EQ(net.depth(), 3u);
  EXPECT_EQ(net.input_dim(), 3);
  EXPECT_EQ(net.class_count(), 2);
  EXPECT_EQ(net.row_dim(1), 3);
  EXPECT_EQ(net.row_dim(3), 5);
  EXPECT_EQ(net.parameter_count(), 12u + 20u + 10u);
}

TEST(Forward, Examples) {
  EXPECT_EQ(forward(toy_net(), vec({2})), vec({2, -2}));
  EXPECT_EQ(forward(toy_net(), vec({-1})), vec({0, 0}));
  const Mlp<double> zero({Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 3)});
  EXPECT_EQ(forward(zero, vec({5, -7})), vec({0, 0}));
  EXPECT_THROW(forward(toy_net(), vec({1, 2})), DimensionError);
}

TEST(LayerOutput, Examples) {
  const Mlp<double> a({mat({{1, -1}}), mat({{1}, {1}})});
  EXPECT_EQ(layer_output(a, vec({1, 0}), 1), vec({1}));
  EXPECT_EQ(layer_output(toy_net(), vec({-3}), 1), vec({0}));
  const Mlp<double> zero({Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(2, 2)});
  EXPECT_EQ(layer_output(zero, vec({1, 1}), 1), vec({0, 0}));
  EXPECT_THROW(layer_output(toy_net(), vec({1}), 2), IndexError);
  EXPECT_THROW(layer_output(toy_net(), vec({1}), 0), IndexError);
}

TEST(PairwiseMargin, Examples) {
  EXPECT_EQ(pairwise_margin(toy_net(), vec({2}), 0, 0), 0.0);
  EXPECT_EQ(pairwise_margin(toy_net(), vec({2}), 0, 1), 4.0);
  EXPECT_EQ(pairwise_margin(toy_net(), vec({2}), 1, 0), -4.0);
  EXPECT_THROW(pairwise_margin(toy_net(), vec({2}), 0, 2), IndexError);
}

TEST(Predict, TieBreak) {
  const Mlp<double> net({Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3)});
  EXPECT_EQ(predict(net, vec({0.1, 0.9, 0.3})), 1);
  EXPECT_EQ(predict(net, vec({0.5, 0.5, 0})), 0);
  EXPECT_EQ(predict(net, vec({0, 0, 0})), 0);
}

TEST(Forward, PositiveHomogeneityAndBatchAgreement) {
  CounterRng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto net = fixtures::random_net(rng, fixtures::random_sizes(rng, 1 + static_cast<int>(rng.below(4)) + 1, 6));
    const Eigen::VectorXd x = fixtures::random_vector(rng, net.input_dim());
    const double c = rng.uniform(0.1, 5.0);
    const Eigen::VectorXd fx = forward(net, x);
    EXPECT_TRUE(forward(net, Eigen::VectorXd(c * x)).isApprox(c * fx, 1e-12) || fx.norm() < 1e-12);
    EXPECT_NEAR(pairwise_margin(net, x, 0, 1), -pairwise_margin(net, x, 1, 0), 0.0);

    Eigen::MatrixXd xs(net.input_dim(), 3);
    for (int b = 0; b < 3; ++b) xs.col(b) = fixtures::random_vector(rng, net.input_dim());
    const Eigen::MatrixXd batch = forward_batch(net, xs);
    for (int b = 0; b < 3; ++b) EXPECT_TRUE(batch.col(b).isApprox(forward(net, xs.col(b)), 1e-12) || batch.col(b).norm() < 1e-12);
  }
}
