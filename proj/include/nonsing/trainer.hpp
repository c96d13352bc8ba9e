#pragma once

// Adam training for the five regimes compared in the experiments:
//
//   standard        CE on clean inputs
//   weight_perturb  CE + alpha*tau + beta*zeta on clean inputs (eps_x = 0)
//   at              CE on input-PGD examples (min-max adversarial training)
//   at_beta         CE on input-PGD examples + beta*zeta at the clean input
//   jiwp            CE on inputs from a joint PGD (weights discarded)
//                   + alpha*tau + beta*zeta at the clean input

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nonsing/attack.hpp"
#include "nonsing/dataset.hpp"
#include "nonsing/loss.hpp"
#include "nonsing/network.hpp"

namespace nonsing {

enum class Regime { standard, weight_perturb, at, at_beta, jiwp };

const char* to_string(Regime r);
Regime parse_regime(const std::string& s);

struct TrainConfig {
  Regime regime = Regime::standard;
  LossConfig<double> loss{0.0, 0.0, PerturbationBudget<double>::zero(4)};  // alpha, beta, training budget
  AttackConfig inner_attack;   // inner maximization for at / at_beta / jiwp
  std::vector<int> layer_sizes{784, 128, 64, 32, 10};
  double learning_rate = 1e-4;
  int batch_size = 50;
  int epochs = 300;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws ConfigError on out-of-range or regime-inconsistent values.
  void validate() const;
};

/// Inner PGD used during training: 10 steps of size 2.5 * eps / steps.
AttackConfig training_attack(double eps_x, double eps_w, AttackMode mode, int steps = 10);

/// Published hyperparameters for each regime. at_beta uses the stronger of the
/// two reported settings (beta = 0.005, eps_x = 0.03).
TrainConfig regime_preset(Regime regime, std::vector<int> layer_sizes = {784, 128, 64, 32, 10});

/// Sets alpha, beta, eps_x^train, eps_w^train and re-derives the budget and inner attack.
void set_regime_parameters(TrainConfig& cfg, double alpha, double beta, double eps_train_x, double eps_train_w);

struct AdamState {
  std::vector<Eigen::MatrixXd> first_moment;
  std::vector<Eigen::MatrixXd> second_moment;
  long step_count = 0;

  static AdamState zeros_like(const Mlp<double>& net);
};

struct AdamParams {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

std::pair<Mlp<double>, AdamState> adam_step(const Mlp<double>& net, const std::vector<Eigen::MatrixXd>& grads,
                                            AdamState state, const AdamParams& params);

struct BatchLoss {
  double loss = 0.0;                         // mean over the batch
  std::vector<Eigen::MatrixXd> weight_grads;  // gradient of the mean
};

BatchLoss make_batch_loss(const Mlp<double>& net, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                          const TrainConfig& cfg);

/// Glorot-uniform weights, U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)).
Mlp<double> init_network(std::span<const int> layer_sizes, std::uint64_t seed);

double accuracy(const Mlp<double>& net, const Dataset& data);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double clean_acc = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs epochs * ceil(n / batch_size) Adam steps with a seeded shuffle per epoch.
/// Starts from `initial` when given, otherwise from init_network(cfg.layer_sizes, cfg.seed).
Mlp<double> train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                  const std::optional<Mlp<double>>& initial = std::nullopt);

}  // namespace nonsing
