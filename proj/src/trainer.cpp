#include "nonsing/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nonsing/errors.hpp"
#include "nonsing/rng.hpp"

namespace nonsing {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::standard: return "standard";
    case Regime::weight_perturb: return "weight_perturb";
    case Regime::at: return "at";
    case Regime::at_beta: return "at_beta";
    case Regime::jiwp: return "jiwp";
  }
  return "?";
}

Regime parse_regime(const std::string& s) {
  if (s == "standard") return Regime::standard;
  if (s == "weight_perturb") return Regime::weight_perturb;
  if (s == "at") return Regime::at;
  if (s == "at_beta") return Regime::at_beta;
  if (s == "jiwp") return Regime::jiwp;
  throw ConfigError("unknown regime '" + s + "'");
}

void TrainConfig::validate() const {
  if (layer_sizes.size() < 3) throw ConfigError("TrainConfig: need at least input, one hidden and output size");
  for (int d : layer_sizes) {
    if (d < 1) throw ConfigError("TrainConfig: layer sizes must be positive");
  }
  if (!(learning_rate > 0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0)) {
    throw ConfigError("TrainConfig: Adam parameters out of range");
  }
  loss.validate(layer_sizes.size() - 1);
  inner_attack.validate();
  const bool no_reg = loss.alpha == 0.0 && loss.beta == 0.0;
  if ((regime == Regime::standard || regime == Regime::at) && !no_reg) {
    throw ConfigError(std::string("TrainConfig: regime ") + to_string(regime) + " requires alpha = beta = 0");
  }
  if (regime == Regime::at_beta && loss.alpha != 0.0) {
    throw ConfigError("TrainConfig: regime at_beta requires alpha = 0");
  }
}

AttackConfig training_attack(double eps_x, double eps_w, AttackMode mode, int steps) {
  AttackConfig a;
  a.mode = mode;
  a.steps = steps;
  a.eps_x = eps_x;
  a.eps_w = eps_w;
  a.step_x = 2.5 * eps_x / steps;
  a.step_w = 2.5 * eps_w / steps;
  return a;
}

void set_regime_parameters(TrainConfig& cfg, double alpha, double beta, double eps_train_x, double eps_train_w) {
  const std::size_t depth = cfg.layer_sizes.size() - 1;
  cfg.loss.alpha = alpha;
  cfg.loss.beta = beta;
  cfg.loss.budget = PerturbationBudget<double>::uniform(depth, eps_train_x, eps_train_w);
  const int steps = cfg.inner_attack.steps;
  switch (cfg.regime) {
    case Regime::at:
    case Regime::at_beta:
      cfg.inner_attack = training_attack(eps_train_x, 0.0, AttackMode::input_only, steps);
      break;
    case Regime::jiwp:
      cfg.inner_attack = training_attack(eps_train_x, eps_train_w, AttackMode::joint, steps);
      break;
    default:
      cfg.inner_attack = training_attack(0.0, 0.0, AttackMode::input_only, steps);
      break;
  }
}

TrainConfig regime_preset(Regime regime, std::vector<int> layer_sizes) {
  TrainConfig cfg;
  cfg.regime = regime;
  cfg.layer_sizes = std::move(layer_sizes);
  if (cfg.layer_sizes.size() < 3) throw ConfigError("regime_preset: need at least 3 layer sizes");
  cfg.inner_attack = training_attack(0.0, 0.0, AttackMode::input_only, 10);
  switch (regime) {
    case Regime::standard: set_regime_parameters(cfg, 0.0, 0.0, 0.0, 0.0); break;
    case Regime::weight_perturb: set_regime_parameters(cfg, 0.25, 0.25, 0.0, 0.01); break;
    case Regime::at: set_regime_parameters(cfg, 0.0, 0.0, 0.09, 0.0); break;
    case Regime::at_beta: set_regime_parameters(cfg, 0.0, 0.005, 0.03, 0.01); break;
    case Regime::jiwp: set_regime_parameters(cfg, 0.02, 0.02, 0.3, 0.02); break;
  }
  return cfg;
}

AdamState AdamState::zeros_like(const Mlp<double>& net) {
  AdamState s;
  for (const auto& w : net.layers()) {
    s.first_moment.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    s.second_moment.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  return s;
}

std::pair<Mlp<double>, AdamState> adam_step(const Mlp<double>& net, const std::vector<Eigen::MatrixXd>& grads,
                                            AdamState state, const AdamParams& params) {
  const auto& layers = net.layers();
  if (grads.size() != layers.size()) {
    throw DimensionError("adam_step: gradient count", static_cast<long>(layers.size()), static_cast<long>(grads.size()));
  }
  if (state.first_moment.size() != layers.size() || state.second_moment.size() != layers.size()) {
    throw DimensionError("adam_step: state layer count", static_cast<long>(layers.size()),
                         static_cast<long>(state.first_moment.size()));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(params.beta1, t);
  const double correction2 = 1.0 - std::pow(params.beta2, t);

  std::vector<Eigen::MatrixXd> updated;
  updated.reserve(layers.size());
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const auto& g = grads[m];
    if (g.rows() != layers[m].rows() || g.cols() != layers[m].cols()) {
      throw DimensionError("adam_step: gradient shape of layer " + std::to_string(m + 1), layers[m].size(), g.size());
    }
    auto& m1 = state.first_moment[m];
    auto& m2 = state.second_moment[m];
    m1 = params.beta1 * m1 + (1.0 - params.beta1) * g;
    m2 = params.beta2 * m2 + (1.0 - params.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd m_hat = m1.array() / correction1;
    const Eigen::ArrayXXd v_hat = m2.array() / correction2;
    updated.push_back(layers[m] - (params.learning_rate * m_hat / (v_hat.sqrt() + params.eps)).matrix());
  }
  return {Mlp<double>(std::move(updated)), std::move(state)};
}

BatchLoss make_batch_loss(const Mlp<double>& net, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                          const TrainConfig& cfg) {
  if (inputs.cols() == 0) throw ConfigError("make_batch_loss: empty batch");
  const GradientRequest weights_only{true, false};
  BatchGradient<double> g;
  switch (cfg.regime) {
    case Regime::standard:
      g = cross_entropy_batch(net, inputs, labels, weights_only);
      break;
    case Regime::weight_perturb:
      g = regularized_batch(net, inputs, inputs, labels, cfg.loss, weights_only);
      break;
    case Regime::at: {
      const Eigen::MatrixXd adv = pgd_input_batch(net, inputs, labels, cfg.inner_attack);
      g = cross_entropy_batch(net, adv, labels, weights_only);
      break;
    }
    case Regime::at_beta: {
      const Eigen::MatrixXd adv = pgd_input_batch(net, inputs, labels, cfg.inner_attack);
      LossConfig<double> loss = cfg.loss;
      loss.alpha = 0.0;
      g = regularized_batch(net, adv, inputs, labels, loss, weights_only);
      break;
    }
    case Regime::jiwp: {
      // Joint attack per example; only the perturbed input is kept.
      Eigen::MatrixXd adv(inputs.rows(), inputs.cols());
      for (Eigen::Index b = 0; b < inputs.cols(); ++b) {
        adv.col(b) = pgd(net, inputs.col(b), labels[static_cast<std::size_t>(b)], cfg.inner_attack).perturbed_input;
      }
      g = regularized_batch(net, adv, inputs, labels, cfg.loss, weights_only);
      break;
    }
  }
  const double scale = 1.0 / static_cast<double>(inputs.cols());
  BatchLoss out;
  out.loss = g.loss_sum * scale;
  out.weight_grads = std::move(g.weight_grads);
  for (auto& w : out.weight_grads) w *= scale;
  return out;
}

Mlp<double> init_network(std::span<const int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 3) throw ConfigError("init_network: need at least 3 layer sizes");
  CounterRng rng(seed, /*stream=*/0x1417);
  std::vector<Eigen::MatrixXd> layers;
  for (std::size_t m = 1; m < layer_sizes.size(); ++m) {
    const int fan_in = layer_sizes[m - 1];
    const int fan_out = layer_sizes[m];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    layers.push_back(std::move(w));
  }
  return Mlp<double>(std::move(layers));
}

double accuracy(const Mlp<double>& net, const Dataset& data) {
  if (data.empty()) throw ConfigError("accuracy: empty dataset");
  constexpr Eigen::Index chunk = 1000;
  std::size_t correct = 0;
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    const Eigen::MatrixXd logits = forward_batch(net, data.inputs.middleCols(start, len));
    for (Eigen::Index b = 0; b < len; ++b) {
      if (argmax(logits.col(b)) == data.labels[static_cast<std::size_t>(start + b)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Mlp<double> train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch,
                  const std::optional<Mlp<double>>& initial) {
  cfg.validate();
  Mlp<double> net = initial ? *initial : init_network(cfg.layer_sizes, cfg.seed);
  data.validate(static_cast<int>(net.class_count()));
  if (data.input_dim() != net.input_dim()) {
    throw DimensionError("train: dataset input dimension", net.input_dim(), data.input_dim());
  }

  AdamState state = AdamState::zeros_like(net);
  const AdamParams params{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    CounterRng rng(cfg.seed, /*stream=*/0xE90C0000ULL + static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      inputs.resize(data.input_dim(), static_cast<Eigen::Index>(len));
      labels.resize(len);
      for (std::size_t k = 0; k < len; ++k) {
        inputs.col(static_cast<Eigen::Index>(k)) = data.inputs.col(static_cast<Eigen::Index>(order[start + k]));
        labels[k] = data.labels[order[start + k]];
      }
      const BatchLoss bl = make_batch_loss(net, inputs, labels, cfg);
      loss_sum += bl.loss;
      ++batches;
      std::tie(net, state) = adam_step(net, bl.weight_grads, std::move(state), params);
    }
    if (on_epoch) on_epoch({epoch, loss_sum / static_cast<double>(batches), accuracy(net, data)});
  }
  return net;
}

}  // namespace nonsing
