// nonsing: train, attack, evaluate and certify bias-free ReLU MLPs.
//
// Exit codes: 0 success, 1 domain error (bad config or file, bound
// violation), 2 usage error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nonsing/attack.hpp"
#include "nonsing/bounds.hpp"
#include "nonsing/checkpoint.hpp"
#include "nonsing/dataset.hpp"
#include "nonsing/errors.hpp"
#include "nonsing/manifest.hpp"
#include "nonsing/mnist.hpp"
#include "nonsing/robustness.hpp"
#include "nonsing/trainer.hpp"
#include "nonsing/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nonsing;

namespace {

// --data takes either an MNIST directory or an (images, labels) pair.
struct DataOptions {
  std::vector<std::string> paths;
  std::string split;

  void add(CLI::App* app, const std::string& default_split) {
    split = default_split;
    app->add_option("--data", paths, "MNIST directory, or IDX images and labels files (default $MNIST_DIR)")
        ->expected(1, 2);
    app->add_option("--split", split, "train or test (with a directory)")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
  }

  Split parsed_split() const { return split == "train" ? Split::train : Split::test; }

  std::vector<std::string> resolved() const {
    if (!paths.empty()) return paths;
    const fs::path env = mnist_dir_from_env();
    if (env.empty()) throw ConfigError("no --data given and MNIST_DIR is unset");
    return {env.string()};
  }

  Dataset load() const {
    const auto p = resolved();
    if (p.size() == 1) return load_mnist(p[0], parsed_split());
    return to_dataset(load_idx_images(p[0]), load_idx_labels(p[1]), parsed_split());
  }

  std::string describe() const {
    std::string s;
    for (const auto& p : resolved()) s += (s.empty() ? "" : ",") + p;
    return paths.size() == 2 ? s : s + " (" + split + ")";
  }
};

// Writes to `path`, or stdout when the path is empty.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw Error("cannot open " + path + " for writing");
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void finish_manifest(RunManifest& m, const std::string& output) {
  if (output.empty()) return;
  m.outputs["primary"] = output;
  write_manifest(m, output);
}

Eigen::VectorXd example(const Dataset& data, long index) {
  if (index < 0 || static_cast<std::size_t>(index) >= data.size()) {
    throw IndexError("--input-index", index, static_cast<long>(data.size()));
  }
  return data.inputs.col(index);
}

PerturbationBudget<double> budget_from(const Mlp<double>& net, double eps_x, double eps_w,
                                       const std::vector<double>& eps_layers) {
  auto b = PerturbationBudget<double>::uniform(net.depth(), eps_x, eps_w);
  if (!eps_layers.empty()) b.eps_layers = eps_layers;
  b.validate(net.depth());
  return b;
}

json budget_json(const PerturbationBudget<double>& b) { return {{"eps_x", b.eps_x}, {"eps_layers", b.eps_layers}}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, attack and certify ReLU MLPs under joint input-weight perturbations", "nonsing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network on MNIST");
  std::string regime_name = "standard";
  std::optional<double> alpha, beta, eps_train_x, eps_train_w;
  int epochs = 300, batch_size = 50, inner_steps = 10;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::string out_path, metrics_path;
  std::size_t train_subset = 0;
  std::vector<int> layer_sizes{784, 128, 64, 32, 10};
  DataOptions train_data;
  train_cmd->add_option("--regime", regime_name, "standard | weight_perturb | at | at_beta | jiwp")
      ->check(CLI::IsMember({"standard", "weight_perturb", "at", "at_beta", "jiwp"}))
      ->capture_default_str();
  train_cmd->add_option("--alpha", alpha, "weight on tau (default: regime preset)");
  train_cmd->add_option("--beta", beta, "weight on zeta (default: regime preset)");
  train_cmd->add_option("--eps-train-x", eps_train_x, "training input radius (default: regime preset)");
  train_cmd->add_option("--eps-train-w", eps_train_w, "training weight radius (default: regime preset)");
  train_cmd->add_option("--epochs", epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", batch_size)->capture_default_str();
  train_cmd->add_option("--lr", lr)->capture_default_str();
  train_cmd->add_option("--inner-steps", inner_steps, "PGD steps of the inner maximization")->capture_default_str();
  train_cmd->add_option("--layers", layer_sizes, "layer sizes, input first")->delimiter(',')->capture_default_str();
  train_cmd->add_option("--train-subset", train_subset, "use a seeded subset of this many examples (0 = all)")
      ->capture_default_str();
  train_cmd->add_option("--seed", seed)->capture_default_str();
  train_cmd->add_option("--out", out_path, "checkpoint JSON")->required();
  train_cmd->add_option("--metrics", metrics_path, "per-epoch JSONL log");
  train_data.add(train_cmd, "train");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Run PGD against a trained model");
  AttackConfig attack_cfg;
  std::string mode_name = "joint", model_path;
  std::size_t samples = 0;
  DataOptions attack_data;
  attack_cmd->add_option("--mode", mode_name, "input_only | weight_only | joint")
      ->check(CLI::IsMember({"input_only", "weight_only", "joint"}))
      ->capture_default_str();
  attack_cmd->add_option("--steps", attack_cfg.steps)->capture_default_str();
  attack_cmd->add_option("--eps-x", attack_cfg.eps_x)->capture_default_str();
  attack_cmd->add_option("--eps-w", attack_cfg.eps_w)->capture_default_str();
  attack_cmd->add_option("--step-x", attack_cfg.step_x)->capture_default_str();
  attack_cmd->add_option("--step-w", attack_cfg.step_w)->capture_default_str();
  attack_cmd->add_option("--model", model_path, "checkpoint JSON")->required();
  attack_cmd->add_option("--samples", samples, "seeded subset size (0 = every example in order)")
      ->capture_default_str();
  attack_cmd->add_option("--seed", seed)->capture_default_str();
  attack_cmd->add_option("--out", out_path, "JSONL output (default stdout)");
  attack_data.add(attack_cmd, "test");

  // eval-grid
  auto* grid_cmd = app.add_subcommand("eval-grid", "Accuracy over an (eps_x, eps_w) grid and its AUC");
  double eps_x_max = 0.30, eps_w_max = 0.030;
  int grid_steps = 7;
  std::size_t grid_samples = 1000;
  AttackConfig grid_attack;
  DataOptions grid_data;
  grid_cmd->add_option("--model", model_path, "checkpoint JSON")->required();
  grid_cmd->add_option("--eps-x-max", eps_x_max)->capture_default_str();
  grid_cmd->add_option("--eps-w-max", eps_w_max)->capture_default_str();
  grid_cmd->add_option("--grid-steps", grid_steps, "values per axis, 0 included")->capture_default_str();
  grid_cmd->add_option("--samples", grid_samples)->capture_default_str();
  grid_cmd->add_option("--steps", grid_attack.steps)->capture_default_str();
  grid_cmd->add_option("--step-x", grid_attack.step_x)->capture_default_str();
  grid_cmd->add_option("--step-w", grid_attack.step_w)->capture_default_str();
  grid_cmd->add_option("--seed", seed)->capture_default_str();
  grid_cmd->add_option("--out", out_path, "grid CSV; the summary goes to <out>.summary.json")->required();
  grid_data.add(grid_cmd, "test");

  // bound / verify-bound share their options
  long input_index = 0;
  double eps_x = 0.0, eps_w = 0.0;
  std::vector<double> eps_layers;
  VerifyOptions verify_opts;
  DataOptions bound_data;
  auto* bound_cmd = app.add_subcommand("bound", "Print the joint margin bound for every class pair");
  auto* verify_cmd = app.add_subcommand("verify-bound", "Check the joint bound against sampled perturbations");
  for (auto* cmd : {bound_cmd, verify_cmd}) {
    cmd->add_option("--model", model_path, "checkpoint JSON")->required();
    cmd->add_option("--input-index", input_index)->capture_default_str();
    cmd->add_option("--eps-x", eps_x)->capture_default_str();
    cmd->add_option("--eps-w", eps_w, "radius of every weight matrix")->capture_default_str();
    cmd->add_option("--eps-layers", eps_layers, "per-layer radii, overriding --eps-w")->delimiter(',');
    cmd->add_option("--out", out_path, "output (default stdout)");
    bound_data.add(cmd, "test");
  }
  verify_cmd->add_option("--samples", verify_opts.samples)->capture_default_str();
  verify_cmd->add_option("--seed", verify_opts.seed)->capture_default_str();
  verify_cmd->add_option("--pgd-steps", verify_opts.pgd_steps)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunManifest manifest;
    manifest.seed = seed;

    if (*train_cmd) {
      TrainConfig cfg = regime_preset(parse_regime(regime_name), layer_sizes);
      cfg.epochs = epochs;
      cfg.batch_size = batch_size;
      cfg.learning_rate = lr;
      cfg.seed = seed;
      cfg.inner_attack.steps = inner_steps;
      set_regime_parameters(cfg, alpha.value_or(cfg.loss.alpha), beta.value_or(cfg.loss.beta),
                            eps_train_x.value_or(cfg.loss.budget.eps_x),
                            eps_train_w.value_or(cfg.loss.budget.eps_layers.front()));
      cfg.validate();

      Dataset data = train_data.load();
      if (train_subset > 0) data = subset(data, sample_indices(data.size(), train_subset, seed));

      std::optional<std::ofstream> metrics;
      if (!metrics_path.empty()) {
        metrics.emplace(metrics_path);
        if (!*metrics) throw Error("cannot open " + metrics_path + " for writing");
      }
      const Mlp<double> net = train(data, cfg, [&](const EpochMetrics& m) {
        const json line{{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"clean_acc", m.clean_acc}};
        if (metrics) *metrics << line.dump() << '\n' << std::flush;
        std::cerr << line.dump() << '\n';
      });
      save_checkpoint(net, out_path);

      manifest.subcommand = "train";
      manifest.config = {{"regime", regime_name},
                         {"alpha", cfg.loss.alpha},
                         {"beta", cfg.loss.beta},
                         {"eps_train_x", cfg.loss.budget.eps_x},
                         {"eps_train_w", cfg.loss.budget.eps_layers.front()},
                         {"epochs", cfg.epochs},
                         {"batch_size", cfg.batch_size},
                         {"lr", cfg.learning_rate},
                         {"inner_steps", cfg.inner_attack.steps},
                         {"inner_step_x", cfg.inner_attack.step_x},
                         {"inner_step_w", cfg.inner_attack.step_w},
                         {"layers", cfg.layer_sizes},
                         {"train_subset", train_subset},
                         {"adam", {{"beta1", cfg.adam_beta1}, {"beta2", cfg.adam_beta2}, {"eps", cfg.adam_eps}}}};
      manifest.inputs["data"] = train_data.describe();
      if (!metrics_path.empty()) manifest.outputs["metrics"] = metrics_path;
      finish_manifest(manifest, out_path);
      return 0;
    }

    if (*attack_cmd) {
      attack_cfg.mode = parse_attack_mode(mode_name);
      attack_cfg.validate();
      const Mlp<double> net = load_checkpoint(model_path);
      const Dataset data = attack_data.load();
      std::vector<std::size_t> indices;
      if (samples == 0) {
        for (std::size_t i = 0; i < data.size(); ++i) indices.push_back(i);
      } else {
        indices = sample_indices(data.size(), samples, seed);
      }
      Sink sink(out_path);
      for (std::size_t i : indices) {
        const auto r = pgd(net, data.inputs.col(static_cast<Eigen::Index>(i)), data.labels[i], attack_cfg);
        sink.out() << json{{"index", i},
                           {"label", data.labels[i]},
                           {"clean_pred", r.clean_prediction},
                           {"attacked_pred", r.attacked_prediction},
                           {"final_loss", r.final_loss}}
                          .dump()
                   << '\n';
      }
      manifest.subcommand = "attack";
      manifest.config = {{"mode", mode_name},       {"steps", attack_cfg.steps},   {"eps_x", attack_cfg.eps_x},
                         {"eps_w", attack_cfg.eps_w}, {"step_x", attack_cfg.step_x}, {"step_w", attack_cfg.step_w},
                         {"input_clamp", {0.0, 1.0}}, {"samples", samples}};
      manifest.inputs["model"] = model_path;
      manifest.inputs["data"] = attack_data.describe();
      finish_manifest(manifest, out_path);
      return 0;
    }

    if (*grid_cmd) {
      if (grid_steps < 1) throw ConfigError("--grid-steps must be >= 1");
      GridSpec spec;
      spec.eps_x_values = linspace_from_zero(eps_x_max, grid_steps);
      spec.eps_w_values = linspace_from_zero(eps_w_max, grid_steps);
      spec.attack = grid_attack;
      spec.sample_count = grid_samples;
      spec.seed = seed;
      spec.validate();
      const Mlp<double> net = load_checkpoint(model_path);
      const Dataset data = grid_data.load();
      const GridEvalResult result = run_grid(net, data, spec);

      {
        Sink sink(out_path);
        write_grid_csv(result, sink.out());
      }
      const std::string summary_path = out_path + ".summary.json";
      {
        Sink sink(summary_path);
        sink.out() << json{{"auc", result.auc}, {"spec", grid_spec_to_json(spec)}}.dump(2) << '\n';
      }
      std::cout << json{{"auc", result.auc}}.dump() << '\n';

      manifest.subcommand = "eval-grid";
      manifest.config = grid_spec_to_json(spec);
      manifest.inputs["model"] = model_path;
      manifest.inputs["data"] = grid_data.describe();
      manifest.outputs["summary"] = summary_path;
      finish_manifest(manifest, out_path);
      return 0;
    }

    if (*bound_cmd || *verify_cmd) {
      const Mlp<double> net = load_checkpoint(model_path);
      const Dataset data = bound_data.load();
      const Eigen::VectorXd x = example(data, input_index);
      const auto budget = budget_from(net, eps_x, eps_w, eps_layers);
      manifest.inputs["model"] = model_path;
      manifest.inputs["data"] = bound_data.describe();
      Sink sink(out_path);

      if (*bound_cmd) {
        for (Eigen::Index i = 0; i < net.class_count(); ++i) {
          for (Eigen::Index j = 0; j < net.class_count(); ++j) {
            if (i == j) continue;
            const auto r = margin_bound_joint(net, x, budget, i, j);
            sink.out() << json{{"class_i", r.class_i}, {"class_j", r.class_j}, {"margin", r.margin},
                               {"tau", r.tau},         {"zeta", r.zeta},       {"upper_bound", r.upper_bound}}
                              .dump()
                       << '\n';
          }
        }
        manifest.subcommand = "bound";
        manifest.config = {{"input_index", input_index}, {"budget", budget_json(budget)}};
        finish_manifest(manifest, out_path);
        return 0;
      }

      const VerifyReport report = verify_bound(net, x, budget, verify_opts);
      json doc = to_json(report);
      if (report.first_violation) {
        const auto& v = *report.first_violation;
        doc["first_violation"]["input"] = std::vector<double>(v.input.data(), v.input.data() + v.input.size());
        doc["first_violation"]["weights"] = checkpoint_to_json(Mlp<double>(v.weights))["layers"];
      }
      sink.out() << doc.dump() << '\n';
      manifest.subcommand = "verify-bound";
      manifest.seed = verify_opts.seed;
      manifest.config = {{"input_index", input_index},
                         {"budget", budget_json(budget)},
                         {"samples", verify_opts.samples},
                         {"pgd_steps", verify_opts.pgd_steps},
                         {"slack", verify_opts.slack}};
      finish_manifest(manifest, out_path);
      if (!report.ok()) {
        std::cerr << "nonsing: " << report.violations << " bound violation(s)\n";
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "nonsing: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
