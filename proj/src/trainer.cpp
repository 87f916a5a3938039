#include "advx/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "advx/rng.hpp"

namespace advx {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in (0, 1)");
  if (!(epsilon_hat > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
}

int default_epochs(const std::string& architecture) { return architecture == "GC" ? 3 : 30; }

void adam_step(std::span<Parameter<Real>> params, AdamState& state, const TrainConfig& config) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape());
      state.v.emplace_back(p.shape());
    }
  }
  if (state.m.size() != params.size()) throw ConfigError("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(state.m[i].shape() == params[i].shape())) throw ConfigError("adam_step: moment shape mismatch");
    if (!params[i].grad().all_finite())
      throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Real b1 = static_cast<Real>(config.beta1), b2 = static_cast<Real>(config.beta2);
  const Real correction1 = static_cast<Real>(1.0 - std::pow(config.beta1, t));
  const Real correction2 = static_cast<Real>(1.0 - std::pow(config.beta2, t));
  const Real lr = static_cast<Real>(config.learning_rate);
  const Real eps = static_cast<Real>(config.epsilon_hat);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = params[i].grad().values().array();
    auto m = state.m[i].values().array();
    auto v = state.v[i].values().array();
    m = b1 * m + (Real(1) - b1) * g;
    v = b2 * v + (Real(1) - b2) * g.square();
    params[i].values().array() -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

void optimizer_step(Network<Real>& net, AdamState& state, const TrainConfig& config) {
  adam_step(net.parameters(), state, config);
  project_constrained_layers(net, derive_seed(config.seed, static_cast<std::uint64_t>(state.step)));
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,loss,val_accuracy\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    char line[96];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.4f\n", e + 1, history.train_loss[e],
                  e < history.val_accuracy.size() ? history.val_accuracy[e] : 0.0);
    out << line;
  }
  if (history.test_accuracy) {
    char line[64];
    std::snprintf(line, sizeof line, "test,,%.4f\n", *history.test_accuracy);
    out << line;
  }
}

namespace {

void require_both_classes(const PatchSet& set, const char* what) {
  if (set.count(kPristineLabel) == 0 || set.count(kManipulatedLabel) == 0)
    throw InputError(std::string(what) + " split must contain both classes");
}

}  // namespace

TrainResult train(const NetworkSpec& spec, NetworkMetadata meta, const PatchSet& train_set,
                  const PatchSet& val_set, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require_both_classes(train_set, "training");
  require_both_classes(val_set, "validation");
  meta.seed = config.seed;
  meta.epochs = static_cast<std::uint32_t>(config.epochs);
  TrainResult result{make_detector(spec, meta), {}};
  Network<Real>& net = result.detector.net;
  AdamState state;
  Workspace<Real> ws;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<GrayImage> batch;
  std::vector<int> labels;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937_64 rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set.patches[order[i]]);
        labels.push_back(train_set.labels[order[i]]);
      }
      try {
        net.zero_grad();
        const auto loss = softmax_cross_entropy(forward(net, ws, to_batch(batch)), std::span<const int>(labels));
        backward(net, ws, softmax_cross_entropy_grad(loss.probabilities, std::span<const int>(labels)));
        optimizer_step(net, state, config);
        loss_sum += static_cast<double>(loss.loss);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batches + 1) + ": " + e.what());
      }
      ++batches;
    }
    result.history.train_loss.push_back(loss_sum / static_cast<double>(batches));
    result.history.val_accuracy.push_back(evaluate_accuracy(result.detector, val_set, config.eval_batch_size));
    const auto& losses = result.history.train_loss;
    if (epoch > 0 && epoch < 3 && losses[static_cast<std::size_t>(epoch)] > losses[static_cast<std::size_t>(epoch) - 1])
      spdlog::warn("{}: training loss rose from {:.5f} to {:.5f} at epoch {}", meta.display_name(),
                   losses[static_cast<std::size_t>(epoch) - 1], losses[static_cast<std::size_t>(epoch)], epoch + 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    spdlog::info("{} epoch {}/{}: loss {:.5f}, val accuracy {:.4f} ({:.1f}s)", meta.display_name(), epoch + 1,
                 config.epochs, losses.back(), result.history.val_accuracy.back(), secs);
    if (on_epoch) on_epoch(epoch, result.history, result.detector);
  }
  return result;
}

TrainResult train(const NetworkSpec& spec, const DatasetManifest& manifest, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  NetworkMetadata meta;
  meta.architecture = spec.name;
  meta.corpus_id = manifest.corpus_id;
  meta.task = manifest.task;
  const PatchSet train_set = load_patches(manifest, Split::Train);
  const PatchSet val_set = load_patches(manifest, Split::Val);
  TrainResult result = train(spec, meta, train_set, val_set, config, on_epoch);
  const PatchSet test_set = load_patches(manifest, Split::Test);
  if (test_set.size() > 0) result.history.test_accuracy = evaluate_accuracy(result.detector, test_set, config.eval_batch_size);
  return result;
}

double evaluate_accuracy(const TrainedNetwork& det, const PatchSet& set, std::size_t batch_size) {
  if (set.size() == 0) throw InputError("evaluate_accuracy: empty split");
  const auto preds = classify_all(det, set.patches, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == set.labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double evaluate_accuracy(const TrainedNetwork& det, const DatasetManifest& manifest, Split split,
                         std::size_t batch_size) {
  return evaluate_accuracy(det, load_patches(manifest, split), batch_size);
}

}  // namespace advx
