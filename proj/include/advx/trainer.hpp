#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "advx/dataset.hpp"
#include "advx/detector.hpp"

namespace advx {

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.99;  // "momentum" of the solver, taken as Adam's first-moment decay
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 100;
  int epochs = 30;
  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Default epoch counts: 30 for the shallow detector, 3 for the deep one.
int default_epochs(const std::string& architecture);

struct AdamState {
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// Throws NumericError on a non-finite gradient.
void adam_step(std::span<Parameter<Real>> params, AdamState& state, const TrainConfig& config);

/// adam_step followed by re-projection of any constrained first layer.
void optimizer_step(Network<Real>& net, AdamState& state, const TrainConfig& config);

struct TrainHistory {
  std::vector<double> train_loss;    // mean over the epoch's batches
  std::vector<double> val_accuracy;
  std::optional<double> test_accuracy;
};

void write_history_csv(std::ostream& out, const TrainHistory& history);

struct TrainResult {
  TrainedNetwork detector;
  TrainHistory history;
};

/// Called after every epoch with (epoch index, history so far, network).
using EpochCallback = std::function<void(int, const TrainHistory&, const TrainedNetwork&)>;

/// Mini-batch Adam training with seeded shuffling. The final-epoch network is kept.
TrainResult train(const NetworkSpec& spec, NetworkMetadata meta, const PatchSet& train_set,
                  const PatchSet& val_set, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Loads the train/val/test splits of `manifest` and trains; test accuracy is filled in.
TrainResult train(const NetworkSpec& spec, const DatasetManifest& manifest, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Fraction of patches whose predicted label matches the ground truth.
double evaluate_accuracy(const TrainedNetwork& det, const PatchSet& set, std::size_t batch_size = 100);
double evaluate_accuracy(const TrainedNetwork& det, const DatasetManifest& manifest, Split split,
                         std::size_t batch_size = 100);

}  // namespace advx
