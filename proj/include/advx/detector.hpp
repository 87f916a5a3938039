#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advx/architectures.hpp"
#include "advx/dataset.hpp"
#include "advx/image.hpp"
#include "advx/network.hpp"

namespace advx {

/// Provenance of a trained detector: architecture, corpus, and task.
struct NetworkMetadata {
  std::string architecture;  // "BS" or "GC"
  std::string corpus_id;
  Task task = Task::Median;
  std::uint32_t epochs = 0;
  std::uint64_t seed = 0;

  /// Display name such as "BS[R](med)".
  std::string display_name() const;
};

/// A detector's layer schedule, learned parameters, and provenance.
/// Treated as immutable once training has finished.
struct TrainedNetwork {
  Network<Real> net;
  NetworkMetadata meta;
};

/// Fresh detector for `spec` with seeded initialisation.
TrainedNetwork make_detector(const NetworkSpec& spec, const NetworkMetadata& meta);

struct Prediction {
  int label = 0;
  std::array<Real, 2> probabilities{};
  std::array<Real, 2> logits{};
};

/// Converts patches to an [N, 1, H, W] tensor in the network's unit domain.
Tensor<Real> to_batch(std::span<const ImageF> patches, PixelDomain domain);
Tensor<Real> to_batch(std::span<const GrayImage> patches);

/// Label and class probabilities for one patch. Pixels are rescaled to the
/// unit domain first.
Prediction classify(const TrainedNetwork& det, const ImageF& patch, PixelDomain domain);
Prediction classify(const TrainedNetwork& det, const GrayImage& patch);
/// Same, reusing a caller-owned workspace.
Prediction classify(const TrainedNetwork& det, const ImageF& unit_patch, Workspace<Real>& ws);

/// Predictions for a batch of 8-bit patches, evaluated `batch_size` at a time.
std::vector<Prediction> classify_all(const TrainedNetwork& det, std::span<const GrayImage> patches,
                                     std::size_t batch_size = 100);

/// Gradient of the cross-entropy loss toward `target_label` with respect to
/// the unit-domain input pixels. `prediction`, when given, receives the
/// forward-pass result at the same point.
ImageF input_gradient(const TrainedNetwork& det, const ImageF& unit_patch, int target_label,
                      Workspace<Real>& ws, Prediction* prediction = nullptr);
ImageF input_gradient(const TrainedNetwork& det, const ImageF& unit_patch, int target_label);

/// Gradients of both logits with respect to the unit-domain input from one
/// forward pass, plus the prediction at that point.
struct LogitGradients {
  Prediction prediction;
  std::array<ImageF, 2> d_logit;
};
LogitGradients logit_gradients(const TrainedNetwork& det, const ImageF& unit_patch, Workspace<Real>& ws);

}  // namespace advx
