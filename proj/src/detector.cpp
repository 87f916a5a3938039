#include "advx/detector.hpp"

#include <algorithm>

namespace advx {

namespace {

void check_patch(const TrainedNetwork& det, Index rows, Index cols) {
  const Shape& in = det.net.spec().input_shape;
  if (in[0] != 1 || rows != in[1] || cols != in[2])
    throw InputError("patch is " + std::to_string(cols) + "x" + std::to_string(rows) + ", network expects " +
                     std::to_string(in[2]) + "x" + std::to_string(in[1]));
}

Prediction read_prediction(const Tensor<Real>& logits, Index row) {
  if (logits.dim(1) != 2) throw ConfigError("detector head must emit 2 logits");
  Prediction p;
  const Real z0 = logits[row * 2], z1 = logits[row * 2 + 1];
  const Real m = std::max(z0, z1);
  const Real e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
  p.logits = {z0, z1};
  p.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
  p.label = z1 > z0 ? 1 : 0;
  return p;
}

Tensor<Real> single(const ImageF& unit_patch) {
  Tensor<Real> x({1, 1, unit_patch.rows(), unit_patch.cols()});
  std::copy(unit_patch.data(), unit_patch.data() + unit_patch.size(), x.data());
  return x;
}

ImageF as_image(const Tensor<Real>& t, Index rows, Index cols) {
  ImageF img(rows, cols);
  std::copy(t.data(), t.data() + rows * cols, img.data());
  return img;
}

}  // namespace

std::string NetworkMetadata::display_name() const {
  return architecture + "[" + corpus_id + "](" + to_string(task) + ")";
}

TrainedNetwork make_detector(const NetworkSpec& spec, const NetworkMetadata& meta) {
  TrainedNetwork det{Network<Real>(spec), meta};
  if (det.meta.architecture.empty()) det.meta.architecture = spec.name;
  initialize(det.net, meta.seed);
  return det;
}

Tensor<Real> to_batch(std::span<const ImageF> patches, PixelDomain domain) {
  if (patches.empty()) throw InputError("to_batch: no patches");
  const Index h = patches[0].rows(), w = patches[0].cols();
  Tensor<Real> x({static_cast<Index>(patches.size()), 1, h, w});
  const Real scale = domain == PixelDomain::Integer8 ? Real(1) / Real(255) : Real(1);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].rows() != h || patches[i].cols() != w) throw InputError("to_batch: patch sizes differ");
    Eigen::Map<ImageF> dst(x.data() + static_cast<Index>(i) * h * w, h, w);
    dst = patches[i] * scale;
  }
  return x;
}

Tensor<Real> to_batch(std::span<const GrayImage> patches) {
  if (patches.empty()) throw InputError("to_batch: no patches");
  const Index h = patches[0].rows(), w = patches[0].cols();
  Tensor<Real> x({static_cast<Index>(patches.size()), 1, h, w});
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].rows() != h || patches[i].cols() != w) throw InputError("to_batch: patch sizes differ");
    Eigen::Map<ImageF> dst(x.data() + static_cast<Index>(i) * h * w, h, w);
    dst = to_unit(patches[i]);
  }
  return x;
}

Prediction classify(const TrainedNetwork& det, const ImageF& unit_patch, Workspace<Real>& ws) {
  check_patch(det, unit_patch.rows(), unit_patch.cols());
  return read_prediction(forward(det.net, ws, single(unit_patch)), 0);
}

Prediction classify(const TrainedNetwork& det, const ImageF& patch, PixelDomain domain) {
  Workspace<Real> ws;
  if (domain == PixelDomain::Unit) return classify(det, patch, ws);
  return classify(det, ImageF(patch / Real(255)), ws);
}

Prediction classify(const TrainedNetwork& det, const GrayImage& patch) {
  Workspace<Real> ws;
  return classify(det, to_unit(patch), ws);
}

std::vector<Prediction> classify_all(const TrainedNetwork& det, std::span<const GrayImage> patches,
                                     std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("classify_all: batch size must be positive");
  std::vector<Prediction> out;
  out.reserve(patches.size());
  Workspace<Real> ws;
  for (std::size_t start = 0; start < patches.size(); start += batch_size) {
    const auto chunk = patches.subspan(start, std::min(batch_size, patches.size() - start));
    for (const auto& p : chunk) check_patch(det, p.rows(), p.cols());
    const Tensor<Real>& logits = forward(det.net, ws, to_batch(chunk));
    for (Index i = 0; i < static_cast<Index>(chunk.size()); ++i) out.push_back(read_prediction(logits, i));
  }
  return out;
}

ImageF input_gradient(const TrainedNetwork& det, const ImageF& unit_patch, int target_label,
                      Workspace<Real>& ws, Prediction* prediction) {
  check_patch(det, unit_patch.rows(), unit_patch.cols());
  const int labels[1] = {target_label};
  const Tensor<Real>& logits = forward(det.net, ws, single(unit_patch));
  if (prediction) *prediction = read_prediction(logits, 0);
  const auto loss = softmax_cross_entropy(logits, std::span<const int>(labels));
  const Tensor<Real> g =
      backward_input(det.net, ws, softmax_cross_entropy_grad(loss.probabilities, std::span<const int>(labels)));
  return as_image(g, unit_patch.rows(), unit_patch.cols());
}

ImageF input_gradient(const TrainedNetwork& det, const ImageF& unit_patch, int target_label) {
  Workspace<Real> ws;
  return input_gradient(det, unit_patch, target_label, ws);
}

LogitGradients logit_gradients(const TrainedNetwork& det, const ImageF& unit_patch, Workspace<Real>& ws) {
  check_patch(det, unit_patch.rows(), unit_patch.cols());
  const Tensor<Real>& logits = forward(det.net, ws, single(unit_patch));
  LogitGradients out;
  out.prediction = read_prediction(logits, 0);
  std::array<Tensor<Real>, 2> seeds{Tensor<Real>({1, 2}), Tensor<Real>({1, 2})};
  seeds[0][0] = Real(1);
  seeds[1][1] = Real(1);
  const auto grads = backward_input_multi(det.net, ws, std::span<const Tensor<Real>>(seeds));
  for (int k = 0; k < 2; ++k) out.d_logit[static_cast<std::size_t>(k)] = as_image(grads[static_cast<std::size_t>(k)], unit_patch.rows(), unit_patch.cols());
  return out;
}

}  // namespace advx
