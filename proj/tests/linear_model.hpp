#pragma once

// Flatten -> dense(2) detector with hand-set weights, used as a closed-form oracle.

#include "advx/detector.hpp"

namespace advx::testing {

/// z_c = sum_i w_c[i] x_i + b_c on a 1 x side x side input.
inline TrainedNetwork linear_detector(Index side, const ImageF& w0, const ImageF& w1, Real b0, Real b1) {
  NetworkSpec spec;
  spec.name = "LIN";
  spec.input_shape = Shape{1, side, side};
  spec.layers = {LayerSpec::flatten(), LayerSpec::dense(2)};
  NetworkMetadata meta{"LIN", "R", Task::Median, 0, 1};
  TrainedNetwork det{Network<Real>(spec), meta};
  auto W = det.net.weights(1).values();  // [side*side, 2], row-major
  for (Index i = 0; i < side * side; ++i) {
    W[i * 2] = w0.data()[i];
    W[i * 2 + 1] = w1.data()[i];
  }
  det.net.bias(1).values()[0] = b0;
  det.net.bias(1).values()[1] = b1;
  return det;
}

/// Label 1 iff mean(x) > threshold (unit domain).
inline TrainedNetwork mean_threshold_detector(Index side, Real threshold) {
  const Real n = static_cast<Real>(side * side);
  return linear_detector(side, ImageF::Constant(side, side, Real(-1) / n), ImageF::Constant(side, side, Real(1) / n),
                         threshold, -threshold);
}

}  // namespace advx::testing
