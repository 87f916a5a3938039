#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>

#include "advx/network.hpp"

namespace advx {

struct GradCheckOptions {
  std::size_t probe_count = 50;
  std::uint64_t seed = 1;
  /// Gradients below this magnitude are compared in absolute terms.
  double abs_floor = 1e-6;
  /// Times the step may be divided by 10 when a kink is detected.
  int max_shrinks = 3;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  std::size_t input_probes = 0;
  std::size_t shrunk_steps = 0;
  std::string worst_location;
};

/// Compares reverse-mode gradients of the mean cross-entropy loss against
/// central differences (f(x+h) - f(x-h)) / 2h at randomly chosen parameter and
/// input coordinates. Probes alternate over every parameter tensor and the
/// input so all of them are exercised.
template <typename Scalar>
GradCheckResult grad_check(Network<Scalar> net, Tensor<Scalar> input, std::span<const int> labels,
                           const GradCheckOptions& options = {}) {
  if (options.probe_count < 1) throw ConfigError("grad_check: probe_count must be at least 1");
  Workspace<Scalar> ws;
  auto loss_at = [&](const Tensor<Scalar>& x) {
    return static_cast<double>(softmax_cross_entropy(forward(net, ws, x), labels).loss);
  };

  net.zero_grad();
  const auto fitted = softmax_cross_entropy(forward(net, ws, input), labels);
  const Tensor<Scalar> input_grad =
      backward(net, ws, softmax_cross_entropy_grad(fitted.probabilities, labels));

  const double step_scale = std::cbrt(static_cast<double>(std::numeric_limits<Scalar>::epsilon()));
  const std::size_t targets = net.parameters().size() + 1;
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t k = 0; k < options.probe_count; ++k) {
    const std::size_t target = k % targets;
    const bool on_input = target + 1 == targets;
    Scalar* values = on_input ? input.data() : net.parameters()[target].values().data();
    const Index size = on_input ? input.size() : net.parameters()[target].value().size();
    const Index i = std::uniform_int_distribution<Index>(0, size - 1)(rng);
    const double analytic = static_cast<double>(on_input ? input_grad[i]
                                                         : net.parameters()[target].grad()[i]);

    // A ReLU or max-pool switch inside [x - h, x + h] shows up as disagreeing
    // one-sided slopes; shrink h until the window is kink-free (or give up).
    const Scalar original = values[i];
    const double center = loss_at(input);
    Scalar h = static_cast<Scalar>(step_scale * std::max(1.0, std::abs(double(original))));
    double numeric = 0.0;
    for (int attempt = 0;; ++attempt) {
      values[i] = original + h;
      const double up = loss_at(input);
      values[i] = original - h;
      const double down = loss_at(input);
      values[i] = original;
      const double hd = static_cast<double>(h);
      numeric = (up - down) / (2.0 * hd);
      const double forward_slope = (up - center) / hd, backward_slope = (center - down) / hd;
      const double scale = std::max({std::abs(forward_slope), std::abs(backward_slope), options.abs_floor});
      if (std::abs(forward_slope - backward_slope) <= 1e-4 * scale || attempt == options.max_shrinks) break;
      // Stop before round-off in the loss (about eps * |f| / h) outgrows the kink error.
      const double roundoff_next = 40.0 * static_cast<double>(std::numeric_limits<Scalar>::epsilon()) *
                                   std::max(1.0, std::abs(center)) / hd;
      if (roundoff_next > 1e-4 * std::max(std::abs(numeric), options.abs_floor)) break;
      h /= Scalar(10);
      ++result.shrunk_steps;
    }

    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
    const double err = std::abs(analytic - numeric) / denom;
    ++result.probes;
    if (on_input) ++result.input_probes;
    if (err > result.max_relative_error || result.worst_location.empty()) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      if (err >= result.max_relative_error)
        result.worst_location = (on_input ? std::string("input") : "parameter " + std::to_string(target)) +
                                "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic) +
                                " numeric=" + std::to_string(numeric);
    }
  }
  return result;
}

}  // namespace advx
