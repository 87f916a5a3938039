#include "advx/architectures.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <random>

namespace advx {

NetworkSpec build_bsnet(std::span<const Index> conv_widths, std::span<const Index> dense_widths) {
  if (conv_widths.size() != 3 || dense_widths.size() != 2)
    throw ConfigError("build_bsnet: expects 3 conv widths and 2 dense widths");
  for (Index w : conv_widths)
    if (w < 1) throw ConfigError("build_bsnet: widths must be positive");
  for (Index w : dense_widths)
    if (w < 1) throw ConfigError("build_bsnet: widths must be positive");

  NetworkSpec spec;
  spec.name = "BS";
  spec.widths = {conv_widths[0], conv_widths[1], conv_widths[2], dense_widths[0], dense_widths[1]};
  auto& L = spec.layers;
  L.push_back(LayerSpec::constrained_conv(conv_widths[0], 5));
  L.push_back(LayerSpec::relu());
  L.push_back(LayerSpec::maxpool(3, 2));
  L.push_back(LayerSpec::conv(conv_widths[1], 7, 2));
  L.push_back(LayerSpec::relu());
  L.push_back(LayerSpec::maxpool(3, 2));
  L.push_back(LayerSpec::conv(conv_widths[2], 5, 2));
  L.push_back(LayerSpec::relu());
  L.push_back(LayerSpec::maxpool(3, 2));
  L.push_back(LayerSpec::flatten());
  L.push_back(LayerSpec::dense(dense_widths[0]));
  L.push_back(LayerSpec::relu());
  L.push_back(LayerSpec::dense(dense_widths[1]));
  L.push_back(LayerSpec::relu());
  L.push_back(LayerSpec::dense(spec.num_classes));
  infer_shapes(spec);
  return spec;
}

NetworkSpec build_gcnet(Index base_width, std::array<Index, 2> pool_after) {
  if (base_width < 2 || base_width % 2 != 0)
    throw ConfigError("build_gcnet: base_width must be even and at least 2");
  if (pool_after[0] < 1 || pool_after[0] >= pool_after[1] || pool_after[1] > 9)
    throw ConfigError("build_gcnet: pool positions must be increasing conv indices in 1..9");

  NetworkSpec spec;
  spec.name = "GC";
  spec.widths = {base_width, pool_after[0], pool_after[1]};
  for (Index conv = 1; conv <= 9; ++conv) {
    const Index block = (conv - 1) / 3;
    Index width = base_width << block;
    if (conv == 9) width /= 2;
    spec.layers.push_back(LayerSpec::conv(width, 3, 1));
    spec.layers.push_back(LayerSpec::relu());
    if (conv == pool_after[0] || conv == pool_after[1]) spec.layers.push_back(LayerSpec::maxpool(2, 2));
  }
  spec.layers.push_back(LayerSpec::flatten());
  spec.layers.push_back(LayerSpec::dense(spec.num_classes));
  infer_shapes(spec);
  return spec;
}

NetworkSpec build_architecture(const std::string& name, std::span<const Index> widths) {
  if (name == "BS") {
    if (widths.size() != 5) throw ConfigError("BS architecture needs 5 widths");
    return build_bsnet(widths.subspan(0, 3), widths.subspan(3, 2));
  }
  if (name == "GC") {
    if (widths.size() == 1) return build_gcnet(widths[0]);
    if (widths.size() != 3) throw ConfigError("GC architecture needs 1 or 3 widths");
    return build_gcnet(widths[0], {widths[1], widths[2]});
  }
  throw ConfigError("unknown architecture '" + name + "' (expected BS or GC)");
}

template <typename Scalar>
int project_bayar(Tensor<Scalar>& kernels, std::uint64_t seed) {
  const Shape& s = kernels.shape();
  if (s.rank() != 4 || s[1] != 1 || s[2] != s[3] || s[2] % 2 == 0)
    throw ConfigError("project_bayar: expects [Cout, 1, k, k] kernels with odd k, got " + s.str());
  const Index taps = s[2] * s[3];
  const Index center = (s[2] / 2) * s[3] + s[3] / 2;
  int redrawn = 0;
  for (Index f = 0; f < s[0]; ++f) {
    Eigen::Map<Vector<Scalar>> w(kernels.data() + f * taps, taps);
    w[center] = Scalar(0);
    Scalar sum = w.sum();
    if (!(std::abs(sum) > std::numeric_limits<Scalar>::epsilon())) {
      std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(f + 1)));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Index i = 0; i < taps; ++i) w[i] = i == center ? Scalar(0) : static_cast<Scalar>(u(rng));
      sum = w.sum();
      ++redrawn;
      spdlog::warn("project_bayar: filter {} had zero off-center sum, re-drawn", f);
    }
    w /= sum;
    w[center] = Scalar(-1);
  }
  return redrawn;
}

template <typename Scalar>
void initialize(Network<Scalar>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (!net.layer(l).has_parameters()) continue;
    auto& w = net.weights(l);
    const Shape& ws = w.shape();
    const Index fan_in = ws.rank() == 4 ? ws[1] * ws[2] * ws[3] : ws[0];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (Index i = 0; i < w.value().size(); ++i) w.values()[i] = static_cast<Scalar>(normal(rng));
    net.bias(l).values().setZero();
  }
  project_constrained_layers(net, seed);
}

template <typename Scalar>
int project_constrained_layers(Network<Scalar>& net, std::uint64_t seed) {
  int redrawn = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (net.layer(l).kind != LayerKind::ConstrainedConv) continue;
    Tensor<Scalar> k = net.weights(l).value();
    redrawn += project_bayar(k, seed + l);
    net.weights(l).values() = k.values();
  }
  return redrawn;
}

template <typename Scalar>
double bayar_violation(const Network<Scalar>& net) {
  double worst = 0.0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (net.layer(l).kind != LayerKind::ConstrainedConv) continue;
    const Tensor<Scalar>& k = net.weights(l).value();
    const Index taps = k.dim(2) * k.dim(3);
    const Index center = (k.dim(2) / 2) * k.dim(3) + k.dim(3) / 2;
    for (Index f = 0; f < k.dim(0); ++f) {
      const Eigen::Map<const Vector<Scalar>> w(k.data() + f * taps, taps);
      const double c = static_cast<double>(w[center]);
      double off = 0.0;
      for (Index i = 0; i < taps; ++i)
        if (i != center) off += static_cast<double>(w[i]);
      worst = std::max({worst, std::abs(c + 1.0), std::abs(off - 1.0)});
    }
  }
  return worst;
}

template int project_bayar<float>(Tensor<float>&, std::uint64_t);
template int project_bayar<double>(Tensor<double>&, std::uint64_t);
template void initialize<float>(Network<float>&, std::uint64_t);
template void initialize<double>(Network<double>&, std::uint64_t);
template int project_constrained_layers<float>(Network<float>&, std::uint64_t);
template int project_constrained_layers<double>(Network<double>&, std::uint64_t);
template double bayar_violation<float>(const Network<float>&);
template double bayar_violation<double>(const Network<double>&);

}  // namespace advx
