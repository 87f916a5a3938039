#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "advx/network.hpp"

namespace advx {

inline constexpr std::array<Index, 3> kBsConvWidths{8, 48, 64};
inline constexpr std::array<Index, 2> kBsDenseWidths{256, 256};
inline constexpr Index kGcBaseWidth = 16;
inline constexpr std::array<Index, 2> kGcPoolAfter{3, 6};

/// Shallow detector: constrained 5x5 conv, two strided convs (7x7, 5x5),
/// a 3x3/2 max-pool after each conv, then three dense layers.
NetworkSpec build_bsnet(std::span<const Index> conv_widths = kBsConvWidths,
                        std::span<const Index> dense_widths = kBsDenseWidths);

/// Deep detector: nine 3x3 stride-1 convs in three blocks whose width doubles
/// from base_width, the last conv halved, two 2x2/2 max-pools, one dense layer.
/// pool_after gives the 1-based conv indices followed by a pool.
NetworkSpec build_gcnet(Index base_width = kGcBaseWidth,
                        std::array<Index, 2> pool_after = kGcPoolAfter);

/// Rebuilds a named architecture from its recorded width list.
NetworkSpec build_architecture(const std::string& name, std::span<const Index> widths);

/// Projects every [Cout, 1, k, k] filter onto the prediction-error form:
/// center tap -1 and the remaining taps rescaled to sum to +1. A filter whose
/// off-center taps sum to zero cannot be rescaled and is re-drawn from `seed`.
/// Returns the number of re-drawn filters.
template <typename Scalar>
int project_bayar(Tensor<Scalar>& kernels, std::uint64_t seed = 0);

/// He-normal weights, zero biases, and Bayar projection of a constrained first layer.
template <typename Scalar>
void initialize(Network<Scalar>& net, std::uint64_t seed);

/// Reapplies project_bayar to the constrained layer, if any. Returns re-drawn filter count.
template <typename Scalar>
int project_constrained_layers(Network<Scalar>& net, std::uint64_t seed = 0);

/// Largest deviation from the Bayar form over all first-layer filters
/// (max of |center + 1| and |off-center sum - 1|); 0 when no constrained layer.
template <typename Scalar>
double bayar_violation(const Network<Scalar>& net);

}  // namespace advx
