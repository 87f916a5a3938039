#pragma once

#include <filesystem>
#include <iosfwd>

#include "advx/detector.hpp"

namespace advx {

// Binary layout, all integers little-endian:
//   magic "ADVXCKPT" (8 bytes), u32 format version
//   str architecture, u32 n + n x u64 widths, str task tag, str corpus id,
//   u64 seed, u32 epochs
//   u32 C, u32 H, u32 W input shape, u32 num_classes
//   u32 layer count, then per layer: u8 kind, u32 kernel_h, u32 kernel_w,
//     u32 stride, u32 padding, u32 width
//   u32 parameter count, then per parameter: u32 rank, rank x u32 extents,
//     u8 scalar size (4 = float32, 8 = float64), raw little-endian values
// where str is u32 byte length followed by UTF-8 bytes.
inline constexpr char kCheckpointMagic[8] = {'A', 'D', 'V', 'X', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const TrainedNetwork& det);
TrainedNetwork read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const TrainedNetwork& det);
TrainedNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace advx
