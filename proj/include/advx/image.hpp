#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

#include "advx/tensor.hpp"

namespace advx {

/// 8-bit grayscale raster, rows = height, cols = width.
using GrayImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Real-valued raster; the value domain travels separately (see PixelDomain).
using ImageF = Eigen::Array<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Scale of real-valued pixels: 0..255 or the network's 0..1 domain.
enum class PixelDomain { Integer8, Unit };

/// Interleaved 3-channel 8-bit image.
struct RgbImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels;  // R,G,B per pixel, row-major
};

/// BT.601 luma 0.299R + 0.587G + 0.114B, rounded half-up.
GrayImage to_grayscale(const RgbImage& rgb);

/// Median over a window x window neighbourhood with edge replication.
GrayImage median_filter(const GrayImage& img, int window = 5);

enum class ResizeKernel { Bilinear, Bicubic };

struct ResizeOptions {
  double factor = 0.8;
  ResizeKernel kernel = ResizeKernel::Bilinear;
  /// Outputs smaller than this in either dimension are rejected (cannot be patched).
  Index min_output_extent = 128;
};

/// Downscales by `factor` to floor(dim * factor) using half-pixel-centred
/// sampling, rounded half-up to 8 bits.
GrayImage resize_down(const GrayImage& img, const ResizeOptions& options = {});

/// Rounds half-up and clamps to [0, 255]; `domain` says how to read `img`.
GrayImage quantize(const ImageF& img, PixelDomain domain);

/// Pixel values divided by 255.
inline ImageF to_unit(const GrayImage& img) { return img.cast<Real>() / Real(255); }

/// Copy of the window with top-left (x, y).
inline GrayImage crop(const GrayImage& img, Index x, Index y, Index width, Index height) {
  return img.block(y, x, height, width);
}

}  // namespace advx
