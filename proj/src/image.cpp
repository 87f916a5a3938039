#include "advx/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace advx {

namespace {

std::uint8_t round_to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5 + 1e-9), 0.0, 255.0));
}

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

}  // namespace

GrayImage to_grayscale(const RgbImage& rgb) {
  if (static_cast<Index>(rgb.pixels.size()) != rgb.width * rgb.height * 3)
    throw InputError("to_grayscale: pixel buffer does not hold 3 channels");
  GrayImage out(rgb.height, rgb.width);
  const std::uint8_t* p = rgb.pixels.data();
  for (Index i = 0; i < rgb.width * rgb.height; ++i, p += 3) {
    // Integer form of the luma weights keeps half-up rounding exact.
    const unsigned luma = 299u * p[0] + 587u * p[1] + 114u * p[2];
    out.data()[i] = static_cast<std::uint8_t>((luma + 500u) / 1000u);
  }
  return out;
}

GrayImage median_filter(const GrayImage& img, int window) {
  if (window < 1 || window % 2 == 0) throw InputError("median_filter: window must be odd");
  if (img.rows() < window || img.cols() < window)
    throw InputError("median_filter: image smaller than the window");
  const Index r = window / 2;
  const Index h = img.rows(), w = img.cols();
  GrayImage out(h, w);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(window * window));
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      std::size_t k = 0;
      for (Index dy = -r; dy <= r; ++dy) {
        const Index yy = std::clamp<Index>(y + dy, 0, h - 1);
        for (Index dx = -r; dx <= r; ++dx) buf[k++] = img(yy, std::clamp<Index>(x + dx, 0, w - 1));
      }
      std::nth_element(buf.begin(), mid, buf.end());
      out(y, x) = *mid;
    }
  }
  return out;
}

GrayImage resize_down(const GrayImage& img, const ResizeOptions& options) {
  const double f = options.factor;
  if (!(f > 0.0 && f < 1.0)) throw InputError("resize_down: factor must lie in (0, 1)");
  const Index in_h = img.rows(), in_w = img.cols();
  const Index out_h = static_cast<Index>(std::floor(static_cast<double>(in_h) * f + 1e-9));
  const Index out_w = static_cast<Index>(std::floor(static_cast<double>(in_w) * f + 1e-9));
  if (out_h < std::max<Index>(1, options.min_output_extent) ||
      out_w < std::max<Index>(1, options.min_output_extent))
    throw InputError("resize_down: output " + std::to_string(out_w) + "x" + std::to_string(out_h) +
                     " below minimum extent " + std::to_string(options.min_output_extent));

  auto source_coord = [f](Index dst) { return (static_cast<double>(dst) + 0.5) / f - 0.5; };
  auto at = [&](Index y, Index x) {
    return static_cast<double>(img(std::clamp<Index>(y, 0, in_h - 1), std::clamp<Index>(x, 0, in_w - 1)));
  };

  GrayImage out(out_h, out_w);
  for (Index y = 0; y < out_h; ++y) {
    const double sy = source_coord(y);
    for (Index x = 0; x < out_w; ++x) {
      const double sx = source_coord(x);
      double v = 0.0;
      if (options.kernel == ResizeKernel::Bilinear) {
        const double cy = std::clamp(sy, 0.0, static_cast<double>(in_h - 1));
        const double cx = std::clamp(sx, 0.0, static_cast<double>(in_w - 1));
        const Index y0 = static_cast<Index>(std::floor(cy)), x0 = static_cast<Index>(std::floor(cx));
        const double ty = cy - static_cast<double>(y0), tx = cx - static_cast<double>(x0);
        v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
            ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
      } else {
        const Index y0 = static_cast<Index>(std::floor(sy)), x0 = static_cast<Index>(std::floor(sx));
        for (Index j = -1; j <= 2; ++j) {
          const double wy = cubic_weight(sy - static_cast<double>(y0 + j));
          for (Index i = -1; i <= 2; ++i)
            v += wy * cubic_weight(sx - static_cast<double>(x0 + i)) * at(y0 + j, x0 + i);
        }
      }
      out(y, x) = round_to_u8(v);
    }
  }
  return out;
}

GrayImage quantize(const ImageF& img, PixelDomain domain) {
  const double scale = domain == PixelDomain::Unit ? 255.0 : 1.0;
  GrayImage out(img.rows(), img.cols());
  for (Index i = 0; i < img.size(); ++i) out.data()[i] = round_to_u8(static_cast<double>(img.data()[i]) * scale);
  return out;
}

}  // namespace advx
