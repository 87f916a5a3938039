#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "advx/errors.hpp"
#include "advx/image.hpp"
#include "advx/image_io.hpp"

using namespace advx;

namespace {

GrayImage random_image(Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  GrayImage img(h, w);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(u(rng));
  return img;
}

GrayImage naive_median(const GrayImage& img, int window) {
  const Index r = window / 2;
  GrayImage out(img.rows(), img.cols());
  for (Index y = 0; y < img.rows(); ++y)
    for (Index x = 0; x < img.cols(); ++x) {
      std::vector<int> v;
      for (Index dy = -r; dy <= r; ++dy)
        for (Index dx = -r; dx <= r; ++dx)
          v.push_back(img(std::clamp<Index>(y + dy, 0, img.rows() - 1), std::clamp<Index>(x + dx, 0, img.cols() - 1)));
      std::sort(v.begin(), v.end());
      out(y, x) = static_cast<std::uint8_t>(v[v.size() / 2]);
    }
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("advx_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Grayscale, Bt601Examples) {
  RgbImage rgb{3, 1, {255, 255, 255, 0, 0, 0, 255, 0, 0}};
  const GrayImage g = to_grayscale(rgb);
  EXPECT_EQ(g(0, 0), 255);
  EXPECT_EQ(g(0, 1), 0);
  EXPECT_EQ(g(0, 2), 76);
}

TEST(Median, ConstantAndImpulse) {
  GrayImage c = GrayImage::Constant(9, 9, 77);
  EXPECT_TRUE((median_filter(c) == c).all());
  GrayImage impulse = GrayImage::Zero(9, 9);
  impulse(4, 4) = 255;
  EXPECT_TRUE((median_filter(impulse) == 0).all());
}

TEST(Median, MatchesSortOracleOnRandomImages) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Index h = 5 + static_cast<Index>(rng() % 9), w = 5 + static_cast<Index>(rng() % 9);
    const GrayImage img = random_image(h, w, rng());
    EXPECT_TRUE((median_filter(img, 5) == naive_median(img, 5)).all()) << "trial " << trial;
  }
}

TEST(Median, SecondPassChangesFewerPixels) {
  const GrayImage img = random_image(24, 24, 5);
  const GrayImage once = median_filter(img);
  const GrayImage twice = median_filter(once);
  EXPECT_LT((twice != once).count(), (once != img).count());
}

TEST(Resize, DimensionsAndConstants) {
  ResizeOptions o;
  o.min_output_extent = 1;
  const GrayImage c = GrayImage::Constant(10, 10, 123);
  const GrayImage r = resize_down(c, o);
  EXPECT_EQ(r.rows(), 8);
  EXPECT_EQ(r.cols(), 8);
  EXPECT_TRUE((r == 123).all());
  EXPECT_THROW(resize_down(c), InputError);  // 8 < 128
  EXPECT_EQ(resize_down(GrayImage::Zero(160, 170)).cols(), 136);
}

TEST(Resize, HorizontalRampMatchesHandComputedValues) {
  // I(y, x) = 20 x; output column j samples source x = (j + 0.5) / 0.8 - 0.5.
  GrayImage ramp(10, 10);
  for (Index y = 0; y < 10; ++y)
    for (Index x = 0; x < 10; ++x) ramp(y, x) = static_cast<std::uint8_t>(20 * x);
  ResizeOptions o;
  o.min_output_extent = 1;
  const GrayImage r = resize_down(ramp, o);
  const std::pair<Index, int> expected[] = {{0, 3}, {1, 28}, {2, 53}, {4, 103}, {7, 178}};
  for (const auto& [col, value] : expected) EXPECT_EQ(r(3, col), value) << "column " << col;
}

TEST(Resize, BilinearMatchesClosedFormAtSampledPositions) {
  const GrayImage img = random_image(160, 170, 17);
  const GrayImage r = resize_down(img);
  ASSERT_EQ(r.rows(), 128);
  ASSERT_EQ(r.cols(), 136);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const Index y = static_cast<Index>(rng() % 128), x = static_cast<Index>(rng() % 136);
    const double sy = std::clamp((y + 0.5) / 0.8 - 0.5, 0.0, 159.0);
    const double sx = std::clamp((x + 0.5) / 0.8 - 0.5, 0.0, 169.0);
    const Index y0 = static_cast<Index>(sy), x0 = static_cast<Index>(sx);
    const Index y1 = std::min<Index>(y0 + 1, 159), x1 = std::min<Index>(x0 + 1, 169);
    const double ty = sy - y0, tx = sx - x0;
    const double want = (1 - ty) * ((1 - tx) * img(y0, x0) + tx * img(y0, x1)) + ty * ((1 - tx) * img(y1, x0) + tx * img(y1, x1));
    EXPECT_LE(std::abs(r(y, x) - want), 1.0);
  }
}

TEST(Resize, BicubicKeepsConstants) {
  ResizeOptions o;
  o.kernel = ResizeKernel::Bicubic;
  o.min_output_extent = 1;
  EXPECT_TRUE((resize_down(GrayImage::Constant(20, 20, 200), o) == 200).all());
}

TEST(Quantize, RoundsHalfUpAndClamps) {
  ImageF f(1, 5);
  f << 0.5f, 1.49f, 254.5f, 300.0f, -3.0f;
  const GrayImage q = quantize(f, PixelDomain::Integer8);
  EXPECT_EQ(q(0, 0), 1);
  EXPECT_EQ(q(0, 1), 1);
  EXPECT_EQ(q(0, 2), 255);
  EXPECT_EQ(q(0, 3), 255);
  EXPECT_EQ(q(0, 4), 0);
  const GrayImage img = random_image(4, 4, 1);
  EXPECT_TRUE((quantize(to_unit(img), PixelDomain::Unit) == img).all());
}

TEST(ImageIo, PgmAndPngRoundTrip) {
  const auto dir = temp_dir("io");
  const GrayImage img = random_image(13, 17, 8);
  write_pgm(dir / "a.pgm", img);
  write_png(dir / "a.png", img);
  EXPECT_TRUE((read_gray_image(dir / "a.pgm") == img).all());
  EXPECT_TRUE((read_gray_image(dir / "a.png") == img).all());
  RgbImage rgb{2, 1, {255, 0, 0, 0, 0, 255}};
  write_png(dir / "c.png", rgb);
  const GrayImage g = read_gray_image(dir / "c.png");
  EXPECT_EQ(g(0, 0), 76);
  EXPECT_EQ(g(0, 1), 29);
  EXPECT_THROW(read_gray_image(dir / "missing.pgm"), IoError);
  EXPECT_TRUE(is_supported_image("X.PNG"));
  EXPECT_FALSE(is_supported_image("x.jpg"));
  std::filesystem::remove_all(dir);
}
