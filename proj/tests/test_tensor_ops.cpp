#include <gtest/gtest.h>

#include <random>

#include "advx/errors.hpp"
#include "advx/ops.hpp"

using namespace advx;

namespace {

Tensor<double> random_tensor(const Shape& s, std::uint64_t seed) {
  Tensor<double> t(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  for (Index i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

// Direct window sum, independent of im2col.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& k, const Tensor<double>& b, Index stride,
                          Index pad) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const Index oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  Tensor<double> y(Shape{n, cout, oh, ow});
  for (Index s = 0; s < n; ++s)
    for (Index o = 0; o < cout; ++o)
      for (Index i = 0; i < oh; ++i)
        for (Index j = 0; j < ow; ++j) {
          double acc = b[o];
          for (Index c = 0; c < cin; ++c)
            for (Index u = 0; u < kh; ++u)
              for (Index v = 0; v < kw; ++v) {
                const Index r = i * stride + u - pad, q = j * stride + v - pad;
                if (r >= 0 && r < h && q >= 0 && q < w) acc += x(s, c, r, q) * k(o, c, u, v);
              }
          y(s, o, i, j) = acc;
        }
  return y;
}

}  // namespace

TEST(Shape, AlgebraAndErrors) {
  const Shape s{2, 3, 4, 5};
  EXPECT_EQ(s.rank(), 4);
  EXPECT_EQ(s.numel(), 120);
  EXPECT_EQ(s.tail(), (Shape{3, 4, 5}));
  EXPECT_EQ(s.tail().batched(7), (Shape{7, 3, 4, 5}));
  EXPECT_EQ(s.with_batch(9), (Shape{9, 3, 4, 5}));
  EXPECT_THROW((Shape{1, 2, 3, 4, 5}), ConfigError);
  EXPECT_THROW((Shape{-1}), ConfigError);
  EXPECT_THROW(s.batched(2), ConfigError);
}

TEST(Tensor, ReshapeKeepsDataAndRejectsSizeChange) {
  Tensor<float> t(Shape{2, 6});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  t.reshape({3, 4});
  EXPECT_EQ(t[11], 11.0f);
  EXPECT_THROW(t.reshape({5}), ConfigError);
}

TEST(Extents, ConvAndPoolChainOfBsnet) {
  Index e = conv_output_extent(128, 5, 1, 0);
  EXPECT_EQ(e, 124);
  e = pool_output_extent(e, 3, 2);
  EXPECT_EQ(e, 61);
  e = conv_output_extent(e, 7, 2, 0);
  EXPECT_EQ(e, 28);
  e = pool_output_extent(e, 3, 2);
  EXPECT_EQ(e, 13);
  e = conv_output_extent(e, 5, 2, 0);
  EXPECT_EQ(e, 5);
  EXPECT_EQ(pool_output_extent(e, 3, 2), 2);
  EXPECT_THROW(conv_output_extent(3, 5, 1, 0), ConfigError);
}

class ConvOracle : public ::testing::TestWithParam<std::tuple<Index, Index, Index>> {};

TEST_P(ConvOracle, MatchesWindowSum) {
  const auto [kernel, stride, pad] = GetParam();
  const auto x = random_tensor({2, 3, 11, 9}, 1);
  const auto k = random_tensor({4, 3, kernel, kernel}, 2);
  const auto b = random_tensor({4}, 3);
  const auto got = conv2d(x, k, b, ConvGeometry{stride, pad});
  const auto want = naive_conv(x, k, b, stride, pad);
  ASSERT_EQ(got.shape(), want.shape());
  EXPECT_LT((got.values() - want.values()).cwiseAbs().maxCoeff(), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvOracle,
                         ::testing::Values(std::tuple<Index, Index, Index>{3, 1, 0}, std::tuple<Index, Index, Index>{5, 2, 0},
                                           std::tuple<Index, Index, Index>{3, 1, 1}, std::tuple<Index, Index, Index>{1, 3, 0}));

TEST(Conv, BackwardIsAdjointOfForward) {
  // <conv(x), g> must equal <x, conv^T(g)> for the input gradient.
  const auto x = random_tensor({1, 2, 8, 8}, 4);
  const auto k = random_tensor({3, 2, 3, 3}, 5);
  Tensor<double> zero_bias(Shape{3});
  const auto y = conv2d(x, k, zero_bias, ConvGeometry{2, 1});
  const auto g = random_tensor(y.shape(), 6);
  Tensor<double> dx;
  RowMatrix<double> cols, dcols;
  conv2d_backward(x, k, g, ConvGeometry{2, 1}, &dx, static_cast<double*>(nullptr), static_cast<double*>(nullptr), cols,
                  dcols);
  EXPECT_NEAR(y.values().dot(g.values()), x.values().dot(dx.values()), 1e-10);
}

TEST(MaxPool, PicksWindowMaximaAndRoutesGradient) {
  Tensor<double> x(Shape{1, 1, 4, 4});
  for (Index i = 0; i < 16; ++i) x[i] = static_cast<double>((i * 7) % 16);
  Tensor<double> y;
  std::vector<Index> argmax;
  maxpool2d(x, 2, 2, y, argmax);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) {
      double m = -1;
      for (Index u = 0; u < 2; ++u)
        for (Index v = 0; v < 2; ++v) m = std::max(m, x(0, 0, 2 * i + u, 2 * j + v));
      EXPECT_EQ(y(0, 0, i, j), m);
    }
  Tensor<double> g = Tensor<double>::constant(y.shape(), 1.0), dx;
  maxpool2d_backward(g, std::span<const Index>(argmax), x.shape(), dx);
  EXPECT_DOUBLE_EQ(dx.values().sum(), 4.0);
}

TEST(Dense, RowsAreIndependentOfBatch) {
  const auto w = random_tensor({5, 3}, 7);
  const auto b = random_tensor({3}, 8);
  const auto x = random_tensor({4, 5}, 9);
  const auto y = dense(x, w, b);
  for (Index s = 0; s < 4; ++s) {
    Tensor<double> row(Shape{1, 5});
    for (Index d = 0; d < 5; ++d) row[d] = x[s * 5 + d];
    const auto ys = dense(row, w, b);
    for (Index m = 0; m < 3; ++m) EXPECT_EQ(ys[m], y[s * 3 + m]);
  }
}

TEST(Relu, ClampsAndMasksGradient) {
  Tensor<double> x(Shape{4}, Vector<double>{{-1.0, 0.0, 2.0, 3.0}});
  const auto y = relu(x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[2], 2.0);
  Tensor<double> g = Tensor<double>::constant(x.shape(), 1.0), dx;
  relu_backward(x, g, dx);
  EXPECT_EQ(dx[0], 0.0);
  EXPECT_EQ(dx[1], 0.0);
  EXPECT_EQ(dx[3], 1.0);
}

TEST(Softmax, LossAndGradient) {
  Tensor<double> z(Shape{2, 2}, Vector<double>{{0.0, 0.0, 1000.0, 0.0}});
  const int labels[] = {1, 0};
  const auto l = softmax_cross_entropy(z, std::span<const int>(labels));
  EXPECT_NEAR(l.loss, std::log(2.0) / 2.0, 1e-12);  // second sample is certain
  const auto g = softmax_cross_entropy_grad(l.probabilities, std::span<const int>(labels));
  EXPECT_NEAR(g[0], 0.25, 1e-12);
  EXPECT_NEAR(g[1], -0.25, 1e-12);
  EXPECT_NEAR(g[2], 0.0, 1e-12);
  const int bad[] = {0, 2};
  EXPECT_THROW(softmax_cross_entropy(z, std::span<const int>(bad)), InputError);
}

TEST(Finite, NonFiniteValuesAreReported) {
  Tensor<float> t(Shape{3});
  t[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "probe"), NumericError);
}
