#pragma once

// Forward and reverse-mode kernels for the layer types the detectors use.
// All kernels take NCHW row-major tensors and loop over the batch, so a
// sample's result does not depend on which batch it was evaluated in.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "advx/tensor.hpp"

namespace advx {

struct ConvGeometry {
  Index stride = 1;
  Index padding = 0;
};

inline Index conv_output_extent(Index in, Index kernel, Index stride, Index padding) {
  if (stride < 1) throw ConfigError("conv2d: stride must be positive");
  if (padding < 0) throw ConfigError("conv2d: padding must be non-negative");
  if (kernel < 1) throw ConfigError("conv2d: kernel extent must be positive");
  if (in + 2 * padding < kernel)
    throw ConfigError("conv2d: kernel " + std::to_string(kernel) + " larger than padded input " +
                      std::to_string(in + 2 * padding));
  return (in + 2 * padding - kernel) / stride + 1;
}

inline Index pool_output_extent(Index in, Index kernel, Index stride) {
  if (stride < 1 || kernel < 1) throw ConfigError("maxpool2d: kernel and stride must be positive");
  if (kernel > in)
    throw ConfigError("maxpool2d: kernel " + std::to_string(kernel) + " exceeds extent " +
                      std::to_string(in));
  return (in - kernel) / stride + 1;
}

namespace detail {

// Unfolds one CHW image into a [C*kh*kw, oh*ow] matrix whose rows are
// contiguous in the output position.
template <typename Scalar>
void im2col(const Scalar* image, Index channels, Index height, Index width, Index kh, Index kw,
            const ConvGeometry& g, Index oh, Index ow, RowMatrix<Scalar>& cols) {
  cols.resize(channels * kh * kw, oh * ow);
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = image + c * height * width;
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j, ++row) {
        Scalar* dst = cols.data() + row * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          Scalar* d = dst + oy * ow;
          const Index iy = oy * g.stride - g.padding + i;
          if (iy < 0 || iy >= height) {
            std::fill(d, d + ow, Scalar(0));
            continue;
          }
          const Scalar* src = plane + iy * width;
          if (g.stride == 1 && g.padding == 0) {
            std::copy(src + j, src + j + ow, d);
            continue;
          }
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride - g.padding + j;
            d[ox] = (ix >= 0 && ix < width) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the image.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, Index channels, Index height, Index width, Index kh,
            Index kw, const ConvGeometry& g, Index oh, Index ow, Scalar* image) {
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = image + c * height * width;
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j, ++row) {
        const Scalar* src = cols.data() + row * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride - g.padding + i;
          if (iy < 0 || iy >= height) continue;
          Scalar* dst = plane + iy * width;
          const Scalar* s = src + oy * ow;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride - g.padding + j;
            if (ix >= 0 && ix < width) dst[ix] += s[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Output shape of conv2d for an NCHW input and [Cout,Cin,kH,kW] kernels.
inline Shape conv2d_shape(const Shape& input, const Shape& kernels, const ConvGeometry& g) {
  if (input.rank() != 4 || kernels.rank() != 4) throw ConfigError("conv2d: expects rank-4 tensors");
  if (input[1] != kernels[1])
    throw ConfigError("conv2d: input has " + std::to_string(input[1]) + " channels, kernels expect " +
                      std::to_string(kernels[1]));
  return {input[0], kernels[0], conv_output_extent(input[2], kernels[2], g.stride, g.padding),
          conv_output_extent(input[3], kernels[3], g.stride, g.padding)};
}

/// Cross-correlation of each kernel with the (zero-padded) input plus bias.
template <typename Scalar>
void conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels, const Tensor<Scalar>& bias,
            const ConvGeometry& g, Tensor<Scalar>& out, RowMatrix<Scalar>& cols) {
  const Shape os = conv2d_shape(input.shape(), kernels.shape(), g);
  if (bias.size() != kernels.dim(0)) throw ConfigError("conv2d: bias length mismatch");
  out.resize(os);
  const Index n = os[0], cout = os[1], oh = os[2], ow = os[3];
  const Index cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index kh = kernels.dim(2), kw = kernels.dim(3);
  const auto weights = kernels.matrix(cout, cin * kh * kw);
  const Eigen::Map<const Vector<Scalar>> b(bias.data(), cout);
  for (Index s = 0; s < n; ++s) {
    detail::im2col(input.data() + s * cin * h * w, cin, h, w, kh, kw, g, oh, ow, cols);
    Eigen::Map<RowMatrix<Scalar>> y(out.data() + s * cout * oh * ow, cout, oh * ow);
    y.noalias() = weights * cols;
    y.colwise() += b;
  }
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                      const Tensor<Scalar>& bias, const ConvGeometry& g = {}) {
  Tensor<Scalar> out;
  RowMatrix<Scalar> cols;
  conv2d(input, kernels, bias, g, out, cols);
  return out;
}

/// Reverse pass of conv2d. Any of d_input, d_kernels, d_bias may be null;
/// kernel and bias gradients are accumulated, d_input is overwritten.
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                     const Tensor<Scalar>& d_out, const ConvGeometry& g, Tensor<Scalar>* d_input,
                     Scalar* d_kernels, Scalar* d_bias, RowMatrix<Scalar>& cols,
                     RowMatrix<Scalar>& d_cols) {
  const Shape os = conv2d_shape(input.shape(), kernels.shape(), g);
  if (!(d_out.shape() == os)) throw ConfigError("conv2d_backward: gradient shape mismatch");
  const Index n = os[0], cout = os[1], oh = os[2], ow = os[3];
  const Index cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index kh = kernels.dim(2), kw = kernels.dim(3);
  const Index k = cin * kh * kw;
  const auto weights = kernels.matrix(cout, k);
  if (d_input) {
    d_input->resize(input.shape());
    d_input->set_zero();
  }
  for (Index s = 0; s < n; ++s) {
    Eigen::Map<const RowMatrix<Scalar>> dy(d_out.data() + s * cout * oh * ow, cout, oh * ow);
    if (d_kernels) {
      detail::im2col(input.data() + s * cin * h * w, cin, h, w, kh, kw, g, oh, ow, cols);
      Eigen::Map<RowMatrix<Scalar>> dw(d_kernels, cout, k);
      dw.noalias() += dy * cols.transpose();
    }
    if (d_bias) {
      Eigen::Map<Vector<Scalar>> db(d_bias, cout);
      db += dy.rowwise().sum();
    }
    if (d_input) {
      d_cols.noalias() = weights.transpose() * dy;
      detail::col2im(d_cols, cin, h, w, kh, kw, g, oh, ow, d_input->data() + s * cin * h * w);
    }
  }
}

inline Shape maxpool2d_shape(const Shape& input, Index kernel, Index stride) {
  if (input.rank() != 4) throw ConfigError("maxpool2d: expects a rank-4 tensor");
  return {input[0], input[1], pool_output_extent(input[2], kernel, stride),
          pool_output_extent(input[3], kernel, stride)};
}

/// Max over kernel x kernel windows. argmax receives the flat input index of
/// the first (row-major) maximum of each window.
template <typename Scalar>
void maxpool2d(const Tensor<Scalar>& input, Index kernel, Index stride, Tensor<Scalar>& out,
               std::vector<Index>& argmax) {
  const Shape os = maxpool2d_shape(input.shape(), kernel, stride);
  out.resize(os);
  argmax.resize(static_cast<std::size_t>(os.numel()));
  const Index h = input.dim(2), w = input.dim(3), oh = os[2], ow = os[3];
  const Scalar* in = input.data();
  Index o = 0;
  for (Index plane = 0; plane < os[0] * os[1]; ++plane) {
    const Index base = plane * h * w;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox, ++o) {
        Index best = base + (oy * stride) * w + ox * stride;
        for (Index i = 0; i < kernel; ++i) {
          const Index row = base + (oy * stride + i) * w + ox * stride;
          for (Index j = 0; j < kernel; ++j)
            if (in[row + j] > in[best]) best = row + j;
        }
        out[o] = in[best];
        argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
}

template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& input, Index kernel, Index stride) {
  Tensor<Scalar> out;
  std::vector<Index> argmax;
  maxpool2d(input, kernel, stride, out, argmax);
  return out;
}

template <typename Scalar>
void maxpool2d_backward(const Tensor<Scalar>& d_out, std::span<const Index> argmax,
                        const Shape& input_shape, Tensor<Scalar>& d_input) {
  if (static_cast<Index>(argmax.size()) != d_out.size())
    throw ConfigError("maxpool2d_backward: argmax size mismatch");
  d_input.resize(input_shape);
  d_input.set_zero();
  for (Index o = 0; o < d_out.size(); ++o) d_input[argmax[static_cast<std::size_t>(o)]] += d_out[o];
}

/// Affine map out[n] = in[n] * W + b, with in flattened to [N, D] and W of shape [D, M].
template <typename Scalar>
void dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias,
           Tensor<Scalar>& out) {
  if (weights.shape().rank() != 2) throw ConfigError("dense: weights must be [D, M]");
  const Index n = input.dim(0), d = weights.dim(0), m = weights.dim(1);
  if (input.size() != n * d)
    throw ConfigError("dense: input of " + input.shape().str() + " does not flatten to D=" +
                      std::to_string(d));
  if (bias.size() != m) throw ConfigError("dense: bias length mismatch");
  out.resize({n, m});
  const auto x = input.matrix(n, d);
  const auto wm = weights.matrix(d, m);
  const Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> b(bias.data(), m);
  auto y = out.matrix(n, m);
  for (Index s = 0; s < n; ++s) y.row(s).noalias() = x.row(s) * wm + b;
}

template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                     const Tensor<Scalar>& bias) {
  Tensor<Scalar> out;
  dense(input, weights, bias, out);
  return out;
}

template <typename Scalar>
void dense_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                    const Tensor<Scalar>& d_out, Tensor<Scalar>* d_input, Scalar* d_weights,
                    Scalar* d_bias) {
  const Index n = input.dim(0), d = weights.dim(0), m = weights.dim(1);
  const auto dy = d_out.matrix(n, m);
  if (d_weights) {
    Eigen::Map<RowMatrix<Scalar>> dw(d_weights, d, m);
    dw.noalias() += input.matrix(n, d).transpose() * dy;
  }
  if (d_bias) {
    Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> db(d_bias, m);
    db += dy.colwise().sum();
  }
  if (d_input) {
    d_input->resize(input.shape());
    auto dx = d_input->matrix(n, d);
    const auto wm = weights.matrix(d, m);
    for (Index s = 0; s < n; ++s) dx.row(s).noalias() = dy.row(s) * wm.transpose();
  }
}

template <typename Scalar>
void relu(const Tensor<Scalar>& input, Tensor<Scalar>& out) {
  out.resize(input.shape());
  out.values() = input.values().cwiseMax(Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  Tensor<Scalar> out;
  relu(input, out);
  return out;
}

/// Gradient passes where the forward input was strictly positive.
template <typename Scalar>
void relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& d_out, Tensor<Scalar>& d_input) {
  d_input.resize(input.shape());
  d_input.values() =
      (input.values().array() > Scalar(0)).select(d_out.values(), Scalar(0));
}

template <typename Scalar>
struct SoftmaxLoss {
  Scalar loss{};
  Tensor<Scalar> probabilities;  // [N, K]
};

/// Mean negative log-likelihood of the true class under a max-shifted softmax.
template <typename Scalar>
SoftmaxLoss<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
  if (logits.shape().rank() != 2) throw ConfigError("softmax_cross_entropy: logits must be [N, K]");
  const Index n = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(labels.size()) != n)
    throw InputError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " samples");
  SoftmaxLoss<Scalar> result{Scalar(0), Tensor<Scalar>({n, k})};
  const auto z = logits.matrix(n, k);
  auto p = result.probabilities.matrix(n, k);
  double total = 0.0;
  for (Index s = 0; s < n; ++s) {
    const int label = labels[static_cast<std::size_t>(s)];
    if (label < 0 || label >= k)
      throw InputError("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    const Scalar zmax = z.row(s).maxCoeff();
    const auto shifted = (z.row(s).array() - zmax).eval();
    const Scalar log_sum = std::log(shifted.exp().sum());
    p.row(s) = (shifted - log_sum).exp().matrix();
    total += static_cast<double>(log_sum - shifted(label));
  }
  result.loss = static_cast<Scalar>(total / static_cast<double>(n));
  if (!std::isfinite(result.loss)) throw NumericError("non-finite loss in softmax_cross_entropy");
  return result;
}

/// d(mean loss)/d(logits) = (p - onehot) / N.
template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy_grad(const Tensor<Scalar>& probabilities,
                                          std::span<const int> labels) {
  Tensor<Scalar> g = probabilities;
  const Index n = g.dim(0), k = g.dim(1);
  auto m = g.matrix(n, k);
  for (Index s = 0; s < n; ++s) {
    // p_y - 1 written as -sum_{j != y} p_j: no cancellation when p_y is close to 1.
    const Index y = labels[static_cast<std::size_t>(s)];
    Scalar others = 0;
    for (Index j = 0; j < k; ++j)
      if (j != y) others += m(s, j);
    m(s, y) = -others;
  }
  m /= static_cast<Scalar>(n);
  return g;
}

}  // namespace advx
