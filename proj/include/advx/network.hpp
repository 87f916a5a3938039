#pragma once

#include <span>
#include <string>
#include <vector>

#include "advx/ops.hpp"
#include "advx/tensor.hpp"

namespace advx {

enum class LayerKind { ConstrainedConv, Conv, MaxPool, Dense, Relu, Flatten };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  Index kernel_h = 0;
  Index kernel_w = 0;
  Index stride = 1;
  Index padding = 0;
  Index width = 0;  // output channels (conv) or units (dense)

  static LayerSpec constrained_conv(Index width, Index kernel = 5) {
    return {LayerKind::ConstrainedConv, kernel, kernel, 1, 0, width};
  }
  static LayerSpec conv(Index width, Index kernel, Index stride = 1, Index padding = 0) {
    return {LayerKind::Conv, kernel, kernel, stride, padding, width};
  }
  static LayerSpec maxpool(Index kernel, Index stride) {
    return {LayerKind::MaxPool, kernel, kernel, stride, 0, 0};
  }
  static LayerSpec dense(Index units) { return {LayerKind::Dense, 0, 0, 1, 0, units}; }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 1, 0, 0}; }
  static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 1, 0, 0}; }

  bool is_conv() const { return kind == LayerKind::ConstrainedConv || kind == LayerKind::Conv; }
  bool has_parameters() const { return is_conv() || kind == LayerKind::Dense; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::string name;                 // "BS", "GC", or a custom tag
  std::vector<Index> widths;        // builder arguments, recorded for provenance
  std::vector<LayerSpec> layers;
  Shape input_shape{1, 128, 128};   // C, H, W
  Index num_classes = 2;

  /// Number of layers of a kind; constrained convolutions count as convolutions.
  Index count(LayerKind kind) const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Per-sample output shape after every layer. Throws ConfigError when the
/// chain is invalid, the constrained layer is misplaced, or the head does not
/// emit num_classes logits.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

/// Parameter shapes (weights then bias) for one layer given its input shape.
std::vector<Shape> parameter_shapes(const LayerSpec& layer, const Shape& input);

template <typename Scalar>
class Network {
 public:
  Network() = default;

  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    shapes_ = infer_shapes(spec_);
    Shape in = spec_.input_shape;
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      param_offset_.push_back(params_.size());
      for (const Shape& s : parameter_shapes(spec_.layers[l], in))
        params_.emplace_back(Tensor<Scalar>(s));
      in = shapes_[l];
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return spec_.layers.size(); }
  const LayerSpec& layer(std::size_t l) const { return spec_.layers[l]; }
  /// Per-sample output shape of layer l.
  const Shape& output_shape(std::size_t l) const { return shapes_[l]; }

  std::span<Parameter<Scalar>> parameters() { return params_; }
  std::span<const Parameter<Scalar>> parameters() const { return params_; }

  Parameter<Scalar>& weights(std::size_t l) { return params_[checked_offset(l)]; }
  const Parameter<Scalar>& weights(std::size_t l) const { return params_[checked_offset(l)]; }
  Parameter<Scalar>& bias(std::size_t l) { return params_[checked_offset(l) + 1]; }
  const Parameter<Scalar>& bias(std::size_t l) const { return params_[checked_offset(l) + 1]; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value().size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(spec_);
    for (std::size_t i = 0; i < params_.size(); ++i)
      out.parameters()[i].values() = params_[i].value().values().template cast<Other>();
    return out;
  }

 private:
  std::size_t checked_offset(std::size_t l) const {
    if (!spec_.layers.at(l).has_parameters())
      throw ConfigError("layer " + std::to_string(l) + " has no parameters");
    return param_offset_[l];
  }

  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<Parameter<Scalar>> params_;
  std::vector<std::size_t> param_offset_;
};

/// Activation record for one forward/backward pass. A network is shared
/// read-only between threads as long as each thread owns its workspace.
template <typename Scalar>
class Workspace {
 public:
  bool ready_for_backward() const { return ready_; }
  const Tensor<Scalar>& logits() const { return acts_.back(); }

 private:
  template <typename S>
  friend const Tensor<S>& forward(const Network<S>&, Workspace<S>&, const Tensor<S>&);
  template <typename S>
  friend std::vector<Tensor<S>> backward_impl(const Network<S>&, Workspace<S>&,
                                              std::span<const Tensor<S>>, Network<S>*);

  std::vector<Tensor<Scalar>> acts_;  // acts_[0] input, acts_[l + 1] output of layer l
  std::vector<std::vector<Index>> argmax_;
  RowMatrix<Scalar> cols_;
  RowMatrix<Scalar> d_cols_;
  Tensor<Scalar> grad_a_, grad_b_;
  bool ready_ = false;
};

namespace detail {
inline std::string layer_label(std::size_t l, LayerKind kind) {
  return "layer " + std::to_string(l) + " (" + to_string(kind) + ")";
}
}  // namespace detail

/// Runs the network on an [N, C, H, W] batch and returns the [N, K] logits.
template <typename Scalar>
const Tensor<Scalar>& forward(const Network<Scalar>& net, Workspace<Scalar>& ws,
                              const Tensor<Scalar>& input) {
  const NetworkSpec& spec = net.spec();
  if (input.shape().rank() != 4 || !(input.shape().tail() == spec.input_shape))
    throw InputError("forward: input " + input.shape().str() + " does not match network input " +
                     spec.input_shape.str());
  require_finite(input, "network input");
  const std::size_t layers = net.num_layers();
  ws.ready_ = false;
  ws.acts_.resize(layers + 1);
  ws.argmax_.resize(layers);
  ws.acts_[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const LayerSpec& ls = net.layer(l);
    const Tensor<Scalar>& x = ws.acts_[l];
    Tensor<Scalar>& y = ws.acts_[l + 1];
    switch (ls.kind) {
      case LayerKind::ConstrainedConv:
      case LayerKind::Conv:
        conv2d(x, net.weights(l).value(), net.bias(l).value(), ConvGeometry{ls.stride, ls.padding}, y,
               ws.cols_);
        break;
      case LayerKind::MaxPool:
        maxpool2d(x, ls.kernel_h, ls.stride, y, ws.argmax_[l]);
        break;
      case LayerKind::Dense:
        dense(x, net.weights(l).value(), net.bias(l).value(), y);
        break;
      case LayerKind::Relu:
        relu(x, y);
        break;
      case LayerKind::Flatten:
        y = x;
        y.reshape({x.dim(0), x.size() / x.dim(0)});
        break;
    }
    require_finite(y, "forward output of " + detail::layer_label(l, ls.kind));
  }
  ws.ready_ = true;
  return ws.acts_.back();
}

/// Propagates each logit cotangent in `seeds` back to the input. When
/// `accumulate` is non-null the parameter gradients of the first seed are
/// added into it. Consumes the forward record.
template <typename Scalar>
std::vector<Tensor<Scalar>> backward_impl(const Network<Scalar>& net, Workspace<Scalar>& ws,
                                          std::span<const Tensor<Scalar>> seeds,
                                          Network<Scalar>* accumulate) {
  if (!ws.ready_) throw StateError("backward called without a fresh forward pass");
  ws.ready_ = false;
  std::vector<Tensor<Scalar>> input_grads;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const Tensor<Scalar>& seed = seeds[k];
    if (!(seed.shape() == ws.acts_.back().shape()))
      throw ConfigError("backward: seed " + seed.shape().str() + " does not match logits " +
                        ws.acts_.back().shape().str());
    Network<Scalar>* grads = (k == 0) ? accumulate : nullptr;
    Tensor<Scalar>* g = &ws.grad_a_;
    Tensor<Scalar>* next = &ws.grad_b_;
    *g = seed;
    for (std::size_t l = net.num_layers(); l-- > 0;) {
      const LayerSpec& ls = net.layer(l);
      const Tensor<Scalar>& x = ws.acts_[l];
      switch (ls.kind) {
        case LayerKind::ConstrainedConv:
        case LayerKind::Conv:
          conv2d_backward(x, net.weights(l).value(), *g, ConvGeometry{ls.stride, ls.padding},
                          next,
                          grads ? grads->weights(l).grads().data() : nullptr,
                          grads ? grads->bias(l).grads().data() : nullptr, ws.cols_, ws.d_cols_);
          break;
        case LayerKind::MaxPool:
          maxpool2d_backward(*g, std::span<const Index>(ws.argmax_[l]), x.shape(), *next);
          break;
        case LayerKind::Dense:
          dense_backward(x, net.weights(l).value(), *g, next,
                         grads ? grads->weights(l).grads().data() : nullptr,
                         grads ? grads->bias(l).grads().data() : nullptr);
          break;
        case LayerKind::Relu:
          relu_backward(x, *g, *next);
          break;
        case LayerKind::Flatten:
          *next = *g;
          next->reshape(x.shape());
          break;
      }
      require_finite(*next, "backward gradient of " + detail::layer_label(l, ls.kind));
      std::swap(g, next);
    }
    input_grads.push_back(*g);
  }
  if (accumulate) {
    for (const auto& p : accumulate->parameters()) require_finite(p.grad(), "parameter gradient");
  }
  return input_grads;
}

/// Reverse pass that accumulates parameter gradients into `net` and returns
/// the gradient with respect to the network input.
template <typename Scalar>
Tensor<Scalar> backward(Network<Scalar>& net, Workspace<Scalar>& ws, const Tensor<Scalar>& d_logits) {
  return std::move(backward_impl(net, ws, std::span<const Tensor<Scalar>>(&d_logits, 1), &net)[0]);
}

/// Reverse pass for the input gradient only; the network is not touched.
template <typename Scalar>
Tensor<Scalar> backward_input(const Network<Scalar>& net, Workspace<Scalar>& ws,
                              const Tensor<Scalar>& d_logits) {
  return std::move(
      backward_impl(net, ws, std::span<const Tensor<Scalar>>(&d_logits, 1), static_cast<Network<Scalar>*>(nullptr))[0]);
}

/// Vector-Jacobian products of several logit cotangents from one forward pass.
template <typename Scalar>
std::vector<Tensor<Scalar>> backward_input_multi(const Network<Scalar>& net, Workspace<Scalar>& ws,
                                                 std::span<const Tensor<Scalar>> seeds) {
  return backward_impl(net, ws, seeds, static_cast<Network<Scalar>*>(nullptr));
}

}  // namespace advx
