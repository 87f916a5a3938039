#include "advx/network.hpp"

#include <algorithm>

namespace advx {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::ConstrainedConv: return "constrained-conv";
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::ConstrainedConv, LayerKind::Conv, LayerKind::MaxPool,
                      LayerKind::Dense, LayerKind::Relu, LayerKind::Flatten})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown layer kind '" + name + "'");
}

Index NetworkSpec::count(LayerKind kind) const {
  return std::count_if(layers.begin(), layers.end(), [&](const LayerSpec& l) {
    if (kind == LayerKind::Conv) return l.is_conv();
    return l.kind == kind;
  });
}

std::vector<Shape> parameter_shapes(const LayerSpec& layer, const Shape& input) {
  switch (layer.kind) {
    case LayerKind::ConstrainedConv:
    case LayerKind::Conv:
      return {Shape{layer.width, input[0], layer.kernel_h, layer.kernel_w}, Shape{layer.width}};
    case LayerKind::Dense:
      return {Shape{input.numel(), layer.width}, Shape{layer.width}};
    default:
      return {};
  }
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  if (spec.input_shape.rank() != 3) throw ConfigError(spec.name + ": input shape must be C,H,W");
  if (spec.layers.empty()) throw ConfigError(spec.name + ": empty layer list");
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const std::string where = spec.name + " layer " + std::to_string(l) + " (" + to_string(ls.kind) + ")";
    switch (ls.kind) {
      case LayerKind::ConstrainedConv:
        if (l != 0) throw ConfigError(where + ": constrained convolution must be the first layer");
        if (cur[0] != 1) throw ConfigError(where + ": constrained convolution needs one input channel");
        if (ls.kernel_h != ls.kernel_w || ls.kernel_h % 2 == 0)
          throw ConfigError(where + ": constrained kernel must be square with a center tap");
        [[fallthrough]];
      case LayerKind::Conv: {
        if (cur.rank() != 3) throw ConfigError(where + ": expects a C,H,W input");
        if (ls.width < 1) throw ConfigError(where + ": width must be positive");
        const Shape s = conv2d_shape(cur.batched(1), Shape{ls.width, cur[0], ls.kernel_h, ls.kernel_w},
                                     ConvGeometry{ls.stride, ls.padding});
        cur = s.tail();
        break;
      }
      case LayerKind::MaxPool: {
        if (cur.rank() != 3) throw ConfigError(where + ": expects a C,H,W input");
        if (ls.kernel_h != ls.kernel_w) throw ConfigError(where + ": pooling window must be square");
        cur = maxpool2d_shape(cur.batched(1), ls.kernel_h, ls.stride).tail();
        break;
      }
      case LayerKind::Dense:
        if (cur.rank() != 1) throw ConfigError(where + ": dense layer needs a flattened input");
        if (ls.width < 1) throw ConfigError(where + ": width must be positive");
        cur = Shape{ls.width};
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::Flatten:
        cur = Shape{cur.numel()};
        break;
    }
    if (cur.numel() < 1) throw ConfigError(where + ": empty output");
    shapes.push_back(cur);
  }
  if (!(cur == Shape{spec.num_classes}))
    throw ConfigError(spec.name + ": network emits " + cur.str() + ", expected " +
                      std::to_string(spec.num_classes) + " logits");
  return shapes;
}

}  // namespace advx
