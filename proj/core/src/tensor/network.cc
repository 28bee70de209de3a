#include "ierf/tensor/network.h"

#include <array>
#include <utility>

#include "ierf/error.h"

namespace ierf {
namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 15> kOpNames = {{
    {OpKind::kConv2d, "conv2d"},
    {OpKind::kLinear, "linear"},
    {OpKind::kRelu, "relu"},
    {OpKind::kLeakyRelu, "leaky-relu"},
    {OpKind::kElu, "elu"},
    {OpKind::kGelu, "gelu"},
    {OpKind::kSwish, "swish"},
    {OpKind::kTanh, "tanh"},
    {OpKind::kMaxPool, "maxpool"},
    {OpKind::kAvgPool, "avgpool"},
    {OpKind::kGlobalAvgPool, "global-avgpool"},
    {OpKind::kBatchNorm, "batchnorm-inference"},
    {OpKind::kResidualAdd, "residual-add"},
    {OpKind::kFlatten, "flatten"},
    {OpKind::kSoftmax, "softmax"},
}};

std::size_t pooled_extent(std::size_t in, std::size_t k, std::size_t s,
                          std::size_t p) {
  if (in + 2 * p < k) return 0;
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

std::string_view op_kind_name(OpKind kind) {
  for (const auto& [k, name] : kOpNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<OpKind> parse_op_kind(std::string_view name) {
  for (const auto& [k, n] : kOpNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_activation(OpKind kind) {
  switch (kind) {
    case OpKind::kRelu:
    case OpKind::kLeakyRelu:
    case OpKind::kElu:
    case OpKind::kGelu:
    case OpKind::kSwish:
    case OpKind::kTanh:
      return true;
    default:
      return false;
  }
}

std::string NetworkGraph::value_name(int value) const {
  if (value == 0) return "input";
  return nodes.at(value - 1).name;
}

int NetworkGraph::value_id(std::string_view name) const {
  if (name == "input") return 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return static_cast<int>(i) + 1;
  }
  throw ConfigError("unknown layer '" + std::string(name) + "'");
}

std::vector<Shape> NetworkGraph::infer_shapes() const {
  std::vector<Shape> shapes;
  shapes.reserve(nodes.size() + 1);
  shapes.push_back(input_shape);
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const OpNode& node = nodes[n];
    const int self = static_cast<int>(n) + 1;
    auto fail = [&](const std::string& why) -> void {
      throw ConfigError("layer '" + node.name + "' (" +
                        std::string(op_kind_name(node.kind)) + "): " + why);
    };
    const std::size_t want_inputs =
        node.kind == OpKind::kResidualAdd ? 2 : 1;
    if (node.inputs.size() != want_inputs) {
      fail("expects " + std::to_string(want_inputs) + " input(s), got " +
           std::to_string(node.inputs.size()));
    }
    for (int in : node.inputs) {
      if (in < 0 || in >= self) fail("input value id out of order");
    }
    const Shape& in = shapes[node.inputs[0]];
    Shape out;
    switch (node.kind) {
      case OpKind::kConv2d: {
        if (in.size() != 3) fail("expects (C,H,W) input, got " + shape_string(in));
        const Shape& w = node.weight.shape();
        if (w.size() != 4 || w[2] != w[3]) {
          fail("weight must be (Cout,Cin,k,k), got " + shape_string(w));
        }
        if (w[1] != in[0]) {
          fail("weight expects " + std::to_string(w[1]) +
               " input channels, input has " + std::to_string(in[0]));
        }
        if (w[2] != node.kernel) fail("kernel size does not match weight");
        if (!node.bias.empty() && node.bias.shape() != Shape{w[0]}) {
          fail("bias must have " + std::to_string(w[0]) + " entries");
        }
        if (node.stride == 0) fail("stride must be positive");
        if (node.padding >= node.kernel) fail("padding must be below kernel size");
        const std::size_t h = pooled_extent(in[1], w[2], node.stride, node.padding);
        const std::size_t wd = pooled_extent(in[2], w[3], node.stride, node.padding);
        if (h == 0 || wd == 0) fail("output would be empty");
        out = {w[0], h, wd};
        break;
      }
      case OpKind::kLinear: {
        if (in.size() != 1) fail("expects a vector input, got " + shape_string(in));
        const Shape& w = node.weight.shape();
        if (w.size() != 2 || w[1] != in[0]) {
          fail("weight " + shape_string(w) + " incompatible with input " +
               shape_string(in));
        }
        if (!node.bias.empty() && node.bias.shape() != Shape{w[0]}) {
          fail("bias must have " + std::to_string(w[0]) + " entries");
        }
        out = {w[0]};
        break;
      }
      case OpKind::kRelu:
      case OpKind::kLeakyRelu:
      case OpKind::kElu:
      case OpKind::kGelu:
      case OpKind::kSwish:
      case OpKind::kTanh:
        out = in;
        break;
      case OpKind::kSoftmax:
        if (in.size() != 1) fail("softmax expects a vector input");
        out = in;
        break;
      case OpKind::kMaxPool:
      case OpKind::kAvgPool: {
        if (in.size() != 3) fail("expects (C,H,W) input, got " + shape_string(in));
        if (node.kernel == 0 || node.stride == 0) fail("kernel and stride must be positive");
        if (node.padding >= node.kernel) fail("padding must be below kernel size");
        const std::size_t h = pooled_extent(in[1], node.kernel, node.stride, node.padding);
        const std::size_t w = pooled_extent(in[2], node.kernel, node.stride, node.padding);
        if (h == 0 || w == 0) fail("output would be empty");
        out = {in[0], h, w};
        break;
      }
      case OpKind::kGlobalAvgPool:
        if (in.size() != 3) fail("expects (C,H,W) input, got " + shape_string(in));
        out = {in[0]};
        break;
      case OpKind::kBatchNorm: {
        if (in.empty()) fail("expects a non-scalar input");
        const Shape c{in[0]};
        if (node.mean.shape() != c || node.var.shape() != c ||
            node.scale.shape() != c || node.shift.shape() != c) {
          fail("statistics must have " + std::to_string(in[0]) + " entries");
        }
        for (double v : node.var.data()) {
          if (!(v + node.eps > 0.0)) fail("variance + eps must be positive");
        }
        out = in;
        break;
      }
      case OpKind::kResidualAdd:
        if (shapes[node.inputs[1]] != in) {
          fail("branch shapes differ: " + shape_string(in) + " vs " +
               shape_string(shapes[node.inputs[1]]));
        }
        out = in;
        break;
      case OpKind::kFlatten:
        out = {shape_size(in)};
        break;
    }
    shapes.push_back(std::move(out));
  }
  return shapes;
}

NetworkBuilder::NetworkBuilder(Shape input_shape) {
  net_.input_shape = std::move(input_shape);
}

int NetworkBuilder::push(OpNode node) {
  if (node.name.empty()) {
    node.name = std::string(op_kind_name(node.kind)) + "_" +
                std::to_string(net_.nodes.size() + 1);
  }
  net_.nodes.push_back(std::move(node));
  return net_.output_value();
}

int NetworkBuilder::conv2d(int in, Tensor weight, Tensor bias,
                           std::size_t stride, std::size_t padding,
                           std::string name) {
  OpNode n;
  n.kind = OpKind::kConv2d;
  n.name = std::move(name);
  n.inputs = {in};
  n.kernel = weight.rank() == 4 ? weight.dim(2) : 0;
  n.weight = std::move(weight);
  n.bias = std::move(bias);
  n.stride = stride;
  n.padding = padding;
  return push(std::move(n));
}

int NetworkBuilder::linear(int in, Tensor weight, Tensor bias, std::string name) {
  OpNode n;
  n.kind = OpKind::kLinear;
  n.name = std::move(name);
  n.inputs = {in};
  n.weight = std::move(weight);
  n.bias = std::move(bias);
  return push(std::move(n));
}

int NetworkBuilder::activation(int in, OpKind kind, std::string name) {
  OpNode n;
  n.kind = kind;
  n.name = std::move(name);
  n.inputs = {in};
  return push(std::move(n));
}

int NetworkBuilder::leaky_relu(int in, double slope, std::string name) {
  OpNode n;
  n.kind = OpKind::kLeakyRelu;
  n.name = std::move(name);
  n.inputs = {in};
  n.slope = slope;
  return push(std::move(n));
}

int NetworkBuilder::elu(int in, double alpha, std::string name) {
  OpNode n;
  n.kind = OpKind::kElu;
  n.name = std::move(name);
  n.inputs = {in};
  n.alpha = alpha;
  return push(std::move(n));
}

int NetworkBuilder::max_pool(int in, std::size_t kernel, std::size_t stride,
                             std::size_t padding, std::string name) {
  OpNode n;
  n.kind = OpKind::kMaxPool;
  n.name = std::move(name);
  n.inputs = {in};
  n.kernel = kernel;
  n.stride = stride;
  n.padding = padding;
  return push(std::move(n));
}

int NetworkBuilder::avg_pool(int in, std::size_t kernel, std::size_t stride,
                             std::size_t padding, std::string name) {
  OpNode n;
  n.kind = OpKind::kAvgPool;
  n.name = std::move(name);
  n.inputs = {in};
  n.kernel = kernel;
  n.stride = stride;
  n.padding = padding;
  return push(std::move(n));
}

int NetworkBuilder::global_avg_pool(int in, std::string name) {
  return activation(in, OpKind::kGlobalAvgPool, std::move(name));
}

int NetworkBuilder::batch_norm(int in, Tensor mean, Tensor var, Tensor scale,
                               Tensor shift, double eps, std::string name) {
  OpNode n;
  n.kind = OpKind::kBatchNorm;
  n.name = std::move(name);
  n.inputs = {in};
  n.mean = std::move(mean);
  n.var = std::move(var);
  n.scale = std::move(scale);
  n.shift = std::move(shift);
  n.eps = eps;
  return push(std::move(n));
}

int NetworkBuilder::residual_add(int a, int b, std::string name) {
  OpNode n;
  n.kind = OpKind::kResidualAdd;
  n.name = std::move(name);
  n.inputs = {a, b};
  return push(std::move(n));
}

int NetworkBuilder::flatten(int in, std::string name) {
  return activation(in, OpKind::kFlatten, std::move(name));
}

int NetworkBuilder::softmax(int in, std::string name) {
  return activation(in, OpKind::kSoftmax, std::move(name));
}

NetworkGraph NetworkBuilder::build() const {
  NetworkGraph net = net_;
  const std::vector<Shape> shapes = net.infer_shapes();
  if (net.encoder_output < 0) {
    for (int v = net.num_values() - 1; v >= 0; --v) {
      if (shapes[v].size() == 3) {
        net.encoder_output = v;
        break;
      }
    }
  }
  // Purely vector networks have no encoder; SRD rejects them later.
  if (net.encoder_output >= net.num_values() ||
      (net.encoder_output >= 0 && shapes[net.encoder_output].size() != 3)) {
    throw ConfigError("encoder output must be a (C,H,W) value");
  }
  return net;
}

}  // namespace ierf
