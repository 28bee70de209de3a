#include "ierf/tensor/tape.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "ierf/error.h"

namespace ierf {

struct TapeAccess {
  static Tape make(const NetworkGraph& net) {
    Tape t;
    t.net_ = &net;
    return t;
  }
  static std::vector<Tensor>& values(Tape& t) { return t.values_; }
  static std::vector<TapeEntry>& entries(Tape& t) { return t.entries_; }
  static std::vector<std::vector<std::size_t>>& routes(Tape& t) {
    return t.routes_;
  }
};

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double batchnorm_gain(const OpNode& n, std::size_t c) {
  return n.scale[c] / std::sqrt(n.var[c] + n.eps);
}

// Channel index of flat element i for a tensor of the given shape.
std::size_t channel_of(const Shape& shape, std::size_t i) {
  if (shape.size() <= 1) return i;
  return i / (shape_size(shape) / shape[0]);
}

Tensor conv2d_forward(const OpNode& n, const Tensor& in, const Shape& out_shape) {
  Tensor out(out_shape);
  const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t cout = out_shape[0], oh = out_shape[1], ow = out_shape[2];
  const std::size_t k = n.kernel;
  const auto& wt = n.weight;
  for (std::size_t co = 0; co < cout; ++co) {
    const double b = n.bias.empty() ? 0.0 : n.bias[co];
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = b;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * n.stride + ky) -
                            static_cast<long>(n.padding);
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = static_cast<long>(ox * n.stride + kx) -
                              static_cast<long>(n.padding);
              if (ix < 0 || ix >= static_cast<long>(w)) continue;
              acc += wt[((co * cin + ci) * k + ky) * k + kx] *
                     in.at(ci, static_cast<std::size_t>(iy),
                           static_cast<std::size_t>(ix));
            }
          }
        }
        out.at(co, oy, ox) = acc;
      }
    }
  }
  return out;
}

void conv2d_backward(const OpNode& n, const Tensor& grad_out, Tensor& grad_in) {
  const std::size_t cin = grad_in.dim(0), h = grad_in.dim(1), w = grad_in.dim(2);
  const std::size_t cout = grad_out.dim(0), oh = grad_out.dim(1), ow = grad_out.dim(2);
  const std::size_t k = n.kernel;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double g = grad_out.at(co, oy, ox);
        if (g == 0.0) continue;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * n.stride + ky) -
                            static_cast<long>(n.padding);
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = static_cast<long>(ox * n.stride + kx) -
                              static_cast<long>(n.padding);
              if (ix < 0 || ix >= static_cast<long>(w)) continue;
              grad_in.at(ci, static_cast<std::size_t>(iy),
                         static_cast<std::size_t>(ix)) +=
                  g * n.weight[((co * cin + ci) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
}

// Visits the in-bounds input positions of each pooling window.
template <typename Fn>
void for_each_window(const OpNode& n, const Shape& in_shape,
                     const Shape& out_shape, Fn&& fn) {
  const std::size_t h = in_shape[1], w = in_shape[2];
  for (std::size_t c = 0; c < out_shape[0]; ++c) {
    for (std::size_t oy = 0; oy < out_shape[1]; ++oy) {
      for (std::size_t ox = 0; ox < out_shape[2]; ++ox) {
        std::vector<std::size_t> window;
        for (std::size_t ky = 0; ky < n.kernel; ++ky) {
          const long iy = static_cast<long>(oy * n.stride + ky) -
                          static_cast<long>(n.padding);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < n.kernel; ++kx) {
            const long ix = static_cast<long>(ox * n.stride + kx) -
                            static_cast<long>(n.padding);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            window.push_back((c * h + static_cast<std::size_t>(iy)) * w +
                             static_cast<std::size_t>(ix));
          }
        }
        fn((c * out_shape[1] + oy) * out_shape[2] + ox, window);
      }
    }
  }
}

}  // namespace

ForwardResult forward(const NetworkGraph& net, const Tensor& input, bool record) {
  if (input.shape() != net.input_shape) {
    const std::string first =
        net.nodes.empty() ? std::string("input") : net.nodes.front().name;
    throw ConfigError("layer '" + first + "': input shape " +
                      shape_string(input.shape()) +
                      " does not match declared " +
                      shape_string(net.input_shape));
  }
  const std::vector<Shape> shapes = net.infer_shapes();

  Tape tape = TapeAccess::make(net);
  auto& values = TapeAccess::values(tape);
  auto& entries = TapeAccess::entries(tape);
  auto& routes = TapeAccess::routes(tape);
  values.reserve(net.nodes.size() + 1);
  routes.assign(net.nodes.size() + 1, {});
  values.push_back(input);

  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const OpNode& n = net.nodes[i];
    const int self = static_cast<int>(i) + 1;
    const Tensor& in = values[n.inputs[0]];
    const Shape& out_shape = shapes[self];
    Tensor out(out_shape);
    switch (n.kind) {
      case OpKind::kConv2d:
        out = conv2d_forward(n, in, out_shape);
        break;
      case OpKind::kLinear: {
        const std::size_t rows = out_shape[0], cols = in.size();
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = n.bias.empty() ? 0.0 : n.bias[r];
          for (std::size_t c = 0; c < cols; ++c) acc += n.weight[r * cols + c] * in[c];
          out[r] = acc;
        }
        break;
      }
      case OpKind::kRelu:
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = std::max(in[j], 0.0);
        break;
      case OpKind::kLeakyRelu:
        for (std::size_t j = 0; j < in.size(); ++j) {
          out[j] = in[j] > 0 ? in[j] : n.slope * in[j];
        }
        break;
      case OpKind::kElu:
        for (std::size_t j = 0; j < in.size(); ++j) {
          out[j] = in[j] > 0 ? in[j] : n.alpha * std::expm1(in[j]);
        }
        break;
      case OpKind::kGelu:
        for (std::size_t j = 0; j < in.size(); ++j) {
          out[j] = 0.5 * in[j] * (1.0 + std::erf(in[j] * kInvSqrt2));
        }
        break;
      case OpKind::kSwish:
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] * sigmoid(in[j]);
        break;
      case OpKind::kTanh:
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = std::tanh(in[j]);
        break;
      case OpKind::kSoftmax: {
        const double m = *std::max_element(in.data().begin(), in.data().end());
        double z = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) z += (out[j] = std::exp(in[j] - m));
        for (double& v : out.data()) v /= z;
        break;
      }
      case OpKind::kMaxPool: {
        std::vector<std::size_t>& route = routes[self];
        route.assign(out.size(), 0);
        for_each_window(n, in.shape(), out_shape,
                        [&](std::size_t o, const std::vector<std::size_t>& win) {
                          std::size_t best = win.front();
                          for (std::size_t idx : win) {
                            if (in[idx] > in[best]) best = idx;
                          }
                          route[o] = best;
                          out[o] = in[best];
                        });
        break;
      }
      case OpKind::kAvgPool:
        for_each_window(n, in.shape(), out_shape,
                        [&](std::size_t o, const std::vector<std::size_t>& win) {
                          double s = 0.0;
                          for (std::size_t idx : win) s += in[idx];
                          out[o] = s / static_cast<double>(win.size());
                        });
        break;
      case OpKind::kGlobalAvgPool: {
        const std::size_t hw = in.dim(1) * in.dim(2);
        for (std::size_t c = 0; c < in.dim(0); ++c) {
          double s = 0.0;
          for (std::size_t j = 0; j < hw; ++j) s += in[c * hw + j];
          out[c] = s / static_cast<double>(hw);
        }
        break;
      }
      case OpKind::kBatchNorm:
        for (std::size_t j = 0; j < in.size(); ++j) {
          const std::size_t c = channel_of(in.shape(), j);
          out[j] = batchnorm_gain(n, c) * (in[j] - n.mean[c]) + n.shift[c];
        }
        break;
      case OpKind::kResidualAdd: {
        const Tensor& b = values[n.inputs[1]];
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] + b[j];
        break;
      }
      case OpKind::kFlatten:
        out = in.reshaped(out_shape);
        break;
    }
    entries.push_back({i, n.inputs, self});
    values.push_back(std::move(out));
  }

  ForwardResult result;
  result.logits = values.back();
  if (record) {
    result.tape = std::move(tape);
  } else {
    result.tape = TapeAccess::make(net);
  }
  return result;
}

Tensor evaluate(const NetworkGraph& net, const Tensor& input) {
  return forward(net, input, /*record=*/false).logits;
}

std::vector<Tensor> backward(const Tape& tape, const Tensor& seed) {
  if (!tape.recorded()) {
    throw ConfigError("backward requires a recorded tape");
  }
  if (seed.shape() != tape.output().shape()) {
    throw ConfigError("seed shape " + shape_string(seed.shape()) +
                      " does not match tape output " +
                      shape_string(tape.output().shape()));
  }
  const NetworkGraph& net = tape.net();
  const auto& values = tape.values();
  std::vector<Tensor> grads;
  grads.reserve(values.size());
  for (const Tensor& v : values) grads.emplace_back(v.shape());
  grads.back() = seed;

  for (auto it = tape.entries().rbegin(); it != tape.entries().rend(); ++it) {
    const OpNode& n = net.nodes[it->node];
    const Tensor& g = grads[it->output];
    const Tensor& x = values[it->inputs[0]];
    const Tensor& y = values[it->output];
    Tensor& gx = grads[it->inputs[0]];
    switch (n.kind) {
      case OpKind::kConv2d:
        conv2d_backward(n, g, gx);
        break;
      case OpKind::kLinear: {
        const std::size_t rows = g.size(), cols = x.size();
        for (std::size_t r = 0; r < rows; ++r) {
          if (g[r] == 0.0) continue;
          for (std::size_t c = 0; c < cols; ++c) gx[c] += g[r] * n.weight[r * cols + c];
        }
        break;
      }
      case OpKind::kRelu:
        for (std::size_t j = 0; j < x.size(); ++j) gx[j] += x[j] > 0 ? g[j] : 0.0;
        break;
      case OpKind::kLeakyRelu:
        for (std::size_t j = 0; j < x.size(); ++j) gx[j] += x[j] > 0 ? g[j] : n.slope * g[j];
        break;
      case OpKind::kElu:
        for (std::size_t j = 0; j < x.size(); ++j) {
          gx[j] += x[j] > 0 ? g[j] : g[j] * n.alpha * std::exp(x[j]);
        }
        break;
      case OpKind::kGelu:
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double cdf = 0.5 * (1.0 + std::erf(x[j] * kInvSqrt2));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[j] * x[j]);
          gx[j] += g[j] * (cdf + x[j] * pdf);
        }
        break;
      case OpKind::kSwish:
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double s = sigmoid(x[j]);
          gx[j] += g[j] * (s + x[j] * s * (1.0 - s));
        }
        break;
      case OpKind::kTanh:
        for (std::size_t j = 0; j < x.size(); ++j) gx[j] += g[j] * (1.0 - y[j] * y[j]);
        break;
      case OpKind::kSoftmax: {
        const double gy = dot(g, y);
        for (std::size_t j = 0; j < x.size(); ++j) gx[j] += y[j] * (g[j] - gy);
        break;
      }
      case OpKind::kMaxPool: {
        const auto& route = tape.routing(it->output);
        for (std::size_t o = 0; o < g.size(); ++o) gx[route[o]] += g[o];
        break;
      }
      case OpKind::kAvgPool:
        for_each_window(n, x.shape(), y.shape(),
                        [&](std::size_t o, const std::vector<std::size_t>& win) {
                          const double share = g[o] / static_cast<double>(win.size());
                          for (std::size_t idx : win) gx[idx] += share;
                        });
        break;
      case OpKind::kGlobalAvgPool: {
        const std::size_t hw = x.dim(1) * x.dim(2);
        for (std::size_t c = 0; c < x.dim(0); ++c) {
          const double share = g[c] / static_cast<double>(hw);
          for (std::size_t j = 0; j < hw; ++j) gx[c * hw + j] += share;
        }
        break;
      }
      case OpKind::kBatchNorm:
        for (std::size_t j = 0; j < x.size(); ++j) {
          gx[j] += g[j] * batchnorm_gain(n, channel_of(x.shape(), j));
        }
        break;
      case OpKind::kResidualAdd: {
        Tensor& gb = grads[it->inputs[1]];
        for (std::size_t j = 0; j < g.size(); ++j) {
          gx[j] += g[j];
          gb[j] += g[j];
        }
        break;
      }
      case OpKind::kFlatten:
        for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j];
        break;
      default:
        throw UnsupportedOperation("backward: unsupported op kind on tape at layer '" +
                                   n.name + "'");
    }
  }
  return grads;
}

NetworkGraph subnetwork(const NetworkGraph& net, int from, int to) {
  if (from < 0 || to >= net.num_values()) {
    throw RangeError("subnetwork: layer id out of range");
  }
  if (from >= to) {
    throw RangeError("subnetwork: '" + net.value_name(from) +
                     "' does not precede '" + net.value_name(to) + "'");
  }
  std::vector<bool> needed(net.num_values(), false);
  std::vector<int> stack{to};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (v == from || needed[v]) continue;
    if (v < from) {
      throw RangeError("subnetwork: '" + net.value_name(to) +
                       "' depends on '" + net.value_name(v) +
                       "' without passing through '" + net.value_name(from) + "'");
    }
    needed[v] = true;
    for (int in : net.producer(v).inputs) stack.push_back(in);
  }

  const std::vector<Shape> shapes = net.infer_shapes();
  NetworkGraph sub;
  sub.input_shape = shapes[from];
  std::map<int, int> remap{{from, 0}};
  for (int v = from + 1; v <= to; ++v) {
    if (!needed[v]) continue;
    OpNode node = net.producer(v);
    for (int& in : node.inputs) in = remap.at(in);
    sub.nodes.push_back(std::move(node));
    remap[v] = sub.output_value();
  }
  if (auto it = remap.find(net.encoder_output); it != remap.end()) {
    sub.encoder_output = it->second;
  }
  if (to == net.output_value()) sub.class_names = net.class_names;
  return sub;
}

}  // namespace ierf
