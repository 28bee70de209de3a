#include "ierf/srd/sharing_ratio.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ierf/error.h"

namespace ierf {
namespace {

// Below this squared norm a target PFV is treated as dead.
constexpr double kDegenerateNorm2 = 1e-24;

// Affine decomposition of a spatial value: for every position, the partial
// vectors keyed by (source layer, source position) plus the bias that no
// single source produced.
struct Decomposition {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::vector<PartialContribution>> parts;
  std::vector<std::vector<double>> bias;
};

std::vector<double>& part_for(std::vector<PartialContribution>& parts,
                              std::size_t layer, std::size_t position,
                              std::size_t channels) {
  for (auto& p : parts) {
    if (p.layer == layer && p.position == position) return p.vector;
  }
  parts.push_back({layer, position, std::vector<double>(channels, 0.0)});
  return parts.back().vector;
}

class Decomposer {
 public:
  Decomposer(const Tape& tape, const std::vector<PfvLayer>& layers,
             std::size_t target_layer)
      : tape_(tape), layers_(layers) {
    for (std::size_t l = 0; l < target_layer; ++l) layer_of_value_[layers[l].value] = l;
  }

  const Decomposition& decompose(int value) {
    if (auto it = memo_.find(value); it != memo_.end()) return it->second;
    Decomposition d;
    if (auto it = layer_of_value_.find(value); it != layer_of_value_.end()) {
      d = identity(it->second);
    } else {
      if (value == 0) {
        throw ConfigError("SRD: value 'input' reached without being a PFV layer");
      }
      d = through(tape_.net().producer(value), value);
    }
    return memo_.emplace(value, std::move(d)).first->second;
  }

 private:
  Decomposition empty_like(const Tensor& t) const {
    Decomposition d;
    d.channels = t.dim(0);
    d.height = t.dim(1);
    d.width = t.dim(2);
    d.parts.resize(d.height * d.width);
    d.bias.assign(d.height * d.width, std::vector<double>(d.channels, 0.0));
    return d;
  }

  Decomposition identity(std::size_t layer) const {
    const Tensor& t = tape_.value(layers_[layer].value);
    Decomposition d = empty_like(t);
    const std::size_t hw = d.height * d.width;
    for (std::size_t p = 0; p < hw; ++p) {
      std::vector<double> v(d.channels);
      for (std::size_t c = 0; c < d.channels; ++c) v[c] = t[c * hw + p];
      d.parts[p].push_back({layer, p, std::move(v)});
    }
    return d;
  }

  Decomposition through(const OpNode& n, int value) {
    const Tensor& out = tape_.value(value);
    if (out.rank() != 3) {
      throw UnsupportedOperation("SRD: layer '" + n.name +
                                 "' is not spatial and cannot sit inside the encoder");
    }
    switch (n.kind) {
      case OpKind::kConv2d: return conv(n, out);
      case OpKind::kBatchNorm: return batchnorm(n);
      case OpKind::kAvgPool: return avgpool(n, out);
      case OpKind::kMaxPool: return maxpool(n, value, out);
      case OpKind::kResidualAdd: return residual(n);
      default:
        throw UnsupportedOperation("SRD: cannot decompose through '" + n.name + "' (" +
                                   std::string(op_kind_name(n.kind)) + ")");
    }
  }

  Decomposition conv(const OpNode& n, const Tensor& out) {
    const Decomposition& in = decompose(n.inputs[0]);
    Decomposition d = empty_like(out);
    const std::size_t cin = in.channels, cout = d.channels, k = n.kernel;
    for (std::size_t oy = 0; oy < d.height; ++oy) {
      for (std::size_t ox = 0; ox < d.width; ++ox) {
        const std::size_t o = oy * d.width + ox;
        auto& parts = d.parts[o];
        auto& bias = d.bias[o];
        for (std::size_t co = 0; co < cout; ++co) bias[co] = n.bias.empty() ? 0.0 : n.bias[co];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(oy * n.stride + ky) - static_cast<long>(n.padding);
          if (iy < 0 || iy >= static_cast<long>(in.height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(ox * n.stride + kx) - static_cast<long>(n.padding);
            if (ix < 0 || ix >= static_cast<long>(in.width)) continue;
            const std::size_t ip = static_cast<std::size_t>(iy) * in.width +
                                   static_cast<std::size_t>(ix);
            auto apply = [&](const std::vector<double>& src, std::vector<double>& dst) {
              for (std::size_t co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  acc += n.weight[((co * cin + ci) * k + ky) * k + kx] * src[ci];
                }
                dst[co] += acc;
              }
            };
            for (const auto& p : in.parts[ip]) {
              apply(p.vector, part_for(parts, p.layer, p.position, cout));
            }
            apply(in.bias[ip], bias);
          }
        }
      }
    }
    return d;
  }

  Decomposition batchnorm(const OpNode& n) {
    Decomposition d = decompose(n.inputs[0]);
    std::vector<double> gain(d.channels), offset(d.channels);
    for (std::size_t c = 0; c < d.channels; ++c) {
      gain[c] = n.scale[c] / std::sqrt(n.var[c] + n.eps);
      offset[c] = n.shift[c] - gain[c] * n.mean[c];
    }
    for (std::size_t p = 0; p < d.parts.size(); ++p) {
      for (auto& part : d.parts[p]) {
        for (std::size_t c = 0; c < d.channels; ++c) part.vector[c] *= gain[c];
      }
      for (std::size_t c = 0; c < d.channels; ++c) {
        d.bias[p][c] = gain[c] * d.bias[p][c] + offset[c];
      }
    }
    return d;
  }

  template <typename Fn>
  void windows(const OpNode& n, const Decomposition& in, const Decomposition& out,
               Fn&& fn) {
    for (std::size_t oy = 0; oy < out.height; ++oy) {
      for (std::size_t ox = 0; ox < out.width; ++ox) {
        std::vector<std::size_t> win;
        for (std::size_t ky = 0; ky < n.kernel; ++ky) {
          const long iy = static_cast<long>(oy * n.stride + ky) - static_cast<long>(n.padding);
          if (iy < 0 || iy >= static_cast<long>(in.height)) continue;
          for (std::size_t kx = 0; kx < n.kernel; ++kx) {
            const long ix = static_cast<long>(ox * n.stride + kx) - static_cast<long>(n.padding);
            if (ix < 0 || ix >= static_cast<long>(in.width)) continue;
            win.push_back(static_cast<std::size_t>(iy) * in.width + static_cast<std::size_t>(ix));
          }
        }
        fn(oy * out.width + ox, win);
      }
    }
  }

  Decomposition avgpool(const OpNode& n, const Tensor& out) {
    const Decomposition& in = decompose(n.inputs[0]);
    Decomposition d = empty_like(out);
    windows(n, in, d, [&](std::size_t o, const std::vector<std::size_t>& win) {
      const double w = 1.0 / static_cast<double>(win.size());
      for (std::size_t ip : win) {
        for (const auto& p : in.parts[ip]) {
          auto& dst = part_for(d.parts[o], p.layer, p.position, d.channels);
          for (std::size_t c = 0; c < d.channels; ++c) dst[c] += w * p.vector[c];
        }
        for (std::size_t c = 0; c < d.channels; ++c) d.bias[o][c] += w * in.bias[ip][c];
      }
    });
    return d;
  }

  Decomposition maxpool(const OpNode& n, int value, const Tensor& out) {
    const Decomposition& in = decompose(n.inputs[0]);
    Decomposition d = empty_like(out);
    const auto& route = tape_.routing(value);
    const std::size_t in_hw = in.height * in.width, out_hw = d.height * d.width;
    for (std::size_t c = 0; c < d.channels; ++c) {
      for (std::size_t o = 0; o < out_hw; ++o) {
        const std::size_t ip = route[c * out_hw + o] - c * in_hw;
        for (const auto& p : in.parts[ip]) {
          part_for(d.parts[o], p.layer, p.position, d.channels)[c] += p.vector[c];
        }
        d.bias[o][c] += in.bias[ip][c];
      }
    }
    return d;
  }

  Decomposition residual(const OpNode& n) {
    Decomposition d = decompose(n.inputs[0]);
    const Decomposition& b = decompose(n.inputs[1]);
    for (std::size_t o = 0; o < d.parts.size(); ++o) {
      for (const auto& p : b.parts[o]) {
        auto& dst = part_for(d.parts[o], p.layer, p.position, d.channels);
        for (std::size_t c = 0; c < d.channels; ++c) dst[c] += p.vector[c];
      }
      for (std::size_t c = 0; c < d.channels; ++c) d.bias[o][c] += b.bias[o][c];
    }
    return d;
  }

  const Tape& tape_;
  const std::vector<PfvLayer>& layers_;
  std::map<int, std::size_t> layer_of_value_;
  std::map<int, Decomposition> memo_;
};

}  // namespace

std::vector<PfvLayer> pfv_layers(const NetworkGraph& net) {
  const std::vector<Shape> shapes = net.infer_shapes();
  const int enc = net.encoder_output;
  if (enc < 0 || enc >= net.num_values() || shapes[enc].size() != 3) {
    throw ConfigError("network has no spatial encoder output");
  }
  if (shapes[0].size() != 3) throw ConfigError("network input must be (C,H,W)");

  std::vector<bool> ancestor(net.num_values(), false);
  std::vector<int> stack{enc};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (ancestor[v]) continue;
    ancestor[v] = true;
    if (v > 0) {
      for (int in : net.producer(v).inputs) stack.push_back(in);
    }
  }

  auto make = [&](int value, int target) {
    const Shape& s = shapes[value];
    return PfvLayer{value, target, net.value_name(value), s[0], s[1], s[2]};
  };
  std::vector<PfvLayer> layers{make(0, -1)};
  for (int v = 1; v <= enc; ++v) {
    const OpNode& n = net.producer(v);
    if (ancestor[v] && is_activation(n.kind) && shapes[v].size() == 3) {
      layers.push_back(make(v, n.inputs[0]));
    }
  }
  if (layers.back().value != enc) layers.push_back(make(enc, enc));
  return layers;
}

std::size_t pfv_layer_index(const std::vector<PfvLayer>& layers, int value) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].value == value) return i;
  }
  throw ConfigError("value " + std::to_string(value) + " is not a PFV layer");
}

std::vector<std::vector<PartialContribution>> partial_contributions(
    const Tape& tape, const std::vector<PfvLayer>& layers,
    std::size_t target_layer) {
  if (target_layer == 0 || target_layer >= layers.size()) {
    throw RangeError("partial contributions: target layer index out of range");
  }
  Decomposer decomposer(tape, layers, target_layer);
  const int target = layers[target_layer].target;
  // A non-activation encoder output is its own target; it is decomposed
  // through its producer because only earlier layers count as sources.
  Decomposition d = decomposer.decompose(target);
  std::vector<std::vector<PartialContribution>> out(d.parts.size());
  for (std::size_t j = 0; j < d.parts.size(); ++j) {
    out[j] = std::move(d.parts[j]);
    if (out[j].empty()) continue;
    const double share = 1.0 / static_cast<double>(out[j].size());
    for (auto& p : out[j]) {
      for (std::size_t c = 0; c < d.channels; ++c) p.vector[c] += share * d.bias[j][c];
    }
  }
  return out;
}

LayerSharing sharing_ratios(const Tape& tape, const std::vector<PfvLayer>& layers,
                            std::size_t target_layer) {
  const auto parts = partial_contributions(tape, layers, target_layer);
  const Tensor& target = tape.value(layers[target_layer].target);
  const std::size_t hw = target.dim(1) * target.dim(2), channels = target.dim(0);

  LayerSharing sharing;
  sharing.layer = target_layer;
  sharing.targets.resize(hw);
  std::set<std::size_t> sources;
  for (std::size_t j = 0; j < hw; ++j) {
    double norm2 = 0.0;
    for (std::size_t c = 0; c < channels; ++c) norm2 += target[c * hw + j] * target[c * hw + j];
    TargetShares& ts = sharing.targets[j];
    ts.degenerate = norm2 < kDegenerateNorm2 || parts[j].empty();
    ts.sources.reserve(parts[j].size());
    for (const auto& p : parts[j]) {
      double mu = 0.0;
      if (!ts.degenerate) {
        for (std::size_t c = 0; c < channels; ++c) mu += p.vector[c] * target[c * hw + j];
        mu /= norm2;
      }
      ts.sources.push_back({p.layer, p.position, mu});
      sources.insert(p.layer);
    }
  }
  sharing.source_layers.assign(sources.begin(), sources.end());
  return sharing;
}

LayerSharing sharing_ratios(const Tape& tape, int layer_l, int layer_k) {
  const std::vector<PfvLayer> layers = pfv_layers(tape.net());
  const std::size_t k = pfv_layer_index(layers, layer_k);
  const std::size_t l = pfv_layer_index(layers, layer_l);
  if (l >= k) {
    throw RangeError("sharing ratios: '" + layers[l].name + "' does not precede '" +
                     layers[k].name + "'");
  }
  LayerSharing sharing = sharing_ratios(tape, layers, k);
  if (std::find(sharing.source_layers.begin(), sharing.source_layers.end(), l) ==
      sharing.source_layers.end()) {
    throw RangeError("sharing ratios: '" + layers[k].name +
                     "' is not fed by '" + layers[l].name + "'");
  }
  return sharing;
}

SharingRatioTable build_sharing_table(const Tape& tape) {
  SharingRatioTable table;
  table.layers = pfv_layers(tape.net());
  table.per_layer.resize(table.layers.size());
  for (std::size_t k = 1; k < table.layers.size(); ++k) {
    table.per_layer[k] = sharing_ratios(tape, table.layers, k);
  }
  return table;
}

bool is_cut_layer(const SharingRatioTable& table, std::size_t layer) {
  for (std::size_t k = layer + 1; k < table.per_layer.size(); ++k) {
    for (std::size_t src : table.per_layer[k].source_layers) {
      if (src < layer) return false;
    }
  }
  return true;
}

}  // namespace ierf
