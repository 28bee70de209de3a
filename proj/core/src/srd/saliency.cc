#include "ierf/srd/saliency.h"

#include <algorithm>
#include <cmath>

#include "ierf/error.h"
#include "ierf/log.h"
#include "ierf/srd/propagation.h"

namespace ierf {
namespace {

// Gradients with respect to every value, seeded at logit c. A trailing
// softmax is skipped so that y^c is the pre-softmax score.
class LogitGradients {
 public:
  explicit LogitGradients(const Tape& tape) : tape_(&tape) {
    const NetworkGraph& net = tape.net();
    if (!net.nodes.empty() && net.nodes.back().kind == OpKind::kSoftmax) {
      head_ = subnetwork(net, 0, net.nodes.back().inputs[0]);
      owned_ = forward(head_, tape.value(0)).tape;
      tape_ = &owned_;
    }
  }

  std::size_t classes() const { return tape_->output().size(); }

  std::vector<Tensor> of(std::size_t c) const {
    if (c >= classes()) {
      throw RangeError("class index " + std::to_string(c) + " out of range (" +
                       std::to_string(classes()) + " classes)");
    }
    Tensor seed(tape_->output().shape(), 0.0);
    seed[c] = 1.0;
    return backward(*tape_, seed);
  }

 private:
  const Tape* tape_;
  NetworkGraph head_;
  Tape owned_;
};

std::vector<double> contribution(const Tensor& a, const Tensor& grad) {
  const std::size_t channels = a.dim(0), hw = a.dim(1) * a.dim(2);
  std::vector<double> phi(hw, 0.0);
  for (std::size_t k = 0; k < channels; ++k) {
    double alpha = 0.0;
    for (std::size_t i = 0; i < hw; ++i) alpha += grad[k * hw + i];
    alpha /= static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) phi[i] += alpha * a[k * hw + i];
  }
  return phi;
}

const Tensor& spatial_value(const Tape& tape, int layer_value) {
  const Tensor& a = tape.value(layer_value);
  if (a.rank() != 3) {
    throw ConfigError("layer '" + tape.net().value_name(layer_value) +
                      "' is not spatial");
  }
  return a;
}

}  // namespace

std::vector<double> ClassContributions::column(std::size_t c) const {
  std::vector<double> out(positions);
  for (std::size_t i = 0; i < positions; ++i) out[i] = at(i, c);
  return out;
}

std::vector<double> class_contribution(const Tape& tape, int layer_value,
                                       std::size_t class_c) {
  const Tensor& a = spatial_value(tape, layer_value);
  LogitGradients grads(tape);
  return contribution(a, grads.of(class_c)[layer_value]);
}

ClassContributions class_contributions(const Tape& tape, int layer_value) {
  const Tensor& a = spatial_value(tape, layer_value);
  LogitGradients grads(tape);
  ClassContributions out;
  out.positions = a.dim(1) * a.dim(2);
  out.classes = grads.classes();
  out.values.assign(out.positions * out.classes, 0.0);
  for (std::size_t c = 0; c < out.classes; ++c) {
    const std::vector<double> phi = contribution(a, grads.of(c)[layer_value]);
    for (std::size_t i = 0; i < out.positions; ++i) out.values[i * out.classes + c] = phi[i];
  }
  return out;
}

std::string_view mu_variant_name(MuVariant v) {
  switch (v) {
    case MuVariant::kRaw: return "raw";
    case MuVariant::kMean: return "mean";
    case MuVariant::kClamped: return "clamped";
  }
  return "unknown";
}

std::optional<MuVariant> parse_mu_variant(std::string_view name) {
  for (MuVariant v : {MuVariant::kRaw, MuVariant::kMean, MuVariant::kClamped}) {
    if (mu_variant_name(v) == name) return v;
  }
  return std::nullopt;
}

std::vector<double> refine_mu(const ClassContributions& phi,
                              std::size_t class_c, MuVariant variant) {
  if (class_c >= phi.classes) {
    throw RangeError("class index " + std::to_string(class_c) + " out of range (" +
                     std::to_string(phi.classes) + " classes)");
  }
  if (variant != MuVariant::kRaw && phi.classes == 1) {
    warn("refine_mu: single-class model, '" + std::string(mu_variant_name(variant)) +
         "' sharing ratios are all zero");
  }
  std::vector<double> mu(phi.positions);
  for (std::size_t i = 0; i < phi.positions; ++i) {
    double v = phi.at(i, class_c);
    if (variant != MuVariant::kRaw) {
      double mean = 0.0;
      for (std::size_t c = 0; c < phi.classes; ++c) mean += phi.at(i, c);
      v -= mean / static_cast<double>(phi.classes);
      if (variant == MuVariant::kClamped) v = std::max(v, 0.0);
    }
    mu[i] = v;
  }
  return mu;
}

RelevanceField saliency(const NetworkGraph& net, const Tensor& input,
                        std::size_t class_c, const SaliencyOptions& options) {
  const ForwardResult fr = forward(net, input);
  const SharingRatioTable table = build_sharing_table(fr.tape);
  return saliency(fr.tape, table, class_c, options);
}

RelevanceField saliency(const Tape& tape, const SharingRatioTable& table,
                        std::size_t class_c, const SaliencyOptions& options) {
  const std::size_t top = table.encoder_layer();
  if (options.stop_layer > top) {
    throw RangeError("stop layer " + std::to_string(options.stop_layer) +
                     " beyond encoder layer " + std::to_string(top));
  }
  const ClassContributions phi = class_contributions(tape, table.layers[top].value);
  const std::vector<double> mu = refine_mu(phi, class_c, options.variant);
  if (options.use_forward) {
    return aggregate_ierfs(propagate_ierf_forward(table, top, options.stop_layer), mu);
  }
  return propagate_relevance_backward(table, mu, options.stop_layer);
}

double aggregate_channel_relevance(std::span<const double> r,
                                   ChannelAggregation mode) {
  double s = 0.0;
  for (double v : r) {
    switch (mode) {
      case ChannelAggregation::kSum: s += v; break;
      case ChannelAggregation::kAbs: s += std::abs(v); break;
      case ChannelAggregation::kPos: s += std::max(v, 0.0); break;
    }
  }
  return s;
}

}  // namespace ierf
