#include "ierf/concepts/code_attribution.h"

#include <algorithm>
#include <numeric>

#include "ierf/error.h"
#include "ierf/tensor/tape.h"

namespace ierf {
namespace {

void check_finite(const Eigen::MatrixXd& g, const AttributionOptions& o, std::size_t step) {
  if (g.allFinite()) return;
  const std::string where = o.context.empty() ? "attribution" : o.context;
  throw NumericalError(where + ": non-finite gradient at alpha step " + std::to_string(step) +
                       " of " + std::to_string(o.ig_steps));
}

}  // namespace

std::string_view attributor_name(Attributor a) {
  switch (a) {
    case Attributor::kIntegratedGradients: return "integrated-gradients";
    case Attributor::kGradTimesInput: return "grad-x-input";
    case Attributor::kOcclusion: return "occlusion";
  }
  return "unknown";
}

std::optional<Attributor> parse_attributor(std::string_view name) {
  for (Attributor a : {Attributor::kIntegratedGradients, Attributor::kGradTimesInput,
                       Attributor::kOcclusion}) {
    if (attributor_name(a) == name) return a;
  }
  return std::nullopt;
}

Eigen::MatrixXd attribution_map(const CodeObjective& objective, const Eigen::MatrixXd& u,
                                const AttributionOptions& options) {
  switch (options.attributor) {
    case Attributor::kGradTimesInput: {
      const Eigen::MatrixXd g = objective.gradient(u);
      check_finite(g, options, 0);
      return u.cwiseProduct(g);
    }
    case Attributor::kIntegratedGradients: {
      if (options.ig_steps == 0) throw ConfigError("integrated gradients: steps must be positive");
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(u.rows(), u.cols());
      for (std::size_t s = 0; s < options.ig_steps; ++s) {
        const double alpha = (static_cast<double>(s) + 0.5) / static_cast<double>(options.ig_steps);
        const Eigen::MatrixXd g = objective.gradient(alpha * u);
        check_finite(g, options, s);
        acc += g;
      }
      return u.cwiseProduct(acc) / static_cast<double>(options.ig_steps);
    }
    case Attributor::kOcclusion:
      break;
  }
  throw ConfigError("occlusion has no per-coefficient attribution map");
}

Eigen::VectorXd concept_attribution(const CodeObjective& objective, const Eigen::MatrixXd& u,
                                    const AttributionOptions& options) {
  if (options.attributor != Attributor::kOcclusion) {
    return attribution_map(objective, u, options).colwise().sum().transpose();
  }
  const double full = objective.value(u);
  Eigen::VectorXd out(u.cols());
  Eigen::MatrixXd masked = u;
  for (Eigen::Index q = 0; q < u.cols(); ++q) {
    if (u.col(q).isZero(0.0)) {
      out(q) = 0.0;
      continue;
    }
    masked.col(q).setZero();
    out(q) = full - objective.value(masked);
    masked.col(q) = u.col(q);
  }
  if (!out.allFinite()) {
    throw NumericalError((options.context.empty() ? std::string("occlusion") : options.context) +
                         ": non-finite objective");
  }
  return out;
}

int logit_value(const NetworkGraph& net) {
  if (!net.nodes.empty() && net.nodes.back().kind == OpKind::kSoftmax) {
    return net.nodes.back().inputs[0];
  }
  return net.output_value();
}

LogitObjective::LogitObjective(const NetworkGraph& net, int layer_value,
                               const ConceptDictionary& dict, std::size_t class_c)
    : head_(subnetwork(net, layer_value, logit_value(net))), dict_(&dict), class_c_(class_c) {
  const Shape& s = head_.input_shape;
  if (s.size() != 3 || s[0] != dict.channels()) {
    throw ConfigError("dictionary for '" + dict.layer + "' has " +
                      std::to_string(dict.channels()) + " channels, layer '" +
                      net.value_name(layer_value) + "' has shape " + shape_string(s));
  }
  height_ = s[1];
  width_ = s[2];
  const Shape out = head_.infer_shapes().back();
  if (out.size() != 1 || class_c >= out[0]) {
    throw RangeError("class index " + std::to_string(class_c) + " out of range");
  }
}

Tensor LogitObjective::activations(const Eigen::MatrixXd& u) const {
  return pfv_tensor(dict_->reconstruct(u), height_, width_);
}

double LogitObjective::value(const Eigen::MatrixXd& u) const {
  return evaluate(head_, activations(u))[class_c_];
}

Eigen::MatrixXd LogitObjective::gradient(const Eigen::MatrixXd& u) const {
  const ForwardResult r = forward(head_, activations(u));
  Tensor seed(r.logits.shape(), 0.0);
  seed[class_c_] = 1.0;
  const Tensor gx = backward(r.tape, seed)[0];
  return pfv_matrix(gx) * dict_->v;
}

Eigen::VectorXd concept_importance(const NetworkGraph& net, int layer_value,
                                   const ConceptDictionary& dict,
                                   const std::vector<CoefficientMap>& codes,
                                   std::size_t class_c, const AttributionOptions& options) {
  const LogitObjective objective(net, layer_value, dict, class_c);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dict.size()));
  for (const CoefficientMap& m : codes) total += concept_attribution(objective, m.u, options);
  return total;
}

std::vector<std::size_t> select_nodes(const Eigen::VectorXd& importance, std::size_t top_k) {
  std::vector<std::size_t> ids(static_cast<std::size_t>(importance.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return importance(static_cast<Eigen::Index>(a)) > importance(static_cast<Eigen::Index>(b));
  });
  ids.resize(std::min(top_k, ids.size()));
  return ids;
}

}  // namespace ierf
