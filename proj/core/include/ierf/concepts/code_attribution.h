#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ierf/concepts/dictionary.h"
#include "ierf/tensor/network.h"

namespace ierf {

// A scalar function of a positions x K code matrix.
class CodeObjective {
 public:
  virtual ~CodeObjective() = default;
  virtual double value(const Eigen::MatrixXd& u) const = 0;
  virtual Eigen::MatrixXd gradient(const Eigen::MatrixXd& u) const = 0;
};

enum class Attributor { kIntegratedGradients, kGradTimesInput, kOcclusion };

std::string_view attributor_name(Attributor a);
std::optional<Attributor> parse_attributor(std::string_view name);

struct AttributionOptions {
  Attributor attributor = Attributor::kIntegratedGradients;
  std::size_t ig_steps = 32;
  std::string context;  // names the computation in error messages
};

// Per-coefficient attributions (positions x K). IG uses the zero code as
// baseline and the midpoint rule: u * mean_s dS/du(alpha_s u),
// alpha_s = (s + 0.5) / steps. Occlusion has no per-coefficient form and
// raises ConfigError here. Non-finite gradients raise NumericalError.
Eigen::MatrixXd attribution_map(const CodeObjective& objective, const Eigen::MatrixXd& u,
                                const AttributionOptions& options);

// Per-concept totals. IG and gradient x input sum the map over positions;
// occlusion is S(u) - S(u with column q zeroed).
Eigen::VectorXd concept_attribution(const CodeObjective& objective, const Eigen::MatrixXd& u,
                                    const AttributionOptions& options);

// Value id of the pre-softmax class scores.
int logit_value(const NetworkGraph& net);

// y_c(U V^T + offset) through the part of the network after `layer_value`.
class LogitObjective : public CodeObjective {
 public:
  LogitObjective(const NetworkGraph& net, int layer_value, const ConceptDictionary& dict,
                 std::size_t class_c);

  double value(const Eigen::MatrixXd& u) const override;
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& u) const override;

 private:
  Tensor activations(const Eigen::MatrixXd& u) const;

  NetworkGraph head_;
  const ConceptDictionary* dict_;
  std::size_t class_c_;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

// Importance of every concept for class c, summed over images:
// sum_images sum_i AT(u_iq, y_c).
Eigen::VectorXd concept_importance(const NetworkGraph& net, int layer_value,
                                   const ConceptDictionary& dict,
                                   const std::vector<CoefficientMap>& codes,
                                   std::size_t class_c, const AttributionOptions& options);

// Concept ids by descending importance, ties to the lower id.
std::vector<std::size_t> select_nodes(const Eigen::VectorXd& importance, std::size_t top_k);

}  // namespace ierf
