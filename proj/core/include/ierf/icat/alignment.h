#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ierf/concepts/code_attribution.h"
#include "ierf/concepts/dictionary.h"
#include "ierf/metrics/metrics.h"

namespace ierf {

enum class Aggregation { kWeightedSum, kMax };

// Layer-pair alignment of a target concept v_t at layer b with the
// reconstruction X_hat^a = U V_a^T + offset pushed through M_ab, the part of
// the network between the two layers:
//   weighted sum: S = sum_i w_i cos(M_ab(X_hat^a)_i, v_t), w = u^b_t
//   max:          max_i cos(M_ab(X_hat^a)_i, v_t)
// Zero-norm vectors contribute a cosine of 0.
class AlignmentObjective : public CodeObjective {
 public:
  AlignmentObjective(const NetworkGraph& net, int layer_a, int layer_b,
                     const ConceptDictionary& dict_a, Eigen::VectorXd v_t,
                     Eigen::VectorXd weights, Aggregation aggregation = Aggregation::kWeightedSum);

  double value(const Eigen::MatrixXd& u) const override;
  // Weighted-sum aggregation only.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& u) const override;

  const std::string& pair_name() const { return pair_; }

 private:
  Eigen::MatrixXd mapped(const Eigen::MatrixXd& u) const;

  NetworkGraph body_;
  const ConceptDictionary* dict_a_;
  Eigen::VectorXd v_t_;
  Eigen::VectorXd weights_;
  Aggregation aggregation_;
  std::string pair_;
  std::size_t h_a_ = 0, w_a_ = 0;
};

double alignment_score(const NetworkGraph& net, int layer_a, int layer_b,
                       const Eigen::MatrixXd& u_a, const ConceptDictionary& dict_a,
                       const Eigen::VectorXd& v_t, const Eigen::VectorXd& u_bt);

// ICAT(q -> t) for every parent concept q of layer a, summed over images.
// codes_a[i] and codes_b[i] are the coefficient maps of image i.
Eigen::VectorXd icat_parents(const NetworkGraph& net, int layer_a, int layer_b,
                             const ConceptDictionary& dict_a, const ConceptDictionary& dict_b,
                             const std::vector<CoefficientMap>& codes_a,
                             const std::vector<CoefficientMap>& codes_b, std::size_t t,
                             const AttributionOptions& options);

double icat(const NetworkGraph& net, int layer_a, int layer_b, const ConceptDictionary& dict_a,
            const ConceptDictionary& dict_b, const std::vector<CoefficientMap>& codes_a,
            const std::vector<CoefficientMap>& codes_b, std::size_t q, std::size_t t,
            const AttributionOptions& options);

enum class CurveMode { kInsert, kDelete };

using ValidationCurve = Curve;

// Deletes (or inserts, starting from the zero code) parent concepts of
// layer a in `ranking` order and tracks the target alignment, normalized by
// its value for the unmodified code. `ranking` must be a permutation of all
// parent concept ids.
ValidationCurve insertion_deletion_curve(const NetworkGraph& net, int layer_a, int layer_b,
                                         const ConceptDictionary& dict_a,
                                         const Eigen::VectorXd& v_t, const Eigen::MatrixXd& u_a,
                                         const Eigen::VectorXd& u_bt,
                                         const std::vector<std::size_t>& ranking, CurveMode mode,
                                         Aggregation aggregation = Aggregation::kMax);

}  // namespace ierf
