#include "ierf/icat/alignment.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ierf/error.h"
#include "ierf/log.h"
#include "ierf/metrics/metrics.h"
#include "ierf/tensor/tape.h"

namespace ierf {
namespace {

double cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  const double d = x.norm() * v.norm();
  return d > 0.0 ? x.dot(v) / d : 0.0;
}

}  // namespace

AlignmentObjective::AlignmentObjective(const NetworkGraph& net, int layer_a, int layer_b,
                                       const ConceptDictionary& dict_a, Eigen::VectorXd v_t,
                                       Eigen::VectorXd weights, Aggregation aggregation)
    : dict_a_(&dict_a),
      v_t_(std::move(v_t)),
      weights_(std::move(weights)),
      aggregation_(aggregation),
      pair_(net.value_name(layer_a) + " -> " + net.value_name(layer_b)) {
  if (layer_a >= layer_b) {
    throw ConfigError("ICAT layer pair " + pair_ + ": the parent layer must precede the child");
  }
  body_ = subnetwork(net, layer_a, layer_b);
  const std::vector<Shape> shapes = body_.infer_shapes();
  const Shape& in = shapes.front();
  const Shape& out = shapes.back();
  if (in.size() != 3 || out.size() != 3) {
    throw ConfigError("ICAT layer pair " + pair_ + ": both layers must be (C,H,W)");
  }
  if (in[0] != dict_a.channels()) {
    throw ConfigError("ICAT layer pair " + pair_ + ": parent dictionary has " +
                      std::to_string(dict_a.channels()) + " channels, layer has " +
                      std::to_string(in[0]));
  }
  if (static_cast<std::size_t>(v_t_.size()) != out[0]) {
    throw ConfigError("ICAT layer pair " + pair_ + ": target concept has " +
                      std::to_string(v_t_.size()) + " channels, layer has " +
                      std::to_string(out[0]));
  }
  if (aggregation_ == Aggregation::kWeightedSum &&
      static_cast<std::size_t>(weights_.size()) != out[1] * out[2]) {
    throw ValidationError("ICAT layer pair " + pair_ + ": " + std::to_string(weights_.size()) +
                          " target coefficients for " + std::to_string(out[1] * out[2]) +
                          " positions");
  }
  h_a_ = in[1];
  w_a_ = in[2];
}

Eigen::MatrixXd AlignmentObjective::mapped(const Eigen::MatrixXd& u) const {
  return pfv_matrix(evaluate(body_, pfv_tensor(dict_a_->reconstruct(u), h_a_, w_a_)));
}

double AlignmentObjective::value(const Eigen::MatrixXd& u) const {
  const Eigen::MatrixXd xb = mapped(u);
  if (aggregation_ == Aggregation::kMax) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < xb.rows(); ++i) best = std::max(best, cosine(xb.row(i).transpose(), v_t_));
    return best;
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < xb.rows(); ++i) {
    if (weights_(i) != 0.0) s += weights_(i) * cosine(xb.row(i).transpose(), v_t_);
  }
  return s;
}

Eigen::MatrixXd AlignmentObjective::gradient(const Eigen::MatrixXd& u) const {
  if (aggregation_ != Aggregation::kWeightedSum) {
    throw ConfigError("ICAT layer pair " + pair_ + ": max aggregation has no gradient");
  }
  const Tensor xa = pfv_tensor(dict_a_->reconstruct(u), h_a_, w_a_);
  const ForwardResult r = forward(body_, xa);
  const Tensor& yb = r.tape.output();
  const std::size_t cb = yb.dim(0), hw = yb.dim(1) * yb.dim(2);
  const double vn = v_t_.norm();
  Tensor seed(yb.shape(), 0.0);
  if (vn > 0.0) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(cb));
    for (std::size_t i = 0; i < hw; ++i) {
      const double w = weights_(static_cast<Eigen::Index>(i));
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < cb; ++c) x(static_cast<Eigen::Index>(c)) = yb[c * hw + i];
      const double xn = x.norm();
      if (!(xn > 0.0)) continue;
      const double cos = x.dot(v_t_) / (xn * vn);
      for (std::size_t c = 0; c < cb; ++c) {
        const auto k = static_cast<Eigen::Index>(c);
        seed[c * hw + i] = w * (v_t_(k) / (xn * vn) - cos * x(k) / (xn * xn));
      }
    }
  }
  const Tensor gx = backward(r.tape, seed)[0];
  return pfv_matrix(gx) * dict_a_->v;
}

double alignment_score(const NetworkGraph& net, int layer_a, int layer_b,
                       const Eigen::MatrixXd& u_a, const ConceptDictionary& dict_a,
                       const Eigen::VectorXd& v_t, const Eigen::VectorXd& u_bt) {
  return AlignmentObjective(net, layer_a, layer_b, dict_a, v_t, u_bt).value(u_a);
}

Eigen::VectorXd icat_parents(const NetworkGraph& net, int layer_a, int layer_b,
                             const ConceptDictionary& dict_a, const ConceptDictionary& dict_b,
                             const std::vector<CoefficientMap>& codes_a,
                             const std::vector<CoefficientMap>& codes_b, std::size_t t,
                             const AttributionOptions& options) {
  if (codes_a.size() != codes_b.size()) {
    throw ValidationError("ICAT: " + std::to_string(codes_a.size()) + " parent code maps but " +
                          std::to_string(codes_b.size()) + " child code maps");
  }
  if (t >= dict_b.size()) {
    throw RangeError("ICAT: target concept " + std::to_string(t) + " out of range");
  }
  const Eigen::VectorXd v_t = dict_b.v.col(static_cast<Eigen::Index>(t));
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dict_a.size()));
  for (std::size_t i = 0; i < codes_a.size(); ++i) {
    const AlignmentObjective s(net, layer_a, layer_b, dict_a, v_t,
                               codes_b[i].u.col(static_cast<Eigen::Index>(t)));
    AttributionOptions o = options;
    o.context = "ICAT " + s.pair_name() + " (target concept " + std::to_string(t) + ", image " +
                std::to_string(i) + ")";
    total += concept_attribution(s, codes_a[i].u, o);
  }
  return total;
}

double icat(const NetworkGraph& net, int layer_a, int layer_b, const ConceptDictionary& dict_a,
            const ConceptDictionary& dict_b, const std::vector<CoefficientMap>& codes_a,
            const std::vector<CoefficientMap>& codes_b, std::size_t q, std::size_t t,
            const AttributionOptions& options) {
  if (q >= dict_a.size()) {
    throw RangeError("ICAT: parent concept " + std::to_string(q) + " out of range");
  }
  return icat_parents(net, layer_a, layer_b, dict_a, dict_b, codes_a, codes_b, t, options)(
      static_cast<Eigen::Index>(q));
}

ValidationCurve insertion_deletion_curve(const NetworkGraph& net, int layer_a, int layer_b,
                                         const ConceptDictionary& dict_a,
                                         const Eigen::VectorXd& v_t, const Eigen::MatrixXd& u_a,
                                         const Eigen::VectorXd& u_bt,
                                         const std::vector<std::size_t>& ranking, CurveMode mode,
                                         Aggregation aggregation) {
  const std::size_t k = dict_a.size();
  std::vector<bool> seen(k, false);
  for (std::size_t q : ranking) {
    if (q >= k || seen[q]) {
      throw ValidationError("curve ranking must be a permutation of the " + std::to_string(k) +
                            " parent concepts");
    }
    seen[q] = true;
  }
  if (ranking.size() != k) {
    throw ValidationError("curve ranking covers " + std::to_string(ranking.size()) + " of " +
                          std::to_string(k) + " parent concepts");
  }
  const AlignmentObjective s(net, layer_a, layer_b, dict_a, v_t, u_bt, aggregation);
  const double baseline = s.value(u_a);
  double norm = baseline;
  ValidationCurve c;
  if (!(std::abs(baseline) > 1e-12)) {
    warn("curve for " + s.pair_name() + ": baseline alignment is 0, values left unnormalized");
    norm = 1.0;
    c.normalized = false;
  }
  Eigen::MatrixXd u = mode == CurveMode::kDelete ? u_a : Eigen::MatrixXd::Zero(u_a.rows(), u_a.cols());
  for (std::size_t step = 0; step <= k; ++step) {
    if (step > 0) {
      const auto q = static_cast<Eigen::Index>(ranking[step - 1]);
      if (mode == CurveMode::kDelete) {
        u.col(q).setZero();
      } else {
        u.col(q) = u_a.col(q);
      }
    }
    c.fraction.push_back(static_cast<double>(step) / static_cast<double>(k));
    c.value.push_back(s.value(u) / norm);
  }
  return c;
}

}  // namespace ierf
