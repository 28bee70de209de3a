#include "ierf/concepts/lasso.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ierf/error.h"

namespace ierf {
namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

Eigen::VectorXd solve_with_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c,
                                double lambda, const LassoOptions& options,
                                const std::function<void(const Eigen::VectorXd&)>& trace) {
  const Eigen::Index k = gram.rows();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  // grad = c - G u, maintained incrementally.
  Eigen::VectorXd r = c;
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double old = u[j];
      const double updated = soft_threshold(r[j] + gjj * old, lambda) / gjj;
      const double delta = updated - old;
      if (delta != 0.0) {
        u[j] = updated;
        r -= delta * gram.col(j);
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (trace) trace(u);
    if (max_delta < options.tolerance) break;
  }
  return u;
}

}  // namespace

double lasso_objective(const Eigen::MatrixXd& v, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u, double lambda) {
  return 0.5 * (x - v * u).squaredNorm() + lambda * u.lpNorm<1>();
}

Eigen::VectorXd lasso_solve(const Eigen::MatrixXd& v, const Eigen::VectorXd& x,
                            double lambda, const LassoOptions& options,
                            std::vector<double>* objective_trace) {
  if (v.rows() != x.size()) {
    throw ValidationError("lasso: dictionary has " + std::to_string(v.rows()) +
                          " rows, vector has " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw InputError("lasso: non-finite activations");
  if (lambda < 0.0) throw ConfigError("lasso: lambda must be non-negative");
  std::function<void(const Eigen::VectorXd&)> trace;
  if (objective_trace) {
    trace = [&](const Eigen::VectorXd& u) {
      objective_trace->push_back(lasso_objective(v, x, u, lambda));
    };
  }
  return solve_with_gram(v.transpose() * v, v.transpose() * x, lambda, options, trace);
}

double default_lasso_lambda(const Eigen::MatrixXd& v, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) return 0.0;
  return 0.01 * (x * v).cwiseAbs().maxCoeff();
}

CoefficientMap lasso_coefficients(const Eigen::MatrixXd& v, const Eigen::MatrixXd& x,
                                  double lambda, const Eigen::VectorXd& offset,
                                  const LassoOptions& options) {
  if (v.rows() != x.cols()) {
    throw ValidationError("lasso: dictionary has " + std::to_string(v.rows()) +
                          " rows but PFVs have " + std::to_string(x.cols()) + " channels");
  }
  if (!x.allFinite()) throw InputError("lasso: non-finite activations");
  Eigen::MatrixXd centred = x;
  if (offset.size() > 0) centred.rowwise() -= offset.transpose();
  CoefficientMap out;
  out.lambda = lambda < 0.0 ? default_lasso_lambda(v, centred) : lambda;
  out.u.resize(x.rows(), v.cols());
  const Eigen::MatrixXd gram = v.transpose() * v;
  const Eigen::MatrixXd c = centred * v;  // rows are V^T x_p
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    const Eigen::VectorXd u = solve_with_gram(gram, c.row(p).transpose(), out.lambda, options, {});
    out.u.row(p) = u.transpose();
    out.residual_norms.push_back((centred.row(p).transpose() - v * u).norm());
  }
  return out;
}

ReconstructionReport reconstruction_report(const Eigen::MatrixXd& v,
                                           const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& u,
                                           const Eigen::VectorXd& offset) {
  if (u.rows() != x.rows() || u.cols() != v.cols() || v.rows() != x.cols()) {
    throw ValidationError("reconstruction report: inconsistent shapes");
  }
  ReconstructionReport r;
  Eigen::MatrixXd recon = u * v.transpose();
  if (offset.size() > 0) recon.rowwise() += offset.transpose();
  const double k = static_cast<double>(v.cols());
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    const double norm = x.row(p).norm();
    if (norm == 0.0) {
      ++r.skipped;
      continue;
    }
    r.rel_l2 += (x.row(p) - recon.row(p)).norm() / norm;
    const double nnz = static_cast<double>((u.row(p).array() != 0.0).count());
    r.l0_ratio += 1.0 - nnz / k;
    ++r.positions;
  }
  if (r.positions > 0) {
    r.rel_l2 /= static_cast<double>(r.positions);
    r.l0_ratio /= static_cast<double>(r.positions);
  }
  return r;
}

}  // namespace ierf
