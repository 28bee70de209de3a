#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace ierf {

struct LassoOptions {
  double tolerance = 1e-8;  // stop when the largest coefficient update is below
  std::size_t max_sweeps = 100000;
};

// 0.5 ||x - V u||^2 + lambda ||u||_1
double lasso_objective(const Eigen::MatrixXd& v, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u, double lambda);

// Cyclic coordinate descent over the Gram matrix. Zero columns of V get zero
// coefficients. `objective_trace`, when given, receives the objective after
// every sweep.
Eigen::VectorXd lasso_solve(const Eigen::MatrixXd& v, const Eigen::VectorXd& x,
                            double lambda, const LassoOptions& options = {},
                            std::vector<double>* objective_trace = nullptr);

struct CoefficientMap {
  Eigen::MatrixXd u;                    // positions x K
  std::vector<double> residual_norms;   // ||x_p - x_hat_p||
  double lambda = 0.0;
};

// Default layer lambda: 0.01 * max_p max_k |V^T x_p|.
double default_lasso_lambda(const Eigen::MatrixXd& v, const Eigen::MatrixXd& x);

// Rows of `x` are the PFVs of one layer. `offset` (if non-empty) is
// subtracted before coding and added back in the reconstruction. A negative
// lambda selects the default. Non-finite activations raise InputError.
CoefficientMap lasso_coefficients(const Eigen::MatrixXd& v, const Eigen::MatrixXd& x,
                                  double lambda = -1.0,
                                  const Eigen::VectorXd& offset = {},
                                  const LassoOptions& options = {});

struct ReconstructionReport {
  double rel_l2 = 0.0;     // mean ||x_p - x_hat_p|| / ||x_p||
  double l0_ratio = 0.0;   // mean 1 - ||u_p||_0 / K
  std::size_t positions = 0;
  std::size_t skipped = 0;  // zero-norm x_p
};

// x_hat = U V^T + offset.
ReconstructionReport reconstruction_report(const Eigen::MatrixXd& v,
                                           const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& u,
                                           const Eigen::VectorXd& offset = {});

}  // namespace ierf
