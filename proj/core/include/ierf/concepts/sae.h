#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ierf {

// z = ReLU(W_e (h - b_d)),  h_hat = W_d z - b_h.
struct SaeModel {
  Eigen::MatrixXd w_e;  // m x d
  Eigen::MatrixXd w_d;  // d x m
  Eigen::VectorXd b_d;  // d
  Eigen::VectorXd b_h;  // d
  double lambda = 0.0;

  std::size_t latents() const { return static_cast<std::size_t>(w_e.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(w_e.cols()); }

  Eigen::VectorXd encode(const Eigen::VectorXd& h) const;
  Eigen::VectorXd pre_activation(const Eigen::VectorXd& h) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& z) const;
  // Rows are samples.
  Eigen::MatrixXd encode_rows(const Eigen::MatrixXd& h) const;
  // ||h - h_hat||^2 + lambda ||z||_1, averaged over rows.
  double loss(const Eigen::MatrixXd& h) const;
};

struct SaeOptions {
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
};

struct SaeTraining {
  SaeModel model;
  std::vector<double> epoch_loss;  // mean per-sample loss over each epoch
};

// Plain minibatch SGD from a data-dependent start: b_d is the per-dimension
// minimum of the samples (so every shifted sample is non-negative), b_h =
// -b_d, decoder columns are unit-normalized shifted samples and W_e is W_d^T
// times the least-squares gain of the initial reconstruction.
// A non-finite loss aborts with NumericalError naming the epoch and
// learning rate.
SaeTraining train_sae(const Eigen::MatrixXd& samples, std::size_t m, double lambda,
                      const SaeOptions& options, std::uint64_t seed);

}  // namespace ierf
