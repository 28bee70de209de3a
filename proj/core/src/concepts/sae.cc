#include "ierf/concepts/sae.h"

#include <cmath>
#include <sstream>

#include "ierf/error.h"
#include "ierf/util/random.h"

namespace ierf {

Eigen::VectorXd SaeModel::pre_activation(const Eigen::VectorXd& h) const {
  return w_e * (h - b_d);
}

Eigen::VectorXd SaeModel::encode(const Eigen::VectorXd& h) const {
  return pre_activation(h).cwiseMax(0.0);
}

Eigen::VectorXd SaeModel::decode(const Eigen::VectorXd& z) const { return w_d * z - b_h; }

Eigen::MatrixXd SaeModel::encode_rows(const Eigen::MatrixXd& h) const {
  return ((h.rowwise() - b_d.transpose()) * w_e.transpose()).cwiseMax(0.0);
}

double SaeModel::loss(const Eigen::MatrixXd& h) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const Eigen::VectorXd x = h.row(i).transpose();
    const Eigen::VectorXd z = encode(x);
    total += (x - decode(z)).squaredNorm() + lambda * z.lpNorm<1>();
  }
  return h.rows() > 0 ? total / static_cast<double>(h.rows()) : 0.0;
}

SaeTraining train_sae(const Eigen::MatrixXd& samples, std::size_t m, double lambda,
                      const SaeOptions& options, std::uint64_t seed) {
  const Eigen::Index n = samples.rows(), d = samples.cols();
  if (n == 0 || d == 0) throw ValidationError("train_sae: no samples");
  if (m == 0) throw ConfigError("train_sae: latent count must be positive");
  if (!samples.allFinite()) throw InputError("train_sae: samples contain non-finite values");
  if (options.batch_size == 0) throw ConfigError("train_sae: batch size must be positive");
  if (!(options.learning_rate > 0.0)) throw ConfigError("train_sae: learning rate must be positive");

  Rng rng(derive_seed(seed, {0}));
  SaeModel s;
  s.lambda = lambda;
  s.b_d = samples.colwise().minCoeff().transpose();
  s.b_h = -s.b_d;
  s.w_d.resize(d, static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j) {
    Eigen::VectorXd col = samples.row(static_cast<Eigen::Index>(rng.below(n))).transpose() - s.b_d;
    if (col.norm() < 1e-12) {
      for (Eigen::Index r = 0; r < d; ++r) col[r] = std::abs(rng.normal());
    }
    s.w_d.col(j) = col.normalized();
  }
  s.w_e = s.w_d.transpose();
  // With m overlapping atoms, W_d ReLU(W_d^T c) overshoots c by roughly m/d.
  // Rescale the encoder by the least-squares gain so training starts near a
  // sensible reconstruction.
  {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd c = samples.row(i).transpose() - s.b_d;
      const Eigen::VectorXd r = s.w_d * (s.w_e * c).cwiseMax(0.0);
      num += c.dot(r);
      den += r.squaredNorm();
    }
    if (den > 0.0) s.w_e *= num / den;
  }

  SaeTraining out;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double lr = options.learning_rate;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      Eigen::MatrixXd g_we = Eigen::MatrixXd::Zero(s.w_e.rows(), s.w_e.cols());
      Eigen::MatrixXd g_wd = Eigen::MatrixXd::Zero(s.w_d.rows(), s.w_d.cols());
      Eigen::VectorXd g_bd = Eigen::VectorXd::Zero(d), g_bh = Eigen::VectorXd::Zero(d);
      for (std::size_t b = start; b < end; ++b) {
        const Eigen::VectorXd h = samples.row(static_cast<Eigen::Index>(order[b])).transpose();
        const Eigen::VectorXd centred = h - s.b_d;
        const Eigen::VectorXd pre = s.w_e * centred;
        const Eigen::VectorXd z = pre.cwiseMax(0.0);
        const Eigen::VectorXd err = s.w_d * z - s.b_h - h;
        epoch_total += err.squaredNorm() + lambda * z.sum();
        Eigen::VectorXd dz = 2.0 * s.w_d.transpose() * err;
        for (Eigen::Index k = 0; k < dz.size(); ++k) dz[k] = pre[k] > 0.0 ? dz[k] + lambda : 0.0;
        g_wd += 2.0 * err * z.transpose();
        g_bh -= 2.0 * err;
        g_we += dz * centred.transpose();
        g_bd -= s.w_e.transpose() * dz;
      }
      s.w_e -= lr * scale * g_we;
      s.w_d -= lr * scale * g_wd;
      s.b_d -= lr * scale * g_bd;
      s.b_h -= lr * scale * g_bh;
    }
    const double mean = epoch_total / static_cast<double>(n);
    if (!std::isfinite(mean) || !s.w_e.allFinite() || !s.w_d.allFinite()) {
      std::ostringstream msg;
      msg << "train_sae: loss diverged at epoch " << epoch << " (learning rate " << lr
          << ", lambda " << lambda << ", last finite loss "
          << (out.epoch_loss.empty() ? std::nan("") : out.epoch_loss.back()) << ")";
      throw NumericalError(msg.str());
    }
    out.epoch_loss.push_back(mean);
  }
  out.model = std::move(s);
  return out;
}

}  // namespace ierf
