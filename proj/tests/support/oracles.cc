#include "support/oracles.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "ierf/tensor/tape.h"

namespace ierf::oracle {

Tensor numeric_input_gradient(const NetworkGraph& net, const Tensor& x,
                              const Tensor& seed, double h) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = dot(seed, evaluate(net, probe));
    probe[i] = x[i] - h;
    const double down = dot(seed, evaluate(net, probe));
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(const Tensor& a, const Tensor& n, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

namespace {

Tensor uniform(const Shape& s, Rng& rng, double lo, double hi) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values with |v| in [0.05, 1.5] and random sign.
Tensor away_from_zero(const Shape& s, Rng& rng) {
  Tensor t(s);
  for (double& v : t.data()) {
    const double m = rng.uniform(0.05, 1.5);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

}  // namespace

GradCase make_grad_case(OpKind kind, Rng& rng) {
  const Shape spatial{2, 4, 4};
  NetworkBuilder b(kind == OpKind::kLinear || kind == OpKind::kSoftmax
                       ? Shape{5}
                       : spatial);
  GradCase gc;
  int x = b.input();
  switch (kind) {
    case OpKind::kConv2d:
      x = b.conv2d(x, uniform({3, 2, 3, 3}, rng, -1, 1), uniform({3}, rng, -1, 1), 1, 1);
      break;
    case OpKind::kLinear:
      x = b.linear(x, uniform({3, 5}, rng, -1, 1), uniform({3}, rng, -1, 1));
      break;
    case OpKind::kLeakyRelu:
      x = b.leaky_relu(x, rng.uniform(0.01, 0.3));
      break;
    case OpKind::kElu:
      x = b.elu(x, rng.uniform(0.5, 1.5));
      break;
    case OpKind::kMaxPool:
      x = b.max_pool(x, 2, 2);
      break;
    case OpKind::kAvgPool:
      x = b.avg_pool(x, 3, 2, 1);
      break;
    case OpKind::kBatchNorm:
      x = b.batch_norm(x, uniform({2}, rng, -1, 1), uniform({2}, rng, 0.5, 2),
                       uniform({2}, rng, -2, 2), uniform({2}, rng, -1, 1));
      break;
    case OpKind::kResidualAdd: {
      const int y = b.activation(x, OpKind::kTanh);
      x = b.residual_add(y, x);
      break;
    }
    default:
      x = b.activation(x, kind);
      break;
  }
  gc.net = b.build();
  const Shape in_shape = gc.net.input_shape;
  if (kind == OpKind::kMaxPool) {
    // Distinct values spaced well beyond the finite-difference step.
    std::vector<double> vals(shape_size(in_shape));
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1 * static_cast<double>(i);
    rng.shuffle(vals);
    gc.input = Tensor(in_shape, vals);
  } else {
    gc.input = away_from_zero(in_shape, rng);
  }
  gc.seed = uniform(gc.net.infer_shapes().back(), rng, -1, 1);
  return gc;
}

ConvStackRatios conv_stack_ratios(const NetworkGraph& net, const Tensor& input) {
  ConvStackRatios r;
  Tensor act = input;
  r.positions.push_back(input.dim(1) * input.dim(2));
  r.mu.emplace_back();
  for (std::size_t n = 0; n < net.nodes.size(); ++n) {
    const OpNode& conv = net.nodes[n];
    if (conv.kind != OpKind::kConv2d) continue;
    const std::size_t cin = act.dim(0), h = act.dim(1), w = act.dim(2);
    const std::size_t cout = conv.weight.dim(0), k = conv.kernel;
    const std::size_t oh = (h + 2 * conv.padding - k) / conv.stride + 1;
    const std::size_t ow = (w + 2 * conv.padding - k) / conv.stride + 1;
    std::vector<std::vector<std::pair<std::size_t, double>>> layer(oh * ow);
    Tensor pre({cout, oh, ow});
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        // Each in-bounds tap is one source; bias shared equally among them.
        std::vector<std::size_t> src;
        std::vector<std::vector<double>> parts;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long iy = static_cast<long>(oy * conv.stride + ky) - static_cast<long>(conv.padding);
            const long ix = static_cast<long>(ox * conv.stride + kx) - static_cast<long>(conv.padding);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
            std::vector<double> part(cout, 0.0);
            for (std::size_t co = 0; co < cout; ++co) {
              for (std::size_t ci = 0; ci < cin; ++ci) {
                part[co] += conv.weight[((co * cin + ci) * k + ky) * k + kx] *
                            act.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
            src.push_back(static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix));
            parts.push_back(std::move(part));
          }
        }
        std::vector<double> v(cout, 0.0);
        for (auto& part : parts) {
          for (std::size_t co = 0; co < cout; ++co) {
            part[co] += conv.bias[co] / static_cast<double>(parts.size());
            v[co] += part[co];
          }
        }
        double nn = 0.0;
        for (double x : v) nn += x * x;
        const std::size_t j = oy * ow + ox;
        for (std::size_t s = 0; s < parts.size(); ++s) {
          double ip = 0.0;
          for (std::size_t co = 0; co < cout; ++co) ip += parts[s][co] * v[co];
          layer[j].push_back({src[s], nn < 1e-24 ? 0.0 : ip / nn});
        }
        for (std::size_t co = 0; co < cout; ++co) pre.at(co, oy, ox) = v[co];
      }
    }
    r.mu.push_back(std::move(layer));
    r.positions.push_back(oh * ow);
    // Apply the activation that follows.
    const OpNode& a = net.nodes.at(n + 1);
    NetworkBuilder single(pre.shape());
    if (a.kind == OpKind::kLeakyRelu) {
      single.leaky_relu(0, a.slope);
    } else if (a.kind == OpKind::kElu) {
      single.elu(0, a.alpha);
    } else {
      single.activation(0, a.kind);
    }
    act = evaluate(single.build(), pre);
  }
  return r;
}

std::vector<double> path_sum_relevance(const ConvStackRatios& r,
                                       const std::vector<double>& seed) {
  std::vector<double> out(r.positions.front(), 0.0);
  const std::size_t top = r.mu.size() - 1;
  std::function<void(std::size_t, std::size_t, double)> walk =
      [&](std::size_t layer, std::size_t pos, double weight) {
        if (layer == 0) {
          out[pos] += weight;
          return;
        }
        for (const auto& [src, mu] : r.mu[layer][pos]) walk(layer - 1, src, weight * mu);
      };
  for (std::size_t j = 0; j < r.positions[top]; ++j) walk(top, j, seed[j]);
  return out;
}

}  // namespace ierf::oracle

namespace ierf::oracle {

Eigen::VectorXd lasso_projected_gradient(const Eigen::MatrixXd& v, const Eigen::VectorXd& x,
                                         double lambda, std::size_t iterations) {
  const Eigen::Index k = v.cols();
  // Split variables w = [p; n] with objective 0.5||x - A w||^2 + lambda 1'w,
  // A = [V, -V]. ||A||^2 = 2 ||V||^2.
  Eigen::MatrixXd a(v.rows(), 2 * k);
  a << v, -v;
  const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(v).singularValues()(0);
  const double step = 1.0 / std::max(2.0 * sigma * sigma, 1e-12);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * k), y = w, prev = w;
  double t = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = a.transpose() * (a * y - x) + Eigen::VectorXd::Constant(2 * k, lambda);
    w = (y - step * grad).cwiseMax(0.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = w + ((t - 1.0) / t_next) * (w - prev);
    prev = w;
    t = t_next;
  }
  return w.head(k) - w.tail(k);
}

}  // namespace ierf::oracle

namespace ierf::oracle {

bool pointing_game_literal(const RelevanceField& s, const Mask& m, double tolerance) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.scores.size(); ++i) {
    if (s.scores[i] > s.scores[best]) best = i;
  }
  const double by = static_cast<double>(best / s.width), bx = static_cast<double>(best % s.width);
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      const double dy = static_cast<double>(y) - by, dx = static_cast<double>(x) - bx;
      nearest = std::min(nearest, std::sqrt(dy * dy + dx * dx));
    }
  }
  return nearest <= tolerance;
}

double localization_literal(const RelevanceField& s, const Mask& m) {
  double in = 0.0, all = 0.0;
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      const double v = s.at(y, x);
      if (v <= 0.0) continue;
      all += v;
      if (m.at(y, x)) in += v;
    }
  }
  return all > 0.0 ? in / all : std::nan("");
}

double sparseness_literal(const std::vector<double>& v) {
  std::vector<double> a;
  for (double x : v) a.push_back(std::fabs(x));
  std::sort(a.begin(), a.end());
  double l1 = 0.0;
  for (double x : a) l1 += x;
  if (l1 == 0.0) return std::nan("");
  const double d = static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t k = 1; k <= a.size(); ++k) {
    sum += (a[k - 1] / l1) * ((d - static_cast<double>(k) + 0.5) / d);
  }
  return 1.0 - 2.0 * sum;
}

double pearson_literal(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return std::nan("");
  return cov / (std::sqrt(va) * std::sqrt(vb));
}

double fidelity_literal(const NetworkGraph& net, const Tensor& image, const RelevanceField& s,
                        std::size_t class_c, std::size_t trials, std::size_t subset,
                        std::uint64_t seed) {
  const std::size_t channels = image.dim(0), hw = image.dim(1) * image.dim(2);
  const double base = evaluate(net, image)[class_c];
  std::vector<double> mass, drop;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng r(derive_seed(seed, {t}));
    const std::vector<std::size_t> perm = r.permutation(hw);
    Tensor z = image;
    double m = 0.0;
    for (std::size_t i = 0; i < subset; ++i) {
      m += s.scores[perm[i]];
      for (std::size_t c = 0; c < channels; ++c) z[c * hw + perm[i]] = 0.0;
    }
    mass.push_back(m);
    drop.push_back(base - evaluate(net, z)[class_c]);
  }
  return pearson_literal(mass, drop);
}

double stability_literal(const std::function<std::vector<double>(const Tensor&)>& phi,
                         const Tensor& x, std::size_t n, double sigma, std::uint64_t seed) {
  auto clamp = [](std::vector<double> v) {
    for (double& e : v) e = std::min(1.0, std::max(-1.0, e));
    return v;
  };
  const std::vector<double> a0 = clamp(phi(x));
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    Rng r(derive_seed(seed, {j}));
    Tensor xj = x;
    for (std::size_t i = 0; i < xj.size(); ++i) xj[i] += sigma * r.normal();
    const std::vector<double> aj = clamp(phi(xj));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < aj.size(); ++i) {
      num += (a0[i] - aj[i]) * (a0[i] - aj[i]);
      den += (x[i] - xj[i]) * (x[i] - xj[i]);
    }
    worst = std::max(worst, std::sqrt(num) / std::sqrt(den));
  }
  return worst;
}

}  // namespace ierf::oracle
