#include "ierf/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ierf/error.h"
#include "ierf/tensor/tape.h"
#include "ierf/util/random.h"

namespace ierf {
namespace {

void check_same_grid(const RelevanceField& s, const Mask& m) {
  if (s.height != m.height || s.width != m.width) {
    throw ValidationError("saliency is " + std::to_string(s.height) + "x" +
                          std::to_string(s.width) + ", mask is " + std::to_string(m.height) +
                          "x" + std::to_string(m.width));
  }
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::size_t MetricReport::count() const {
  return static_cast<std::size_t>(
      std::count_if(per_sample.begin(), per_sample.end(), [](const auto& v) { return v.has_value(); }));
}

double MetricReport::mean() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : per_sample) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

bool pointing_game(const RelevanceField& saliency, const Mask& mask, double tolerance_px) {
  check_same_grid(saliency, mask);
  const std::size_t best = saliency.argmax();
  const auto by = static_cast<std::ptrdiff_t>(best / saliency.width);
  const auto bx = static_cast<std::ptrdiff_t>(best % saliency.width);
  const auto r = static_cast<std::ptrdiff_t>(std::floor(tolerance_px));
  const double t2 = tolerance_px * tolerance_px;
  const auto h = static_cast<std::ptrdiff_t>(mask.height), w = static_cast<std::ptrdiff_t>(mask.width);
  for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, by - r); y <= std::min(h - 1, by + r); ++y) {
    for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, bx - r); x <= std::min(w - 1, bx + r); ++x) {
      const double d2 = static_cast<double>((y - by) * (y - by) + (x - bx) * (x - bx));
      if (d2 <= t2 && mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x))) return true;
    }
  }
  return false;
}

std::optional<double> attribution_localization(const RelevanceField& saliency, const Mask& mask) {
  check_same_grid(saliency, mask);
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < saliency.size(); ++i) {
    const double v = std::max(saliency.scores[i], 0.0);
    total += v;
    if (mask.inside[i]) inside += v;
  }
  if (!(total > 0.0)) return std::nullopt;
  return inside / total;
}

std::optional<double> sparseness(std::span<const double> v) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
  std::sort(a.begin(), a.end());
  double l1 = 0.0;
  for (double x : a) l1 += x;
  if (!(l1 > 0.0)) return std::nullopt;
  // Same value as 1 - 2 sum (a_k / l1)(d - k + 1/2) / d, folded so that mirrored
  // ranks pair up and an all-equal vector gives exactly zero.
  const std::size_t d = a.size();
  double s = 0.0;
  for (std::size_t k = 0; k < d / 2; ++k) {
    s += static_cast<double>(d - 1 - 2 * k) * (a[d - 1 - k] - a[k]);
  }
  return s / (static_cast<double>(d) * l1);
}

double class_score(const NetworkGraph& net, const Tensor& input, std::size_t class_c) {
  const ForwardResult r = forward(net, input);
  const Tensor& y = !net.nodes.empty() && net.nodes.back().kind == OpKind::kSoftmax
                        ? r.tape.value(net.nodes.back().inputs[0])
                        : r.logits;
  if (class_c >= y.size()) {
    throw RangeError("class index " + std::to_string(class_c) + " out of range (" +
                     std::to_string(y.size()) + " classes)");
  }
  return y[class_c];
}

std::optional<double> fidelity(const NetworkGraph& net, const Tensor& image,
                               const RelevanceField& saliency, std::size_t class_c,
                               const FidelityOptions& options, std::uint64_t seed) {
  if (image.rank() != 3) throw ValidationError("fidelity: image must be (C,H,W)");
  const std::size_t channels = image.dim(0), hw = image.dim(1) * image.dim(2);
  if (saliency.height != image.dim(1) || saliency.width != image.dim(2)) {
    throw ValidationError("fidelity: saliency must be at input resolution");
  }
  if (options.subset_size > hw) {
    throw ConfigError("fidelity: subset of " + std::to_string(options.subset_size) +
                      " pixels exceeds the " + std::to_string(hw) + " available");
  }
  if (options.trials < 2) throw ConfigError("fidelity: at least 2 trials are needed");
  const double base = class_score(net, image, class_c);
  std::vector<double> mass, drop;
  for (std::size_t t = 0; t < options.trials; ++t) {
    Rng rng(derive_seed(seed, {t}));
    std::vector<std::size_t> order = rng.permutation(hw);
    // Summing in index order makes equal subsets give equal masses.
    order.resize(options.subset_size);
    std::sort(order.begin(), order.end());
    Tensor x = image;
    double m = 0.0;
    for (std::size_t p : order) {
      m += saliency.scores[p];
      for (std::size_t c = 0; c < channels; ++c) x[c * hw + p] = 0.0;
    }
    mass.push_back(m);
    drop.push_back(base - class_score(net, x, class_c));
  }
  return pearson(mass, drop);
}

double stability(const AttributionFn& phi, const Tensor& image, std::size_t perturbations,
                 double sigma, std::uint64_t seed) {
  auto clamped = [&](const Tensor& x) {
    std::vector<double> a = phi(x);
    for (double& v : a) v = std::clamp(v, -1.0, 1.0);
    return a;
  };
  const std::vector<double> a0 = clamped(image);
  double worst = 0.0;
  for (std::size_t j = 0; j < perturbations; ++j) {
    Rng rng(derive_seed(seed, {j}));
    Tensor x = image;
    double dx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = sigma * rng.normal();
      x[i] += e;
      dx += e * e;
    }
    if (!(dx > 0.0)) continue;
    const std::vector<double> a = clamped(x);
    if (a.size() != a0.size()) throw ValidationError("stability: attribution size changed");
    double da = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) da += (a[i] - a0[i]) * (a[i] - a0[i]);
    worst = std::max(worst, std::sqrt(da / dx));
  }
  return worst;
}

double insertion_auc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ValidationError("curve needs at least two points with matching x and y");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0 || (i > 0 && !(x[i] > x[i - 1]))) {
      throw ValidationError("curve x must increase strictly within [0, 1]");
    }
  }
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return area;
}

Curve mean_curve(const std::vector<Curve>& curves) {
  if (curves.empty()) throw ValidationError("mean_curve: no curves");
  Curve m;
  m.fraction = curves.front().fraction;
  m.value.assign(m.fraction.size(), 0.0);
  for (const Curve& c : curves) {
    if (c.fraction != m.fraction) throw ValidationError("mean_curve: curves have different x");
    for (std::size_t i = 0; i < c.value.size(); ++i) m.value[i] += c.value[i];
  }
  for (double& v : m.value) v /= static_cast<double>(curves.size());
  return m;
}

}  // namespace ierf
