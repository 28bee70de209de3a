#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ierf/io/image.h"
#include "ierf/srd/relevance_field.h"
#include "ierf/tensor/network.h"

namespace ierf {

// One metric over a set of samples. Undefined samples (zero mass, zero
// variance) are recorded as nullopt and excluded from the mean.
struct MetricReport {
  std::string metric;
  std::vector<std::optional<double>> per_sample;

  void add(std::optional<double> v) { per_sample.push_back(v); }
  std::size_t count() const;
  std::size_t skipped() const { return per_sample.size() - count(); }
  double mean() const;  // NaN when every sample was skipped
};

// Hit when the first (row-major) saliency maximum lies within Euclidean
// distance `tolerance_px` of a mask pixel.
bool pointing_game(const RelevanceField& saliency, const Mask& mask, double tolerance_px = 15.0);

// Positive saliency inside the mask over total positive saliency.
std::optional<double> attribution_localization(const RelevanceField& saliency, const Mask& mask);

// Gini index of |v|: 1 - 2 sum_k (v_(k) / |v|_1) (d - k + 0.5) / d, ascending.
std::optional<double> sparseness(std::span<const double> v);

// Pre-softmax score of class c.
double class_score(const NetworkGraph& net, const Tensor& input, std::size_t class_c);

struct FidelityOptions {
  std::size_t trials = 100;
  std::size_t subset_size = 200;  // pixels, all channels zeroed together
};

// Pearson correlation between the saliency mass of random pixel subsets and
// the class-score drop when those pixels are set to 0.
std::optional<double> fidelity(const NetworkGraph& net, const Tensor& image,
                               const RelevanceField& saliency, std::size_t class_c,
                               const FidelityOptions& options, std::uint64_t seed);

using AttributionFn = std::function<std::vector<double>(const Tensor&)>;

// max_j ||clamp(phi(x)) - clamp(phi(x_j))|| / ||x - x_j|| over Gaussian
// perturbations x_j = x + N(0, sigma^2), clamping to [-1, 1].
double stability(const AttributionFn& phi, const Tensor& image, std::size_t perturbations,
                 double sigma, std::uint64_t seed);

// Trapezoidal area. x must be strictly increasing within [0, 1].
double insertion_auc(std::span<const double> x, std::span<const double> y);

// A stepwise insertion or deletion curve.
struct Curve {
  std::vector<double> fraction;  // k / n for k = 0..n
  std::vector<double> value;
  // False when the normalizer was ~0 and values were left raw.
  bool normalized = true;
  double auc() const { return insertion_auc(fraction, value); }
};

// Pointwise mean of curves with equal x.
Curve mean_curve(const std::vector<Curve>& curves);

}  // namespace ierf
