#include "ierf/concepts/sampling.h"

#include <algorithm>

#include "ierf/error.h"
#include "ierf/log.h"
#include "ierf/srd/saliency.h"
#include "ierf/util/random.h"

namespace ierf {

std::vector<double> sampling_weights(std::span<const double> contributions,
                                     std::string_view warn_context) {
  std::vector<double> w(contributions.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::max(contributions[i], 0.0));
  if (!(total > 0.0)) {
    if (!warn_context.empty()) {
      warn(std::string(warn_context) + ": no positive contributions, sampling uniformly");
    }
    std::fill(w.begin(), w.end(), w.empty() ? 0.0 : 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<PfvSample> sample_pfvs(const NetworkGraph& net, const std::vector<Tensor>& images,
                                   int layer_value, std::size_t n_samples, std::uint64_t seed) {
  if (images.empty()) throw ValidationError("sample_pfvs: no images");
  struct Cached {
    Eigen::MatrixXd pfvs;
    std::vector<double> weights;
  };
  std::vector<Cached> cache;
  cache.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ForwardResult r = forward(net, images[i]);
    std::size_t pred = 0;
    for (std::size_t c = 1; c < r.logits.size(); ++c) {
      if (r.logits[c] > r.logits[pred]) pred = c;
    }
    const std::vector<double> phi = class_contribution(r.tape, layer_value, pred);
    cache.push_back({pfv_matrix(r.tape.value(layer_value)),
                     sampling_weights(phi, "sample_pfvs: image " + std::to_string(i))});
  }

  std::vector<PfvSample> out;
  out.reserve(n_samples);
  for (std::uint64_t pass = 0; out.size() < n_samples; ++pass) {
    for (std::size_t i = 0; i < images.size() && out.size() < n_samples; ++i) {
      Rng rng(derive_seed(seed, {i, pass}));
      const auto& w = cache[i].weights;
      double u = rng.uniform();
      std::size_t pick = w.size() - 1;
      for (std::size_t p = 0; p < w.size(); ++p) {
        if (u < w[p]) {
          pick = p;
          break;
        }
        u -= w[p];
      }
      // Guard against landing on a zero-probability tail after rounding.
      while (w[pick] == 0.0 && pick > 0) --pick;
      out.push_back({i, pick, w[pick], cache[i].pfvs.row(static_cast<Eigen::Index>(pick)).transpose()});
    }
  }
  return out;
}

}  // namespace ierf
