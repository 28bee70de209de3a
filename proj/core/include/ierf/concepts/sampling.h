#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ierf/concepts/dictionary.h"
#include "ierf/tensor/network.h"

namespace ierf {

// Probabilities proportional to max(c, 0). All-zero input falls back to the
// uniform distribution (and warns when `warn_context` is non-empty).
std::vector<double> sampling_weights(std::span<const double> contributions,
                                     std::string_view warn_context = "");

// Relevance-weighted PFV sampling at `layer_value`. Contributions come from
// the Grad-CAM style class contribution for each image's predicted class.
// Images are visited in order; each pass draws one PFV per image until
// `n_samples` are collected. Every draw uses a stream derived from
// (seed, image, pass).
std::vector<PfvSample> sample_pfvs(const NetworkGraph& net, const std::vector<Tensor>& images,
                                   int layer_value, std::size_t n_samples, std::uint64_t seed);

}  // namespace ierf
