#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ierf/srd/relevance_field.h"
#include "ierf/srd/sharing_ratio.h"

namespace ierf {

// iERFs of every PFV of one layer, one row per position, expressed over the
// grid of `base_layer` (the input by default).
struct IerfMatrix {
  std::size_t rows = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * height * width, height * width};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * height * width, height * width};
  }
  RelevanceField field(std::size_t i) const;
};

// Forward pass: iERF(v^k_j) = sum_i mu_{i->j} iERF(v^l_i), with unit
// indicator fields at `base_layer`.
IerfMatrix propagate_ierf_forward(const SharingRatioTable& table,
                                  std::size_t up_to_layer,
                                  std::size_t base_layer = 0);

std::vector<RelevanceField> propagate_ierf_forward(const Tape& tape,
                                                   int up_to_value);

// sum_i weights[i] * iERF_i.
RelevanceField aggregate_ierfs(const IerfMatrix& ierfs,
                               std::span<const double> weights);

// Backward pass: R^l_i = sum_{j in PF_i} mu_{i->j} R^k_j, seeded at the
// encoder output, stopped at `stop_layer`. `stop_layer` must be a cut layer.
RelevanceField propagate_relevance_backward(const SharingRatioTable& table,
                                            std::span<const double> seed,
                                            std::size_t stop_layer = 0);

// Same, seeded at an intermediate PFV layer `top_layer`.
RelevanceField propagate_relevance_backward(const SharingRatioTable& table,
                                            std::size_t top_layer,
                                            std::span<const double> seed,
                                            std::size_t stop_layer = 0);

RelevanceField propagate_relevance_backward(const Tape& tape,
                                            std::span<const double> seed);

}  // namespace ierf
