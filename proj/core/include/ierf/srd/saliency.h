#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ierf/srd/relevance_field.h"
#include "ierf/srd/sharing_ratio.h"
#include "ierf/tensor/tape.h"

namespace ierf {

// Grad-CAM style contribution of every PFV of a layer to every class:
//   Phi_i^c = sum_k alpha_k^c A_i^k,  alpha_k^c = mean_i dy^c / dA_i^k.
struct ClassContributions {
  std::size_t positions = 0;
  std::size_t classes = 0;
  std::vector<double> values;  // positions x classes, row-major

  double at(std::size_t i, std::size_t c) const { return values[i * classes + c]; }
  std::vector<double> column(std::size_t c) const;
};

std::vector<double> class_contribution(const Tape& tape, int layer_value,
                                       std::size_t class_c);
ClassContributions class_contributions(const Tape& tape, int layer_value);

enum class MuVariant { kRaw, kMean, kClamped };

std::string_view mu_variant_name(MuVariant v);
std::optional<MuVariant> parse_mu_variant(std::string_view name);

// Final-layer sharing ratios mu^{L->O}_{i->c}:
//   raw:     Phi_i^c
//   mean:    Phi_i^c - mean_c' Phi_i^c'
//   clamped: max(mean, 0)
// Not renormalized. With a single class, mean and clamped are all zeros.
std::vector<double> refine_mu(const ClassContributions& phi,
                              std::size_t class_c, MuVariant variant);

struct SaliencyOptions {
  MuVariant variant = MuVariant::kClamped;
  // PFV layer (index into pfv_layers) at which propagation stops; 0 is the
  // input. Use the encoder layer for the low-resolution map.
  std::size_t stop_layer = 0;
  // Aggregate forward iERFs instead of running the backward pass; both give
  // the same map.
  bool use_forward = false;
};

// phi_c = sum_i mu^{L->O}_{i->c} iERF(v^L_i).
RelevanceField saliency(const NetworkGraph& net, const Tensor& input,
                        std::size_t class_c, const SaliencyOptions& options = {});

// Same, reusing an existing tape and sharing table.
RelevanceField saliency(const Tape& tape, const SharingRatioTable& table,
                        std::size_t class_c, const SaliencyOptions& options);

enum class ChannelAggregation { kSum, kAbs, kPos };

// Collapses per-channel relevance into one PFV-level score:
// sum r_c, sum |r_c| or sum max(r_c, 0).
double aggregate_channel_relevance(std::span<const double> r,
                                   ChannelAggregation mode);

}  // namespace ierf
