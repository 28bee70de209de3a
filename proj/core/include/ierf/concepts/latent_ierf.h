#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "ierf/concepts/sae.h"
#include "ierf/metrics/metrics.h"
#include "ierf/srd/relevance_field.h"
#include "ierf/tensor/network.h"

namespace ierf {

enum class LatentMethod { kGradTimesInput, kSrd };

std::string_view latent_method_name(LatentMethod m);
std::optional<LatentMethod> parse_latent_method(std::string_view name);

struct LatentIerf {
  RelevanceField field;  // input resolution
  double activation = 0.0;  // z_k(I) = sum_p z_k(v_p)
  bool active = false;      // false: the latent never fires on this image
};

// Input-space attribution of SAE latent k at `layer_value`. Gradient x input
// sums grad * x over input channels; SRD seeds each position with z_k(v_p) and
// propagates relevance to the input.
LatentIerf latent_ierf(const NetworkGraph& net, const SaeModel& sae, const Tensor& image,
                       int layer_value, std::size_t k,
                       LatentMethod method = LatentMethod::kGradTimesInput);

// z_k(I) = sum_p z_k(v_p) at `layer_value`.
double latent_activation(const NetworkGraph& net, const SaeModel& sae, const Tensor& image,
                         int layer_value, std::size_t k);

// Square patches tile the input row-major; edge patches may be smaller.
std::size_t patch_count(std::size_t height, std::size_t width, std::size_t patch);

// Patch ids by descending total field score, ties to the lower id.
std::vector<std::size_t> patch_ranking(const RelevanceField& field, std::size_t patch);

// Pastes the image's patches in `order` onto a zero canvas and tracks
// z_k(I_t) / z_k(I). `order` must list every patch once.
Curve latent_insertion_curve(const NetworkGraph& net, const SaeModel& sae, const Tensor& image,
                             int layer_value, std::size_t k, std::size_t patch,
                             const std::vector<std::size_t>& order);

}  // namespace ierf
