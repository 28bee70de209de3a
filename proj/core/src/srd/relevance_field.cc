#include "ierf/srd/relevance_field.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ierf {

std::string_view field_kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::kIerf: return "iERF";
    case FieldKind::kSaliency: return "saliency";
    case FieldKind::kRelevance: return "relevance";
  }
  return "unknown";
}

RelevanceField RelevanceField::zeros(std::size_t height, std::size_t width,
                                     FieldKind kind) {
  return {height, width, std::vector<double>(height * width, 0.0), kind};
}

double RelevanceField::sum() const {
  return std::accumulate(scores.begin(), scores.end(), 0.0);
}

bool RelevanceField::all_finite() const {
  return std::all_of(scores.begin(), scores.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t RelevanceField::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
}

RelevanceField resize_bilinear(const RelevanceField& field, std::size_t height,
                               std::size_t width) {
  if (field.height == height && field.width == width) return field;
  RelevanceField out = RelevanceField::zeros(height, width, field.kind);
  const double sy = static_cast<double>(field.height) / static_cast<double>(height);
  const double sx = static_cast<double>(field.width) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(field.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, field.height - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(field.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, field.width - 1);
      const double tx = fx - static_cast<double>(x0);
      out.at(y, x) = (1 - ty) * ((1 - tx) * field.at(y0, x0) + tx * field.at(y0, x1)) +
                     ty * ((1 - tx) * field.at(y1, x0) + tx * field.at(y1, x1));
    }
  }
  return out;
}

RelevanceField normalize_min_max(const RelevanceField& field) {
  RelevanceField out = field;
  if (field.scores.empty()) return out;
  const auto [lo, hi] = std::minmax_element(field.scores.begin(), field.scores.end());
  const double range = *hi - *lo;
  for (double& v : out.scores) v = range > 0 ? (v - *lo) / range : 0.0;
  return out;
}

}  // namespace ierf
