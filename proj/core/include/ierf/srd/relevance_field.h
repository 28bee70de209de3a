#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace ierf {

enum class FieldKind { kIerf, kSaliency, kRelevance };

std::string_view field_kind_name(FieldKind kind);

// Scalar score per cell of an (H, W) grid: input pixels or PFV positions.
struct RelevanceField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> scores;
  FieldKind kind = FieldKind::kRelevance;

  static RelevanceField zeros(std::size_t height, std::size_t width,
                              FieldKind kind);

  std::size_t size() const { return scores.size(); }
  double at(std::size_t h, std::size_t w) const { return scores[h * width + w]; }
  double& at(std::size_t h, std::size_t w) { return scores[h * width + w]; }
  double sum() const;
  bool all_finite() const;
  // Row-major index of the first maximum.
  std::size_t argmax() const;

  bool operator==(const RelevanceField&) const = default;
};

// Bilinear resampling (align-corners off), used to bring low-resolution maps
// to input scale before computing metrics.
RelevanceField resize_bilinear(const RelevanceField& field, std::size_t height,
                               std::size_t width);

// Min-max normalization to [0, 1]; constant fields map to all zeros.
RelevanceField normalize_min_max(const RelevanceField& field);

}  // namespace ierf
