#include "ierf/io/heatmap.h"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ierf/error.h"
#include "ierf/log.h"

namespace ierf {

GrayImage heatmap_pixels(const RelevanceField& field, HeatmapScale* scale) {
  if (!field.all_finite()) throw InputError("heatmap: field has non-finite values");
  GrayImage img{field.height, field.width, std::vector<std::uint8_t>(field.size(), 0)};
  HeatmapScale s;
  if (!field.scores.empty()) {
    const auto [lo, hi] = std::minmax_element(field.scores.begin(), field.scores.end());
    s.min = *lo;
    s.max = *hi;
  }
  s.constant = !(s.max > s.min);
  if (s.constant) {
    warn("heatmap: constant field, writing all-zero image");
  } else {
    const double range = s.max - s.min;
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double v = std::floor((field.scores[i] - s.min) / range * 255.0);
      img.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  if (scale) *scale = s;
  return img;
}

std::filesystem::path heatmap_sidecar_path(const std::filesystem::path& pgm) {
  std::filesystem::path p = pgm;
  return p.replace_extension(".json");
}

HeatmapScale save_heatmap(const RelevanceField& field, const std::filesystem::path& path) {
  HeatmapScale s;
  const GrayImage img = heatmap_pixels(field, &s);
  save_pgm(img, path);
  nlohmann::json j = {{"min", s.min},
                      {"max", s.max},
                      {"constant", s.constant},
                      {"height", field.height},
                      {"width", field.width},
                      {"kind", std::string(field_kind_name(field.kind))}};
  write_file(heatmap_sidecar_path(path), j.dump(2) + "\n");
  return s;
}

}  // namespace ierf
