#pragma once

#include <cstdint>
#include <filesystem>

#include "ierf/io/image.h"
#include "ierf/srd/relevance_field.h"

namespace ierf {

struct HeatmapScale {
  double min = 0.0;
  double max = 0.0;
  bool constant = false;
};

// pixel = floor((v - min) / (max - min) * 255), with the maximum mapped to
// 255. A constant field maps to zeros and warns. Throws InputError on
// non-finite fields.
GrayImage heatmap_pixels(const RelevanceField& field, HeatmapScale* scale = nullptr);

// Writes `path` (P5) and a JSON sidecar next to it: "x.heat.pgm" gets
// "x.heat.json" holding {min, max, constant, height, width, kind}.
HeatmapScale save_heatmap(const RelevanceField& field, const std::filesystem::path& path);

std::filesystem::path heatmap_sidecar_path(const std::filesystem::path& pgm);

}  // namespace ierf
