#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ierf/io/image.h"

namespace ierf {

struct SampleRecord {
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::size_t label = 0;
};

// JSON list of {"image", "mask"?, "label"}; paths are relative to the
// manifest. Checks labels against `num_classes` and mask geometry against
// the image (ValidationError). Image pixels are not decoded here.
std::vector<SampleRecord> load_dataset(const std::filesystem::path& manifest,
                                       std::size_t num_classes);

void save_dataset(const std::vector<SampleRecord>& records,
                  const std::filesystem::path& manifest);

struct Sample {
  std::size_t id = 0;
  std::string name;  // image file stem, used to name artifacts
  Tensor image;
  std::optional<Mask> mask;
  std::size_t label = 0;
};

Sample load_sample(const SampleRecord& record, std::size_t id,
                   const std::optional<Normalization>& norm);

}  // namespace ierf
