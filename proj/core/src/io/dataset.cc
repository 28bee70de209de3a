#include "ierf/io/dataset.h"

#include <nlohmann/json.hpp>

#include "ierf/error.h"

namespace ierf {
namespace {

using nlohmann::json;

// (height, width) of a PNM image.
std::pair<std::size_t, std::size_t> pnm_size(const std::filesystem::path& path) {
  const Tensor t = decode_pnm(read_file(path));
  return {t.dim(1), t.dim(2)};
}

}  // namespace

std::vector<SampleRecord> load_dataset(const std::filesystem::path& manifest,
                                       std::size_t num_classes) {
  json j;
  try {
    j = json::parse(read_file(manifest));
  } catch (const json::parse_error& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ParseError(manifest.string() + ": expected a JSON list");
  const std::filesystem::path base = manifest.parent_path();
  std::vector<SampleRecord> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string where = manifest.string() + " entry " + std::to_string(i);
    SampleRecord r;
    try {
      r.image = base / e.at("image").get<std::string>();
      r.label = e.at("label").get<std::size_t>();
      if (e.contains("mask") && !e["mask"].is_null()) {
        r.mask = base / e["mask"].get<std::string>();
      }
    } catch (const json::exception& ex) {
      throw ParseError(where + ": " + ex.what());
    }
    if (r.label >= num_classes) {
      throw ValidationError(where + ": label " + std::to_string(r.label) +
                            " >= number of classes " + std::to_string(num_classes));
    }
    if (r.mask) {
      const auto img = pnm_size(r.image);
      const Mask m = load_mask(*r.mask);
      if (m.height != img.first || m.width != img.second) {
        throw ValidationError(where + ": mask is " + std::to_string(m.height) + "x" +
                              std::to_string(m.width) + " but image is " +
                              std::to_string(img.first) + "x" + std::to_string(img.second));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void save_dataset(const std::vector<SampleRecord>& records,
                  const std::filesystem::path& manifest) {
  const std::filesystem::path base = manifest.parent_path();
  json j = json::array();
  for (const SampleRecord& r : records) {
    json e = {{"image", std::filesystem::relative(r.image, base).generic_string()},
              {"label", r.label}};
    if (r.mask) e["mask"] = std::filesystem::relative(*r.mask, base).generic_string();
    j.push_back(std::move(e));
  }
  write_file(manifest, j.dump(2) + "\n");
}

Sample load_sample(const SampleRecord& record, std::size_t id,
                   const std::optional<Normalization>& norm) {
  Sample s;
  s.id = id;
  s.name = record.image.stem().string();
  s.image = load_image(record.image, norm);
  if (record.mask) s.mask = load_mask(*record.mask);
  s.label = record.label;
  return s;
}

}  // namespace ierf
