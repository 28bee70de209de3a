#pragma once

#include <filesystem>
#include <optional>

#include "ierf/io/image.h"
#include "ierf/tensor/network.h"

namespace ierf {

inline constexpr int kModelFormatVersion = 1;

struct ModelBundle {
  NetworkGraph net;
  std::optional<Normalization> normalization;
};

// model.json + sidecar weights (little-endian float64, referenced by
// {offset, length, shape}). Errors:
//   ParseError       malformed JSON or unknown layer kind
//   ValidationError  unsupported version or inconsistent shape chain (the
//                    message names the first broken edge)
//   IntegrityError   missing weights file or a blob outside it
ModelBundle load_model_bundle(const std::filesystem::path& manifest);
NetworkGraph load_model(const std::filesystem::path& manifest);

// Writes the manifest and "<stem>.bin" next to it. Every layer records its
// output shape.
void save_model(const NetworkGraph& net, const std::filesystem::path& manifest,
                const std::optional<Normalization>& normalization = std::nullopt);

}  // namespace ierf
