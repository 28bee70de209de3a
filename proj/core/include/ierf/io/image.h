#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "ierf/tensor/tensor.h"

namespace ierf {

// Per-channel (x - mean) / std applied after scaling bytes to [0, 1].
struct Normalization {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const Normalization&) const = default;
};

// Binary PGM (P5) or PPM (P6), maxval 255. Header comments are allowed.
// Returns (C, H, W) in [0, 1], normalized when `norm` is given. Malformed
// input raises ParseError with the byte offset.
Tensor decode_pnm(std::string_view bytes);
Tensor load_image(const std::filesystem::path& path,
                  const std::optional<Normalization>& norm = std::nullopt);
void apply_normalization(Tensor& image, const Normalization& norm);

// Writes a 1- or 3-channel tensor in [0, 1] as P5/P6, rounding to the
// nearest byte and clamping.
std::string encode_pnm(const Tensor& image);
void save_image(const Tensor& image, const std::filesystem::path& path);

// 8-bit grayscale image as raw bytes plus geometry.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
};
void save_pgm(const GrayImage& image, const std::filesystem::path& path);

// Segmentation mask: nonzero bytes mark the object. (H, W) row-major.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> inside;

  bool at(std::size_t h, std::size_t w) const { return inside[h * width + w] != 0; }
};
Mask load_mask(const std::filesystem::path& path);

// Reads the whole file; InputError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);
// Creates parent directories and truncates existing files.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ierf
