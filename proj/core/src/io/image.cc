#include "ierf/io/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ierf/error.h"

namespace ierf {
namespace {

struct PnmHeader {
  std::size_t channels = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : b_(bytes) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("PNM: " + why + " at byte offset " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size() || !std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      fail(std::string("expected ") + what);
    }
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (1u << 24)) fail(std::string(what) + " too large");
      ++pos_;
    }
    return v;
  }

  PnmHeader parse() {
    PnmHeader h;
    if (b_.size() < 2 || b_[0] != 'P' || (b_[1] != '5' && b_[1] != '6')) {
      fail("expected magic P5 or P6");
    }
    h.channels = b_[1] == '5' ? 1 : 3;
    pos_ = 2;
    h.width = number("width");
    h.height = number("height");
    const std::size_t maxval = number("maxval");
    if (h.width == 0 || h.height == 0) fail("empty image");
    if (maxval != 255) fail("maxval must be 255, got " + std::to_string(maxval));
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      fail("expected single whitespace before pixel data");
    }
    ++pos_;
    h.data_offset = pos_;
    const std::size_t need = h.channels * h.width * h.height;
    if (b_.size() - pos_ < need) {
      pos_ = b_.size();
      fail("truncated pixel data (need " + std::to_string(need) + " bytes, have " +
           std::to_string(b_.size() - h.data_offset) + ")");
    }
    return h;
  }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

std::uint8_t to_byte(double v) {
  const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

Tensor decode_pnm(std::string_view bytes) {
  const PnmHeader h = HeaderReader(bytes).parse();
  Tensor t({h.channels, h.height, h.width});
  const std::size_t hw = h.height * h.width;
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < h.channels; ++c) {
      const auto byte = static_cast<unsigned char>(bytes[h.data_offset + p * h.channels + c]);
      t[c * hw + p] = static_cast<double>(byte) / 255.0;
    }
  }
  return t;
}

void apply_normalization(Tensor& image, const Normalization& norm) {
  const std::size_t channels = image.dim(0);
  if (norm.mean.size() != channels || norm.std.size() != channels) {
    throw ValidationError("normalization has " + std::to_string(norm.mean.size()) +
                          " channels, image has " + std::to_string(channels));
  }
  const std::size_t hw = image.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    if (!(norm.std[c] > 0.0)) throw ValidationError("normalization std must be positive");
    for (std::size_t p = 0; p < hw; ++p) {
      image[c * hw + p] = (image[c * hw + p] - norm.mean[c]) / norm.std[c];
    }
  }
}

Tensor load_image(const std::filesystem::path& path,
                  const std::optional<Normalization>& norm) {
  Tensor t;
  try {
    t = decode_pnm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (norm) apply_normalization(t, *norm);
  return t;
}

std::string encode_pnm(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ValidationError("image must be (1|3, H, W), got " + shape_string(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2), hw = h * w;
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " +
                    std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + c * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t k = 0; k < c; ++k) {
      out[header + p * c + k] = static_cast<char>(to_byte(image[k * hw + p]));
    }
  }
  return out;
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
  write_file(path, encode_pnm(image));
}

void save_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  write_file(path, out);
}

Mask load_mask(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  PnmHeader h;
  try {
    h = HeaderReader(bytes).parse();
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (h.channels != 1) throw ValidationError(path.string() + ": mask must be a P5 PGM");
  Mask m{h.height, h.width, {}};
  m.inside.resize(h.height * h.width);
  for (std::size_t i = 0; i < m.inside.size(); ++i) {
    m.inside[i] = bytes[h.data_offset + i] != 0 ? 1 : 0;
  }
  return m;
}

}  // namespace ierf
