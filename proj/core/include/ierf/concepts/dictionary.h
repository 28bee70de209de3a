#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ierf/concepts/lasso.h"
#include "ierf/concepts/sae.h"
#include "ierf/tensor/tape.h"

namespace ierf {

// PFVs of a (C, H, W) value as a positions x channels matrix, and back.
Eigen::MatrixXd pfv_matrix(const Tensor& t);
Tensor pfv_tensor(const Eigen::MatrixXd& x, std::size_t height, std::size_t width);

struct PfvSample {
  std::size_t image = 0;
  std::size_t position = 0;
  double weight = 0.0;  // probability the position had when drawn
  Eigen::VectorXd vector;
};

// Stacks sample vectors as rows.
Eigen::MatrixXd sample_matrix(const std::vector<PfvSample>& samples);

enum class Extractor { kKMeans, kSae };
std::string_view extractor_name(Extractor e);
std::optional<Extractor> parse_extractor(std::string_view name);

struct Exemplar {
  std::size_t image = 0;
  std::size_t position = 0;
  double cosine = 0.0;

  bool operator==(const Exemplar&) const = default;
};

struct ConceptDictionary {
  std::string layer;
  Extractor extractor = Extractor::kKMeans;
  Eigen::MatrixXd v;       // C x K, one concept per column
  Eigen::VectorXd offset;  // added to U V^T in reconstructions (SAE: -b_h)
  // SAE encoder, used to produce coefficients for SAE dictionaries.
  std::optional<SaeModel> sae;
  std::vector<std::vector<Exemplar>> exemplars;  // per concept

  std::size_t channels() const { return static_cast<std::size_t>(v.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(v.cols()); }
  // U V^T + offset for a positions x K code matrix.
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& u) const;
};

struct DictionaryOptions {
  Extractor extractor = Extractor::kKMeans;
  double k_ratio = 8.0;  // K = k_ratio * C
  std::size_t k = 0;     // overrides k_ratio when nonzero
  double sae_lambda = 1e-3;
  SaeOptions sae;
  std::size_t exemplars = 10;
};

std::size_t dictionary_size(std::size_t channels, const DictionaryOptions& o);

ConceptDictionary build_dictionary(const std::string& layer,
                                   const std::vector<PfvSample>& samples,
                                   const DictionaryOptions& options, std::uint64_t seed);

// Top-n samples per concept by cosine similarity; ties go to the earlier
// sample.
std::vector<std::vector<Exemplar>> nearest_exemplars(const Eigen::MatrixXd& v,
                                                     const std::vector<PfvSample>& samples,
                                                     std::size_t n);

// Per-position codes: Lasso for k-means dictionaries, the SAE encoder for
// SAE dictionaries. `lasso_lambda` < 0 selects the default.
CoefficientMap coefficient_map(const ConceptDictionary& dict, const Eigen::MatrixXd& x,
                               double lasso_lambda = -1.0);

// concepts_<layer>.json + concepts_<layer>.bin in `dir`.
void save_dictionary(const ConceptDictionary& dict, const std::filesystem::path& dir);
ConceptDictionary load_dictionary(const std::filesystem::path& json_path);
std::filesystem::path dictionary_path(const std::filesystem::path& dir,
                                      const std::string& layer);

// coeffs_<layer>.bin: a small header then the matrices. One entry per image.
void save_coefficients(const std::vector<CoefficientMap>& maps,
                       const std::filesystem::path& path);
std::vector<CoefficientMap> load_coefficients(const std::filesystem::path& path);

}  // namespace ierf
