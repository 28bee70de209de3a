#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ierf::cli {

// Everything a command needs. Loaded from an optional JSON file, then
// overridden by flags.
struct RunConfig {
  std::filesystem::path model;
  std::filesystem::path dataset;
  std::filesystem::path output = "ierf_out";
  // Concept layers in network order. Empty: every spatial PFV layer.
  std::vector<std::string> layers;
  // Unset: predicted class (attribute, evaluate) or every class (graph,
  // insertion-deletion).
  std::optional<std::size_t> class_index;
  std::vector<std::string> variants{"clamped"};
  std::vector<std::string> scales{"input"};
  std::vector<std::string> extractors{"kmeans"};
  double k_ratio = 8.0;
  double sae_lambda = 1e-3;
  double lasso_lambda = -1.0;  // < 0: per-layer default
  std::size_t pfv_samples = 400;
  std::string attributor = "integrated-gradients";
  std::size_t ig_steps = 32;
  std::uint64_t seed = 0;
  std::size_t top_k = 5;
  std::size_t shared_k = 3;
  std::size_t random_orders = 20;
  bool metrics = false;
  bool validate = false;
  // Output directory of an earlier `concepts` run to reuse.
  std::filesystem::path concepts;
  std::optional<std::size_t> target;
  std::string mode = "both";  // insertion-deletion: insert | delete | both
  std::size_t fidelity_trials = 100;
  std::size_t fidelity_subset = 200;
  std::size_t stability_perturbations = 10;
  double stability_sigma = 0.1;
  double pointing_tolerance = 15.0;
};

// Relative paths resolve against `base`. Unknown keys raise ConfigError,
// malformed values ParseError.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

// The reproducibility record. The output directory is left out so reruns
// into different directories produce identical files.
nlohmann::json config_to_json(const RunConfig& c);

// Checks option values that do not need the model (ConfigError).
void check_config(const RunConfig& c);

}  // namespace ierf::cli
