#include "cli/run_config.h"

#include <set>

#include "ierf/concepts/code_attribution.h"
#include "ierf/concepts/dictionary.h"
#include "ierf/error.h"
#include "ierf/io/image.h"
#include "ierf/srd/saliency.h"

namespace ierf::cli {
namespace {

using nlohmann::json;

const std::set<std::string> kKeys = {
    "model", "dataset", "output", "layers", "class", "variants", "scales", "extractors",
    "k_ratio", "sae_lambda", "lasso_lambda", "pfv_samples", "attributor", "ig_steps", "seed",
    "top_k", "shared_k", "random_orders", "metrics", "validate", "concepts", "target", "mode",
    "fidelity_trials", "fidelity_subset", "stability_perturbations", "stability_sigma",
    "pointing_tolerance"};

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("config key '") + key + "' has the wrong type");
  }
}

void read_path(const json& j, const char* key, const std::filesystem::path& base,
               std::filesystem::path& out) {
  std::string s;
  if (!j.contains(key)) return;
  read(j, key, s);
  std::filesystem::path p(s);
  out = (p.is_relative() && !base.empty()) ? (base / p).lexically_normal() : p;
}

}  // namespace

RunConfig config_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  read_path(j, "model", base, c.model);
  read_path(j, "dataset", base, c.dataset);
  read_path(j, "output", base, c.output);
  read_path(j, "concepts", base, c.concepts);
  read(j, "layers", c.layers);
  if (j.contains("class") && !j.at("class").is_null()) {
    std::size_t k = 0;
    read(j, "class", k);
    c.class_index = k;
  }
  if (j.contains("target") && !j.at("target").is_null()) {
    std::size_t t = 0;
    read(j, "target", t);
    c.target = t;
  }
  read(j, "variants", c.variants);
  read(j, "scales", c.scales);
  read(j, "extractors", c.extractors);
  read(j, "k_ratio", c.k_ratio);
  read(j, "sae_lambda", c.sae_lambda);
  read(j, "lasso_lambda", c.lasso_lambda);
  read(j, "pfv_samples", c.pfv_samples);
  read(j, "attributor", c.attributor);
  read(j, "ig_steps", c.ig_steps);
  read(j, "seed", c.seed);
  read(j, "top_k", c.top_k);
  read(j, "shared_k", c.shared_k);
  read(j, "random_orders", c.random_orders);
  read(j, "metrics", c.metrics);
  read(j, "validate", c.validate);
  read(j, "mode", c.mode);
  read(j, "fidelity_trials", c.fidelity_trials);
  read(j, "fidelity_subset", c.fidelity_subset);
  read(j, "stability_perturbations", c.stability_perturbations);
  read(j, "stability_sigma", c.stability_sigma);
  read(j, "pointing_tolerance", c.pointing_tolerance);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

json config_to_json(const RunConfig& c) {
  json j;
  j["model"] = c.model.generic_string();
  j["dataset"] = c.dataset.generic_string();
  j["concepts"] = c.concepts.generic_string();
  j["layers"] = c.layers;
  j["class"] = c.class_index ? json(*c.class_index) : json(nullptr);
  j["target"] = c.target ? json(*c.target) : json(nullptr);
  j["variants"] = c.variants;
  j["scales"] = c.scales;
  j["extractors"] = c.extractors;
  j["k_ratio"] = c.k_ratio;
  j["sae_lambda"] = c.sae_lambda;
  j["lasso_lambda"] = c.lasso_lambda;
  j["pfv_samples"] = c.pfv_samples;
  j["attributor"] = c.attributor;
  j["ig_steps"] = c.ig_steps;
  j["seed"] = c.seed;
  j["top_k"] = c.top_k;
  j["shared_k"] = c.shared_k;
  j["random_orders"] = c.random_orders;
  j["metrics"] = c.metrics;
  j["validate"] = c.validate;
  j["mode"] = c.mode;
  j["fidelity_trials"] = c.fidelity_trials;
  j["fidelity_subset"] = c.fidelity_subset;
  j["stability_perturbations"] = c.stability_perturbations;
  j["stability_sigma"] = c.stability_sigma;
  j["pointing_tolerance"] = c.pointing_tolerance;
  return j;
}

void check_config(const RunConfig& c) {
  if (c.model.empty()) throw ConfigError("no model given (--model)");
  if (c.dataset.empty()) throw ConfigError("no dataset given (--dataset)");
  for (const std::string& v : c.variants) {
    if (!parse_mu_variant(v)) throw ConfigError("unknown variant '" + v + "'");
  }
  for (const std::string& s : c.scales) {
    if (s != "input" && s != "low" && s != "high") throw ConfigError("unknown scale '" + s + "'");
  }
  for (const std::string& e : c.extractors) {
    if (!parse_extractor(e)) throw ConfigError("unknown extractor '" + e + "'");
  }
  if (c.variants.empty() || c.scales.empty() || c.extractors.empty()) {
    throw ConfigError("variants, scales and extractors must not be empty");
  }
  if (!parse_attributor(c.attributor)) throw ConfigError("unknown attributor '" + c.attributor + "'");
  if (c.mode != "insert" && c.mode != "delete" && c.mode != "both") {
    throw ConfigError("mode must be insert, delete or both");
  }
  if (!(c.k_ratio > 0.0)) throw ConfigError("k_ratio must be positive");
  if (c.sae_lambda < 0.0) throw ConfigError("sae_lambda must be non-negative");
  if (c.ig_steps == 0) throw ConfigError("ig_steps must be positive");
  if (c.pfv_samples == 0) throw ConfigError("pfv_samples must be positive");
  if (c.top_k == 0) throw ConfigError("top_k must be positive");
  if (c.fidelity_trials < 2) throw ConfigError("fidelity_trials must be at least 2");
  if (c.stability_sigma <= 0.0) throw ConfigError("stability_sigma must be positive");
}

}  // namespace ierf::cli
