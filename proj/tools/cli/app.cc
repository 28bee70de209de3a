#include "cli/app.h"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli/commands.h"
#include "cli/run_config.h"
#include "ierf/error.h"
#include "ierf/log.h"

namespace ierf::cli {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kRange:
      return 1;
    case ErrorKind::kNumerical:
      return 3;
    default:
      return 2;
  }
}

namespace {

int report(const std::string& command, std::string_view kind, int code, const std::string& message) {
  const nlohmann::json line{{"command", command}, {"error", kind}, {"exit", code}, {"message", message}};
  std::fprintf(stderr, "%s\n", line.dump().c_str());
  return code;
}

// Flag values; each is applied over the config file only when given.
struct Flags {
  std::string config;
  std::string model, dataset, output, concepts, attributor, mode;
  std::vector<std::string> layers, variants, scales, extractors;
  std::size_t class_index = 0, target = 0, pfv_samples = 0, ig_steps = 0, top_k = 0, shared_k = 0,
              random_orders = 0, fidelity_trials = 0, fidelity_subset = 0, stability_perturbations = 0;
  double k_ratio = 0, sae_lambda = 0, lasso_lambda = 0, stability_sigma = 0, pointing_tolerance = 0;
  std::uint64_t seed = 0;
  bool metrics = false, validate = false;
};

using Apply = std::function<void(RunConfig&)>;

void add_options(CLI::App* sub, Flags& f, std::vector<std::pair<CLI::Option*, Apply>>& applies) {
  auto opt = [&](CLI::Option* o, Apply a) { applies.emplace_back(o, std::move(a)); };
  sub->add_option("--config", f.config, "JSON run configuration; flags override it");
  opt(sub->add_option("--model", f.model, "model manifest (model.json)"),
      [&](RunConfig& c) { c.model = f.model; });
  opt(sub->add_option("--dataset", f.dataset, "dataset manifest"),
      [&](RunConfig& c) { c.dataset = f.dataset; });
  opt(sub->add_option("--out", f.output, "output directory"), [&](RunConfig& c) { c.output = f.output; });
  opt(sub->add_option("--layers", f.layers, "concept layers in network order")->delimiter(','),
      [&](RunConfig& c) { c.layers = f.layers; });
  opt(sub->add_option("--class", f.class_index, "target class index"),
      [&](RunConfig& c) { c.class_index = f.class_index; });
  opt(sub->add_option("--variant", f.variants, "mu variants: raw, mean, clamped")->delimiter(','),
      [&](RunConfig& c) { c.variants = f.variants; });
  opt(sub->add_option("--scale", f.scales, "saliency scales: input, high, low")->delimiter(','),
      [&](RunConfig& c) { c.scales = f.scales; });
  opt(sub->add_option("--extractor", f.extractors, "kmeans, sae")->delimiter(','),
      [&](RunConfig& c) { c.extractors = f.extractors; });
  opt(sub->add_option("--k-ratio", f.k_ratio, "dictionary size over channel count"),
      [&](RunConfig& c) { c.k_ratio = f.k_ratio; });
  opt(sub->add_option("--lambda", f.sae_lambda, "SAE sparsity weight"),
      [&](RunConfig& c) { c.sae_lambda = f.sae_lambda; });
  opt(sub->add_option("--lasso-lambda", f.lasso_lambda, "Lasso weight (negative: per-layer default)"),
      [&](RunConfig& c) { c.lasso_lambda = f.lasso_lambda; });
  opt(sub->add_option("--samples", f.pfv_samples, "PFV samples per layer"),
      [&](RunConfig& c) { c.pfv_samples = f.pfv_samples; });
  opt(sub->add_option("--attributor", f.attributor, "integrated-gradients, grad-x-input, occlusion"),
      [&](RunConfig& c) { c.attributor = f.attributor; });
  opt(sub->add_option("--ig-steps", f.ig_steps, "integrated-gradients steps"),
      [&](RunConfig& c) { c.ig_steps = f.ig_steps; });
  opt(sub->add_option("--seed", f.seed, "root seed"), [&](RunConfig& c) { c.seed = f.seed; });
  opt(sub->add_option("--top-k", f.top_k, "graph nodes per layer"), [&](RunConfig& c) { c.top_k = f.top_k; });
  opt(sub->add_option("--shared-k", f.shared_k, "shared concepts per layer"),
      [&](RunConfig& c) { c.shared_k = f.shared_k; });
  opt(sub->add_option("--random-orders", f.random_orders, "random rankings for curve baselines"),
      [&](RunConfig& c) { c.random_orders = f.random_orders; });
  opt(sub->add_flag("--metrics", f.metrics, "also write metrics.json"),
      [&](RunConfig& c) { c.metrics = f.metrics; });
  opt(sub->add_flag("--validate", f.validate, "write insertion/deletion validation curves"),
      [&](RunConfig& c) { c.validate = f.validate; });
  opt(sub->add_option("--concepts", f.concepts, "reuse the output of a concepts run"),
      [&](RunConfig& c) { c.concepts = f.concepts; });
  opt(sub->add_option("--target", f.target, "target concept at the child layer"),
      [&](RunConfig& c) { c.target = f.target; });
  opt(sub->add_option("--mode", f.mode, "insert, delete or both"), [&](RunConfig& c) { c.mode = f.mode; });
  opt(sub->add_option("--fidelity-trials", f.fidelity_trials, "random subsets per image"),
      [&](RunConfig& c) { c.fidelity_trials = f.fidelity_trials; });
  opt(sub->add_option("--fidelity-subset", f.fidelity_subset, "pixels per subset"),
      [&](RunConfig& c) { c.fidelity_subset = f.fidelity_subset; });
  opt(sub->add_option("--stability-perturbations", f.stability_perturbations, "noisy copies per image"),
      [&](RunConfig& c) { c.stability_perturbations = f.stability_perturbations; });
  opt(sub->add_option("--stability-sigma", f.stability_sigma, "noise standard deviation"),
      [&](RunConfig& c) { c.stability_sigma = f.stability_sigma; });
  opt(sub->add_option("--pointing-tolerance", f.pointing_tolerance, "pointing-game tolerance in pixels"),
      [&](RunConfig& c) { c.pointing_tolerance = f.pointing_tolerance; });
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Attribution, concept extraction and concept graphs for CNNs", "ierf"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::function<void(const RunConfig&)>>> commands = {
      {"attribute", cmd_attribute},
      {"concepts", cmd_concepts},
      {"graph", cmd_graph},
      {"evaluate", cmd_evaluate},
      {"insertion-deletion", cmd_insertion_deletion},
  };
  const char* help[] = {"saliency maps per image", "concept dictionaries and codes",
                        "interlayer concept graph", "saliency metrics",
                        "concept insertion/deletion curves"};
  std::vector<std::vector<std::pair<CLI::Option*, Apply>>> applies(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    subs.push_back(app.add_subcommand(commands[i].first, help[i]));
    add_options(subs.back(), flags, applies[i]);
  }

  std::string command = "ierf";
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    for (CLI::App* s : subs) {
      if (s->parsed()) command = s->get_name();
    }
    return report(command, "usage", 1, e.what());
  }

  // Repeated warnings are printed once.
  std::mutex warn_mutex;
  std::set<std::string, std::less<>> seen;
  ScopedWarningCapture capture([&](std::string_view msg) {
    std::lock_guard<std::mutex> lock(warn_mutex);
    if (!seen.emplace(msg).second) return;
    std::fprintf(stderr, "warning: %.*s\n", static_cast<int>(msg.size()), msg.data());
  });
  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      command = commands[i].first;
      RunConfig config = flags.config.empty() ? RunConfig{} : load_config(flags.config);
      for (auto& [option, apply] : applies[i]) {
        if (option->count() > 0) apply(config);
      }
      commands[i].second(config);
    }
  } catch (const Error& e) {
    return report(command, error_kind_name(e.kind()), exit_code(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(command, "io", 2, e.what());
  } catch (const std::exception& e) {
    return report(command, "internal", 2, e.what());
  }
  return 0;
}

}  // namespace ierf::cli
