#include "cli/commands.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ierf/concepts/code_attribution.h"
#include "ierf/concepts/dictionary.h"
#include "ierf/concepts/sampling.h"
#include "ierf/error.h"
#include "ierf/icat/alignment.h"
#include "ierf/icat/graph.h"
#include "ierf/io/dataset.h"
#include "ierf/io/heatmap.h"
#include "ierf/io/model_io.h"
#include "ierf/log.h"
#include "ierf/metrics/metrics.h"
#include "ierf/srd/saliency.h"
#include "ierf/srd/sharing_ratio.h"
#include "ierf/tensor/tape.h"
#include "ierf/util/parallel.h"
#include "ierf/util/random.h"

namespace ierf::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream ids under the root seed.
enum Stage : std::uint64_t {
  kSampling = 1,
  kDictionary = 2,
  kValidation = 3,
  kFidelity = 4,
  kStability = 5,
};

struct Workspace {
  ModelBundle model;
  std::vector<Sample> samples;
  std::size_t classes = 0;

  const NetworkGraph& net() const { return model.net; }
  std::string class_name(std::size_t c) const {
    return c < model.net.class_names.size() ? model.net.class_names[c] : std::to_string(c);
  }
};

struct ConceptLayer {
  LayerConcepts data;  // codes for every image of the dataset
  ReconstructionReport report;
};

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

Workspace open_workspace(const RunConfig& c) {
  check_config(c);
  Workspace ws;
  ws.model = load_model_bundle(c.model);
  const std::vector<Shape> shapes = ws.model.net.infer_shapes();
  ws.classes = shapes[logit_value(ws.model.net)].at(0);
  const std::vector<SampleRecord> records = load_dataset(c.dataset, ws.classes);
  if (records.empty()) throw ValidationError("dataset '" + c.dataset.string() + "' is empty");
  ws.samples.resize(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    ws.samples[i] = load_sample(records[i], i, ws.model.normalization);
  });
  std::set<std::string> names;
  for (const Sample& s : ws.samples) {
    if (s.image.shape() != ws.model.net.input_shape) {
      throw ValidationError("image '" + s.name + "' has shape " + shape_string(s.image.shape()) +
                            ", model expects " + shape_string(ws.model.net.input_shape));
    }
    if (!names.insert(s.name).second) throw ValidationError("two images share the name '" + s.name + "'");
  }
  if (c.class_index && *c.class_index >= ws.classes) {
    throw RangeError("class " + std::to_string(*c.class_index) + " out of range (" +
                     std::to_string(ws.classes) + " classes)");
  }
  return ws;
}

void begin_output(const RunConfig& c, const std::string& command) {
  fs::create_directories(c.output);
  write_json(c.output / "run_config.json", json{{"command", command}, {"config", config_to_json(c)}});
}

AttributionOptions attribution_options(const RunConfig& c, std::string context) {
  AttributionOptions o;
  o.attributor = *parse_attributor(c.attributor);
  o.ig_steps = c.ig_steps;
  o.context = std::move(context);
  return o;
}

std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

std::size_t stop_layer(const SharingRatioTable& table, const std::string& scale) {
  if (scale == "input") return 0;
  if (scale == "low") return table.encoder_layer();
  for (std::size_t l = table.encoder_layer(); l-- > 1;) {
    if (is_cut_layer(table, l)) return l;
  }
  throw ConfigError("scale 'high' needs an intermediate cut layer, the network has none");
}

RelevanceField at_input_size(RelevanceField f, const Shape& input) {
  if (f.height == input[1] && f.width == input[2]) return f;
  return resize_bilinear(f, input[1], input[2]);
}

json report_json(const MetricReport& r) {
  json per = json::array();
  for (const auto& v : r.per_sample) per.push_back(v ? json(*v) : json(nullptr));
  const double m = r.mean();
  return {{"mean", std::isnan(m) ? json(nullptr) : json(m)},
          {"count", r.count()},
          {"skipped", r.skipped()},
          {"per_sample", per}};
}

json curve_json(const Curve& c) {
  return {{"fraction", c.fraction}, {"value", c.value}, {"auc", c.auc()}};
}

// ---- saliency metrics --------------------------------------------------------

json saliency_metrics(const Workspace& ws, const RunConfig& c) {
  const NetworkGraph& net = ws.net();
  const Shape& in = net.input_shape;
  const std::size_t n = ws.samples.size();
  FidelityOptions fo;
  fo.trials = c.fidelity_trials;
  fo.subset_size = std::min(c.fidelity_subset, in[1] * in[2] / 2);
  if (fo.subset_size < c.fidelity_subset) {
    warn("fidelity subset of " + std::to_string(c.fidelity_subset) + " pixels does not fit the " +
         std::to_string(in[1] * in[2]) + "-pixel input; using half of it (" + std::to_string(fo.subset_size) + ")");
  }

  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = c.class_index.value_or(argmax(evaluate(net, ws.samples[i].image)));
  }

  constexpr std::size_t kMetrics = 5;
  const char* names[kMetrics] = {"pointing_game", "attribution_localization", "sparseness",
                                 "fidelity", "stability"};
  json runs = json::array();
  for (const std::string& scale : c.scales) {
    for (const std::string& variant : c.variants) {
      std::vector<std::array<std::optional<double>, kMetrics>> rows(n);
      parallel_for(n, [&](std::size_t i) {
        const Sample& s = ws.samples[i];
        const ForwardResult r = forward(net, s.image);
        const SharingRatioTable table = build_sharing_table(r.tape);
        SaliencyOptions so;
        so.variant = *parse_mu_variant(variant);
        so.stop_layer = stop_layer(table, scale);
        const RelevanceField f = at_input_size(saliency(r.tape, table, target[i], so), in);
        auto& row = rows[i];
        if (s.mask) {
          row[0] = pointing_game(f, *s.mask, c.pointing_tolerance) ? 1.0 : 0.0;
          row[1] = attribution_localization(f, *s.mask);
        }
        row[2] = sparseness(f.scores);
        row[3] = fidelity(net, s.image, f, target[i], fo, derive_seed(c.seed, {kFidelity, i}));
        if (c.stability_perturbations > 0) {
          const AttributionFn phi = [&](const Tensor& x) {
            return at_input_size(saliency(net, x, target[i], so), in).scores;
          };
          row[4] = stability(phi, s.image, c.stability_perturbations, c.stability_sigma,
                             derive_seed(c.seed, {kStability, i}));
        }
      });
      json metrics;
      for (std::size_t m = 0; m < kMetrics; ++m) {
        MetricReport rep;
        rep.metric = names[m];
        for (const auto& row : rows) rep.add(row[m]);
        metrics[names[m]] = report_json(rep);
      }
      runs.push_back({{"scale", scale}, {"variant", variant}, {"metrics", metrics}});
    }
  }
  json samples = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    samples.push_back({{"name", ws.samples[i].name}, {"label", ws.samples[i].label},
                       {"target", target[i]}});
  }
  return {{"samples", samples}, {"runs", runs}};
}

// ---- concepts ------------------------------------------------------------------

std::vector<int> concept_layer_values(const NetworkGraph& net, const RunConfig& c) {
  const std::vector<PfvLayer> pfv = pfv_layers(net);
  std::vector<std::string> names = c.layers;
  if (names.empty()) {
    for (std::size_t l = 1; l < pfv.size(); ++l) names.push_back(pfv[l].name);
  }
  std::vector<int> values;
  for (const std::string& name : names) {
    const int v = net.value_id(name);
    if (v == 0) throw ConfigError("concept layers must be hidden layers, got 'input'");
    pfv_layer_index(pfv, v);
    if (!values.empty() && v <= values.back()) {
      throw ConfigError("concept layers must be listed in network order ('" + name + "')");
    }
    values.push_back(v);
  }
  return values;
}

std::vector<ConceptLayer> extract_concepts(const Workspace& ws, const RunConfig& c,
                                           const std::vector<int>& values, Extractor e) {
  const NetworkGraph& net = ws.net();
  const std::size_t n = ws.samples.size();
  std::vector<Tensor> images;
  for (const Sample& s : ws.samples) images.push_back(s.image);

  std::vector<std::vector<Eigen::MatrixXd>> acts(values.size(), std::vector<Eigen::MatrixXd>(n));
  parallel_for(n, [&](std::size_t i) {
    const ForwardResult r = forward(net, images[i]);
    for (std::size_t l = 0; l < values.size(); ++l) acts[l][i] = pfv_matrix(r.tape.value(values[l]));
  });

  std::vector<ConceptLayer> out(values.size());
  for (std::size_t l = 0; l < values.size(); ++l) {
    const std::string name = net.value_name(values[l]);
    const std::vector<PfvSample> samples =
        sample_pfvs(net, images, values[l], c.pfv_samples, derive_seed(c.seed, {kSampling, l}));
    DictionaryOptions o;
    o.extractor = e;
    o.k_ratio = c.k_ratio;
    o.sae_lambda = c.sae_lambda;
    ConceptLayer& cl = out[l];
    cl.data.value = values[l];
    cl.data.dict = build_dictionary(name, samples, o, derive_seed(c.seed, {kDictionary, l}));
    cl.data.codes.resize(n);
    parallel_for(n, [&](std::size_t i) {
      cl.data.codes[i] = coefficient_map(cl.data.dict, acts[l][i], c.lasso_lambda);
    });

    Eigen::Index rows = 0;
    for (const auto& a : acts[l]) rows += a.rows();
    Eigen::MatrixXd x(rows, acts[l][0].cols());
    Eigen::MatrixXd u(rows, static_cast<Eigen::Index>(cl.data.dict.size()));
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < n; ++i) {
      x.middleRows(at, acts[l][i].rows()) = acts[l][i];
      u.middleRows(at, acts[l][i].rows()) = cl.data.codes[i].u;
      at += acts[l][i].rows();
    }
    cl.report = reconstruction_report(cl.data.dict.v, x, u, cl.data.dict.offset);
  }
  return out;
}

fs::path coefficients_path(const fs::path& dir, const std::string& layer) {
  return dir / ("coeffs_" + layer + ".bin");
}

json save_concepts(const std::vector<ConceptLayer>& layers, const fs::path& dir) {
  json rows = json::array();
  for (const ConceptLayer& l : layers) {
    save_dictionary(l.data.dict, dir);
    save_coefficients(l.data.codes, coefficients_path(dir, l.data.dict.layer));
    rows.push_back({{"layer", l.data.dict.layer},
                    {"extractor", extractor_name(l.data.dict.extractor)},
                    {"channels", l.data.dict.channels()},
                    {"k", l.data.dict.size()},
                    {"rel_l2", l.report.rel_l2},
                    {"l0_ratio", l.report.l0_ratio},
                    {"positions", l.report.positions},
                    {"skipped", l.report.skipped}});
  }
  write_json(dir / "reconstruction.json", json{{"layers", rows}});
  return rows;
}

std::vector<LayerConcepts> load_concepts(const Workspace& ws, const fs::path& dir,
                                         const std::vector<int>& values) {
  std::vector<LayerConcepts> out;
  for (int v : values) {
    const std::string name = ws.net().value_name(v);
    LayerConcepts l;
    l.value = v;
    l.dict = load_dictionary(dictionary_path(dir, name));
    l.codes = load_coefficients(coefficients_path(dir, name));
    if (l.codes.size() != ws.samples.size()) {
      throw ValidationError("coefficients for layer '" + name + "' cover " +
                            std::to_string(l.codes.size()) + " images, the dataset has " +
                            std::to_string(ws.samples.size()));
    }
    out.push_back(std::move(l));
  }
  return out;
}

// Reuses c.concepts when given; otherwise extracts with the first extractor
// and saves the result under <output>/concepts.
std::vector<LayerConcepts> obtain_concepts(const Workspace& ws, const RunConfig& c) {
  const std::vector<int> values = concept_layer_values(ws.net(), c);
  if (!c.concepts.empty()) return load_concepts(ws, c.concepts, values);
  const std::vector<ConceptLayer> built =
      extract_concepts(ws, c, values, *parse_extractor(c.extractors.front()));
  save_concepts(built, c.output / "concepts");
  std::vector<LayerConcepts> out;
  for (const ConceptLayer& l : built) out.push_back(l.data);
  return out;
}

std::vector<std::size_t> class_images(const Workspace& ws, std::size_t cls) {
  std::vector<std::size_t> idx;
  for (const Sample& s : ws.samples) {
    if (s.label == cls) idx.push_back(s.id);
  }
  return idx;
}

std::vector<LayerConcepts> restrict_to(const std::vector<LayerConcepts>& layers,
                                       const std::vector<std::size_t>& images) {
  std::vector<LayerConcepts> out;
  for (const LayerConcepts& l : layers) {
    LayerConcepts r{l.value, l.dict, {}};
    for (std::size_t i : images) r.codes.push_back(l.codes[i]);
    out.push_back(std::move(r));
  }
  return out;
}

// Classes to process and whether each gets its own sub-directory.
std::vector<std::size_t> selected_classes(const Workspace& ws, const RunConfig& c) {
  if (c.class_index) return {*c.class_index};
  std::vector<std::size_t> all;
  for (std::size_t k = 0; k < ws.classes; ++k) all.push_back(k);
  return all;
}

fs::path class_dir(const RunConfig& c, std::size_t cls) {
  return c.class_index ? c.output : c.output / ("class_" + std::to_string(cls));
}

// ---- insertion / deletion -------------------------------------------------------

json pair_curves(const NetworkGraph& net, const LayerConcepts& a, const LayerConcepts& b,
                 std::size_t t, const RunConfig& c, std::uint64_t seed) {
  const AttributionOptions ao =
      attribution_options(c, "icat " + a.dict.layer + "->" + b.dict.layer + " target " + std::to_string(t));
  const Eigen::VectorXd parents = icat_parents(net, a.value, b.value, a.dict, b.dict, a.codes, b.codes, t, ao);
  const std::size_t k = a.dict.size();
  const std::vector<std::size_t> ranking = select_nodes(parents, k);
  const Eigen::VectorXd v_t = b.dict.v.col(static_cast<Eigen::Index>(t));
  const std::size_t n = a.codes.size();

  // Images whose unmodified alignment is ~0 have no meaningful normalized
  // curve; they are left out of every mean.
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < n; ++i) {
    const AlignmentObjective s(net, a.value, b.value, a.dict, v_t,
                               b.codes[i].u.col(static_cast<Eigen::Index>(t)), Aggregation::kMax);
    if (std::abs(s.value(a.codes[i].u)) > 1e-12) used.push_back(i);
  }
  auto mean_over_images = [&](const std::vector<std::size_t>& order, CurveMode mode) {
    std::vector<Curve> curves(used.size());
    parallel_for(used.size(), [&](std::size_t j) {
      const std::size_t i = used[j];
      curves[j] = insertion_deletion_curve(net, a.value, b.value, a.dict, v_t, a.codes[i].u,
                                           b.codes[i].u.col(static_cast<Eigen::Index>(t)), order, mode);
    });
    return mean_curve(curves);
  };

  json out{{"parent_layer", a.dict.layer},
           {"child_layer", b.dict.layer},
           {"target", t},
           {"attributor", c.attributor},
           {"icat", std::vector<double>(parents.data(), parents.data() + parents.size())},
           {"ranking", ranking},
           {"images", n},
           {"images_used", used.size()}};
  if (used.empty()) {
    warn("target " + std::to_string(t) + " at '" + b.dict.layer +
         "' has zero alignment on every image; no curves");
    return out;
  }
  std::vector<std::pair<std::string, CurveMode>> modes;
  if (c.mode != "insert") modes.emplace_back("deletion", CurveMode::kDelete);
  if (c.mode != "delete") modes.emplace_back("insertion", CurveMode::kInsert);
  for (const auto& [name, mode] : modes) {
    json m{{"ranked", curve_json(mean_over_images(ranking, mode))}, {"random_orders", c.random_orders}};
    if (c.random_orders > 0) {
      std::vector<Curve> random;
      for (std::size_t r = 0; r < c.random_orders; ++r) {
        Rng rng(derive_seed(seed, {r}));
        random.push_back(mean_over_images(rng.permutation(k), mode));
      }
      m["random"] = curve_json(mean_curve(random));
    }
    out[name] = m;
  }
  return out;
}

}  // namespace

void cmd_attribute(const RunConfig& c) {
  const Workspace ws = open_workspace(c);
  begin_output(c, "attribute");
  const NetworkGraph& net = ws.net();
  parallel_for(ws.samples.size(), [&](std::size_t i) {
    const Sample& s = ws.samples[i];
    const ForwardResult r = forward(net, s.image);
    const SharingRatioTable table = build_sharing_table(r.tape);
    const std::size_t cls = c.class_index.value_or(argmax(r.logits));
    for (const std::string& scale : c.scales) {
      for (const std::string& variant : c.variants) {
        SaliencyOptions so;
        so.variant = *parse_mu_variant(variant);
        so.stop_layer = stop_layer(table, scale);
        save_heatmap(saliency(r.tape, table, cls, so),
                     c.output / (s.name + "." + scale + "." + variant + ".heat.pgm"));
      }
    }
  });
  if (c.metrics) write_json(c.output / "metrics.json", saliency_metrics(ws, c));
}

void cmd_evaluate(const RunConfig& c) {
  const Workspace ws = open_workspace(c);
  begin_output(c, "evaluate");
  write_json(c.output / "metrics.json", saliency_metrics(ws, c));
}

void cmd_concepts(const RunConfig& c) {
  const Workspace ws = open_workspace(c);
  begin_output(c, "concepts");
  const std::vector<int> values = concept_layer_values(ws.net(), c);
  std::ostringstream table;
  table << "layer\textractor\tk\trel_l2\tl0_ratio\n";
  for (const std::string& name : c.extractors) {
    const Extractor e = *parse_extractor(name);
    const fs::path dir = c.extractors.size() > 1 ? c.output / name : c.output;
    const json rows = save_concepts(extract_concepts(ws, c, values, e), dir);
    for (const json& r : rows) {
      table << r["layer"].get<std::string>() << '\t' << name << '\t' << r["k"].get<std::size_t>()
            << '\t' << r["rel_l2"].get<double>() << '\t' << r["l0_ratio"].get<double>() << '\n';
    }
  }
  write_file(c.output / "reconstruction.tsv", table.str());
  std::fputs(table.str().c_str(), stdout);
}

void cmd_graph(const RunConfig& c) {
  const Workspace ws = open_workspace(c);
  begin_output(c, "graph");
  const std::vector<LayerConcepts> layers = obtain_concepts(ws, c);
  if (layers.size() < 2) throw ConfigError("graph needs at least two concept layers");
  GraphOptions go;
  go.top_k = c.top_k;
  go.shared_k = c.shared_k;
  go.attribution = attribution_options(c, "graph");
  for (const Sample& s : ws.samples) go.labels.push_back(s.label);
  for (std::size_t cls : selected_classes(ws, c)) {
    const std::vector<std::size_t> images = class_images(ws, cls);
    if (images.empty()) {
      if (c.class_index) throw ValidationError("dataset has no images of class " + std::to_string(cls));
      warn("dataset has no images of class " + std::to_string(cls) + "; skipped");
      continue;
    }
    const std::vector<LayerConcepts> sub = restrict_to(layers, images);
    ConceptGraph g = build_graph(ws.net(), layers, cls, go);
    g.class_name = ws.class_name(cls);
    const fs::path dir = class_dir(c, cls);
    save_graph(g, dir);
    if (!c.validate) continue;
    json pairs = json::array();
    for (std::size_t p = 0; p + 1 < sub.size(); ++p) {
      for (const ConceptNode& node : g.nodes) {
        if (node.layer != sub[p + 1].dict.layer) continue;
        pairs.push_back(pair_curves(ws.net(), sub[p], sub[p + 1], node.id, c,
                                    derive_seed(c.seed, {kValidation, cls, p, node.id})));
      }
    }
    write_json(dir / "validation.json",
               json{{"class", cls}, {"class_name", g.class_name}, {"pairs", pairs}});
  }
}

void cmd_insertion_deletion(const RunConfig& c) {
  if (c.layers.size() != 2) {
    throw ConfigError("insertion-deletion needs exactly two layers (--layers parent,child)");
  }
  const Workspace ws = open_workspace(c);
  begin_output(c, "insertion-deletion");
  const std::vector<LayerConcepts> layers = obtain_concepts(ws, c);
  for (std::size_t cls : selected_classes(ws, c)) {
    const std::vector<std::size_t> images = class_images(ws, cls);
    if (images.empty()) {
      if (c.class_index) throw ValidationError("dataset has no images of class " + std::to_string(cls));
      warn("dataset has no images of class " + std::to_string(cls) + "; skipped");
      continue;
    }
    const std::vector<LayerConcepts> sub = restrict_to(layers, images);
    const LayerConcepts& b = sub[1];
    std::size_t t = 0;
    std::string source = "given";
    if (c.target) {
      t = *c.target;
      if (t >= b.dict.size()) {
        throw RangeError("target concept " + std::to_string(t) + " out of range (" +
                         std::to_string(b.dict.size()) + " concepts at '" + b.dict.layer + "')");
      }
    } else {
      const Eigen::VectorXd imp = concept_importance(ws.net(), b.value, b.dict, b.codes, cls,
                                                     attribution_options(c, "target importance"));
      t = select_nodes(imp, 1).front();
      source = "top importance";
    }
    json out = pair_curves(ws.net(), sub[0], b, t, c, derive_seed(c.seed, {kValidation, cls, 0, t}));
    out["class"] = cls;
    out["class_name"] = ws.class_name(cls);
    out["target_source"] = source;
    write_json(class_dir(c, cls) / "curves.json", out);
  }
}

}  // namespace ierf::cli
