#include "ierf/icat/graph.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "ierf/error.h"
#include "ierf/icat/alignment.h"
#include "ierf/io/image.h"
#include "ierf/util/parallel.h"

namespace ierf {
namespace {

using nlohmann::json;

std::string node_key(const std::string& layer, std::size_t id) {
  return layer + ":" + std::to_string(id);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json ref_json(const ConceptRef& r) { return {{"layer", r.layer}, {"id", r.id}}; }

ConceptRef ref_from(const json& j) { return {j.at("layer").get<std::string>(), j.at("id").get<std::size_t>()}; }

}  // namespace

const ConceptNode* ConceptGraph::find(const ConceptRef& r) const {
  for (const ConceptNode& n : nodes) {
    if (n.layer == r.layer && n.id == r.id) return &n;
  }
  return nullptr;
}

std::vector<double> normalize_edge_weights(const std::vector<double>& raw) {
  if (raw.empty()) return {};
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo, max = *hi;
  std::vector<double> w(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    w[i] = max > min ? (raw[i] - min) / (max - min) : (raw[i] > 0.0 ? 1.0 : 0.0);
  }
  return w;
}

ConceptGraph build_graph(const NetworkGraph& net, const std::vector<LayerConcepts>& layers,
                         std::size_t class_c, const GraphOptions& options) {
  if (layers.empty()) throw ConfigError("build_graph: no layers listed");
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l].value <= layers[l - 1].value) {
      throw ConfigError("build_graph: layers must be listed in network order");
    }
  }
  const std::size_t classes = net.infer_shapes()[logit_value(net)].at(0);
  if (class_c >= classes) {
    throw RangeError("class index " + std::to_string(class_c) + " out of range (" +
                     std::to_string(classes) + " classes)");
  }

  std::vector<std::vector<std::size_t>> by_class(classes);
  const std::size_t images = layers.front().codes.size();
  for (const LayerConcepts& lc : layers) {
    if (lc.codes.size() != images) throw ValidationError("build_graph: layers code different image counts");
  }
  if (!options.labels.empty()) {
    if (options.labels.size() != images) {
      throw ValidationError("build_graph: " + std::to_string(options.labels.size()) + " labels for " +
                            std::to_string(images) + " images");
    }
    for (std::size_t i = 0; i < images; ++i) {
      if (options.labels[i] >= classes) throw RangeError("build_graph: label out of range");
      by_class[options.labels[i]].push_back(i);
    }
  } else {
    for (auto& idx : by_class) {
      for (std::size_t i = 0; i < images; ++i) idx.push_back(i);
    }
  }
  auto codes_of = [&](const LayerConcepts& lc, std::size_t c) {
    std::vector<CoefficientMap> out;
    for (std::size_t i : by_class[c]) out.push_back(lc.codes[i]);
    return out;
  };
  auto top_set = [&](const Eigen::VectorXd& imp) {
    std::vector<std::size_t> out;
    for (std::size_t q : select_nodes(imp, options.top_k)) {
      if (imp(static_cast<Eigen::Index>(q)) > 0.0) out.push_back(q);
    }
    return out;
  };

  ConceptGraph g;
  g.class_index = class_c;
  if (class_c < net.class_names.size()) g.class_name = net.class_names[class_c];

  // Node selection.
  std::vector<std::vector<std::size_t>> layer_nodes(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerConcepts& lc = layers[l];
    g.layers.push_back(lc.dict.layer);
    std::vector<Eigen::VectorXd> imp(classes);
    parallel_for(
        classes,
        [&](std::size_t c) {
          imp[c] = concept_importance(net, lc.value, lc.dict, codes_of(lc, c), c, options.attribution);
        },
        options.workers);
    std::vector<std::size_t> membership(lc.dict.size(), 0);
    Eigen::VectorXd summed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lc.dict.size()));
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t q : top_set(imp[c])) ++membership[q];
      summed += imp[c];
    }
    std::vector<std::size_t> chosen = top_set(imp[class_c]);
    std::size_t added = 0;
    for (std::size_t q : select_nodes(summed, lc.dict.size())) {
      if (added >= options.shared_k) break;
      if (membership[q] < 2) continue;
      ++added;
      if (std::find(chosen.begin(), chosen.end(), q) == chosen.end()) chosen.push_back(q);
    }
    if (chosen.empty()) {
      throw ValidationError("build_graph: no nodes selected at layer '" + lc.dict.layer + "'");
    }
    for (std::size_t q : chosen) {
      ConceptNode n;
      n.layer = lc.dict.layer;
      n.id = q;
      n.importance = imp[class_c](static_cast<Eigen::Index>(q));
      n.shared = membership[q] >= 2;
      if (q < lc.dict.exemplars.size()) n.exemplars = lc.dict.exemplars[q];
      g.nodes.push_back(std::move(n));
    }
    layer_nodes[l] = std::move(chosen);
  }

  // Edges between consecutive listed layers.
  const std::string tag(attributor_name(options.attribution.attributor));
  for (std::size_t l = 1; l < layers.size(); ++l) {
    const LayerConcepts& a = layers[l - 1];
    const LayerConcepts& b = layers[l];
    const std::vector<std::size_t>& children = layer_nodes[l];
    const std::vector<CoefficientMap> codes_a = codes_of(a, class_c), codes_b = codes_of(b, class_c);
    std::vector<Eigen::VectorXd> parents(children.size());
    parallel_for(
        children.size(),
        [&](std::size_t i) {
          parents[i] = icat_parents(net, a.value, b.value, a.dict, b.dict, codes_a, codes_b,
                                    children[i], options.attribution);
        },
        options.workers);
    std::vector<ConceptEdge> pair;
    for (std::size_t q : layer_nodes[l - 1]) {
      for (std::size_t i = 0; i < children.size(); ++i) {
        ConceptEdge e;
        e.parent = {a.dict.layer, q};
        e.child = {b.dict.layer, children[i]};
        e.raw = parents[i](static_cast<Eigen::Index>(q));
        e.attributor = tag;
        pair.push_back(std::move(e));
      }
    }
    std::vector<double> raw;
    for (const ConceptEdge& e : pair) raw.push_back(e.raw);
    const std::vector<double> w = normalize_edge_weights(raw);
    for (std::size_t i = 0; i < pair.size(); ++i) pair[i].weight = w[i];
    g.edges.insert(g.edges.end(), pair.begin(), pair.end());
  }
  return g;
}

std::string graph_to_json(const ConceptGraph& g) {
  json nodes = json::array();
  for (const ConceptNode& n : g.nodes) {
    json ex = json::array();
    for (const Exemplar& e : n.exemplars) {
      ex.push_back({{"image", e.image}, {"position", e.position}, {"cosine", e.cosine}});
    }
    json j = {{"layer", n.layer},
              {"id", n.id},
              {"importance", n.importance},
              {"shared", n.shared},
              {"exemplars", ex}};
    if (n.label) j["label"] = *n.label;
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const ConceptEdge& e : g.edges) {
    edges.push_back({{"parent", ref_json(e.parent)},
                     {"child", ref_json(e.child)},
                     {"weight", e.weight},
                     {"raw", e.raw},
                     {"attributor", e.attributor}});
  }
  const json j = {{"layers", g.layers},
                  {"class", {{"index", g.class_index}, {"name", g.class_name}}},
                  {"normalization", g.normalization},
                  {"nodes", nodes},
                  {"edges", edges}};
  return j.dump(2) + "\n";
}

ConceptGraph graph_from_json(const std::string& text) {
  ConceptGraph g;
  try {
    const json j = json::parse(text);
    g.layers = j.at("layers").get<std::vector<std::string>>();
    if (j.contains("class")) {
      g.class_index = j["class"].value("index", std::size_t{0});
      g.class_name = j["class"].value("name", std::string());
    }
    g.normalization = j.value("normalization", g.normalization);
    for (const json& n : j.at("nodes")) {
      ConceptNode node;
      node.layer = n.at("layer").get<std::string>();
      node.id = n.at("id").get<std::size_t>();
      node.importance = n.at("importance").get<double>();
      node.shared = n.value("shared", false);
      for (const json& e : n.value("exemplars", json::array())) {
        node.exemplars.push_back({e.at("image").get<std::size_t>(),
                                  e.at("position").get<std::size_t>(),
                                  e.at("cosine").get<double>()});
      }
      if (n.contains("label")) node.label = n["label"].get<std::string>();
      g.nodes.push_back(std::move(node));
    }
    for (const json& e : j.at("edges")) {
      ConceptEdge edge;
      edge.parent = ref_from(e.at("parent"));
      edge.child = ref_from(e.at("child"));
      edge.weight = e.at("weight").get<double>();
      edge.raw = e.value("raw", edge.weight);
      edge.attributor = e.value("attributor", std::string());
      g.edges.push_back(std::move(edge));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph JSON: ") + e.what());
  }
  return g;
}

double edge_penwidth(double weight) { return 1.0 + 4.0 * std::clamp(weight, 0.0, 1.0); }

std::string edge_color(double weight) {
  const double w = std::clamp(weight, 0.0, 1.0);
  // light gray (211, 211, 211) -> blue (0, 0, 255)
  const auto mix = [&](double from, double to) {
    return static_cast<int>(std::lround(from + (to - from) * w));
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(211, 0), mix(211, 0), mix(211, 255));
  return buf;
}

std::string graph_to_dot(const ConceptGraph& g) {
  std::string out = "digraph concept_graph {\n  rankdir=LR;\n  node [shape=box];\n";
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    out += "  subgraph cluster_" + std::to_string(l) + " {\n    label=\"" + g.layers[l] + "\";\n";
    for (const ConceptNode& n : g.nodes) {
      if (n.layer != g.layers[l]) continue;
      out += "    \"" + node_key(n.layer, n.id) + "\" [label=\"" +
             (n.label ? *n.label : n.layer + " #" + std::to_string(n.id)) + "\\nimportance " +
             fixed(n.importance, 4) + "\"" + (n.shared ? ", style=dashed" : "") + "];\n";
    }
    out += "  }\n";
  }
  for (const ConceptEdge& e : g.edges) {
    out += "  \"" + node_key(e.parent.layer, e.parent.id) + "\" -> \"" +
           node_key(e.child.layer, e.child.id) + "\" [penwidth=" + fixed(edge_penwidth(e.weight), 3) +
           ", color=\"" + edge_color(e.weight) + "\", label=\"" + fixed(e.weight, 3) + "\"];\n";
  }
  out += "}\n";
  return out;
}

void save_graph(const ConceptGraph& g, const std::filesystem::path& dir) {
  write_file(dir / "graph.json", graph_to_json(g));
  write_file(dir / "graph.dot", graph_to_dot(g));
}

}  // namespace ierf
