#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ierf/concepts/code_attribution.h"
#include "ierf/concepts/dictionary.h"

namespace ierf {

struct ConceptRef {
  std::string layer;
  std::size_t id = 0;

  bool operator==(const ConceptRef&) const = default;
};

struct ConceptNode {
  std::string layer;
  std::size_t id = 0;
  double importance = 0.0;
  bool shared = false;  // in the top-k set of at least two classes
  std::vector<Exemplar> exemplars;
  std::optional<std::string> label;

  bool operator==(const ConceptNode&) const = default;
};

struct ConceptEdge {
  ConceptRef parent;
  ConceptRef child;
  double weight = 0.0;  // normalized to [0, 1] within the layer pair
  double raw = 0.0;     // ICAT before normalization
  std::string attributor;

  bool operator==(const ConceptEdge&) const = default;
};

struct ConceptGraph {
  std::vector<std::string> layers;
  std::size_t class_index = 0;
  std::string class_name;
  std::vector<ConceptNode> nodes;
  std::vector<ConceptEdge> edges;
  std::string normalization = "min-max per layer pair";

  const ConceptNode* find(const ConceptRef& r) const;
  bool operator==(const ConceptGraph&) const = default;
};

// One listed layer: its dictionary and per-image coefficient maps.
struct LayerConcepts {
  int value = 0;
  ConceptDictionary dict;
  std::vector<CoefficientMap> codes;
};

struct GraphOptions {
  std::size_t top_k = 5;
  std::size_t shared_k = 3;
  AttributionOptions attribution;
  std::size_t workers = 0;  // 0: IERF_WORKERS or hardware concurrency
  // Class label of every coded image. When given, importance for class k is
  // computed on the images labeled k and edges on the images of the graph's
  // class; otherwise every image is used throughout.
  std::vector<std::size_t> labels;
};

// Nodes: the class's top_k concepts per layer and up to shared_k shared
// concepts per layer (ranked by importance summed over classes). Only
// concepts with positive importance enter a class's top-k set; a concept is
// shared when it is in the sets of at least two classes. Edges: ICAT
// between every node pair of consecutive listed layers, summed over images,
// then min-max normalized within the pair. Equal weights normalize to 1 when
// positive and 0 otherwise.
ConceptGraph build_graph(const NetworkGraph& net, const std::vector<LayerConcepts>& layers,
                         std::size_t class_c, const GraphOptions& options);

// Normalizes `raw` to [0, 1] as described above.
std::vector<double> normalize_edge_weights(const std::vector<double>& raw);

std::string graph_to_json(const ConceptGraph& g);
ConceptGraph graph_from_json(const std::string& text);

// DOT rendering: penwidth = 1 + 4 w; color runs from light gray (w = 0) to
// blue (w = 1).
std::string graph_to_dot(const ConceptGraph& g);
double edge_penwidth(double weight);
std::string edge_color(double weight);

void save_graph(const ConceptGraph& g, const std::filesystem::path& dir);

}  // namespace ierf
