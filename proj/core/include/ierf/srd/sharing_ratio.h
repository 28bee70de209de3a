#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ierf/tensor/tape.h"

namespace ierf {

// A layer of PFVs that SRD attributes through: the network input, every
// spatial activation output up to the encoder output, and the encoder output
// itself. `target` is the value whose PFVs are decomposed into partial
// contributions: the activation's pre-activation input, or the value itself
// for non-activation layers. The input layer has no target.
struct PfvLayer {
  int value = 0;
  int target = -1;
  std::string name;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t positions() const { return height * width; }
};

// Topologically ordered; front() is the input, back() the encoder output.
std::vector<PfvLayer> pfv_layers(const NetworkGraph& net);

// Index into a layer list by value id; throws ConfigError if absent.
std::size_t pfv_layer_index(const std::vector<PfvLayer>& layers, int value);

// v_hat_{i->j}: the share of target PFV j produced by source PFV i through
// the affine map between the two layers, including i's equal share of the
// target's bias.
struct PartialContribution {
  std::size_t layer;     // index into the PFV layer list
  std::size_t position;  // source position
  std::vector<double> vector;
};

// Per target position of layer `target_layer`. Sum over the list equals the
// target PFV.
std::vector<std::vector<PartialContribution>> partial_contributions(
    const Tape& tape, const std::vector<PfvLayer>& layers,
    std::size_t target_layer);

struct SourceShare {
  std::size_t layer;
  std::size_t position;
  double mu;
};

struct TargetShares {
  std::vector<SourceShare> sources;  // receptive field of the target
  bool degenerate = false;           // zero-norm target: all mu are 0
};

struct LayerSharing {
  std::size_t layer = 0;
  std::vector<std::size_t> source_layers;
  std::vector<TargetShares> targets;  // one per target position
};

struct SharingRatioTable {
  std::vector<PfvLayer> layers;
  // per_layer[k] holds the ratios into layer k; per_layer[0] is empty.
  std::vector<LayerSharing> per_layer;

  std::size_t encoder_layer() const { return layers.size() - 1; }
};

// Sharing ratios into one target layer.
LayerSharing sharing_ratios(const Tape& tape,
                            const std::vector<PfvLayer>& layers,
                            std::size_t target_layer);

// Ratios between two specific layers given by value id. `layer_k` must be the
// PFV layer fed by `layer_l` (RangeError otherwise). The result covers every
// source of layer_k, so residual targets include their skip branch.
LayerSharing sharing_ratios(const Tape& tape, int layer_l, int layer_k);

SharingRatioTable build_sharing_table(const Tape& tape);

// True when no target after `layer` draws from a layer before it, i.e. all
// relevance passes through it.
bool is_cut_layer(const SharingRatioTable& table, std::size_t layer);

}  // namespace ierf
