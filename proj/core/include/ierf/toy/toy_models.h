#pragma once

#include <cstddef>
#include <vector>

#include "ierf/tensor/network.h"
#include "ierf/util/random.h"

namespace ierf::toy {

// Small random CNNs for property tests, benchmarks and acceptance checks.
struct RandomNetOptions {
  std::size_t input_channels = 2;
  std::size_t height = 6;
  std::size_t width = 6;
  std::size_t conv_layers = 3;
  std::size_t channels = 4;
  std::size_t kernel = 3;
  std::size_t padding = 1;
  std::size_t classes = 3;
  OpKind activation = OpKind::kRelu;
  bool batch_norm = false;
  // Residual-add around every conv after the first (shapes permitting).
  bool residual = false;
  // 2x2 max-pool after the first activation.
  bool max_pool = false;
  bool avg_pool = false;
};

NetworkGraph random_cnn(const RandomNetOptions& options, Rng& rng);

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0);

// Two-class net with disjoint pathways over an RGB input: motif A (red)
// feeds features 0-1 of both conv layers and logit 0; motif B (green) feeds
// features 2-3 and logit 1. Blue is ignored. Layers are named conv1/act1,
// conv2/act2, gap, head.
NetworkGraph planted_pathway_net();

struct PlantedSample {
  Tensor image;
  std::size_t y0 = 0;  // top-left corner of the 3x3 motif
  std::size_t x0 = 0;
};

// 12x12 RGB image with the class motif planted at a random location plus
// small noise in every channel.
PlantedSample planted_pathway_sample(std::size_t label, Rng& rng);
Tensor planted_pathway_image(std::size_t label, Rng& rng);

// Single-channel backbone: 3x3 box mean followed by ReLU (layer "act1"),
// then global-avgpool and a 1-class head. Used for latent insertion tests.
NetworkGraph box_backbone(std::size_t height, std::size_t width);

}  // namespace ierf::toy
