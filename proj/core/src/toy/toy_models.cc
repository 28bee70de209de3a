#include "ierf/toy/toy_models.h"

#include <cmath>

namespace ierf::toy {
namespace {

int add_activation(NetworkBuilder& b, int in, OpKind kind, const std::string& name) {
  switch (kind) {
    case OpKind::kLeakyRelu: return b.leaky_relu(in, 0.1, name);
    case OpKind::kElu: return b.elu(in, 1.0, name);
    default: return b.activation(in, kind, name);
  }
}

Tensor conv_weight(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
  Tensor w({cout, cin, k, k});
  const double scale = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
  for (double& v : w.data()) v = scale * rng.normal();
  return w;
}

}  // namespace

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

NetworkGraph random_cnn(const RandomNetOptions& o, Rng& rng) {
  NetworkBuilder b({o.input_channels, o.height, o.width});
  int x = b.input();
  std::size_t cin = o.input_channels;
  for (std::size_t l = 0; l < o.conv_layers; ++l) {
    const std::string id = std::to_string(l + 1);
    const int skip = x;
    x = b.conv2d(x, conv_weight(o.channels, cin, o.kernel, rng),
                 random_tensor({o.channels}, rng, -0.1, 0.1), 1, o.padding, "conv" + id);
    if (o.batch_norm) {
      x = b.batch_norm(x, random_tensor({o.channels}, rng, -0.2, 0.2),
                       random_tensor({o.channels}, rng, 0.5, 1.5),
                       random_tensor({o.channels}, rng, 0.5, 1.5),
                       random_tensor({o.channels}, rng, -0.1, 0.1), 1e-5, "bn" + id);
    }
    if (o.residual && l > 0 && 2 * o.padding + 1 == o.kernel) {
      x = b.residual_add(x, skip, "add" + id);
    }
    x = add_activation(b, x, o.activation, "act" + id);
    if (l == 0 && o.max_pool) x = b.max_pool(x, 2, 2, 0, "pool" + id);
    if (l == 0 && o.avg_pool) x = b.avg_pool(x, 2, 2, 0, "avgpool" + id);
    cin = o.channels;
  }
  b.set_encoder_output(x);
  const int gap = b.global_avg_pool(x, "gap");
  Tensor w({o.classes, o.channels});
  for (double& v : w.data()) v = rng.normal();
  b.linear(gap, std::move(w), random_tensor({o.classes}, rng, -0.1, 0.1), "head");
  std::vector<std::string> names;
  for (std::size_t c = 0; c < o.classes; ++c) names.push_back("class" + std::to_string(c));
  b.set_class_names(std::move(names));
  return b.build();
}

NetworkGraph planted_pathway_net() {
  NetworkBuilder b({3, 12, 12});
  // conv1: features 0,1 see input channel 0; features 2,3 see channel 1.
  Tensor w1({4, 3, 3, 3}, 0.0);
  for (std::size_t f = 0; f < 4; ++f) {
    const std::size_t src = f < 2 ? 0 : 1;
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 3; ++x) {
        const bool centre = y == 1 && x == 1;
        w1[((f * 3 + src) * 3 + y) * 3 + x] = f % 2 == 0 ? 1.0 / 9.0 : (centre ? 0.5 : 0.0625);
      }
    }
  }
  int x = b.conv2d(b.input(), w1, Tensor({4}, -0.1), 1, 1, "conv1");
  x = b.activation(x, OpKind::kRelu, "act1");
  // conv2 mixes only within each pathway.
  Tensor w2({4, 4, 3, 3}, 0.0);
  const double mix[2][2] = {{1.0, 0.5}, {0.25, 1.0}};
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t fo = 0; fo < 2; ++fo) {
      for (std::size_t fi = 0; fi < 2; ++fi) {
        for (std::size_t t = 0; t < 9; ++t) {
          w2[(((2 * g + fo) * 4 + 2 * g + fi) * 9) + t] = mix[fo][fi] / 9.0;
        }
      }
    }
  }
  x = b.conv2d(x, w2, Tensor({4}, -0.02), 1, 1, "conv2");
  x = b.activation(x, OpKind::kRelu, "act2");
  b.set_encoder_output(x);
  x = b.global_avg_pool(x, "gap");
  b.linear(x, Tensor::matrix(2, 4, {4, 4, 0, 0, 0, 0, 4, 4}), Tensor({2}, 0.0), "head");
  b.set_class_names({"motif_a", "motif_b"});
  return b.build();
}

PlantedSample planted_pathway_sample(std::size_t label, Rng& rng) {
  PlantedSample s;
  s.image = Tensor({3, 12, 12});
  for (double& v : s.image.data()) v = rng.uniform(0.0, 0.05);
  s.y0 = 1 + rng.below(8);
  s.x0 = 1 + rng.below(8);
  const std::size_t c = label == 0 ? 0 : 1;
  for (std::size_t y = s.y0; y < s.y0 + 3; ++y) {
    for (std::size_t x = s.x0; x < s.x0 + 3; ++x) s.image.at(c, y, x) = 0.8 + rng.uniform(0.0, 0.2);
  }
  return s;
}

Tensor planted_pathway_image(std::size_t label, Rng& rng) {
  return planted_pathway_sample(label, rng).image;
}

NetworkGraph box_backbone(std::size_t height, std::size_t width) {
  NetworkBuilder b({1, height, width});
  int x = b.conv2d(b.input(), Tensor({1, 1, 3, 3}, 1.0 / 9.0), Tensor({1}, 0.0), 1, 1,
                   "conv1");
  x = b.activation(x, OpKind::kRelu, "act1");
  b.set_encoder_output(x);
  x = b.global_avg_pool(x, "gap");
  b.linear(x, Tensor::matrix(1, 1, {1.0}), Tensor({1}, 0.0), "head");
  b.set_class_names({"object"});
  return b.build();
}

}  // namespace ierf::toy
