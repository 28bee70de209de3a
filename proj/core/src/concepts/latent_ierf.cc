#include "ierf/concepts/latent_ierf.h"

#include "ierf/concepts/dictionary.h"
#include "ierf/error.h"
#include "ierf/log.h"
#include "ierf/srd/propagation.h"
#include "ierf/srd/sharing_ratio.h"
#include "ierf/tensor/tape.h"

namespace ierf {

std::string_view latent_method_name(LatentMethod m) {
  return m == LatentMethod::kSrd ? "srd" : "grad-x-input";
}

std::optional<LatentMethod> parse_latent_method(std::string_view name) {
  if (name == "grad-x-input") return LatentMethod::kGradTimesInput;
  if (name == "srd") return LatentMethod::kSrd;
  return std::nullopt;
}

LatentIerf latent_ierf(const NetworkGraph& net, const SaeModel& sae, const Tensor& image,
                       int layer_value, std::size_t k, LatentMethod method) {
  if (k >= sae.latents()) {
    throw RangeError("latent " + std::to_string(k) + " out of range (" +
                     std::to_string(sae.latents()) + " latents)");
  }
  const ForwardResult r = forward(net, image);
  const Tensor& h = r.tape.value(layer_value);
  if (h.rank() != 3 || h.dim(0) != sae.dim()) {
    throw ConfigError("SAE of dimension " + std::to_string(sae.dim()) +
                      " does not fit layer '" + net.value_name(layer_value) + "'");
  }
  const std::size_t hw = h.dim(1) * h.dim(2);
  const Eigen::MatrixXd x = pfv_matrix(h);
  const Eigen::RowVectorXd w = sae.w_e.row(static_cast<Eigen::Index>(k));
  Eigen::VectorXd z(static_cast<Eigen::Index>(hw));
  for (Eigen::Index p = 0; p < z.size(); ++p) {
    z(p) = std::max(0.0, w.dot(x.row(p).transpose() - sae.b_d));
  }

  const Shape& in = net.input_shape;
  LatentIerf out;
  out.field = RelevanceField::zeros(in[1], in[2], FieldKind::kIerf);
  out.activation = z.sum();
  out.active = out.activation > 0.0;
  if (!out.active) return out;

  if (method == LatentMethod::kSrd) {
    const SharingRatioTable table = build_sharing_table(r.tape);
    const std::size_t top = pfv_layer_index(table.layers, layer_value);
    std::vector<double> seed(z.data(), z.data() + z.size());
    out.field = propagate_relevance_backward(table, top, seed, 0);
    out.field.kind = FieldKind::kIerf;
    return out;
  }

  Tensor seed(h.shape(), 0.0);
  for (std::size_t p = 0; p < hw; ++p) {
    if (z(static_cast<Eigen::Index>(p)) <= 0.0) continue;
    for (std::size_t c = 0; c < h.dim(0); ++c) seed[c * hw + p] = w(static_cast<Eigen::Index>(c));
  }
  Tensor grad = seed;
  if (layer_value > 0) {
    const NetworkGraph body = subnetwork(net, 0, layer_value);
    grad = backward(forward(body, image).tape, seed)[0];
  }
  const std::size_t in_hw = in[1] * in[2];
  for (std::size_t c = 0; c < in[0]; ++c) {
    for (std::size_t p = 0; p < in_hw; ++p) out.field.scores[p] += grad[c * in_hw + p] * image[c * in_hw + p];
  }
  return out;
}

double latent_activation(const NetworkGraph& net, const SaeModel& sae, const Tensor& image,
                         int layer_value, std::size_t k) {
  if (k >= sae.latents()) throw RangeError("latent " + std::to_string(k) + " out of range");
  const NetworkGraph body = layer_value > 0 ? subnetwork(net, 0, layer_value) : NetworkGraph{};
  const Tensor h = layer_value > 0 ? evaluate(body, image) : image;
  const Eigen::MatrixXd x = pfv_matrix(h);
  return sae.encode_rows(x).col(static_cast<Eigen::Index>(k)).sum();
}

std::size_t patch_count(std::size_t height, std::size_t width, std::size_t patch) {
  if (patch == 0) throw ConfigError("patch size must be positive");
  return ((height + patch - 1) / patch) * ((width + patch - 1) / patch);
}

std::vector<std::size_t> patch_ranking(const RelevanceField& field, std::size_t patch) {
  const std::size_t cols = (field.width + patch - 1) / patch;
  std::vector<double> mass(patch_count(field.height, field.width, patch), 0.0);
  for (std::size_t y = 0; y < field.height; ++y) {
    for (std::size_t x = 0; x < field.width; ++x) mass[(y / patch) * cols + x / patch] += field.at(y, x);
  }
  std::vector<std::size_t> ids(mass.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
  return ids;
}

Curve latent_insertion_curve(const NetworkGraph& net, const SaeModel& sae, const Tensor& image,
                             int layer_value, std::size_t k, std::size_t patch,
                             const std::vector<std::size_t>& order) {
  const std::size_t h = image.dim(1), w = image.dim(2), hw = h * w;
  const std::size_t n = patch_count(h, w, patch), cols = (w + patch - 1) / patch;
  std::vector<bool> seen(n, false);
  for (std::size_t id : order) {
    if (id >= n || seen[id]) throw ValidationError("patch order must list every patch once");
    seen[id] = true;
  }
  if (order.size() != n) throw ValidationError("patch order must list every patch once");

  const double full = latent_activation(net, sae, image, layer_value, k);
  double norm = full;
  Curve c;
  if (!(full > 0.0)) {
    warn("latent " + std::to_string(k) + " is inactive on the image; curve left unnormalized");
    norm = 1.0;
    c.normalized = false;
  }
  Tensor canvas(image.shape(), 0.0);
  for (std::size_t step = 0; step <= n; ++step) {
    if (step > 0) {
      const std::size_t id = order[step - 1];
      const std::size_t y0 = (id / cols) * patch, x0 = (id % cols) * patch;
      for (std::size_t ch = 0; ch < image.dim(0); ++ch) {
        for (std::size_t y = y0; y < std::min(h, y0 + patch); ++y) {
          for (std::size_t x = x0; x < std::min(w, x0 + patch); ++x) {
            canvas[ch * hw + y * w + x] = image[ch * hw + y * w + x];
          }
        }
      }
    }
    c.fraction.push_back(static_cast<double>(step) / static_cast<double>(n));
    c.value.push_back(latent_activation(net, sae, canvas, layer_value, k) / norm);
  }
  return c;
}

}  // namespace ierf
