#include "ierf/srd/propagation.h"

#include "ierf/error.h"

namespace ierf {
namespace {

void require_cut(const SharingRatioTable& table, std::size_t layer,
                 std::size_t top) {
  if (layer >= table.layers.size() || top >= table.layers.size() || layer > top) {
    throw RangeError("SRD: layer index out of range");
  }
  for (std::size_t k = layer + 1; k <= top; ++k) {
    for (std::size_t src : table.per_layer[k].source_layers) {
      if (src < layer) {
        throw ConfigError("SRD: layer '" + table.layers[layer].name +
                          "' is bypassed by a skip connection into '" +
                          table.layers[k].name + "'; choose a layer every path crosses");
      }
    }
  }
}

}  // namespace

RelevanceField IerfMatrix::field(std::size_t i) const {
  RelevanceField f = RelevanceField::zeros(height, width, FieldKind::kIerf);
  const auto r = row(i);
  f.scores.assign(r.begin(), r.end());
  return f;
}

IerfMatrix propagate_ierf_forward(const SharingRatioTable& table,
                                  std::size_t up_to_layer,
                                  std::size_t base_layer) {
  require_cut(table, base_layer, up_to_layer);
  const PfvLayer& base = table.layers[base_layer];
  const std::size_t cells = base.positions();

  auto identity = [&] {
    IerfMatrix m{cells, base.height, base.width, std::vector<double>(cells * cells, 0.0)};
    for (std::size_t p = 0; p < cells; ++p) m.data[p * cells + p] = 1.0;
    return m;
  };
  std::vector<IerfMatrix> fields(up_to_layer + 1);
  fields[base_layer] = identity();
  for (std::size_t k = base_layer + 1; k <= up_to_layer; ++k) {
    const LayerSharing& sharing = table.per_layer[k];
    IerfMatrix m{sharing.targets.size(), base.height, base.width,
                 std::vector<double>(sharing.targets.size() * cells, 0.0)};
    for (std::size_t j = 0; j < sharing.targets.size(); ++j) {
      auto dst = m.row(j);
      for (const SourceShare& s : sharing.targets[j].sources) {
        if (s.mu == 0.0) continue;
        const auto src = fields[s.layer].row(s.position);
        for (std::size_t p = 0; p < cells; ++p) dst[p] += s.mu * src[p];
      }
    }
    fields[k] = std::move(m);
  }
  return std::move(fields[up_to_layer]);
}

std::vector<RelevanceField> propagate_ierf_forward(const Tape& tape,
                                                   int up_to_value) {
  const SharingRatioTable table = build_sharing_table(tape);
  const std::size_t k = pfv_layer_index(table.layers, up_to_value);
  const IerfMatrix m = propagate_ierf_forward(table, k);
  std::vector<RelevanceField> out;
  out.reserve(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out.push_back(m.field(i));
  return out;
}

RelevanceField aggregate_ierfs(const IerfMatrix& ierfs,
                               std::span<const double> weights) {
  if (weights.size() != ierfs.rows) {
    throw ValidationError("aggregate_ierfs: " + std::to_string(weights.size()) +
                          " weights for " + std::to_string(ierfs.rows) + " iERFs");
  }
  RelevanceField f = RelevanceField::zeros(ierfs.height, ierfs.width, FieldKind::kSaliency);
  for (std::size_t i = 0; i < ierfs.rows; ++i) {
    if (weights[i] == 0.0) continue;
    const auto r = ierfs.row(i);
    for (std::size_t p = 0; p < f.size(); ++p) f.scores[p] += weights[i] * r[p];
  }
  return f;
}

RelevanceField propagate_relevance_backward(const SharingRatioTable& table,
                                            std::span<const double> seed,
                                            std::size_t stop_layer) {
  return propagate_relevance_backward(table, table.encoder_layer(), seed, stop_layer);
}

RelevanceField propagate_relevance_backward(const SharingRatioTable& table,
                                            std::size_t top_layer,
                                            std::span<const double> seed,
                                            std::size_t stop_layer) {
  const std::size_t top = top_layer;
  require_cut(table, stop_layer, top);
  if (seed.size() != table.layers[top].positions()) {
    throw ValidationError("relevance seed has " + std::to_string(seed.size()) +
                          " entries, seed layer has " +
                          std::to_string(table.layers[top].positions()) + " positions");
  }
  std::vector<std::vector<double>> r(top + 1);
  for (std::size_t l = stop_layer; l <= top; ++l) {
    r[l].assign(table.layers[l].positions(), 0.0);
  }
  r[top].assign(seed.begin(), seed.end());
  for (std::size_t k = top; k > stop_layer; --k) {
    const LayerSharing& sharing = table.per_layer[k];
    for (std::size_t j = 0; j < sharing.targets.size(); ++j) {
      const double rj = r[k][j];
      if (rj == 0.0) continue;
      for (const SourceShare& s : sharing.targets[j].sources) {
        r[s.layer][s.position] += s.mu * rj;
      }
    }
  }
  const PfvLayer& out = table.layers[stop_layer];
  RelevanceField f = RelevanceField::zeros(out.height, out.width, FieldKind::kSaliency);
  f.scores = std::move(r[stop_layer]);
  return f;
}

RelevanceField propagate_relevance_backward(const Tape& tape,
                                            std::span<const double> seed) {
  return propagate_relevance_backward(build_sharing_table(tape), seed, 0);
}

}  // namespace ierf
