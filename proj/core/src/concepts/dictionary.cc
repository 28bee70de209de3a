#include "ierf/concepts/dictionary.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ierf/concepts/kmeans.h"
#include "ierf/error.h"
#include "ierf/io/image.h"

namespace ierf {
namespace {

using nlohmann::json;

constexpr char kCoeffMagic[8] = {'I', 'E', 'R', 'F', 'C', 'O', 'E', 'F'};

// Row-major bytes for a matrix, for layout-independent files.
void append_matrix(std::string& blob, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      blob.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

json blob_ref(std::string& blob, const Eigen::MatrixXd& m) {
  const std::size_t offset = blob.size();
  append_matrix(blob, m);
  return {{"offset", offset},
          {"length", blob.size() - offset},
          {"shape", {m.rows(), m.cols()}}};
}

Eigen::MatrixXd read_matrix(const json& ref, const std::string& blob, const std::string& what) {
  const std::size_t offset = ref.at("offset").get<std::size_t>();
  const std::size_t length = ref.at("length").get<std::size_t>();
  const auto shape = ref.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 ||
      length != static_cast<std::size_t>(shape[0] * shape[1]) * sizeof(double) ||
      offset > blob.size() || blob.size() - offset < length) {
    throw IntegrityError("dictionary blob '" + what + "' is inconsistent with its file");
  }
  Eigen::MatrixXd m(shape[0], shape[1]);
  const char* p = blob.data() + offset;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::memcpy(&m(r, c), p, sizeof(double));
      p += sizeof(double);
    }
  }
  return m;
}

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) throw IntegrityError("coefficient file truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

}  // namespace

Eigen::MatrixXd pfv_matrix(const Tensor& t) {
  if (t.rank() != 3) throw ConfigError("PFV matrix needs a (C,H,W) tensor");
  const std::size_t c = t.dim(0), hw = t.dim(1) * t.dim(2);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(hw), static_cast<Eigen::Index>(c));
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < hw; ++p) {
      x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = t[k * hw + p];
    }
  }
  return x;
}

Tensor pfv_tensor(const Eigen::MatrixXd& x, std::size_t height, std::size_t width) {
  const std::size_t hw = height * width, c = static_cast<std::size_t>(x.cols());
  if (static_cast<std::size_t>(x.rows()) != hw) {
    throw ValidationError("PFV matrix has " + std::to_string(x.rows()) + " rows, grid has " +
                          std::to_string(hw) + " positions");
  }
  Tensor t({c, height, width});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < hw; ++p) {
      t[k * hw + p] = x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
    }
  }
  return t;
}

Eigen::MatrixXd sample_matrix(const std::vector<PfvSample>& samples) {
  if (samples.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(samples.size()), samples.front().vector.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = samples[i].vector.transpose();
  }
  return m;
}

std::string_view extractor_name(Extractor e) { return e == Extractor::kSae ? "sae" : "kmeans"; }

std::optional<Extractor> parse_extractor(std::string_view name) {
  if (name == "kmeans") return Extractor::kKMeans;
  if (name == "sae") return Extractor::kSae;
  return std::nullopt;
}

Eigen::MatrixXd ConceptDictionary::reconstruct(const Eigen::MatrixXd& u) const {
  Eigen::MatrixXd x = u * v.transpose();
  if (offset.size() > 0) x.rowwise() += offset.transpose();
  return x;
}

std::size_t dictionary_size(std::size_t channels, const DictionaryOptions& o) {
  if (o.k > 0) return o.k;
  if (!(o.k_ratio > 0.0)) throw ConfigError("dictionary: k-ratio must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(o.k_ratio * static_cast<double>(channels))));
}

std::vector<std::vector<Exemplar>> nearest_exemplars(const Eigen::MatrixXd& v,
                                                     const std::vector<PfvSample>& samples,
                                                     std::size_t n) {
  std::vector<std::vector<Exemplar>> out(static_cast<std::size_t>(v.cols()));
  std::vector<double> norms(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) norms[i] = samples[i].vector.norm();
  for (Eigen::Index q = 0; q < v.cols(); ++q) {
    const double vn = v.col(q).norm();
    std::vector<Exemplar> cand;
    cand.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double denom = vn * norms[i];
      const double cos = denom > 0.0 ? v.col(q).dot(samples[i].vector) / denom : 0.0;
      cand.push_back({samples[i].image, samples[i].position, cos});
    }
    const std::size_t keep = std::min(n, cand.size());
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Exemplar& a, const Exemplar& b) { return a.cosine > b.cosine; });
    cand.resize(keep);
    out[static_cast<std::size_t>(q)] = std::move(cand);
  }
  return out;
}

ConceptDictionary build_dictionary(const std::string& layer,
                                   const std::vector<PfvSample>& samples,
                                   const DictionaryOptions& options, std::uint64_t seed) {
  if (samples.empty()) throw ValidationError("dictionary for '" + layer + "': no samples");
  const Eigen::MatrixXd x = sample_matrix(samples);
  const std::size_t k = dictionary_size(static_cast<std::size_t>(x.cols()), options);
  ConceptDictionary d;
  d.layer = layer;
  d.extractor = options.extractor;
  if (options.extractor == Extractor::kKMeans) {
    d.v = bisecting_kmeans(x, k, seed).centroids;
    d.offset = Eigen::VectorXd::Zero(x.cols());
  } else {
    SaeTraining t = train_sae(x, k, options.sae_lambda, options.sae, seed);
    d.v = t.model.w_d;
    d.offset = -t.model.b_h;
    d.sae = std::move(t.model);
  }
  d.exemplars = nearest_exemplars(d.v, samples, options.exemplars);
  return d;
}

CoefficientMap coefficient_map(const ConceptDictionary& dict, const Eigen::MatrixXd& x,
                               double lasso_lambda) {
  if (dict.extractor == Extractor::kSae && dict.sae) {
    if (!x.allFinite()) throw InputError("coefficients: non-finite activations");
    CoefficientMap m;
    m.u = dict.sae->encode_rows(x);
    m.lambda = dict.sae->lambda;
    const Eigen::MatrixXd r = x - dict.reconstruct(m.u);
    for (Eigen::Index p = 0; p < r.rows(); ++p) m.residual_norms.push_back(r.row(p).norm());
    return m;
  }
  return lasso_coefficients(dict.v, x, lasso_lambda, dict.offset);
}

std::filesystem::path dictionary_path(const std::filesystem::path& dir, const std::string& layer) {
  return dir / ("concepts_" + layer + ".json");
}

void save_dictionary(const ConceptDictionary& d, const std::filesystem::path& dir) {
  const std::filesystem::path json_path = dictionary_path(dir, d.layer);
  std::filesystem::path bin = json_path.filename();
  bin.replace_extension(".bin");
  std::string blob;
  json blobs = {{"v", blob_ref(blob, d.v)}, {"offset", blob_ref(blob, d.offset.transpose())}};
  json j = {{"layer", d.layer},
            {"extractor", std::string(extractor_name(d.extractor))},
            {"channels", d.channels()},
            {"k", d.size()},
            {"weights", bin.string()}};
  if (d.sae) {
    blobs["sae_w_e"] = blob_ref(blob, d.sae->w_e);
    blobs["sae_w_d"] = blob_ref(blob, d.sae->w_d);
    blobs["sae_b_d"] = blob_ref(blob, d.sae->b_d.transpose());
    blobs["sae_b_h"] = blob_ref(blob, d.sae->b_h.transpose());
    j["sae_lambda"] = d.sae->lambda;
  }
  j["blobs"] = blobs;
  json ex = json::array();
  for (const auto& list : d.exemplars) {
    json l = json::array();
    for (const Exemplar& e : list) {
      l.push_back({{"image", e.image}, {"position", e.position}, {"cosine", e.cosine}});
    }
    ex.push_back(l);
  }
  j["exemplars"] = ex;
  write_file(dir / bin, blob);
  write_file(json_path, j.dump(2) + "\n");
}

ConceptDictionary load_dictionary(const std::filesystem::path& json_path) {
  json j;
  try {
    j = json::parse(read_file(json_path));
  } catch (const json::parse_error& e) {
    throw ParseError(json_path.string() + ": " + e.what());
  }
  ConceptDictionary d;
  try {
    d.layer = j.at("layer").get<std::string>();
    const auto ex = parse_extractor(j.at("extractor").get<std::string>());
    if (!ex) throw ParseError(json_path.string() + ": unknown extractor");
    d.extractor = *ex;
    std::string blob;
    const auto bin = json_path.parent_path() / j.at("weights").get<std::string>();
    try {
      blob = read_file(bin);
    } catch (const InputError&) {
      throw IntegrityError(json_path.string() + ": missing '" + bin.string() + "'");
    }
    const json& b = j.at("blobs");
    d.v = read_matrix(b.at("v"), blob, "v");
    d.offset = read_matrix(b.at("offset"), blob, "offset").row(0).transpose();
    if (b.contains("sae_w_e")) {
      SaeModel s;
      s.w_e = read_matrix(b["sae_w_e"], blob, "sae_w_e");
      s.w_d = read_matrix(b["sae_w_d"], blob, "sae_w_d");
      s.b_d = read_matrix(b["sae_b_d"], blob, "sae_b_d").row(0).transpose();
      s.b_h = read_matrix(b["sae_b_h"], blob, "sae_b_h").row(0).transpose();
      s.lambda = j.value("sae_lambda", 0.0);
      d.sae = std::move(s);
    }
    for (const json& l : j.at("exemplars")) {
      std::vector<Exemplar> list;
      for (const json& e : l) {
        list.push_back({e.at("image").get<std::size_t>(), e.at("position").get<std::size_t>(),
                        e.at("cosine").get<double>()});
      }
      d.exemplars.push_back(std::move(list));
    }
  } catch (const json::exception& e) {
    throw ParseError(json_path.string() + ": " + e.what());
  }
  return d;
}

void save_coefficients(const std::vector<CoefficientMap>& maps,
                       const std::filesystem::path& path) {
  std::string out(kCoeffMagic, sizeof kCoeffMagic);
  put<std::uint64_t>(out, maps.size());
  for (const CoefficientMap& m : maps) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.u.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.u.cols()));
    put<double>(out, m.lambda);
    append_matrix(out, m.u);
    for (double r : m.residual_norms) put<double>(out, r);
  }
  write_file(path, out);
}

std::vector<CoefficientMap> load_coefficients(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < sizeof kCoeffMagic || std::memcmp(in.data(), kCoeffMagic, sizeof kCoeffMagic) != 0) {
    throw ParseError(path.string() + ": not a coefficient file");
  }
  std::size_t pos = sizeof kCoeffMagic;
  const auto count = take<std::uint64_t>(in, pos);
  std::vector<CoefficientMap> maps;
  for (std::uint64_t i = 0; i < count; ++i) {
    CoefficientMap m;
    const auto rows = take<std::uint64_t>(in, pos);
    const auto cols = take<std::uint64_t>(in, pos);
    m.lambda = take<double>(in, pos);
    m.u.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.u.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.u.cols(); ++c) m.u(r, c) = take<double>(in, pos);
    }
    for (std::uint64_t r = 0; r < rows; ++r) m.residual_norms.push_back(take<double>(in, pos));
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace ierf
