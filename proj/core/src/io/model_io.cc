#include "ierf/io/model_io.h"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "ierf/error.h"

namespace ierf {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "weight blobs are read with native little-endian layout");

constexpr const char* kParamNames[] = {"weight", "bias", "mean", "var", "scale", "shift"};

Tensor* param(OpNode& n, std::string_view name) {
  if (name == "weight") return &n.weight;
  if (name == "bias") return &n.bias;
  if (name == "mean") return &n.mean;
  if (name == "var") return &n.var;
  if (name == "scale") return &n.scale;
  if (name == "shift") return &n.shift;
  return nullptr;
}

const Tensor* param(const OpNode& n, std::string_view name) {
  return param(const_cast<OpNode&>(n), name);
}

bool uses_window(OpKind k) {
  return k == OpKind::kConv2d || k == OpKind::kMaxPool || k == OpKind::kAvgPool;
}

Tensor read_blob(const json& ref, const std::string& blob, const std::string& where) {
  const std::size_t offset = ref.at("offset").get<std::size_t>();
  const std::size_t length = ref.at("length").get<std::size_t>();
  const Shape shape = ref.at("shape").get<Shape>();
  if (length != shape_size(shape) * sizeof(double)) {
    throw IntegrityError(where + ": blob length " + std::to_string(length) +
                         " does not match shape " + shape_string(shape));
  }
  if (offset > blob.size() || blob.size() - offset < length) {
    throw IntegrityError(where + ": blob [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") lies outside the " +
                         std::to_string(blob.size()) + "-byte weights file");
  }
  std::vector<double> data(shape_size(shape));
  if (length > 0) std::memcpy(data.data(), blob.data() + offset, length);
  return Tensor(shape, std::move(data));
}

std::string input_name(const NetworkGraph& net, int value) { return net.value_name(value); }

}  // namespace

ModelBundle load_model_bundle(const std::filesystem::path& manifest) {
  const std::string text = read_file(manifest);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(manifest.string() + ": " + e.what() + " (byte " +
                     std::to_string(e.byte) + ")");
  }
  ModelBundle bundle;
  NetworkGraph& net = bundle.net;
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ValidationError(manifest.string() + ": unsupported model version " +
                            std::to_string(version));
    }
    net.input_shape = j.at("input_shape").get<Shape>();
    net.class_names = j.value("class_names", std::vector<std::string>{});
    if (j.contains("normalization")) {
      const json& n = j["normalization"];
      bundle.normalization = Normalization{n.at("mean").get<std::vector<double>>(),
                                           n.at("std").get<std::vector<double>>()};
    }
    std::filesystem::path weights = manifest.parent_path() / j.at("weights").get<std::string>();
    std::string blob;
    try {
      blob = read_file(weights);
    } catch (const InputError&) {
      throw IntegrityError(manifest.string() + ": weights file '" + weights.string() +
                           "' is missing");
    }

    std::vector<Shape> declared;
    for (const json& l : j.at("layers")) {
      OpNode n;
      n.name = l.at("name").get<std::string>();
      if (n.name.empty() || n.name == "input") {
        throw ValidationError("layer name '" + n.name + "' is reserved or empty");
      }
      for (const OpNode& prev : net.nodes) {
        if (prev.name == n.name) throw ValidationError("duplicate layer name '" + n.name + "'");
      }
      const std::string kind = l.at("kind").get<std::string>();
      const auto k = parse_op_kind(kind);
      if (!k) throw ParseError("layer '" + n.name + "': unknown kind '" + kind + "'");
      n.kind = *k;
      for (const json& in : l.at("inputs")) {
        const std::string name = in.get<std::string>();
        try {
          n.inputs.push_back(net.value_id(name));
        } catch (const ConfigError&) {
          throw ValidationError("broken edge '" + name + "' -> '" + n.name +
                                "': input is not defined earlier");
        }
      }
      n.kernel = l.value("kernel", std::size_t{1});
      n.stride = l.value("stride", std::size_t{1});
      n.padding = l.value("padding", std::size_t{0});
      n.slope = l.value("slope", 0.01);
      n.alpha = l.value("alpha", 1.0);
      n.eps = l.value("eps", 1e-5);
      if (l.contains("params")) {
        for (const auto& [pname, ref] : l["params"].items()) {
          Tensor* t = param(n, pname);
          if (!t) throw ParseError("layer '" + n.name + "': unknown parameter '" + pname + "'");
          *t = read_blob(ref, blob, "layer '" + n.name + "' parameter '" + pname + "'");
        }
      }
      declared.push_back(l.contains("output_shape") ? l["output_shape"].get<Shape>() : Shape{});
      net.nodes.push_back(std::move(n));
    }

    std::vector<Shape> shapes;
    try {
      shapes = net.infer_shapes();
    } catch (const ConfigError& e) {
      throw ValidationError(manifest.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
      if (!declared[i].empty() && declared[i] != shapes[i + 1]) {
        const OpNode& n = net.nodes[i];
        throw ValidationError(manifest.string() + ": broken edge '" +
                              input_name(net, n.inputs.front()) + "' -> '" + n.name +
                              "': declared output " + shape_string(declared[i]) +
                              " but parameters give " + shape_string(shapes[i + 1]));
      }
    }
    if (j.contains("encoder_output")) {
      net.encoder_output = net.value_id(j["encoder_output"].get<std::string>());
      if (shapes[net.encoder_output].size() != 3) {
        throw ValidationError("encoder output '" + j["encoder_output"].get<std::string>() +
                              "' is not a (C,H,W) value");
      }
    } else {
      for (int v = net.num_values() - 1; v >= 0; --v) {
        if (shapes[v].size() == 3) {
          net.encoder_output = v;
          break;
        }
      }
    }
    if (!net.class_names.empty() && net.class_names.size() != shapes.back()[0]) {
      throw ValidationError("model declares " + std::to_string(net.class_names.size()) +
                            " class names but produces " + std::to_string(shapes.back()[0]) +
                            " logits");
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  return bundle;
}

NetworkGraph load_model(const std::filesystem::path& manifest) {
  return load_model_bundle(manifest).net;
}

void save_model(const NetworkGraph& net, const std::filesystem::path& manifest,
                const std::optional<Normalization>& normalization) {
  const std::vector<Shape> shapes = net.infer_shapes();
  std::filesystem::path weights = manifest.filename();
  weights.replace_extension(".bin");
  std::string blob;
  json layers = json::array();
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const OpNode& n = net.nodes[i];
    json l = {{"name", n.name},
              {"kind", std::string(op_kind_name(n.kind))},
              {"output_shape", shapes[i + 1]}};
    json inputs = json::array();
    for (int in : n.inputs) inputs.push_back(net.value_name(in));
    l["inputs"] = inputs;
    if (uses_window(n.kind)) {
      l["kernel"] = n.kernel;
      l["stride"] = n.stride;
      l["padding"] = n.padding;
    }
    if (n.kind == OpKind::kLeakyRelu) l["slope"] = n.slope;
    if (n.kind == OpKind::kElu) l["alpha"] = n.alpha;
    if (n.kind == OpKind::kBatchNorm) l["eps"] = n.eps;
    json params = json::object();
    for (const char* pname : kParamNames) {
      const Tensor* t = param(n, pname);
      if (t->empty()) continue;
      const std::size_t length = t->size() * sizeof(double);
      params[pname] = {{"offset", blob.size()}, {"length", length}, {"shape", t->shape()}};
      blob.append(reinterpret_cast<const char*>(t->data().data()), length);
    }
    if (!params.empty()) l["params"] = params;
    layers.push_back(std::move(l));
  }
  json j = {{"version", kModelFormatVersion},
            {"input_shape", net.input_shape},
            {"class_names", net.class_names},
            {"weights", weights.string()},
            {"layers", layers}};
  if (net.encoder_output >= 0) j["encoder_output"] = net.value_name(net.encoder_output);
  if (normalization) {
    j["normalization"] = {{"mean", normalization->mean}, {"std", normalization->std}};
  }
  write_file(manifest.parent_path() / weights, blob);
  write_file(manifest, j.dump(2) + "\n");
}

}  // namespace ierf
