#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ierf/tensor/tensor.h"

namespace ierf {

enum class OpKind {
  kConv2d,
  kLinear,
  kRelu,
  kLeakyRelu,
  kElu,
  kGelu,
  kSwish,
  kTanh,
  kMaxPool,
  kAvgPool,
  kGlobalAvgPool,
  kBatchNorm,
  kResidualAdd,
  kFlatten,
  kSoftmax,
};

std::string_view op_kind_name(OpKind kind);
std::optional<OpKind> parse_op_kind(std::string_view name);
// Pointwise nonlinearities; these delimit the affine segments SRD decomposes.
bool is_activation(OpKind kind);

// One layer. Value ids: 0 is the network input, node i produces value i + 1.
struct OpNode {
  OpKind kind = OpKind::kRelu;
  std::string name;
  std::vector<int> inputs;

  // conv2d: weight (Cout, Cin, k, k), bias (Cout). linear: weight (out, in),
  // bias (out).
  Tensor weight;
  Tensor bias;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  double slope = 0.01;  // leaky-relu
  double alpha = 1.0;   // elu

  // batchnorm-inference: frozen per-channel statistics.
  Tensor mean;
  Tensor var;
  Tensor scale;
  Tensor shift;
  double eps = 1e-5;

  bool operator==(const OpNode&) const = default;
};

struct NetworkGraph {
  Shape input_shape;
  std::vector<OpNode> nodes;
  // Value id of the final encoder activation (layer L). The classifier head
  // follows it.
  int encoder_output = -1;
  std::vector<std::string> class_names;

  int num_values() const { return static_cast<int>(nodes.size()) + 1; }
  int output_value() const { return static_cast<int>(nodes.size()); }
  const OpNode& producer(int value) const { return nodes.at(value - 1); }

  // "input" or a node name.
  std::string value_name(int value) const;
  // Throws ConfigError when the name is unknown.
  int value_id(std::string_view name) const;

  // Shapes of every value, validating parameter and input consistency.
  // Throws ConfigError naming the first offending layer.
  std::vector<Shape> infer_shapes() const;

  bool operator==(const NetworkGraph&) const = default;
};

// Convenience builder used by toy models, tests and benchmarks.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(Shape input_shape);

  int input() const { return 0; }
  int conv2d(int in, Tensor weight, Tensor bias, std::size_t stride = 1,
             std::size_t padding = 0, std::string name = "");
  int linear(int in, Tensor weight, Tensor bias, std::string name = "");
  int activation(int in, OpKind kind, std::string name = "");
  int leaky_relu(int in, double slope, std::string name = "");
  int elu(int in, double alpha, std::string name = "");
  int max_pool(int in, std::size_t kernel, std::size_t stride,
               std::size_t padding = 0, std::string name = "");
  int avg_pool(int in, std::size_t kernel, std::size_t stride,
               std::size_t padding = 0, std::string name = "");
  int global_avg_pool(int in, std::string name = "");
  int batch_norm(int in, Tensor mean, Tensor var, Tensor scale, Tensor shift,
                 double eps = 1e-5, std::string name = "");
  int residual_add(int a, int b, std::string name = "");
  int flatten(int in, std::string name = "");
  int softmax(int in, std::string name = "");

  void set_encoder_output(int value) { net_.encoder_output = value; }
  void set_class_names(std::vector<std::string> names) {
    net_.class_names = std::move(names);
  }

  // Validates shapes. Defaults the encoder output to the last rank-3 value
  // when unset.
  NetworkGraph build() const;

 private:
  int push(OpNode node);

  NetworkGraph net_;
};

}  // namespace ierf
