#include <gtest/gtest.h>

#include "ierf/error.h"
#include "ierf/tensor/network.h"
#include "ierf/tensor/tape.h"
#include "ierf/toy/toy_models.h"
#include "support/oracles.h"

namespace ierf {
namespace {

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ConfigError);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(Forward, IdentityConvPassesValueThrough) {
  NetworkBuilder b({1, 1, 1});
  b.conv2d(b.input(), Tensor({1, 1, 1, 1}, 1.0), Tensor({1}, 0.0));
  const NetworkGraph net = b.build();
  const Tensor out = evaluate(net, Tensor({1, 1, 1}, 2.0));
  EXPECT_EQ(out.values(), std::vector<double>{2.0});
}

TEST(Forward, Relu) {
  NetworkBuilder b({3});
  b.activation(b.input(), OpKind::kRelu);
  EXPECT_EQ(evaluate(b.build(), Tensor::vector({-1, 0, 3})).values(),
            (std::vector<double>{0, 0, 3}));
}

TEST(Forward, TwoLayerNetMatchesHandEvaluation) {
  // W1 = [[1,2],[-1,1]], b1 = [0.5,-1]; relu; W2 = [[2,-1]], b2 = [0.25]
  // x = (1, 2): W1 x + b1 = (5.5, 0) -> relu (5.5, 0) -> 11.25
  NetworkBuilder b({2});
  int x = b.linear(b.input(), Tensor::matrix(2, 2, {1, 2, -1, 1}), Tensor::vector({0.5, -1}));
  x = b.activation(x, OpKind::kRelu);
  b.linear(x, Tensor::matrix(1, 2, {2, -1}), Tensor::vector({0.25}));
  const ForwardResult r = forward(b.build(), Tensor::vector({1, 2}));
  EXPECT_DOUBLE_EQ(r.logits[0], 11.25);
  EXPECT_EQ(r.tape.value(1).values(), (std::vector<double>{5.5, 0.0}));
}

TEST(Forward, ShapeMismatchNamesLayer) {
  NetworkBuilder b({1, 4, 4});
  b.conv2d(b.input(), Tensor({2, 1, 3, 3}), Tensor({2}), 1, 0, "first_conv");
  const NetworkGraph net = b.build();
  try {
    evaluate(net, Tensor({1, 5, 4}));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("first_conv"), std::string::npos);
  }
}

TEST(Forward, InconsistentWeightsNameLayer) {
  NetworkBuilder b({3, 4, 4});
  b.conv2d(b.input(), Tensor({2, 1, 3, 3}), Tensor({2}), 1, 0, "bad");
  try {
    b.build();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'bad'"), std::string::npos);
  }
}

TEST(Forward, TapeRecordsPreAndPostActivations) {
  Rng rng(3);
  const NetworkGraph net = toy::random_cnn({}, rng);
  const Tensor x = toy::random_tensor(net.input_shape, rng);
  const ForwardResult r = forward(net, x);
  ASSERT_EQ(r.tape.values().size(), static_cast<std::size_t>(net.num_values()));
  ASSERT_EQ(r.tape.entries().size(), net.nodes.size());
  for (const TapeEntry& e : r.tape.entries()) {
    for (int in : e.inputs) EXPECT_LT(in, e.output);
  }
  EXPECT_EQ(r.logits.shape(), Shape{3});
}

TEST(Forward, ReplayIsBitIdentical) {
  Rng rng(5);
  toy::RandomNetOptions o;
  o.activation = OpKind::kGelu;
  o.batch_norm = true;
  o.max_pool = true;
  const NetworkGraph net = toy::random_cnn(o, rng);
  const Tensor x = toy::random_tensor(net.input_shape, rng);
  const ForwardResult a = forward(net, x);
  const ForwardResult b = forward(net, x);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.tape.values(), b.tape.values());
}

TEST(Forward, AffineNetsAreAffine) {
  Rng rng(11);
  NetworkBuilder b({2, 5, 5});
  int x = b.conv2d(b.input(), toy::random_tensor({3, 2, 3, 3}, rng), toy::random_tensor({3}, rng));
  x = b.batch_norm(x, toy::random_tensor({3}, rng), Tensor({3}, 1.5),
                   toy::random_tensor({3}, rng), toy::random_tensor({3}, rng));
  x = b.avg_pool(x, 2, 1);
  x = b.global_avg_pool(x);
  b.linear(x, toy::random_tensor({2, 3}, rng), toy::random_tensor({2}, rng));
  const NetworkGraph net = b.build();
  const Tensor zero(net.input_shape, 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor in = toy::random_tensor(net.input_shape, rng);
    const double alpha = rng.uniform(-2, 2);
    const Tensor lhs = evaluate(net, alpha * in);
    const Tensor rhs = alpha * evaluate(net, in) + (1.0 - alpha) * evaluate(net, zero);
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
  }
}

TEST(Forward, AllFiniteOnFiniteInput) {
  Rng rng(17);
  for (OpKind act : {OpKind::kRelu, OpKind::kLeakyRelu, OpKind::kElu, OpKind::kGelu,
                     OpKind::kSwish, OpKind::kTanh}) {
    toy::RandomNetOptions o;
    o.activation = act;
    const NetworkGraph net = toy::random_cnn(o, rng);
    const ForwardResult r = forward(net, toy::random_tensor(net.input_shape, rng, -50, 50));
    for (const Tensor& v : r.tape.values()) EXPECT_TRUE(v.all_finite());
  }
}

TEST(Backward, LinearScale) {
  NetworkBuilder b({1});
  b.linear(b.input(), Tensor::matrix(1, 1, {2.0}), Tensor({1}, 0.0));
  const NetworkGraph net = b.build();
  const ForwardResult r = forward(net, Tensor::vector({3.0}));
  EXPECT_DOUBLE_EQ(backward(r.tape, Tensor::vector({1.0}))[0][0], 2.0);
}

TEST(Backward, ReluBlocksNegative) {
  NetworkBuilder b({1});
  b.activation(b.input(), OpKind::kRelu);
  const NetworkGraph net = b.build();
  const ForwardResult r = forward(net, Tensor::vector({-1.0}));
  EXPECT_DOUBLE_EQ(backward(r.tape, Tensor::vector({1.0}))[0][0], 0.0);
}

TEST(Backward, SeedShapeChecked) {
  NetworkBuilder b({2});
  b.activation(b.input(), OpKind::kTanh);
  const NetworkGraph net = b.build();
  const ForwardResult r = forward(net, Tensor::vector({1, 2}));
  EXPECT_THROW(backward(r.tape, Tensor::vector({1})), ConfigError);
}

class GradientCheck : public ::testing::TestWithParam<OpKind> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  Rng rng(derive_seed(2024, {static_cast<std::uint64_t>(GetParam())}));
  for (int trial = 0; trial < 100; ++trial) {
    const oracle::GradCase gc = oracle::make_grad_case(GetParam(), rng);
    const ForwardResult r = forward(gc.net, gc.input);
    const Tensor analytic = backward(r.tape, gc.seed)[0];
    const Tensor numeric = oracle::numeric_input_gradient(gc.net, gc.input, gc.seed);
    ASSERT_LT(oracle::max_relative_error(analytic, numeric), 1e-4)
        << op_kind_name(GetParam()) << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllOps, GradientCheck,
    ::testing::Values(OpKind::kConv2d, OpKind::kLinear, OpKind::kRelu, OpKind::kLeakyRelu,
                      OpKind::kElu, OpKind::kGelu, OpKind::kSwish, OpKind::kTanh,
                      OpKind::kMaxPool, OpKind::kAvgPool, OpKind::kGlobalAvgPool,
                      OpKind::kBatchNorm, OpKind::kResidualAdd, OpKind::kFlatten,
                      OpKind::kSoftmax),
    [](const auto& info) {
      std::string name(op_kind_name(info.param));
      for (char& c : name) {
        if (c == '-') c = '_';
      }
      return name;
    });

TEST(Backward, WholeNetworkGradientCheck) {
  Rng rng(99);
  toy::RandomNetOptions o;
  o.activation = OpKind::kSwish;
  o.batch_norm = true;
  o.residual = true;
  o.avg_pool = true;
  const NetworkGraph net = toy::random_cnn(o, rng);
  const Tensor x = toy::random_tensor(net.input_shape, rng);
  const Tensor seed = toy::random_tensor({3}, rng);
  const ForwardResult r = forward(net, x);
  EXPECT_LT(oracle::max_relative_error(backward(r.tape, seed)[0],
                                       oracle::numeric_input_gradient(net, x, seed)),
            1e-4);
}

TEST(Subnetwork, WholeRangeEqualsForward) {
  Rng rng(1);
  const NetworkGraph net = toy::random_cnn({}, rng);
  const NetworkGraph sub = subnetwork(net, 0, net.output_value());
  const Tensor x = toy::random_tensor(net.input_shape, rng);
  EXPECT_EQ(evaluate(sub, x), evaluate(net, x));
}

TEST(Subnetwork, CompositionMatchesDirect) {
  Rng rng(2);
  toy::RandomNetOptions o;
  o.residual = true;
  const NetworkGraph net = toy::random_cnn(o, rng);
  const int a = net.value_id("act1"), b = net.value_id("act2"), c = net.value_id("act3");
  const NetworkGraph ab = subnetwork(net, a, b), bc = subnetwork(net, b, c),
                     ac = subnetwork(net, a, c);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = toy::random_tensor(ab.input_shape, rng);
    EXPECT_LT(max_abs_diff(evaluate(bc, evaluate(ab, x)), evaluate(ac, x)), 1e-9);
  }
}

TEST(Subnetwork, RejectsEmptyOrReversedRange) {
  Rng rng(4);
  const NetworkGraph net = toy::random_cnn({}, rng);
  const int a = net.value_id("act2");
  EXPECT_THROW(subnetwork(net, a, a), RangeError);
  EXPECT_THROW(subnetwork(net, a, a - 1), RangeError);
}

TEST(Subnetwork, RejectsBypassedStart) {
  Rng rng(6);
  toy::RandomNetOptions o;
  o.residual = true;
  const NetworkGraph net = toy::random_cnn(o, rng);
  // add2 draws from act1 directly, so conv2 is not a valid start.
  EXPECT_THROW(subnetwork(net, net.value_id("conv2"), net.value_id("act2")), RangeError);
}

}  // namespace
}  // namespace ierf
