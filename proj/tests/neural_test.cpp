#include <cmath>
#include <cstring>
#include <vector>

#include <gtest/gtest.h>

#include "ctdqn/neural/adam.hpp"
#include "ctdqn/neural/gradcheck.hpp"
#include "ctdqn/neural/network.hpp"
#include "ctdqn/neural/serialize.hpp"
#include "ctdqn/rng.hpp"

using namespace ctdqn;
using namespace ctdqn::neural;

namespace {

// Independent straightforward re-implementation of a dense stack; plain
// sequential accumulation, no blocking. Oracle for the forward pass.
std::vector<double> naive_dense_forward(const Network& net,
                                        const std::vector<double>& input) {
  std::vector<double> x = input;
  for (const auto& layer : net.layers()) {
    const auto& d = std::get<DenseLayer>(layer);
    std::vector<double> y(d.out);
    for (int o = 0; o < d.out; ++o) {
      double acc = d.bias[o];
      for (int i = 0; i < d.in; ++i) acc += d.weights[o * d.in + i] * x[i];
      y[o] = d.activation == Activation::kRelu ? std::max(0.0, acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

Network identity2(Activation act) {
  Network net(Shape3{1, 1, 2});
  net.add_dense(2, act);
  auto& d = std::get<DenseLayer>(net.layers()[0]);
  d.weights = {1.0, 0.0, 0.0, 1.0};
  d.bias = {0.0, 0.0};
  return net;
}

}  // namespace

TEST(NetworkForward, IdentityLinear) {
  Network net = identity2(Activation::kLinear);
  const std::vector<double> out = net.forward(std::vector<double>{2.0, -3.0});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_DOUBLE_EQ(out[1], -3.0);
}

TEST(NetworkForward, IdentityReluClampsNegatives) {
  Network net = identity2(Activation::kRelu);
  const std::vector<double> out = net.forward(std::vector<double>{2.0, -3.0});
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
}

TEST(NetworkForward, MatchesNaiveReimplementation) {
  Network net(Shape3{1, 1, 7});
  net.add_dense(11, Activation::kRelu).add_dense(3, Activation::kLinear);
  Rng rng(42);
  net.init_params(rng);
  std::vector<double> input(7);
  for (auto& v : input) v = rng.uniform(-2.0, 2.0);
  const std::vector<double> got = net.forward(input);
  const std::vector<double> want = naive_dense_forward(net, input);
  ASSERT_EQ(got.size(), want.size());
  for (size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(NetworkForward, RejectsShapeMismatch) {
  Network net = identity2(Activation::kLinear);
  EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(NetworkForward, DeterministicBitIdentical) {
  Network net(Shape3{1, 1, 5});
  net.add_dense(16, Activation::kRelu).add_dense(4, Activation::kLinear);
  Rng rng(7);
  net.init_params(rng);
  std::vector<double> input = {0.3, -1.2, 0.0, 2.5, -0.7};
  const std::vector<double> a = net.forward(input);
  const std::vector<double> b = net.forward(input);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(NetworkForward, BatchPathMatchesSinglePath) {
  Network net(Shape3{6, 6, 2});
  net.add_conv(3, 3, 1, Activation::kRelu).add_dense(5, Activation::kLinear);
  Rng rng(11);
  net.init_params(rng);
  const int batch = 4;
  std::vector<double> inputs(batch * net.input_size());
  for (auto& v : inputs) v = rng.uniform(-1.0, 1.0);

  ForwardCache batch_cache;
  net.forward_batch(inputs, batch, batch_cache);
  for (int m = 0; m < batch; ++m) {
    const std::vector<double> single = net.forward(
        std::span<const double>(inputs.data() + m * net.input_size(), net.input_size()));
    for (int o = 0; o < net.output_size(); ++o)
      EXPECT_EQ(single[o], batch_cache.act.back()[m * net.output_size() + o]);
  }
}

TEST(Conv2dForward, OnesImageOnesFilter) {
  ConvLayer layer;
  layer.count = 1;
  layer.kh = layer.kw = 2;
  layer.in_channels = 1;
  layer.stride = 1;
  layer.filters.assign(4, 1.0);
  layer.bias.assign(1, 0.0);
  const std::vector<double> image(9, 1.0);
  const std::vector<double> out = conv2d_forward(layer, image, Shape3{3, 3, 1});
  ASSERT_EQ(out.size(), 4u);
  for (double v : out) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(Conv2dForward, ZeroImageGivesZeroOutput) {
  ConvLayer layer;
  layer.count = 2;
  layer.kh = layer.kw = 3;
  layer.in_channels = 1;
  layer.stride = 2;
  layer.filters.assign(2 * 9, 0.5);
  layer.bias.assign(2, 0.0);
  const std::vector<double> image(49, 0.0);
  const std::vector<double> out = conv2d_forward(layer, image, Shape3{7, 7, 1});
  for (double v : out) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Conv2dForward, KernelLargerThanImageRejected) {
  ConvLayer layer;
  layer.count = 1;
  layer.kh = layer.kw = 5;
  layer.in_channels = 1;
  layer.stride = 1;
  layer.filters.assign(25, 0.0);
  layer.bias.assign(1, 0.0);
  const std::vector<double> image(16, 0.0);
  EXPECT_THROW(conv2d_forward(layer, image, Shape3{4, 4, 1}), std::invalid_argument);
}

TEST(Conv2dForward, ImageNetworkShapeChain) {
  // 94x94x3 -> 7x7 stride 3 -> 30x30x6 -> 4x4 stride 1 -> 27x27x12 -> 8748.
  Network net(Shape3{94, 94, 3});
  net.add_conv(6, 7, 3, Activation::kRelu);
  EXPECT_EQ(net.shape_after(0), (Shape3{30, 30, 6}));
  net.add_conv(12, 4, 1, Activation::kRelu);
  EXPECT_EQ(net.shape_after(1), (Shape3{27, 27, 12}));
  EXPECT_EQ(net.shape_after(1).size(), 8748);
  net.add_dense(216, Activation::kRelu);
  net.add_dense(5, Activation::kLinear);
  EXPECT_EQ(net.output_size(), 5);
}

TEST(NetworkBackward, LinearLayerClosedForm) {
  // Single linear layer; with dLoss/dOut = (pred - target) the weight gradient
  // is exactly (pred - target) * input^T.
  Network net(Shape3{1, 1, 3});
  net.add_dense(2, Activation::kLinear);
  auto& d = std::get<DenseLayer>(net.layers()[0]);
  d.weights = {0.5, -1.0, 2.0, 1.5, 0.25, -0.75};
  d.bias = {0.1, -0.2};
  const std::vector<double> input = {1.0, -2.0, 3.0};
  ForwardCache cache;
  const std::vector<double> pred = net.forward(input, cache);
  const std::vector<double> target = {1.0, 0.0};
  std::vector<double> dloss = {pred[0] - target[0], pred[1] - target[1]};
  Gradients grads = net.make_gradients();
  net.backward(cache, dloss, grads);
  for (int o = 0; o < 2; ++o) {
    EXPECT_DOUBLE_EQ(grads.bias[0][o], dloss[o]);
    for (int i = 0; i < 3; ++i)
      EXPECT_DOUBLE_EQ(grads.weights[0][o * 3 + i], dloss[o] * input[i]);
  }
}

TEST(NetworkBackward, ZeroLossGradientGivesZeroGradients) {
  Network net(Shape3{1, 1, 4});
  net.add_dense(8, Activation::kRelu).add_dense(3, Activation::kLinear);
  Rng rng(3);
  net.init_params(rng);
  ForwardCache cache;
  net.forward(std::vector<double>{0.1, 0.2, -0.3, 0.4}, cache);
  Gradients grads = net.make_gradients();
  net.backward(cache, std::vector<double>{0.0, 0.0, 0.0}, grads);
  for (const auto& g : grads.weights)
    for (double v : g) EXPECT_DOUBLE_EQ(v, 0.0);
  for (const auto& g : grads.bias)
    for (double v : g) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(NetworkBackward, MismatchedCacheRejected) {
  Network small(Shape3{1, 1, 2});
  small.add_dense(2, Activation::kLinear);
  Network big(Shape3{1, 1, 2});
  big.add_dense(3, Activation::kRelu);
  big.add_dense(2, Activation::kLinear);
  Rng rng(5);
  small.init_params(rng);
  big.init_params(rng);
  ForwardCache cache;
  small.forward(std::vector<double>{1.0, 1.0}, cache);
  Gradients grads = big.make_gradients();
  EXPECT_THROW(big.backward(cache, std::vector<double>{1.0, 0.0}, grads),
               std::invalid_argument);
}

TEST(NetworkBackward, FiniteDifferenceSmallRandomNet) {
  Network net(Shape3{1, 1, 3});
  net.add_dense(6, Activation::kRelu).add_dense(2, Activation::kLinear);
  Rng rng(17);
  net.init_params(rng);
  std::vector<double> input = {0.4, -0.9, 1.3};
  EXPECT_LT(finite_difference_check(net, input, 1e-6), 1e-6);
}

TEST(GradCheck, LinearNetworkIsExact) {
  Network net(Shape3{1, 1, 4});
  net.add_dense(3, Activation::kLinear);
  Rng rng(23);
  net.init_params(rng);
  std::vector<double> input = {1.0, -0.5, 0.25, 2.0};
  // The probe loss is quadratic in the parameters of a linear net, so central
  // differences carry no truncation error; a larger eps just reduces the
  // floating-point cancellation in (L+ - L-).
  EXPECT_LT(finite_difference_check(net, input, 1e-2), 1e-10);
}

TEST(GradCheck, PendulumArchitecture) {
  Network net(Shape3{1, 1, 2});
  net.add_dense(128, Activation::kRelu)
      .add_dense(64, Activation::kRelu)
      .add_dense(5, Activation::kLinear);
  Rng rng(31);
  net.init_params(rng);
  std::vector<double> input = {0.7, -1.9};
  EXPECT_LT(finite_difference_check(net, input, 1e-6), 1e-6);
}

TEST(GradCheck, ConvDenseStackOnToyImage) {
  Network net(Shape3{8, 8, 1});
  net.add_conv(2, 3, 1, Activation::kRelu)
      .add_conv(3, 2, 2, Activation::kRelu)
      .add_dense(4, Activation::kLinear);
  Rng rng(37);
  net.init_params(rng);
  std::vector<double> input(64);
  for (auto& v : input) v = rng.uniform(-1.0, 1.0);
  EXPECT_LT(finite_difference_check(net, input, 1e-6), 1e-6);
}

TEST(GradCheck, RejectsNonPositiveEps) {
  Network net(Shape3{1, 1, 1});
  net.add_dense(1, Activation::kLinear);
  EXPECT_THROW(finite_difference_check(net, std::vector<double>{1.0}, 0.0),
               std::invalid_argument);
}

TEST(ReluProperty, ActivationsNonNegative) {
  Network net(Shape3{1, 1, 3});
  net.add_dense(12, Activation::kRelu).add_dense(6, Activation::kRelu);
  Rng rng(41);
  net.init_params(rng);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> input = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                                 rng.uniform(-5.0, 5.0)};
    ForwardCache cache;
    net.forward(input, cache);
    for (const auto& layer_act : cache.act)
      for (double v : layer_act) EXPECT_GE(v, 0.0);
  }
}

TEST(AdamStep, ZeroGradientLeavesParamsUnchanged) {
  Network net(Shape3{1, 1, 2});
  net.add_dense(2, Activation::kLinear);
  Rng rng(2);
  net.init_params(rng);
  const auto before = std::get<DenseLayer>(net.layers()[0]).weights;
  AdamState state = AdamState::for_network(net);
  Gradients grads = net.make_gradients();
  adam_step(net, grads, state, 0.001);
  EXPECT_EQ(state.step, 1u);
  const auto& after = std::get<DenseLayer>(net.layers()[0]).weights;
  for (size_t i = 0; i < before.size(); ++i) EXPECT_DOUBLE_EQ(before[i], after[i]);

  // With history the moments decay toward zero under zero gradients.
  state.m_weights[0][0] = 1.0;
  state.v_weights[0][0] = 1.0;
  adam_step(net, grads, state, 0.0);
  EXPECT_DOUBLE_EQ(state.m_weights[0][0], 0.9);
  EXPECT_DOUBLE_EQ(state.v_weights[0][0], 0.999);
}

TEST(AdamStep, FirstStepMovesBySignTimesAlpha) {
  Network net(Shape3{1, 1, 1});
  net.add_dense(1, Activation::kLinear);
  auto& d = std::get<DenseLayer>(net.layers()[0]);
  d.weights = {0.5};
  AdamState state = AdamState::for_network(net);
  Gradients grads = net.make_gradients();
  grads.weights[0][0] = 0.3;
  const double alpha = 0.001;
  adam_step(net, grads, state, alpha);
  // Bias-corrected first step: -alpha * g / (|g| + eps) ~ -alpha * sign(g).
  EXPECT_NEAR(d.weights[0], 0.5 - alpha, 1e-9);
}

TEST(AdamStep, QuadraticLossDecreasesMonotonically) {
  // f(p) = (p - 3)^2 from p = 0; two identical-setup steps.
  Network net(Shape3{1, 1, 1});
  net.add_dense(1, Activation::kLinear);
  auto& d = std::get<DenseLayer>(net.layers()[0]);
  d.weights = {0.0};
  AdamState state = AdamState::for_network(net);
  double prev_loss = (d.weights[0] - 3.0) * (d.weights[0] - 3.0);
  for (int i = 0; i < 2; ++i) {
    Gradients grads = net.make_gradients();
    grads.weights[0][0] = 2.0 * (d.weights[0] - 3.0);
    adam_step(net, grads, state, 0.05);
    const double loss = (d.weights[0] - 3.0) * (d.weights[0] - 3.0);
    EXPECT_LT(loss, prev_loss);
    prev_loss = loss;
  }
}

TEST(AdamStep, NonFiniteGradientRejected) {
  Network net(Shape3{1, 1, 1});
  net.add_dense(1, Activation::kLinear);
  AdamState state = AdamState::for_network(net);
  Gradients grads = net.make_gradients();
  grads.weights[0][0] = std::nan("");
  EXPECT_THROW(adam_step(net, grads, state, 0.001), std::runtime_error);
}

TEST(Serialize, RoundTripPreservesForwardBits) {
  Network net(Shape3{6, 6, 1});
  net.add_conv(2, 3, 1, Activation::kRelu).add_dense(3, Activation::kLinear);
  Rng rng(51);
  net.init_params(rng);
  const json doc = network_to_json(net);
  const Network back = network_from_json(json::parse(doc.dump()));
  std::vector<double> input(36);
  for (auto& v : input) v = rng.uniform(-1.0, 1.0);
  const auto a = net.forward(input);
  const auto b = back.forward(input);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(Serialize, AdamStateRoundTrip) {
  Network net(Shape3{1, 1, 2});
  net.add_dense(2, Activation::kLinear);
  AdamState state = AdamState::for_network(net);
  state.step = 7;
  state.m_weights[0] = {0.1, -0.2, 0.3, 0.4};
  state.v_weights[0] = {0.5, 0.6, 0.7, 0.8};
  const AdamState back = adam_from_json(adam_to_json(state), net);
  EXPECT_EQ(back.step, 7u);
  EXPECT_EQ(back.m_weights[0], state.m_weights[0]);
  EXPECT_EQ(back.v_weights[0], state.v_weights[0]);
}
