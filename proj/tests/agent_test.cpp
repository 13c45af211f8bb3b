#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include <gtest/gtest.h>

#include "ctdqn/agent/config.hpp"
#include "ctdqn/agent/dqn.hpp"
#include "ctdqn/agent/replay.hpp"
#include "ctdqn/rng.hpp"

using namespace ctdqn;
using namespace ctdqn::agent;
using neural::Activation;
using neural::Network;
using neural::Shape3;

namespace {

using Obs1 = std::array<double, 1>;

// 1-input n-action linear net with hand-set rows.
Network linear_net(const std::vector<double>& weights, const std::vector<double>& bias) {
  Network net(Shape3{1, 1, 1});
  net.add_dense(static_cast<int>(bias.size()), Activation::kLinear);
  auto& d = std::get<neural::DenseLayer>(net.layers()[0]);
  d.weights = weights;
  d.bias = bias;
  return net;
}

Transition<Obs1> make_transition(double s, int a, double r, double s2, bool terminal) {
  return Transition<Obs1>{{s}, a, r, {s2}, terminal};
}

}  // namespace

TEST(MixingProbabilities, PureDqnNeverUsesTutor) {
  const CtDqnConfig cfg = CtDqnConfig::dqn(0.1, 0.99, 0.001, 1000);
  const MixingProbabilities p = mixing_probabilities(cfg);
  EXPECT_DOUBLE_EQ(p.tutor_control, 0.0);
  EXPECT_DOUBLE_EQ(p.tutor_random, 0.0);
  EXPECT_DOUBLE_EQ(p.rl_greedy, 0.9);
  EXPECT_DOUBLE_EQ(p.rl_random, 0.1);
}

TEST(MixingProbabilities, WorkedOmegaExample) {
  // omega = 0.05, eps = 0.1: beta = 1 - 0.05/0.9 ~ 0.9444, so
  // P(rl_greedy) = 0.85, P(tutor_control) = 0.05, total random = 0.10.
  const CtDqnConfig cfg = CtDqnConfig::ctdqn(0.05, 0.1, 0.99, 0.001, 1000);
  const MixingProbabilities p = mixing_probabilities(cfg);
  EXPECT_NEAR(cfg.beta, 1.0 - 0.05 / 0.9, 1e-15);
  EXPECT_NEAR(p.rl_greedy, 0.85, 1e-12);
  EXPECT_NEAR(p.tutor_control, 0.05, 1e-12);
  EXPECT_NEAR(p.rl_random + p.tutor_random, 0.10, 1e-12);
}

TEST(MixingProbabilities, AllTutorCorner) {
  CtDqnConfig cfg;
  cfg.beta = 0.0;
  cfg.eps_rl = 0.1;
  cfg.eps_c = 0.0;
  cfg.omega = 1.0;
  const MixingProbabilities p = mixing_probabilities(cfg);
  EXPECT_DOUBLE_EQ(p.tutor_control, 1.0);
  EXPECT_DOUBLE_EQ(p.rl_greedy + p.rl_random + p.tutor_random, 0.0);
}

TEST(MixingProbabilities, ClosureAndEpsilonIdentity) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const double eps = rng.uniform(0.0, 0.3);
    const double beta = rng.uniform(0.0, 1.0);
    CtDqnConfig cfg;
    cfg.beta = beta;
    cfg.eps_rl = eps;
    cfg.eps_c = eps;
    cfg.omega = (1.0 - beta) * (1.0 - eps);
    const MixingProbabilities p = mixing_probabilities(cfg);
    EXPECT_EQ(p.rl_greedy + p.rl_random + p.tutor_control + p.tutor_random, 1.0);
    // With eps_c = eps_rl the total random-action probability is eps,
    // independent of beta.
    EXPECT_NEAR(p.rl_random + p.tutor_random, eps, 1e-12);
    EXPECT_NEAR(p.tutor_control, cfg.omega, 1e-12);
  }
}

TEST(ConfigValidation, RejectsInconsistentOmega) {
  CtDqnConfig cfg;
  cfg.beta = 0.9;
  cfg.eps_c = 0.1;
  cfg.omega = 0.5;  // should be 0.09
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SelectAction, PureGreedyFollowsArgmax) {
  const Network net = linear_net({1.0, -1.0, 0.5}, {0.0, 0.2, 0.1});
  CtDqnConfig cfg = CtDqnConfig::dqn(0.0, 0.99, 0.001, 64);
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Obs1 obs = {rng.uniform(-2.0, 2.0)};
    auto [action, source] = select_action<Obs1>(obs, net, nullptr, cfg, rng);
    EXPECT_EQ(source, PolicySource::kRlGreedy);
    std::vector<double> in = {obs[0]};
    EXPECT_EQ(action, argmax_action(net.forward(in)));
  }
}

TEST(SelectAction, ArgmaxTieBreaksToLowestIndex) {
  const Network net = linear_net({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
  CtDqnConfig cfg = CtDqnConfig::dqn(0.0, 0.99, 0.001, 64);
  Rng rng(4);
  auto [action, source] = select_action<Obs1>({0.7}, net, nullptr, cfg, rng);
  EXPECT_EQ(action, 0);
}

TEST(SelectAction, TutoredConfigRequiresTutor) {
  const Network net = linear_net({1.0, 0.0}, {0.0, 0.0});
  const CtDqnConfig cfg = CtDqnConfig::ctdqn(0.05, 0.1, 0.99, 0.001, 64);
  Rng rng(5);
  EXPECT_THROW((select_action<Obs1>({0.0}, net, nullptr, cfg, rng)), std::invalid_argument);
}

TEST(SelectAction, FixedSeedIsDeterministic) {
  const Network net = linear_net({1.0, -0.3}, {0.1, 0.0});
  const CtDqnConfig cfg = CtDqnConfig::ctdqn(0.05, 0.1, 0.99, 0.001, 64);
  const std::function<int(const Obs1&)> tutor = [](const Obs1&) { return 1; };
  Rng ra(77), rb(77);
  for (int k = 0; k < 500; ++k) {
    const Obs1 obs = {0.01 * k};
    const auto a = select_action<Obs1>(obs, net, tutor, cfg, ra);
    const auto b = select_action<Obs1>(obs, net, tutor, cfg, rb);
    EXPECT_EQ(a, b);
  }
}

TEST(SelectAction, EmpiricalFrequenciesMatchMixingLaw) {
  const Network net = linear_net({1.0, -0.3}, {0.1, 0.0});
  const CtDqnConfig cfg = CtDqnConfig::ctdqn(0.05, 0.1, 0.99, 0.001, 64);
  const MixingProbabilities want = mixing_probabilities(cfg);
  const std::function<int(const Obs1&)> tutor = [](const Obs1&) { return 1; };
  Rng rng(2024);
  const int n = 1'000'000;
  std::array<long, 4> counts{};
  const Obs1 obs = {0.4};
  for (int k = 0; k < n; ++k)
    counts[static_cast<int>(select_action<Obs1>(obs, net, tutor, cfg, rng).second)]++;
  EXPECT_NEAR(static_cast<double>(counts[0]) / n, want.rl_greedy, 0.005);
  EXPECT_NEAR(static_cast<double>(counts[1]) / n, want.rl_random, 0.005);
  EXPECT_NEAR(static_cast<double>(counts[2]) / n, want.tutor_control, 0.005);
  EXPECT_NEAR(static_cast<double>(counts[3]) / n, want.tutor_random, 0.005);
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer<Obs1> buffer(3);
  EXPECT_EQ(buffer.size(), 0u);
  for (int i = 1; i <= 4; ++i) buffer.push(make_transition(0, 0, i, 0, false));
  EXPECT_EQ(buffer.size(), 3u);
  std::vector<double> rewards;
  for (size_t i = 0; i < buffer.size(); ++i) rewards.push_back(buffer.at(i).reward);
  std::sort(rewards.begin(), rewards.end());
  EXPECT_EQ(rewards, (std::vector<double>{2.0, 3.0, 4.0}));
}

TEST(ReplayBuffer, SizeSaturatesAtCapacity) {
  ReplayBuffer<Obs1> buffer(64);
  for (int i = 0; i < 200; ++i) {
    buffer.push(make_transition(0, 0, i, 0, false));
    EXPECT_LE(buffer.size(), 64u);
  }
  EXPECT_EQ(buffer.size(), 64u);
}

TEST(ReplayBuffer, SampleMembersAndSkipSignal) {
  ReplayBuffer<Obs1> buffer(128);
  Rng rng(6);
  std::vector<const Transition<Obs1>*> batch;
  EXPECT_FALSE(buffer.try_sample(rng, 64, batch));
  for (int i = 0; i < 64; ++i) buffer.push(make_transition(0, 0, i, 0, false));
  ASSERT_TRUE(buffer.try_sample(rng, 64, batch));
  ASSERT_EQ(batch.size(), 64u);
  for (const auto* t : batch) {
    EXPECT_GE(t->reward, 0.0);
    EXPECT_LT(t->reward, 64.0);
  }
}

TEST(ReplayBuffer, FixedSeedSampleIsIdentical) {
  ReplayBuffer<Obs1> buffer(128);
  for (int i = 0; i < 100; ++i) buffer.push(make_transition(0, 0, i, 0, false));
  Rng ra(9), rb(9);
  std::vector<const Transition<Obs1>*> a, b;
  ASSERT_TRUE(buffer.try_sample(ra, 64, a));
  ASSERT_TRUE(buffer.try_sample(rb, 64, b));
  EXPECT_EQ(a, b);
}

TEST(ReplayBuffer, ChiSquareUniformity) {
  // 1e5 pooled draws from a 100-item buffer; chi-square statistic with 99
  // degrees of freedom must stay below the 0.999 quantile (148.23).
  ReplayBuffer<Obs1> buffer(128);
  for (int i = 0; i < 100; ++i) buffer.push(make_transition(0, 0, i, 0, false));
  Rng rng(31415);
  std::array<long, 100> counts{};
  std::vector<const Transition<Obs1>*> batch;
  const int rounds = 2000, per_round = 50;
  for (int r = 0; r < rounds; ++r) {
    ASSERT_TRUE(buffer.try_sample(rng, per_round, batch));
    for (const auto* t : batch) counts[static_cast<int>(t->reward)]++;
  }
  const double expected = rounds * per_round / 100.0;
  double chi2 = 0.0;
  for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 148.2304);
}

TEST(TdTargets, GammaZeroAndTerminal) {
  const Network target = linear_net({0.0, 0.0}, {2.0, 1.5});
  std::vector<Transition<Obs1>> data = {make_transition(0, 0, 1.0, 0.3, false),
                                        make_transition(0, 0, -2.0, 0.1, true)};
  std::vector<const Transition<Obs1>*> batch = {&data[0], &data[1]};
  const auto y0 = td_targets<Obs1>(batch, target, 0.0);
  EXPECT_DOUBLE_EQ(y0[0], 1.0);
  EXPECT_DOUBLE_EQ(y0[1], -2.0);
  // Terminal transitions carry no bootstrap value under any gamma.
  const auto y = td_targets<Obs1>(batch, target, 0.99);
  EXPECT_DOUBLE_EQ(y[0], 1.0 + 0.99 * 2.0);  // max Q = 2 -> 2.98
  EXPECT_DOUBLE_EQ(y[1], -2.0);
}

TEST(TrainStep, FixedPointHasZeroLossAndNoUpdate) {
  // Terminal transition whose reward equals Q(s, a): the TD error is zero,
  // so the gradient is zero and Adam moves nothing.
  Network qnet = linear_net({0.5, -0.25}, {0.1, 0.3});
  Network target = qnet;
  CtDqnConfig cfg = CtDqnConfig::dqn(0.1, 0.99, 0.001, 64);
  cfg.batch_size = 8;
  ReplayBuffer<Obs1> buffer(64);
  const double s = 2.0;
  const double q_sa = 0.5 * s + 0.1;  // action 0
  for (int i = 0; i < 8; ++i) buffer.push(make_transition(s, 0, q_sa, 0.0, true));
  neural::AdamState opt = neural::AdamState::for_network(qnet);
  neural::Gradients grads = qnet.make_gradients();
  neural::ForwardCache cache;
  Rng rng(8);
  const auto before = std::get<neural::DenseLayer>(qnet.layers()[0]).weights;
  const auto loss = train_step(qnet, target, buffer, opt, cfg, rng, grads, cache);
  ASSERT_TRUE(loss.has_value());
  EXPECT_DOUBLE_EQ(*loss, 0.0);
  EXPECT_EQ(std::get<neural::DenseLayer>(qnet.layers()[0]).weights, before);
}

TEST(TrainStep, SingleTransitionLossMatchesHandValue) {
  Network qnet = linear_net({0.5, -0.25}, {0.1, 0.3});
  Network target = qnet;
  CtDqnConfig cfg = CtDqnConfig::dqn(0.1, 0.5, 0.001, 64);
  cfg.batch_size = 1;
  ReplayBuffer<Obs1> buffer(64);
  // Non-terminal: y = r + gamma * max_a Q_target(s').
  buffer.push(make_transition(1.0, 1, 0.7, 2.0, false));
  const double q_sa = -0.25 * 1.0 + 0.3;
  const double max_next = std::max(0.5 * 2.0 + 0.1, -0.25 * 2.0 + 0.3);
  const double y = 0.7 + 0.5 * max_next;
  neural::AdamState opt = neural::AdamState::for_network(qnet);
  neural::Gradients grads = qnet.make_gradients();
  neural::ForwardCache cache;
  Rng rng(8);
  const auto loss = train_step(qnet, target, buffer, opt, cfg, rng, grads, cache);
  ASSERT_TRUE(loss.has_value());
  EXPECT_NEAR(*loss, (q_sa - y) * (q_sa - y), 1e-12);
}

TEST(TrainStep, SkipsUntilBufferHoldsOneBatch) {
  Network qnet = linear_net({0.5, -0.25}, {0.1, 0.3});
  Network target = qnet;
  CtDqnConfig cfg = CtDqnConfig::dqn(0.1, 0.99, 0.001, 64);
  ReplayBuffer<Obs1> buffer(128);
  for (int i = 0; i < 63; ++i) buffer.push(make_transition(0, 0, 0, 0, true));
  neural::AdamState opt = neural::AdamState::for_network(qnet);
  neural::Gradients grads = qnet.make_gradients();
  neural::ForwardCache cache;
  Rng rng(8);
  EXPECT_FALSE(train_step(qnet, target, buffer, opt, cfg, rng, grads, cache).has_value());
  buffer.push(make_transition(0, 0, 0, 0, true));
  EXPECT_TRUE(train_step(qnet, target, buffer, opt, cfg, rng, grads, cache).has_value());
}

TEST(TrainStep, RepeatedStepsDriveLossDown) {
  Network qnet = linear_net({0.5, -0.25}, {0.1, 0.3});
  Network target = qnet;
  CtDqnConfig cfg = CtDqnConfig::dqn(0.1, 0.99, 0.01, 64);
  cfg.batch_size = 1;
  ReplayBuffer<Obs1> buffer(8);
  buffer.push(make_transition(1.0, 0, 3.0, 0.0, true));
  neural::AdamState opt = neural::AdamState::for_network(qnet);
  neural::Gradients grads = qnet.make_gradients();
  neural::ForwardCache cache;
  Rng rng(8);
  double final_loss = 1e9;
  for (int k = 0; k < 500; ++k)
    final_loss = *train_step(qnet, target, buffer, opt, cfg, rng, grads, cache);
  EXPECT_LT(final_loss, 1e-4);
}

TEST(SyncTarget, BitExactCopyAndIndependence) {
  Network qnet(Shape3{1, 1, 2});
  qnet.add_dense(8, Activation::kRelu).add_dense(3, Activation::kLinear);
  Rng rng(55);
  qnet.init_params(rng);
  Network target(Shape3{1, 1, 2});
  target.add_dense(8, Activation::kRelu).add_dense(3, Activation::kLinear);
  sync_target(qnet, target);

  std::vector<double> probe = {0.3, -0.8};
  auto a = qnet.forward(probe);
  auto b = target.forward(probe);
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));

  // Idempotent.
  sync_target(qnet, target);
  auto c = target.forward(probe);
  EXPECT_EQ(0, std::memcmp(b.data(), c.data(), b.size() * sizeof(double)));

  // Training the online net afterwards leaves the target untouched.
  CtDqnConfig cfg = CtDqnConfig::dqn(0.1, 0.99, 0.01, 64);
  cfg.batch_size = 1;
  ReplayBuffer<std::array<double, 2>> buffer(8);
  buffer.push({{0.3, -0.8}, 0, 1.0, {0.0, 0.0}, true});
  neural::AdamState opt = neural::AdamState::for_network(qnet);
  neural::Gradients grads = qnet.make_gradients();
  neural::ForwardCache cache;
  train_step(qnet, target, buffer, opt, cfg, rng, grads, cache);
  auto d = target.forward(probe);
  EXPECT_EQ(0, std::memcmp(b.data(), d.data(), b.size() * sizeof(double)));
  auto q2 = qnet.forward(probe);
  EXPECT_NE(0, std::memcmp(a.data(), q2.data(), a.size() * sizeof(double)));
}

TEST(SyncTarget, ArchitectureMismatchRejected) {
  Network a(Shape3{1, 1, 2});
  a.add_dense(4, Activation::kLinear);
  Network b(Shape3{1, 1, 2});
  b.add_dense(5, Activation::kLinear);
  EXPECT_THROW(sync_target(a, b), std::invalid_argument);
}

TEST(Agent, PureDqnNeverInvokesTutor) {
  Network net = linear_net({1.0, -1.0}, {0.0, 0.0});
  CtDqnConfig cfg = CtDqnConfig::dqn(0.3, 0.99, 0.001, 64);
  CtDqnAgent<Obs1> agent(std::move(net), cfg, 123);
  long tutor_uses = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto [action, source] = agent.act({0.1});
    if (source == PolicySource::kTutorControl || source == PolicySource::kTutorRandom)
      ++tutor_uses;
  }
  EXPECT_EQ(tutor_uses, 0);
}
