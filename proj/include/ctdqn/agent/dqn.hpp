#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ctdqn/agent/config.hpp"
#include "ctdqn/agent/replay.hpp"
#include "ctdqn/envs/types.hpp"
#include "ctdqn/neural/adam.hpp"
#include "ctdqn/neural/network.hpp"
#include "ctdqn/rng.hpp"

// DQN / CT-DQN learner operations: behavior-policy action selection with the
// tutor mixing law, TD targets from a lagged target network, the mean-squared
// TD training step (gradient applied only to the taken-action outputs), and
// per-episode target synchronization.

namespace ctdqn::agent {

// Lowest index wins ties, so greedy play is deterministic.
inline int argmax_action(std::span<const double> q) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

template <class Obs>
int greedy_action(const neural::Network& qnet, const Obs& obs,
                  std::vector<double>& scratch) {
  scratch.clear();
  envs::ObsCodec<Obs>::append(obs, scratch);
  const std::vector<double> q = qnet.forward(scratch);
  return argmax_action(q);
}

// Two-stage draw: head selection (RL with probability beta, tutor otherwise),
// then the head's own epsilon split. Exactly two uniforms are consumed per
// call, plus one more when a random action is taken.
template <class Obs>
std::pair<int, PolicySource> select_action(const Obs& obs, const neural::Network& qnet,
                                           const std::function<int(const Obs&)>& tutor,
                                           const CtDqnConfig& cfg, Rng& rng) {
  if (cfg.beta < 1.0 && !tutor)
    throw std::invalid_argument("select_action: beta < 1 requires a tutor");
  const double head = rng.uniform();
  const double eps = rng.uniform();
  const int n_actions = qnet.output_size();
  if (head < cfg.beta) {
    if (eps < cfg.eps_rl)
      return {static_cast<int>(rng.uniform_int(n_actions)), PolicySource::kRlRandom};
    thread_local std::vector<double> scratch;
    return {greedy_action(qnet, obs, scratch), PolicySource::kRlGreedy};
  }
  if (eps < cfg.eps_c)
    return {static_cast<int>(rng.uniform_int(n_actions)), PolicySource::kTutorRandom};
  return {tutor(obs), PolicySource::kTutorControl};
}

// y_i = r_i + gamma * (1 - terminal_i) * max_a Q_target(s'_i, a).
template <class Obs>
std::vector<double> td_targets(std::span<const Transition<Obs>* const> batch,
                               const neural::Network& target_net, double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_targets: empty batch");
  std::vector<double> inputs;
  inputs.reserve(batch.size() * target_net.input_size());
  for (const auto* t : batch) envs::ObsCodec<Obs>::append(t->next_state, inputs);

  neural::ForwardCache cache;
  target_net.forward_batch(inputs, static_cast<int>(batch.size()), cache);
  const std::vector<double>& q = cache.act.back();
  const int n_actions = target_net.output_size();

  std::vector<double> y(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    double best = q[i * n_actions];
    for (int a = 1; a < n_actions; ++a) best = std::max(best, q[i * n_actions + a]);
    y[i] = batch[i]->reward +
           (batch[i]->terminal ? 0.0 : gamma * best);
  }
  return y;
}

// One training step: sample a batch, regress the taken-action outputs onto
// the TD targets under mean squared error, apply one optimizer step. Returns
// the loss, or nothing when the buffer cannot fill a batch yet. The target
// network is never touched.
template <class Obs>
std::optional<double> train_step(neural::Network& qnet, const neural::Network& target_net,
                                 const ReplayBuffer<Obs>& buffer, neural::AdamState& opt,
                                 const CtDqnConfig& cfg, Rng& rng,
                                 neural::Gradients& grads, neural::ForwardCache& cache) {
  thread_local std::vector<const Transition<Obs>*> batch;
  if (!buffer.try_sample(rng, cfg.batch_size, batch)) return std::nullopt;

  const std::vector<double> y =
      td_targets<Obs>(std::span<const Transition<Obs>* const>(batch), target_net, cfg.gamma);

  thread_local std::vector<double> inputs;
  inputs.clear();
  for (const auto* t : batch) envs::ObsCodec<Obs>::append(t->state, inputs);
  const int b = cfg.batch_size;
  qnet.forward_batch(inputs, b, cache);
  const std::vector<double>& q = cache.act.back();
  const int n_actions = qnet.output_size();

  double loss = 0.0;
  std::vector<double> dloss(static_cast<size_t>(b) * n_actions, 0.0);
  for (int i = 0; i < b; ++i) {
    const int a = batch[i]->action;
    if (a < 0 || a >= n_actions)
      throw std::out_of_range("train_step: stored action outside the action set");
    const double diff = q[static_cast<size_t>(i) * n_actions + a] - y[i];
    loss += diff * diff;
    dloss[static_cast<size_t>(i) * n_actions + a] = 2.0 * diff / b;
  }
  loss /= b;
  if (!std::isfinite(loss))
    throw std::runtime_error("train_step: non-finite TD loss (diverged)");

  grads.set_zero();
  qnet.backward(cache, dloss, grads);
  neural::adam_step(qnet, grads, opt, cfg.alpha);
  return loss;
}

// Target parameters become a bit-exact copy of the online network.
inline void sync_target(const neural::Network& qnet, neural::Network& target_net) {
  if (!qnet.same_architecture(target_net))
    throw std::invalid_argument("sync_target: architecture mismatch");
  target_net = qnet;
}

// Bundles the learner state for one training session.
template <class Obs>
class CtDqnAgent {
 public:
  using TutorFn = std::function<int(const Obs&)>;

  CtDqnAgent(neural::Network qnet, const CtDqnConfig& cfg, std::uint64_t seed,
             TutorFn tutor = nullptr)
      : qnet_(std::move(qnet)),
        target_(qnet_),
        cfg_(cfg),
        buffer_(cfg.buffer_capacity),
        opt_(neural::AdamState::for_network(qnet_)),
        rng_(seed),
        tutor_(std::move(tutor)) {
    cfg_.validate();
    if (cfg_.beta < 1.0 && !tutor_)
      throw std::invalid_argument("agent: tutored config without a tutor");
    grads_ = qnet_.make_gradients();
  }

  std::pair<int, PolicySource> act(const Obs& obs) {
    return select_action(obs, qnet_, tutor_, cfg_, rng_);
  }

  int act_greedy(const Obs& obs) {
    return greedy_action(qnet_, obs, scratch_);
  }

  void store(Transition<Obs> t) { buffer_.push(std::move(t)); }

  std::optional<double> train() {
    return train_step(qnet_, target_, buffer_, opt_, cfg_, rng_, grads_, cache_);
  }

  void sync() { sync_target(qnet_, target_); }

  const neural::Network& qnet() const { return qnet_; }
  neural::Network& qnet() { return qnet_; }
  const neural::Network& target() const { return target_; }
  const neural::AdamState& optimizer() const { return opt_; }
  neural::AdamState& optimizer() { return opt_; }
  const CtDqnConfig& config() const { return cfg_; }
  const ReplayBuffer<Obs>& buffer() const { return buffer_; }

 private:
  neural::Network qnet_;
  neural::Network target_;
  CtDqnConfig cfg_;
  ReplayBuffer<Obs> buffer_;
  neural::AdamState opt_;
  Rng rng_;
  TutorFn tutor_;
  neural::Gradients grads_;
  neural::ForwardCache cache_;
  std::vector<double> scratch_;
};

}  // namespace ctdqn::agent
