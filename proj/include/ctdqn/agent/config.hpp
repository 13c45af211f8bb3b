#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

// CT-DQN behavior-policy configuration. At every step the agent follows the
// epsilon-greedy value head with probability beta and the tutor head with
// probability 1 - beta; each head then plays its own action with probability
// 1 - epsilon and a uniformly random one otherwise. omega is the resulting
// probability that the tutor's control action is executed. Plain DQN is the
// beta = 1 special case.

namespace ctdqn::agent {

enum class PolicySource { kRlGreedy = 0, kRlRandom = 1, kTutorControl = 2, kTutorRandom = 3 };

inline const char* to_string(PolicySource s) {
  switch (s) {
    case PolicySource::kRlGreedy: return "rl_greedy";
    case PolicySource::kRlRandom: return "rl_random";
    case PolicySource::kTutorControl: return "tutor_control";
    case PolicySource::kTutorRandom: return "tutor_random";
  }
  return "?";
}

struct CtDqnConfig {
  double beta = 1.0;
  double eps_rl = 0.02;
  double eps_c = 0.02;
  double omega = 0.0;  // (1 - beta) * (1 - eps_c)
  double gamma = 0.99;
  double alpha = 0.001;
  int batch_size = 64;
  std::size_t buffer_capacity = 1'000'000;

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("config: beta outside [0, 1]");
    if (!(eps_rl >= 0.0 && eps_rl < 1.0)) throw std::invalid_argument("config: eps_rl outside [0, 1)");
    if (!(eps_c >= 0.0 && eps_c < 1.0)) throw std::invalid_argument("config: eps_c outside [0, 1)");
    if (std::abs((1.0 - beta) * (1.0 - eps_c) - omega) > 1e-12)
      throw std::invalid_argument("config: omega inconsistent with beta and eps_c");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma outside (0, 1]");
    if (!(alpha > 0.0)) throw std::invalid_argument("config: alpha must be positive");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (buffer_capacity < static_cast<std::size_t>(batch_size))
      throw std::invalid_argument("config: buffer smaller than one batch");
  }

  // Plain DQN: the tutor head is never selected.
  static CtDqnConfig dqn(double eps_rl, double gamma, double alpha,
                         std::size_t buffer_capacity) {
    CtDqnConfig cfg;
    cfg.beta = 1.0;
    cfg.eps_rl = eps_rl;
    cfg.eps_c = eps_rl;
    cfg.omega = 0.0;
    cfg.gamma = gamma;
    cfg.alpha = alpha;
    cfg.buffer_capacity = buffer_capacity;
    cfg.validate();
    return cfg;
  }

  // Parameterized by the tutor switching probability omega. eps_c is tied to
  // eps_rl and beta = 1 - omega / (1 - eps_c), which keeps the total
  // random-action probability at eps_rl regardless of omega.
  static CtDqnConfig ctdqn(double omega, double eps_rl, double gamma, double alpha,
                           std::size_t buffer_capacity) {
    if (!(omega > 0.0 && omega < 1.0))
      throw std::invalid_argument("config: omega outside (0, 1)");
    CtDqnConfig cfg;
    cfg.eps_rl = eps_rl;
    cfg.eps_c = eps_rl;
    cfg.beta = 1.0 - omega / (1.0 - cfg.eps_c);
    cfg.omega = omega;
    cfg.gamma = gamma;
    cfg.alpha = alpha;
    cfg.buffer_capacity = buffer_capacity;
    cfg.validate();
    return cfg;
  }
};

struct MixingProbabilities {
  double rl_greedy = 0.0;
  double rl_random = 0.0;
  double tutor_control = 0.0;
  double tutor_random = 0.0;

  double of(PolicySource s) const {
    switch (s) {
      case PolicySource::kRlGreedy: return rl_greedy;
      case PolicySource::kRlRandom: return rl_random;
      case PolicySource::kTutorControl: return tutor_control;
      case PolicySource::kTutorRandom: return tutor_random;
    }
    return 0.0;
  }
};

inline MixingProbabilities mixing_probabilities(const CtDqnConfig& cfg) {
  cfg.validate();
  MixingProbabilities p;
  p.rl_greedy = cfg.beta * (1.0 - cfg.eps_rl);
  p.rl_random = cfg.beta * cfg.eps_rl;
  p.tutor_control = (1.0 - cfg.beta) * (1.0 - cfg.eps_c);
  // Symbolically (1 - beta) * eps_c; taking the complement keeps the four
  // probabilities summing to 1.0 exactly in floating point.
  p.tutor_random = 1.0 - (p.rl_greedy + p.rl_random + p.tutor_control);
  return p;
}

}  // namespace ctdqn::agent
