#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ctdqn/agent/dqn.hpp"
#include "ctdqn/envs/car.hpp"
#include "ctdqn/envs/lander.hpp"
#include "ctdqn/envs/pendulum.hpp"
#include "ctdqn/harness/checkpoint.hpp"
#include "ctdqn/harness/experiment.hpp"
#include "ctdqn/metrics/metrics.hpp"
#include "ctdqn/tutors/car.hpp"
#include "ctdqn/tutors/lander.hpp"
#include "ctdqn/tutors/pendulum.hpp"

// Experiment orchestration: S sessions x E episodes x at most N steps, with
// fresh network weights per session, training every step, target sync at
// episode end, and per-episode records feeding all metrics. Every random
// draw comes from the master-seed tree, so (config, seed) determines the run.

namespace ctdqn::harness {

// Seed tree: session s of the master seed is derive_seed(master, s); within a
// session, stream 0 initializes weights, stream 1 drives the agent and
// episode e resets the environment with derive_seed(session, base + e).
constexpr std::uint64_t kEpisodeSeedBase = 1000;

struct PendulumTraits {
  using Env = envs::PendulumEnv;
  using Obs = Env::Observation;

  static Env make_env(const ExperimentConfig&) { return Env{}; }

  static neural::Network make_network(Rng& rng) {
    neural::Network net(neural::Shape3{1, 1, 2});
    net.add_dense(128, neural::Activation::kRelu)
        .add_dense(64, neural::Activation::kRelu)
        .add_dense(Env::kNumActions, neural::Activation::kLinear);
    net.init_params(rng);
    return net;
  }

  static std::function<int(const Obs&)> make_tutor(const ExperimentConfig&) {
    return [](const Obs& obs) { return tutors::PendulumTutor{}.action(obs); };
  }

  struct Tracker {
    metrics::GoalSpec goal = metrics::GoalSpec::state_ball(
        0.05 * std::hypot(std::numbers::pi, 8.0), 100);
    std::vector<double> distances;

    explicit Tracker(const ExperimentConfig&) {}
    void on_reset(const Env& env) { distances.assign(1, env.goal_distance()); }
    void on_step(const Env& env, const envs::StepResult<Obs>&) {
      distances.push_back(env.goal_distance());
    }
    void finalize(metrics::EpisodeRecord& rec) const {
      const auto k_s = metrics::settling_time(distances, goal);
      rec.goal_met = k_s.has_value();
      if (k_s) {
        rec.settling_step = static_cast<int>(*k_s);
        rec.steady_state_error = metrics::steady_state_error(distances, *k_s);
      }
    }
  };
};

struct LanderTraits {
  using Env = envs::LanderEnv;
  using Obs = Env::Observation;

  static Env make_env(const ExperimentConfig&) { return Env{}; }

  static neural::Network make_network(Rng& rng) {
    neural::Network net(neural::Shape3{1, 1, 8});
    net.add_dense(128, neural::Activation::kRelu)
        .add_dense(128, neural::Activation::kRelu)
        .add_dense(Env::kNumActions, neural::Activation::kLinear);
    net.init_params(rng);
    return net;
  }

  static std::function<int(const Obs&)> make_tutor(const ExperimentConfig&) {
    return [](const Obs& obs) { return tutors::LanderTutor{}.action_from_observation(obs); };
  }

  struct Tracker {
    std::vector<double> distances;
    std::optional<int> landing_step;

    explicit Tracker(const ExperimentConfig&) {}
    void on_reset(const Env& env) {
      distances.assign(1, env.goal_distance());
      landing_step.reset();
    }
    void on_step(const Env& env, const envs::StepResult<Obs>& r) {
      distances.push_back(env.goal_distance());
      if (r.info.landed) landing_step = static_cast<int>(distances.size()) - 1;
    }
    void finalize(metrics::EpisodeRecord& rec) const {
      rec.goal_met = rec.cumulative_reward >= 200.0;
      if (landing_step) {
        rec.settling_step = *landing_step;
        rec.steady_state_error = metrics::steady_state_error(distances, *landing_step);
      }
    }
  };
};

struct CarTraits {
  using Env = envs::CarEnv;
  using Obs = Env::Observation;

  static Env make_env(const ExperimentConfig& cfg) { return Env(cfg.max_steps); }

  static neural::Network make_network(Rng& rng) {
    neural::Network net(neural::Shape3{envs::kFrameSize, envs::kFrameSize, 3});
    net.add_conv(6, 7, 3, neural::Activation::kRelu)
        .add_conv(12, 4, 1, neural::Activation::kRelu)
        .add_dense(216, neural::Activation::kRelu)
        .add_dense(Env::kNumActions, neural::Activation::kLinear);
    net.init_params(rng);
    return net;
  }

  static std::function<int(const Obs&)> make_tutor(const ExperimentConfig& cfg) {
    return [params = cfg.car_tutor](const Obs& obs) {
      return tutors::car_tutor_action(obs, params);
    };
  }

  // The car task has no goal condition; only cumulative reward is tracked.
  struct Tracker {
    explicit Tracker(const ExperimentConfig&) {}
    void on_reset(const Env&) {}
    void on_step(const Env&, const envs::StepResult<Obs>&) {}
    void finalize(metrics::EpisodeRecord&) const {}
  };
};

struct RunArtifacts {
  std::string dir;
  std::vector<metrics::EpisodeRecord> episodes;
};

namespace detail {

inline void assert_q_finite(const std::vector<double>& q) {
  for (double v : q)
    if (!std::isfinite(v)) throw std::runtime_error("Q-values diverged to non-finite");
}

template <class Traits>
std::vector<metrics::EpisodeRecord> run_training_session(const ExperimentConfig& cfg,
                                                         int session_index,
                                                         bool live_log) {
  using Obs = typename Traits::Obs;
  const std::uint64_t session_seed = derive_seed(cfg.master_seed, session_index);
  Rng net_rng(derive_seed(session_seed, 0));
  neural::Network net = Traits::make_network(net_rng);

  typename agent::CtDqnAgent<Obs>::TutorFn tutor = nullptr;
  if (cfg.algo == Algo::kCtDqn) tutor = Traits::make_tutor(cfg);
  agent::CtDqnAgent<Obs> learner(std::move(net), cfg.agent_config(),
                                 derive_seed(session_seed, 1), std::move(tutor));

  typename Traits::Env env = Traits::make_env(cfg);
  typename Traits::Tracker tracker(cfg);
  std::vector<metrics::EpisodeRecord> rows;
  rows.reserve(cfg.episodes);
  std::vector<double> probe;

  for (int e = 1; e <= cfg.episodes; ++e) {
    Obs obs = env.reset(derive_seed(session_seed, kEpisodeSeedBase + e));
    tracker.on_reset(env);
    metrics::EpisodeRecord rec;
    rec.session = session_index + 1;
    rec.episode = e;
    double loss_sum = 0.0;
    long loss_count = 0;
    for (int k = 0; k < cfg.max_steps; ++k) {
      const auto [action, source] = learner.act(obs);
      switch (source) {
        case agent::PolicySource::kRlGreedy: ++rec.n_rl_greedy; break;
        case agent::PolicySource::kRlRandom: ++rec.n_rl_random; break;
        case agent::PolicySource::kTutorControl: ++rec.n_tutor_control; break;
        case agent::PolicySource::kTutorRandom: ++rec.n_tutor_random; break;
      }
      const auto result = env.step(action);
      learner.store({obs, action, result.reward, result.observation, result.terminal});
      if (const auto loss = learner.train()) {
        loss_sum += *loss;
        ++loss_count;
      }
      rec.cumulative_reward += result.reward;
      rec.steps = k + 1;
      obs = result.observation;
      tracker.on_step(env, result);
      if (result.terminal) break;
    }
    rec.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    tracker.finalize(rec);
    learner.sync();

    probe.clear();
    envs::ObsCodec<Obs>::append(obs, probe);
    assert_q_finite(learner.qnet().forward(probe));

    if (live_log) {
      std::printf("[s%d e%d/%d] steps=%d J=%.2f sources=%ld/%ld/%ld/%ld mean_loss=%.4g%s\n",
                  rec.session, e, cfg.episodes, rec.steps, rec.cumulative_reward,
                  rec.n_rl_greedy, rec.n_rl_random, rec.n_tutor_control,
                  rec.n_tutor_random, rec.mean_loss, rec.goal_met ? " goal" : "");
      std::fflush(stdout);
    }
    if (cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0 && e != cfg.episodes) {
      nlohmann::ordered_json echo = config_to_json(cfg);
      echo["session"] = session_index + 1;
      echo["episode"] = e;
      save_checkpoint(cfg.out_dir + "/checkpoints/session_" +
                          std::to_string(session_index + 1) + "_ep" + std::to_string(e) +
                          ".json",
                      learner.qnet(), learner.optimizer(), echo);
    }
    rows.push_back(rec);
  }

  nlohmann::ordered_json echo = config_to_json(cfg);
  echo["session"] = session_index + 1;
  echo["episode"] = cfg.episodes;
  save_checkpoint(cfg.out_dir + "/checkpoints/session_" +
                      std::to_string(session_index + 1) + ".json",
                  learner.qnet(), learner.optimizer(), echo);
  return rows;
}

template <class Traits>
RunArtifacts run_training_impl(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir + "/checkpoints");
  {
    std::ofstream out(cfg.out_dir + "/config.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + cfg.out_dir + "/config.txt");
    out << config_to_text(cfg);
  }

  std::vector<std::vector<metrics::EpisodeRecord>> per_session(cfg.sessions);
  if (cfg.jobs <= 1) {
    for (int s = 0; s < cfg.sessions; ++s)
      per_session[s] = run_training_session<Traits>(cfg, s, /*live_log=*/true);
  } else {
    // Sessions are independent; rows are still written in session order.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(cfg.sessions);
    for (int s = 0; s < cfg.sessions; ++s) {
      pool.emplace_back([&, s] {
        try {
          per_session[s] = run_training_session<Traits>(cfg, s, /*live_log=*/false);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  RunArtifacts artifacts;
  artifacts.dir = cfg.out_dir;
  {
    std::ofstream out(cfg.out_dir + "/episodes.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write episodes.csv");
    out << episodes_csv_header() << '\n';
    for (const auto& rows : per_session)
      for (const auto& rec : rows) {
        out << episode_record_to_csv(rec) << '\n';
        artifacts.episodes.push_back(rec);
      }
  }
  return artifacts;
}

template <class Traits>
std::vector<metrics::EpisodeRecord> evaluate_greedy_impl(const ExperimentConfig& cfg,
                                                         const neural::Network& net,
                                                         int episodes,
                                                         std::uint64_t seed) {
  using Obs = typename Traits::Obs;
  {
    Rng probe_rng(0);
    const neural::Network reference = Traits::make_network(probe_rng);
    if (!reference.same_architecture(net))
      throw std::invalid_argument("checkpoint architecture does not match environment");
  }
  typename Traits::Env env = Traits::make_env(cfg);
  typename Traits::Tracker tracker(cfg);
  std::vector<metrics::EpisodeRecord> rows;
  std::vector<double> scratch;
  for (int e = 1; e <= episodes; ++e) {
    Obs obs = env.reset(derive_seed(seed, e));
    tracker.on_reset(env);
    metrics::EpisodeRecord rec;
    rec.session = 1;
    rec.episode = e;
    for (int k = 0; k < cfg.max_steps; ++k) {
      const int action = agent::greedy_action(net, obs, scratch);
      ++rec.n_rl_greedy;
      const auto result = env.step(action);
      rec.cumulative_reward += result.reward;
      rec.steps = k + 1;
      obs = result.observation;
      tracker.on_step(env, result);
      if (result.terminal) break;
    }
    tracker.finalize(rec);
    rows.push_back(rec);
  }
  return rows;
}

template <class Traits>
std::vector<metrics::EpisodeRecord> tutor_baseline_impl(const ExperimentConfig& cfg,
                                                        int episodes, std::uint64_t seed) {
  using Obs = typename Traits::Obs;
  const auto tutor = Traits::make_tutor(cfg);
  typename Traits::Env env = Traits::make_env(cfg);
  typename Traits::Tracker tracker(cfg);
  std::vector<metrics::EpisodeRecord> rows;
  for (int e = 1; e <= episodes; ++e) {
    Obs obs = env.reset(derive_seed(seed, e));
    tracker.on_reset(env);
    metrics::EpisodeRecord rec;
    rec.session = 1;
    rec.episode = e;
    for (int k = 0; k < cfg.max_steps; ++k) {
      const int action = tutor(obs);
      ++rec.n_tutor_control;
      const auto result = env.step(action);
      rec.cumulative_reward += result.reward;
      rec.steps = k + 1;
      obs = result.observation;
      tracker.on_step(env, result);
      if (result.terminal) break;
    }
    tracker.finalize(rec);
    rows.push_back(rec);
  }
  return rows;
}

}  // namespace detail

template <class F>
auto dispatch_env(envs::EnvKind kind, F&& f) {
  switch (kind) {
    case envs::EnvKind::kPendulum: return f(PendulumTraits{});
    case envs::EnvKind::kLander: return f(LanderTraits{});
    case envs::EnvKind::kCar: return f(CarTraits{});
  }
  throw std::logic_error("unreachable env kind");
}

inline RunArtifacts run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  return dispatch_env(cfg.env, [&]<class Traits>(Traits) {
    return detail::run_training_impl<Traits>(cfg);
  });
}

// Greedy-policy evaluation of a trained network: no exploration, no learning.
// Episode seeds derive from `seed` alone, so two checkpoints evaluated with
// the same seed see identical environment realizations.
inline std::vector<metrics::EpisodeRecord> evaluate_greedy(const ExperimentConfig& cfg,
                                                           const neural::Network& net,
                                                           int episodes,
                                                           std::uint64_t seed) {
  return dispatch_env(cfg.env, [&]<class Traits>(Traits) {
    return detail::evaluate_greedy_impl<Traits>(cfg, net, episodes, seed);
  });
}

// Pure-tutor rollouts (the eps_c = 0 baseline).
inline std::vector<metrics::EpisodeRecord> run_tutor_baseline(const ExperimentConfig& cfg,
                                                              int episodes,
                                                              std::uint64_t seed) {
  return dispatch_env(cfg.env, [&]<class Traits>(Traits) {
    return detail::tutor_baseline_impl<Traits>(cfg, episodes, seed);
  });
}

}  // namespace ctdqn::harness
