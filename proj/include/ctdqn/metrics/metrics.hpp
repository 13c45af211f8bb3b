#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

// Learning metrics (average cumulative reward, terminal episode, post-terminal
// average) and control metrics (settling time, steady-state error) computed
// from per-episode records and per-step goal distances. Episode indices are
// 1-based throughout.

namespace ctdqn::metrics {

struct EpisodeRecord {
  int session = 0;
  int episode = 0;  // 1-based within the session
  int steps = 0;
  double cumulative_reward = 0.0;  // J_e
  bool goal_met = false;
  std::optional<int> settling_step;          // k_s, when defined
  std::optional<double> steady_state_error;  // e_s, only when k_s is present
  long n_rl_greedy = 0;
  long n_rl_random = 0;
  long n_tutor_control = 0;
  long n_tutor_random = 0;
  double mean_loss = 0.0;
};

// Goal condition per environment. The pendulum uses a state-space ball that
// must hold from some step onwards, the lander a cumulative-reward threshold,
// and the car defines no goal condition at all.
struct GoalSpec {
  enum class Kind { kStateBall, kRewardThreshold, kNone };
  Kind kind = Kind::kNone;
  double radius = 0.0;        // kStateBall
  int settle_margin = 100;    // latest admissible settling step is N - margin
  double threshold = 0.0;     // kRewardThreshold

  static GoalSpec state_ball(double radius, int settle_margin) {
    GoalSpec g;
    g.kind = Kind::kStateBall;
    g.radius = radius;
    g.settle_margin = settle_margin;
    return g;
  }
  static GoalSpec reward_threshold(double threshold) {
    GoalSpec g;
    g.kind = Kind::kRewardThreshold;
    g.threshold = threshold;
    return g;
  }
  static GoalSpec none() { return GoalSpec{}; }
};

inline double avg_cumulative_reward(std::span<const EpisodeRecord> records) {
  if (records.empty())
    throw std::invalid_argument("avg_cumulative_reward: no records");
  double sum = 0.0;
  for (const auto& r : records) sum += r.cumulative_reward;
  return sum / static_cast<double>(records.size());
}

// Smallest episode E_t (1-based, >= 11) such that the goal held on all of
// episodes E_t - 10 .. E_t. Records must be ordered by episode.
inline std::optional<int> terminal_episode(std::span<const EpisodeRecord> records) {
  int run = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    run = records[i].goal_met ? run + 1 : 0;
    if (run >= 11) return records[i].episode;
  }
  return std::nullopt;
}

// Mean of J_e over e in [E_t, E]. Normalized by the number of terms; the
// defining text divides by E_t, which would not be an average, so the term
// count is used here and the discrepancy is documented where this is reported.
inline double avg_reward_after_terminal(std::span<const EpisodeRecord> records,
                                        int terminal) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto& r : records) {
    if (r.episode >= terminal) {
      sum += r.cumulative_reward;
      ++count;
    }
  }
  if (count == 0)
    throw std::invalid_argument("avg_reward_after_terminal: terminal episode beyond range");
  return sum / static_cast<double>(count);
}

// Settling time for ball goals: smallest k in [0, N - margin] such that
// distances[j] <= radius for every j in [k, N]. `distances` holds
// ||x_k - x*|| for k = 0..N.
inline std::optional<size_t> settling_time(std::span<const double> distances,
                                           const GoalSpec& goal) {
  if (goal.kind != GoalSpec::Kind::kStateBall) return std::nullopt;
  if (distances.empty()) return std::nullopt;
  const size_t n = distances.size() - 1;
  if (n < static_cast<size_t>(goal.settle_margin)) return std::nullopt;
  const size_t latest = n - static_cast<size_t>(goal.settle_margin);
  // Scan backwards for the last violation; everything after it is inside.
  size_t first_inside = 0;
  for (size_t k = distances.size(); k-- > 0;) {
    if (distances[k] > goal.radius) {
      first_inside = k + 1;
      break;
    }
    if (k == 0) first_inside = 0;
  }
  if (first_inside <= latest) return first_inside;
  return std::nullopt;
}

// Mean of distances[k] over k in [k_s, N].
inline double steady_state_error(std::span<const double> distances, size_t k_s) {
  if (k_s >= distances.size())
    throw std::invalid_argument("steady_state_error: settling step beyond trajectory");
  double sum = 0.0;
  for (size_t k = k_s; k < distances.size(); ++k) sum += distances[k];
  return sum / static_cast<double>(distances.size() - k_s);
}

// Left moving average: element i is the mean of the last `window` elements up
// to and including i, with the window shrinking at the start of the series.
inline std::vector<double> moving_average_left(std::span<const double> series,
                                               int window) {
  if (window < 1) throw std::invalid_argument("moving_average_left: window < 1");
  std::vector<double> out(series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    const size_t lo = i + 1 >= static_cast<size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (size_t j = lo; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

}  // namespace ctdqn::metrics
