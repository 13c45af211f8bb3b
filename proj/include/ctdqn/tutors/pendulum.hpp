#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

#include "ctdqn/envs/pendulum.hpp"

namespace ctdqn::tutors {

// Projects a real-valued control onto a discrete action table: nearest entry,
// ties broken toward the smaller-magnitude entry. Returns the action index.
inline int project_to_action(double v, std::span<const double> table) {
  if (table.empty()) throw std::invalid_argument("project_to_action: empty table");
  int best = 0;
  double best_dist = std::abs(v - table[0]);
  for (int i = 1; i < static_cast<int>(table.size()); ++i) {
    const double dist = std::abs(v - table[i]);
    if (dist < best_dist ||
        (dist == best_dist && std::abs(table[i]) < std::abs(table[best]))) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

// Linear state feedback v = -[5.83 1.83] x, synthesized by pole placement on a
// linearization about the upright equilibrium, projected onto the discrete
// torque table. Stabilizes the upright position only locally; it cannot swing
// the pendulum up from the hanging position.
class PendulumTutor {
 public:
  static constexpr std::array<double, 2> kGain = {5.83, 1.83};

  int action(const std::array<double, 2>& state) const {
    const double v = -(kGain[0] * state[0] + kGain[1] * state[1]);
    const auto& table = envs::PendulumEnv::torque_table();
    return project_to_action(v, std::span<const double>(table.data(), table.size()));
  }
};

}  // namespace ctdqn::tutors
