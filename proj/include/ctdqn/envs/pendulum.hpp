#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "ctdqn/envs/types.hpp"

// Torque-limited pendulum swing-up. The angle is measured from the upward
// unstable equilibrium; theta = +-pi is the hanging position and every episode
// starts exactly there. Dynamics are the standard rod pendulum
//   theta_ddot = 3g/(2l) sin(theta) + 3/(m l^2) u
// advanced with semi-implicit Euler at T = 0.05 s. Angle is wrapped to
// [-pi, pi] and angular velocity clipped to [-8, 8] after every step; episodes
// never terminate early (the harness enforces the horizon).

namespace ctdqn::envs {

struct PendulumState {
  double theta = 0.0;      // rad, in [-pi, pi]
  double theta_dot = 0.0;  // rad/s, in [-8, 8]
};

class PendulumEnv {
 public:
  using Observation = std::array<double, 2>;

  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr int kNumActions = 5;

  // Symmetric discrete torque table, N*m.
  static const std::array<double, kNumActions>& torque_table() {
    static const std::array<double, kNumActions> table = {-2.0, -1.0, 0.0, 1.0, 2.0};
    return table;
  }

  // Wrap to [-pi, pi]; values already inside (both endpoints included) are
  // returned unchanged.
  static double wrap_angle(double theta) {
    return std::remainder(theta, 2.0 * std::numbers::pi);
  }

  // The initial state is always [pi, 0]; the seed is accepted for interface
  // uniformity with the stochastic environments.
  Observation reset(std::uint64_t /*seed*/) {
    state_ = {std::numbers::pi, 0.0};
    return observation();
  }

  Observation reset_to(double theta, double theta_dot) {
    state_ = {wrap_angle(theta), std::clamp(theta_dot, -kMaxSpeed, kMaxSpeed)};
    return observation();
  }

  StepResult<Observation> step(int action) {
    if (action < 0 || action >= kNumActions)
      throw std::out_of_range("pendulum: invalid action index");
    const double u = torque_table()[action];
    // Reward is the negative quadratic regulation cost at the state where the
    // torque was applied.
    const double reward = -(state_.theta * state_.theta +
                            0.1 * state_.theta_dot * state_.theta_dot +
                            0.001 * u * u);
    const double accel = 1.5 * kGravity / kLength * std::sin(state_.theta) +
                         3.0 / (kMass * kLength * kLength) * u;
    state_.theta_dot =
        std::clamp(state_.theta_dot + kDt * accel, -kMaxSpeed, kMaxSpeed);
    state_.theta = wrap_angle(state_.theta + kDt * state_.theta_dot);

    StepResult<Observation> result;
    result.observation = observation();
    result.reward = reward;
    result.terminal = false;
    return result;
  }

  const PendulumState& state() const { return state_; }

  Observation observation() const { return {state_.theta, state_.theta_dot}; }

  // Distance to the upward goal state x* = [0, 0].
  double goal_distance() const {
    return std::hypot(state_.theta, state_.theta_dot);
  }

  // Total mechanical energy of the rod (kinetic + potential about the pivot),
  // used by the integrator sanity checks.
  double mechanical_energy() const {
    const double inertia = kMass * kLength * kLength / 3.0;
    return 0.5 * inertia * state_.theta_dot * state_.theta_dot +
           kMass * kGravity * (kLength / 2.0) * std::cos(state_.theta);
  }

 private:
  PendulumState state_{std::numbers::pi, 0.0};
};

}  // namespace ctdqn::envs
