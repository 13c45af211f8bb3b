#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ctdqn/envs/types.hpp"
#include "ctdqn/rng.hpp"

// Planar lunar-lander regulation task. A rigid craft with three thrusters
// (left, right, main) falls under gravity over a piecewise-linear terrain with
// a flat landing pad centered at the origin. The initial pose is fixed and the
// initial linear velocity is seeded-random; terrain away from the pad is
// seeded-random as well. An episode ends when the craft lands on the pad
// within the velocity/attitude thresholds, when it crashes, or at the harness
// horizon.

namespace ctdqn::envs {

struct LanderState {
  double x = 0.0;
  double y = 0.0;
  double x_dot = 0.0;
  double y_dot = 0.0;
  double theta = 0.0;      // rad, CCW positive
  double theta_dot = 0.0;  // rad/s
  bool leg_left = false;
  bool leg_right = false;
};

struct TerrainProfile {
  std::vector<double> xs;       // ascending knots
  std::vector<double> heights;  // piecewise-linear between knots
  double pad_half_width = 2.0;

  double height_at(double x) const {
    if (x <= xs.front()) return heights.front();
    if (x >= xs.back()) return heights.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const size_t i = static_cast<size_t>(it - xs.begin());
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return heights[i - 1] + t * (heights[i] - heights[i - 1]);
  }
};

// Flat pad of fixed width at height 0 centered on x = 0; random knot heights
// elsewhere within [0, kMaxTerrainHeight].
inline TerrainProfile generate_terrain(Rng& rng) {
  constexpr double kWorldHalfWidth = 10.0;
  constexpr double kMaxTerrainHeight = 4.0;
  TerrainProfile terrain;
  for (int k = -10; k <= 10; ++k) {
    const double x = static_cast<double>(k) * (kWorldHalfWidth / 10.0);
    terrain.xs.push_back(x);
    const double h =
        std::abs(x) <= terrain.pad_half_width ? 0.0 : rng.uniform(0.0, kMaxTerrainHeight);
    terrain.heights.push_back(h);
  }
  return terrain;
}

enum class LanderOutcome { kFlying, kLanded, kCrashed };

class LanderEnv {
 public:
  using Observation = std::array<double, 8>;

  static constexpr double kDt = 0.02;
  static constexpr double kGravity = 10.0;
  static constexpr double kMainAccel = 15.0;   // along body-up axis
  static constexpr double kSideAccel = 2.0;    // lateral, along body-right axis
  static constexpr double kSideTorque = 0.4;   // rad/s^2 coupling of side thrusters
  static constexpr double kWorldHalfWidth = 10.0;
  static constexpr double kInitY = 12.0;

  // Touchdown classification thresholds.
  static constexpr double kLandVxMax = 0.5;
  static constexpr double kLandVyMax = 0.5;
  static constexpr double kLandTiltMax = 0.2;
  static constexpr double kCrashSpeed = 2.0;

  // Craft geometry, body frame (x right, y up), center of mass at origin.
  static constexpr double kLegSpread = 0.35;
  static constexpr double kLegDrop = 1.0;
  static constexpr double kHullHalfWidth = 0.55;
  static constexpr double kHullHalfHeight = 0.45;

  // Scale dividing position and velocity in the shaping potential and in the
  // observation, so that one unit roughly spans the world.
  static constexpr double kObsScale = 10.0;

  enum Action { kNoop = 0, kLeft = 1, kRight = 2, kMain = 3 };
  static constexpr int kNumActions = 4;

  Observation reset(std::uint64_t seed) {
    Rng rng(seed);
    terrain_ = generate_terrain(rng);
    state_ = LanderState{};
    state_.x = 0.0;
    state_.y = kInitY;
    state_.x_dot = rng.uniform(-1.0, 1.0);
    state_.y_dot = rng.uniform(-1.0, 1.0);
    outcome_ = LanderOutcome::kFlying;
    done_ = false;
    prev_both_legs_ = false;
    return observation();
  }

  // Start from an explicit state over a seeded terrain.
  Observation reset_to(const LanderState& state, std::uint64_t terrain_seed) {
    Rng rng(terrain_seed);
    terrain_ = generate_terrain(rng);
    state_ = state;
    outcome_ = LanderOutcome::kFlying;
    done_ = false;
    prev_both_legs_ = state.leg_left && state.leg_right;
    return observation();
  }

  StepResult<Observation> step(int action) {
    if (done_) throw std::logic_error("lander: episode already terminal");
    if (action < 0 || action >= kNumActions)
      throw std::out_of_range("lander: invalid action index");

    const double d_prev = shaping(state_);
    const bool main_fired = action == kMain;

    // Thruster accelerations in the world frame.
    const double up_x = -std::sin(state_.theta);
    const double up_y = std::cos(state_.theta);
    const double right_x = std::cos(state_.theta);
    const double right_y = std::sin(state_.theta);
    double ax = 0.0, ay = -kGravity, alpha = 0.0;
    if (main_fired) {
      ax += kMainAccel * up_x;
      ay += kMainAccel * up_y;
    } else if (action == kLeft) {
      // Thruster mounted on the left pushes the craft to the right and
      // torques it counterclockwise.
      ax += kSideAccel * right_x;
      ay += kSideAccel * right_y;
      alpha += kSideTorque;
    } else if (action == kRight) {
      ax -= kSideAccel * right_x;
      ay -= kSideAccel * right_y;
      alpha -= kSideTorque;
    }

    state_.x_dot += kDt * ax;
    state_.y_dot += kDt * ay;
    state_.theta_dot += kDt * alpha;
    state_.x += kDt * state_.x_dot;
    state_.y += kDt * state_.y_dot;
    state_.theta += kDt * state_.theta_dot;

    resolve_contacts();

    StepResult<Observation> result;
    result.info.landed = outcome_ == LanderOutcome::kLanded;
    result.info.crashed = outcome_ == LanderOutcome::kCrashed;
    result.terminal = outcome_ != LanderOutcome::kFlying;
    done_ = result.terminal;
    double reward = shaping(state_) - d_prev - (main_fired ? 0.3 : 0.0);
    if (result.info.landed) reward += 100.0;
    if (result.info.crashed) reward -= 100.0;
    result.reward = reward;
    result.observation = observation();
    return result;
  }

  Observation observation() const {
    return {state_.x / kObsScale,     state_.y / kObsScale,
            state_.x_dot / kObsScale, state_.y_dot / kObsScale,
            state_.theta,             state_.theta_dot,
            state_.leg_left ? 1.0 : 0.0, state_.leg_right ? 1.0 : 0.0};
  }

  const LanderState& state() const { return state_; }
  const TerrainProfile& terrain() const { return terrain_; }
  LanderOutcome outcome() const { return outcome_; }

  // Distance of (position, velocity) to the pad-center rest state, in the
  // observation scale. Used as the regulation error for control metrics.
  double goal_distance() const {
    return std::sqrt(state_.x * state_.x + state_.y * state_.y +
                     state_.x_dot * state_.x_dot + state_.y_dot * state_.y_dot) /
           kObsScale;
  }

 private:
  // Potential for reward shaping: approach the pad center slowly and upright,
  // with a bonus per leg in ground contact.
  static double shaping(const LanderState& s) {
    return -100.0 * (std::hypot(s.x, s.y) / kObsScale +
                     std::hypot(s.x_dot, s.y_dot) / kObsScale + std::abs(s.theta)) +
           10.0 * (static_cast<double>(s.leg_left) + static_cast<double>(s.leg_right));
  }

  struct Point {
    double x, y;
  };

  Point body_to_world(double bx, double by) const {
    const double c = std::cos(state_.theta);
    const double s = std::sin(state_.theta);
    return {state_.x + c * bx - s * by, state_.y + s * bx + c * by};
  }

  void resolve_contacts() {
    constexpr double kTol = 1e-9;

    if (std::abs(state_.x) > kWorldHalfWidth) {
      outcome_ = LanderOutcome::kCrashed;
      return;
    }

    const std::array<Point, 4> hull = {
        body_to_world(-kHullHalfWidth, -kHullHalfHeight),
        body_to_world(kHullHalfWidth, -kHullHalfHeight),
        body_to_world(-kHullHalfWidth, kHullHalfHeight),
        body_to_world(kHullHalfWidth, kHullHalfHeight)};
    for (const Point& p : hull) {
      if (p.y < terrain_.height_at(p.x) - kTol) {
        outcome_ = LanderOutcome::kCrashed;
        return;
      }
    }

    const Point left = body_to_world(-kLegSpread, -kLegDrop);
    const Point right = body_to_world(kLegSpread, -kLegDrop);
    const double left_ground = terrain_.height_at(left.x);
    const double right_ground = terrain_.height_at(right.x);
    const bool left_below = left.y <= left_ground + kTol;
    const bool right_below = right.y <= right_ground + kTol;

    const bool fresh_left = left_below && !state_.leg_left;
    const bool fresh_right = right_below && !state_.leg_right;
    const double speed = std::hypot(state_.x_dot, state_.y_dot);
    if ((fresh_left || fresh_right) && speed > kCrashSpeed) {
      outcome_ = LanderOutcome::kCrashed;
      state_.leg_left = left_below;
      state_.leg_right = right_below;
      return;
    }

    // A correct landing is a fresh touchdown of both legs on the pad within
    // the velocity and attitude thresholds; settling onto the ground after a
    // harder first contact does not count.
    if (left_below && right_below && !prev_both_legs_) {
      const bool on_pad = std::abs(left.x) <= terrain_.pad_half_width &&
                          std::abs(right.x) <= terrain_.pad_half_width &&
                          left_ground == 0.0 && right_ground == 0.0;
      if (on_pad && std::abs(state_.x_dot) <= kLandVxMax &&
          std::abs(state_.y_dot) <= kLandVyMax &&
          std::abs(state_.theta) <= kLandTiltMax) {
        state_.leg_left = true;
        state_.leg_right = true;
        prev_both_legs_ = true;
        outcome_ = LanderOutcome::kLanded;
        return;
      }
    }

    // Resting contact: push the craft out of the ground, kill downward
    // velocity, damp sliding and spin. A single-leg contact applies the
    // gravity lever about the support point, so a slightly tilted craft
    // settles onto its second leg while a badly tilted one topples.
    if (left_below || right_below) {
      const double penetration = std::max(left_below ? left_ground - left.y : 0.0,
                                          right_below ? right_ground - right.y : 0.0);
      if (penetration > 0.0) state_.y += penetration;
      if (state_.y_dot < 0.0) state_.y_dot = 0.0;
      state_.x_dot *= 0.5;
      state_.theta_dot *= 0.5;
      if (left_below != right_below) {
        const Point& support = left_below ? left : right;
        state_.theta_dot += -3.0 * (state_.x - support.x) * kDt;
      }
    }
    state_.leg_left = left_below;
    state_.leg_right = right_below;
    prev_both_legs_ = left_below && right_below;
  }

  LanderState state_{};
  TerrainProfile terrain_{};
  LanderOutcome outcome_ = LanderOutcome::kFlying;
  bool done_ = false;
  bool prev_both_legs_ = false;
};

}  // namespace ctdqn::envs
