#pragma once

#include <array>
#include <cmath>

#include "ctdqn/envs/lander.hpp"

namespace ctdqn::tutors {

// Reduced-order state feedback for the lander: v = -K chi with
// chi = [x, x_dot, y, y_dot] and a fixed diagonal-block gain, mapped onto the
// discrete thrusters. The gain was designed on a double-integrator model of
// the center of mass that ignores gravity and attitude entirely, so the tutor
// cannot land the craft by itself.
class LanderTutor {
 public:
  static constexpr std::array<std::array<double, 4>, 2> kGain = {
      {{470.0, 474.7, 0.0, 0.0}, {0.0, 0.0, 470.0, 474.7}}};

  // chi = [x, x_dot, y, y_dot]. Uniform rescaling of chi does not change the
  // selected thruster, so the normalized observation can be fed directly.
  int action(const std::array<double, 4>& chi) const {
    const double vx = -(kGain[0][0] * chi[0] + kGain[0][1] * chi[1] +
                        kGain[0][2] * chi[2] + kGain[0][3] * chi[3]);
    const double vy = -(kGain[1][0] * chi[0] + kGain[1][1] * chi[1] +
                        kGain[1][2] * chi[2] + kGain[1][3] * chi[3]);
    // Mostly-up -> main thruster; mostly-right -> left thruster (it pushes the
    // craft rightwards); mostly-left -> right thruster; otherwise coast.
    if (vy > 0.0 && std::abs(vy) >= std::abs(vx)) return envs::LanderEnv::kMain;
    if (std::abs(vx) > std::abs(vy) && vx > 0.0) return envs::LanderEnv::kLeft;
    if (std::abs(vx) > std::abs(vy) && vx < 0.0) return envs::LanderEnv::kRight;
    return envs::LanderEnv::kNoop;
  }

  int action_from_observation(const envs::LanderEnv::Observation& obs) const {
    return action({obs[0], obs[2], obs[1], obs[3]});
  }
};

}  // namespace ctdqn::tutors
