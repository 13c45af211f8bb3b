#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctdqn::envs {

enum class EnvKind { kPendulum, kLander, kCar };

inline const char* to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::kPendulum: return "pendulum";
    case EnvKind::kLander: return "lander";
    case EnvKind::kCar: return "car";
  }
  return "?";
}

inline EnvKind env_kind_from_string(const std::string& s) {
  if (s == "pendulum") return EnvKind::kPendulum;
  if (s == "lander") return EnvKind::kLander;
  if (s == "car") return EnvKind::kCar;
  throw std::invalid_argument("unknown environment kind: " + s);
}

struct StepInfo {
  bool landed = false;
  bool crashed = false;
  int new_tiles = 0;
};

template <class Obs>
struct StepResult {
  Obs observation;
  double reward = 0.0;
  bool terminal = false;
  StepInfo info;
};

// Flattening of observations into network inputs, specialized per observation
// type (image stacks specialize this in their own header).
template <class Obs>
struct ObsCodec;

template <size_t N>
struct ObsCodec<std::array<double, N>> {
  static constexpr int kInputSize = static_cast<int>(N);
  static void append(const std::array<double, N>& obs, std::vector<double>& out) {
    out.insert(out.end(), obs.begin(), obs.end());
  }
};

}  // namespace ctdqn::envs
