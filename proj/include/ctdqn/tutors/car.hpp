#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "ctdqn/envs/car.hpp"

// Vision tutor for the car: detects road margins with a Roberts operator,
// estimates the road direction a fixed look-ahead in front of the car, reads
// the speed bar, and maps the result to steer/accelerate/brake suggestions.
// Everything works in frame coordinates with the car at the origin and the
// y-axis pointing up (the direction of travel).

namespace ctdqn::tutors {

struct CarTutorParams {
  double look_ahead_px = 10.0;      // l_p, pixels ahead of the car
  double scan_offset_px = 2.0;      // scan lines at look-ahead -/+ this offset
  double accel_angle_deg = 15.0;    // accelerate only when straighter than this
  double brake_angle_deg = 50.0;    // brake when the road bends more than this
  double accel_speed_frac = 0.4;    // accelerate below this fraction of top speed
  double steer_deadband_deg = 3.0;  // no steering correction inside this band
  // Absolute edge-magnitude threshold: 10% of the renderer's 8-bit intensity
  // range. The road/grass step responds at ~89, far above it.
  double edge_threshold = 25.5;
};

struct RoadGeometry {
  // Margin intersection points in frame coordinates (x right, y up), at most 4.
  std::vector<std::array<double, 2>> points;
  double v_road_x = 0.0;
  double v_road_y = 0.0;
  double theta_deg = 0.0;  // signed angle from the car's up-vector to v_road
  bool off_road = false;
  bool found = false;
};

// Roberts cross magnitude map, same 94x94 layout as the frame. Stencils that
// would read past the last row/column produce zero, and the speed-bar rows
// (plus the row whose stencil touches them) are masked to zero.
inline std::vector<double> roberts_edge_map(const envs::Frame& frame) {
  constexpr int n = envs::kFrameSize;
  std::vector<double> mag(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    if (i >= envs::kEdgeMaskRowStart) break;
    for (int j = 0; j + 1 < n; ++j) {
      const double g1 = static_cast<double>(frame.at(i, j)) - frame.at(i + 1, j + 1);
      const double g2 = static_cast<double>(frame.at(i, j + 1)) - frame.at(i + 1, j);
      mag[static_cast<size_t>(i) * n + j] = std::hypot(g1, g2);
    }
  }
  return mag;
}

namespace detail {

// Columns with above-threshold magnitude in one row, grouped into clusters
// (gap <= 2 columns) and reduced to centroid x positions.
inline std::vector<double> scan_row_clusters(const std::vector<double>& edges, int row,
                                             double threshold) {
  constexpr int n = envs::kFrameSize;
  std::vector<double> centers;
  double sum = 0.0;
  int count = 0;
  int last_col = -10;
  for (int col = 0; col < n; ++col) {
    if (edges[static_cast<size_t>(row) * n + col] > threshold) {
      if (count > 0 && col - last_col > 2) {
        centers.push_back(sum / count);
        sum = 0.0;
        count = 0;
      }
      sum += col;
      ++count;
      last_col = col;
    }
  }
  if (count > 0) centers.push_back(sum / count);
  return centers;
}

}  // namespace detail

inline RoadGeometry extract_road_geometry(const std::vector<double>& edges,
                                          const CarTutorParams& params) {
  constexpr double x_c = envs::kCarPixelCol;
  const double row_h = envs::kCarPixelRow - params.look_ahead_px;
  const int row_upper = static_cast<int>(std::lround(row_h - params.scan_offset_px));
  const int row_lower = static_cast<int>(std::lround(row_h + params.scan_offset_px));

  auto to_frame = [](double col, int row) -> std::array<double, 2> {
    return {col - x_c, static_cast<double>(envs::kCarPixelRow - row)};
  };

  RoadGeometry geom;
  const std::vector<double> upper =
      detail::scan_row_clusters(edges, row_upper, params.edge_threshold);
  const std::vector<double> lower =
      detail::scan_row_clusters(edges, row_lower, params.edge_threshold);
  if (upper.empty() && lower.empty()) return geom;  // found = false
  geom.found = true;

  // Nearest hit left and right of the car column in one scan row.
  auto sides = [](const std::vector<double>& xs) {
    constexpr double c = envs::kCarPixelCol;
    double left = -1.0, right = -1.0;
    for (double x : xs) {
      if (x < c && (left < 0.0 || c - x < c - left)) left = x;
      if (x > c && (right < 0.0 || x - c < right - c)) right = x;
    }
    return std::array<double, 2>{left, right};
  };
  const auto [u_left, u_right] = sides(upper);
  const auto [l_left, l_right] = sides(lower);

  if (u_left >= 0.0 && u_right >= 0.0 && l_left >= 0.0 && l_right >= 0.0) {
    const std::array<double, 2> pul = to_frame(u_left, row_upper);
    const std::array<double, 2> pur = to_frame(u_right, row_upper);
    const std::array<double, 2> pll = to_frame(l_left, row_lower);
    const std::array<double, 2> plr = to_frame(l_right, row_lower);
    geom.points = {pul, pur, pll, plr};
    // Pick the margin whose points lie closer to the look-ahead point.
    const double y_h = envs::kCarPixelRow - row_h;
    auto margin_dist = [y_h](const std::array<double, 2>& a,
                             const std::array<double, 2>& b) {
      return std::hypot(a[0], a[1] - y_h) + std::hypot(b[0], b[1] - y_h);
    };
    const bool use_left = margin_dist(pul, pll) <= margin_dist(pur, plr);
    const std::array<double, 2>& top = use_left ? pul : pur;
    const std::array<double, 2>& bottom = use_left ? pll : plr;
    // Oriented from the lower scan line to the upper one, so the y-component
    // is positive and the sign of theta is meaningful.
    geom.v_road_x = top[0] - bottom[0];
    geom.v_road_y = top[1] - bottom[1];
    geom.theta_deg =
        std::atan2(geom.v_road_x, geom.v_road_y) * 180.0 / std::numbers::pi;
    return geom;
  }

  // Fewer than four usable points, or every point on one side of the car:
  // the car is off the road and v_road points from the car to the nearest hit.
  geom.off_road = true;
  double best = 0.0;
  bool have = false;
  auto consider = [&](const std::vector<double>& xs, int row) {
    for (double x : xs) {
      const std::array<double, 2> p = to_frame(x, row);
      geom.points.push_back(p);
      const double d = std::hypot(p[0], p[1]);
      if (!have || d < best) {
        best = d;
        geom.v_road_x = p[0];
        geom.v_road_y = p[1];
        have = true;
      }
    }
  };
  consider(upper, row_upper);
  consider(lower, row_lower);
  geom.theta_deg =
      std::atan2(geom.v_road_x, geom.v_road_y) * 180.0 / std::numbers::pi;
  return geom;
}

// Bar pixel count over the readable bar width, as a fraction of top speed.
inline double read_speed(const envs::Frame& frame) {
  int count = 0;
  for (int col = 0; col < envs::kFrameSize; ++col)
    if (frame.at(envs::kFrameSize - 1, col) == envs::kBarIntensity) ++count;
  return static_cast<double>(count) / envs::kBarMaxLength;
}

// Priority: brake on sharp road angles, then steer toward the road direction,
// then accelerate when slow and straight, else coast. Off the road, steer
// toward the road and do not accelerate. No geometry at all suggests nothing.
inline int car_tutor_decide(const RoadGeometry& geom, double speed_frac,
                            const CarTutorParams& params) {
  if (!geom.found) return envs::CarEnv::kNoop;
  if (geom.off_road) {
    if (geom.v_road_x < 0.0) return envs::CarEnv::kSteerLeft;
    if (geom.v_road_x > 0.0) return envs::CarEnv::kSteerRight;
    return envs::CarEnv::kNoop;
  }
  const double angle = std::abs(geom.theta_deg);
  if (angle > params.brake_angle_deg) return envs::CarEnv::kBrake;
  if (angle > params.steer_deadband_deg)
    return geom.theta_deg < 0.0 ? envs::CarEnv::kSteerLeft : envs::CarEnv::kSteerRight;
  if (speed_frac < params.accel_speed_frac && angle < params.accel_angle_deg)
    return envs::CarEnv::kAccelerate;
  return envs::CarEnv::kNoop;
}

inline int car_tutor_action(const envs::FrameStack& stack, const CarTutorParams& params) {
  const envs::Frame& frame = stack.newest();
  const RoadGeometry geom = extract_road_geometry(roberts_edge_map(frame), params);
  return car_tutor_decide(geom, read_speed(frame), params);
}

}  // namespace ctdqn::tutors
