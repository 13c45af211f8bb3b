#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ctdqn/envs/types.hpp"
#include "ctdqn/rng.hpp"

// Top-down car racing on a procedurally generated closed track. The agent
// observes a stack of the last three rendered grayscale frames; the renderer
// keeps the car fixed near the bottom center of the frame, oriented upwards,
// and prints a speed-indicator bar on the bottom rows. Reward pays
// (horizon / tile count) per newly visited tile minus 0.1 per step; an episode
// ends when 95% of the tiles have been visited or the car strays too far from
// the track.

namespace ctdqn::envs {

constexpr int kFrameSize = 94;

// Flat-shaded render palette. The bar intensity is reserved: nothing else in
// the scene uses it, so the speed readout and the edge-map mask stay exact.
constexpr std::uint8_t kGrassIntensity = 77;
constexpr std::uint8_t kRoadIntensity = 140;
constexpr std::uint8_t kCarIntensity = 0;
constexpr std::uint8_t kBarIntensity = 255;

// Car anchor pixel and view scale.
constexpr int kCarPixelCol = 47;
constexpr int kCarPixelRow = 70;
constexpr double kPixelsPerMeter = 4.0;

// Speed bar occupies the two bottom rows; the row above is masked in the edge
// map because the Roberts stencil at row 91 reads row 92.
constexpr int kBarRowStart = 92;
constexpr int kEdgeMaskRowStart = 91;
constexpr int kBarMaxLength = 93;

struct Frame {
  std::array<std::uint8_t, kFrameSize * kFrameSize> px{};

  std::uint8_t at(int row, int col) const { return px[row * kFrameSize + col]; }
  void set(int row, int col, std::uint8_t v) { px[row * kFrameSize + col] = v; }
};

using FramePtr = std::shared_ptr<const Frame>;

// Three consecutive frames, oldest first. Fed to the value network as a
// 94 x 94 x 3 input with the stack index as the channel.
struct FrameStack {
  std::array<FramePtr, 3> frames;

  const Frame& newest() const { return *frames[2]; }
};

template <>
struct ObsCodec<FrameStack> {
  static constexpr int kInputSize = kFrameSize * kFrameSize * 3;
  static void append(const FrameStack& stack, std::vector<double>& out) {
    const size_t base = out.size();
    out.resize(base + static_cast<size_t>(kInputSize));
    double* dst = out.data() + base;
    for (int i = 0; i < kFrameSize * kFrameSize; ++i)
      for (int f = 0; f < 3; ++f)
        dst[i * 3 + f] = static_cast<double>(stack.frames[f]->px[i]) / 255.0;
  }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// One road tile: a centerline segment of roughly kTileLength meters. The road
// surface is every point within kRoadHalfWidth of the centerline.
struct TrackTile {
  Vec2 a, b;
};

constexpr double kTileLength = 2.5;
constexpr double kRoadHalfWidth = 2.5;
constexpr double kRoadWidth = 2.0 * kRoadHalfWidth;

struct Track {
  std::vector<TrackTile> tiles;  // closed loop: tiles[i].b == tiles[i+1].a
};

namespace detail {

inline double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = a.x + t * dx, cy = a.y + t * dy;
  return std::hypot(p.x - cx, p.y - cy);
}

inline double dist_segment_segment(const Vec2& a1, const Vec2& a2, const Vec2& b1,
                                   const Vec2& b2) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
  };
  const double o1 = orient(a1, a2, b1), o2 = orient(a1, a2, b2);
  const double o3 = orient(b1, b2, a1), o4 = orient(b1, b2, a2);
  if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0))) return 0.0;  // crossing
  return std::min(std::min(dist_point_segment(b1, a1, a2), dist_point_segment(b2, a1, a2)),
                  std::min(dist_point_segment(a1, b1, b2), dist_point_segment(a2, b1, b2)));
}

// Centripetal Catmull-Rom (alpha = 0.5): no cusps or local loops even with
// unevenly spaced control points. u in [0, 1) spans the p1..p2 segment.
inline Vec2 catmull_rom(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3,
                        double u) {
  auto knot = [](double t, const Vec2& a, const Vec2& b) {
    return t + std::sqrt(std::hypot(b.x - a.x, b.y - a.y));
  };
  const double t0 = 0.0;
  const double t1 = knot(t0, p0, p1);
  const double t2 = knot(t1, p1, p2);
  const double t3 = knot(t2, p2, p3);
  const double t = t1 + u * (t2 - t1);
  auto lerp = [](const Vec2& a, const Vec2& b, double w) {
    return Vec2{a.x + (b.x - a.x) * w, a.y + (b.y - a.y) * w};
  };
  const Vec2 a1 = lerp(p0, p1, (t - t0) / (t1 - t0));
  const Vec2 a2 = lerp(p1, p2, (t - t1) / (t2 - t1));
  const Vec2 a3 = lerp(p2, p3, (t - t2) / (t3 - t2));
  const Vec2 b1 = lerp(a1, a2, (t - t0) / (t2 - t0));
  const Vec2 b2 = lerp(a2, a3, (t - t1) / (t3 - t1));
  return lerp(b1, b2, (t - t1) / (t2 - t1));
}

// One pass of closed-polyline Laplacian smoothing.
inline void smooth_closed(std::vector<Vec2>& pts) {
  const size_t n = pts.size();
  std::vector<Vec2> out(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec2& prev = pts[(i + n - 1) % n];
    const Vec2& next = pts[(i + 1) % n];
    out[i] = {0.25 * prev.x + 0.5 * pts[i].x + 0.25 * next.x,
              0.25 * prev.y + 0.5 * pts[i].y + 0.25 * next.y};
  }
  pts = std::move(out);
}

}  // namespace detail

// Closed smooth loop built from random radial control points with periodic
// Catmull-Rom smoothing, resampled into tiles of ~kTileLength. Candidates with
// fewer than 100 tiles, sharp corners, or self-approaching geometry are
// rejected and regenerated from the same stream.
inline Track generate_track(Rng& rng) {
  constexpr int kControlPoints = 16;
  constexpr int kSamplesPerSegment = 40;
  constexpr int kMaxAttempts = 100;
  constexpr int kMinTiles = 100;
  constexpr double kMaxHeadingStep = 25.0 * std::numbers::pi / 180.0;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    // Radial profile r(phi) = base + three random harmonics keeps the loop
    // smooth by construction; i.i.d. radii kink the spline.
    const double base = rng.uniform(40.0, 50.0);
    const double a1 = rng.uniform(0.0, 9.0), p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double a2 = rng.uniform(0.0, 6.0), p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double a3 = rng.uniform(0.0, 3.0), p3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::array<Vec2, kControlPoints> ctrl;
    for (int i = 0; i < kControlPoints; ++i) {
      const double phi = 2.0 * std::numbers::pi * i / kControlPoints;
      const double radius = base + a1 * std::cos(phi + p1) + a2 * std::cos(2.0 * phi + p2) +
                            a3 * std::cos(3.0 * phi + p3);
      ctrl[i] = {radius * std::cos(phi), radius * std::sin(phi)};
    }

    std::vector<Vec2> samples;
    samples.reserve(kControlPoints * kSamplesPerSegment);
    for (int i = 0; i < kControlPoints; ++i) {
      const Vec2& p0 = ctrl[(i + kControlPoints - 1) % kControlPoints];
      const Vec2& p1 = ctrl[i];
      const Vec2& p2 = ctrl[(i + 1) % kControlPoints];
      const Vec2& p3 = ctrl[(i + 2) % kControlPoints];
      for (int s = 0; s < kSamplesPerSegment; ++s)
        samples.push_back(detail::catmull_rom(p0, p1, p2, p3,
                                              static_cast<double>(s) / kSamplesPerSegment));
    }
    detail::smooth_closed(samples);
    detail::smooth_closed(samples);

    std::vector<double> cumulative(samples.size() + 1, 0.0);
    for (size_t i = 0; i < samples.size(); ++i) {
      const Vec2& a = samples[i];
      const Vec2& b = samples[(i + 1) % samples.size()];
      cumulative[i + 1] = cumulative[i] + std::hypot(b.x - a.x, b.y - a.y);
    }
    const double total = cumulative.back();
    const int tile_count = static_cast<int>(std::floor(total / kTileLength));
    if (tile_count < kMinTiles) continue;

    // Equal arc-length boundaries; the wrap from the last boundary back to the
    // first closes the loop exactly.
    std::vector<Vec2> boundary(tile_count);
    size_t cursor = 0;
    for (int k = 0; k < tile_count; ++k) {
      const double target = total * static_cast<double>(k) / tile_count;
      while (cursor + 1 < cumulative.size() - 1 && cumulative[cursor + 1] < target) ++cursor;
      const double seg_len = cumulative[cursor + 1] - cumulative[cursor];
      const double t = seg_len > 0.0 ? (target - cumulative[cursor]) / seg_len : 0.0;
      const Vec2& a = samples[cursor];
      const Vec2& b = samples[(cursor + 1) % samples.size()];
      boundary[k] = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }

    Track track;
    track.tiles.resize(tile_count);
    for (int k = 0; k < tile_count; ++k) {
      track.tiles[k].a = boundary[k];
      track.tiles[k].b = boundary[(k + 1) % tile_count];
    }

    bool ok = true;
    for (int k = 0; k < tile_count && ok; ++k) {
      const TrackTile& t0 = track.tiles[k];
      const TrackTile& t1 = track.tiles[(k + 1) % tile_count];
      const double h0 = std::atan2(t0.b.y - t0.a.y, t0.b.x - t0.a.x);
      const double h1 = std::atan2(t1.b.y - t1.a.y, t1.b.x - t1.a.x);
      double dh = std::fabs(h1 - h0);
      if (dh > std::numbers::pi) dh = 2.0 * std::numbers::pi - dh;
      if (dh > kMaxHeadingStep) ok = false;
    }
    // Non-adjacent tiles must keep clear of each other or the two road bands
    // would overlap or cross.
    for (int i = 0; i < tile_count && ok; ++i) {
      for (int j = i + 3; j < tile_count && ok; ++j) {
        if (i == 0 && j >= tile_count - 2) continue;  // wrap-adjacency
        if (i == 1 && j == tile_count - 1) continue;
        const double d = detail::dist_segment_segment(
            track.tiles[i].a, track.tiles[i].b, track.tiles[j].a, track.tiles[j].b);
        if (d < kRoadWidth) ok = false;
      }
    }
    if (ok) return track;
  }
  throw std::runtime_error("generate_track: retries exhausted");
}

struct CarWorld {
  Track track;
  std::vector<std::uint8_t> visited;  // per tile
  int visited_count = 0;
  Vec2 position;
  double heading = 0.0;  // rad, world frame
  double speed = 0.0;    // m/s
  double steer = 0.0;    // rad
  FrameStack frame_history;
};

constexpr double kCarTopSpeed = 20.0;
constexpr double kCarAccel = 3.0;
constexpr double kCarBrake = 6.0;
constexpr double kCarSteerStep = 0.3;
constexpr double kCarSteerMax = 0.6;
constexpr double kCarWheelBase = 2.5;
constexpr double kCarDt = 0.1;
constexpr double kOffTrackDistance = 3.0 * kRoadWidth;

// Renders the scene around the car: road band in road-gray over grass, the car
// sprite fixed at its anchor pixel oriented up, and the speed bar with length
// round(93 * speed / top_speed) on the bottom rows.
inline Frame rasterize_frame(const CarWorld& world) {
  Frame frame;
  const double fwd_x = std::cos(world.heading), fwd_y = std::sin(world.heading);
  const double right_x = fwd_y, right_y = -fwd_x;

  // Only tiles near the car can appear in the 94-pixel view.
  const double view_radius = kFrameSize / kPixelsPerMeter + kRoadHalfWidth;
  std::vector<const TrackTile*> near;
  for (const TrackTile& t : world.track.tiles) {
    if (detail::dist_point_segment(world.position, t.a, t.b) <= view_radius)
      near.push_back(&t);
  }

  for (int row = 0; row < kFrameSize; ++row) {
    const double y_m = (kCarPixelRow - row) / kPixelsPerMeter;
    for (int col = 0; col < kFrameSize; ++col) {
      const double x_m = (col - kCarPixelCol) / kPixelsPerMeter;
      const Vec2 p = {world.position.x + fwd_x * y_m + right_x * x_m,
                      world.position.y + fwd_y * y_m + right_y * x_m};
      bool road = false;
      for (const TrackTile* t : near) {
        if (detail::dist_point_segment(p, t->a, t->b) <= kRoadHalfWidth) {
          road = true;
          break;
        }
      }
      frame.set(row, col, road ? kRoadIntensity : kGrassIntensity);
    }
  }

  // Car sprite, fixed location, pointing up.
  for (int row = kCarPixelRow - 3; row <= kCarPixelRow + 3; ++row)
    for (int col = kCarPixelCol - 2; col <= kCarPixelCol + 2; ++col)
      frame.set(row, col, kCarIntensity);

  const int bar_len = static_cast<int>(
      std::lround(kBarMaxLength * std::clamp(world.speed / kCarTopSpeed, 0.0, 1.0)));
  for (int row = kBarRowStart; row < kFrameSize; ++row)
    for (int col = 0; col < bar_len; ++col) frame.set(row, col, kBarIntensity);

  return frame;
}

class CarEnv {
 public:
  using Observation = FrameStack;

  enum Action { kNoop = 0, kSteerLeft = 1, kSteerRight = 2, kAccelerate = 3, kBrake = 4 };
  static constexpr int kNumActions = 5;

  // `horizon` is the episode step budget N; it sets the per-tile reward scale
  // N / tile_count.
  explicit CarEnv(int horizon) : horizon_(horizon) {
    if (horizon <= 0) throw std::invalid_argument("car: horizon must be positive");
  }

  Observation reset(std::uint64_t seed) {
    Rng rng(seed);
    world_.track = generate_track(rng);
    world_.visited.assign(world_.track.tiles.size(), 0);
    world_.visited_count = 0;
    const TrackTile& first = world_.track.tiles.front();
    world_.position = first.a;
    // Face the road direction one tile ahead (the look-ahead distance), not
    // the local seam direction, so a standing start on a bend is aligned.
    const TrackTile& ahead = world_.track.tiles[1];
    world_.heading = std::atan2(ahead.b.y - ahead.a.y, ahead.b.x - ahead.a.x);
    world_.speed = 0.0;
    world_.steer = 0.0;
    done_ = false;
    const FramePtr f = std::make_shared<Frame>(rasterize_frame(world_));
    world_.frame_history.frames = {f, f, f};
    return world_.frame_history;
  }

  StepResult<Observation> step(int action) {
    if (done_) throw std::logic_error("car: episode already terminal");
    if (action < 0 || action >= kNumActions)
      throw std::out_of_range("car: invalid action index");

    switch (action) {
      case kSteerLeft:
        world_.steer = std::min(world_.steer + kCarSteerStep, kCarSteerMax);
        break;
      case kSteerRight:
        world_.steer = std::max(world_.steer - kCarSteerStep, -kCarSteerMax);
        break;
      default:
        // Wheel returns toward center when not being held.
        if (world_.steer > 0.0)
          world_.steer = std::max(0.0, world_.steer - kCarSteerStep);
        else
          world_.steer = std::min(0.0, world_.steer + kCarSteerStep);
        break;
    }
    if (action == kAccelerate)
      world_.speed = std::min(world_.speed + kCarAccel * kCarDt, kCarTopSpeed);
    else if (action == kBrake)
      world_.speed = std::max(world_.speed - kCarBrake * kCarDt, 0.0);

    world_.heading += world_.speed / kCarWheelBase * std::tan(world_.steer) * kCarDt;
    world_.position.x += world_.speed * std::cos(world_.heading) * kCarDt;
    world_.position.y += world_.speed * std::sin(world_.heading) * kCarDt;

    int new_tiles = 0;
    double nearest = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < world_.track.tiles.size(); ++i) {
      const TrackTile& t = world_.track.tiles[i];
      const double d = detail::dist_point_segment(world_.position, t.a, t.b);
      nearest = std::min(nearest, d);
      if (d <= kRoadHalfWidth && !world_.visited[i]) {
        world_.visited[i] = 1;
        ++world_.visited_count;
        ++new_tiles;
      }
    }

    const double tile_total = static_cast<double>(world_.track.tiles.size());
    StepResult<Observation> result;
    result.info.new_tiles = new_tiles;
    result.reward = static_cast<double>(horizon_) / tile_total * new_tiles - 0.1;

    const int goal_tiles =
        static_cast<int>(std::ceil(0.95 * static_cast<double>(world_.track.tiles.size())));
    if (world_.visited_count >= goal_tiles || nearest > kOffTrackDistance) {
      result.terminal = true;
      done_ = true;
    }

    const FramePtr f = std::make_shared<Frame>(rasterize_frame(world_));
    world_.frame_history.frames = {world_.frame_history.frames[1],
                                   world_.frame_history.frames[2], f};
    result.observation = world_.frame_history;
    return result;
  }

  const CarWorld& world() const { return world_; }
  int horizon() const { return horizon_; }

 private:
  CarWorld world_;
  int horizon_ = 0;
  bool done_ = false;
};

}  // namespace ctdqn::envs
