#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fploc/core.hpp"

namespace fploc {

/// Walking paces used for the in-motion experiments, in m/s.
enum class Pace { slow, normal, fast };

inline constexpr double pace_mps(Pace p) {
  switch (p) {
    case Pace::slow: return 0.75;
    case Pace::normal: return 1.15;
    case Pace::fast: return 1.69;
  }
  return 0.0;
}

inline const char* to_string(Pace p) {
  switch (p) {
    case Pace::slow: return "Slow";
    case Pace::normal: return "Normal";
    case Pace::fast: return "Fast";
  }
  return "?";
}

inline Pace pace_from_string(std::string_view s) {
  if (s == "Slow" || s == "slow") return Pace::slow;
  if (s == "Normal" || s == "normal") return Pace::normal;
  if (s == "Fast" || s == "fast") return Pace::fast;
  throw std::invalid_argument("unknown pace '" + std::string(s) + "'");
}

enum class OrientationMode { constant, changing };

inline const char* to_string(OrientationMode m) { return m == OrientationMode::constant ? "Constant" : "Changing"; }

inline OrientationMode orientation_from_string(std::string_view s) {
  if (s == "Constant" || s == "constant") return OrientationMode::constant;
  if (s == "Changing" || s == "changing") return OrientationMode::changing;
  throw std::invalid_argument("unknown orientation mode '" + std::string(s) + "'");
}

struct TrajectoryVertex {
  GridPosition position;
  double time = 0.0;

  bool operator==(const TrajectoryVertex&) const = default;
};

/// Piecewise-linear walk: vertex timestamps are strictly increasing and every segment is
/// traversed at the declared pace.
struct Trajectory {
  std::vector<TrajectoryVertex> vertices;
  double pace = 0.0;
  std::string pace_label;

  double start_time() const { return vertices.front().time; }
  double end_time() const { return vertices.back().time; }

  /// Ground-truth position at time t, linear between the bracketing vertices.
  GridPosition position_at(double t) const {
    if (vertices.empty()) throw std::logic_error("trajectory: no vertices");
    if (t < start_time() || t > end_time())
      throw std::out_of_range("trajectory: t=" + std::to_string(t) + " outside [" + std::to_string(start_time()) + ", " +
                              std::to_string(end_time()) + "]");
    auto it = std::upper_bound(vertices.begin(), vertices.end(), t,
                               [](double v, const TrajectoryVertex& vx) { return v < vx.time; });
    if (it == vertices.end()) return vertices.back().position;
    const auto& b = *it;
    const auto& a = *(it - 1);
    if (t == a.time) return a.position;
    const double f = (t - a.time) / (b.time - a.time);
    return {a.position.x + f * (b.position.x - a.position.x), a.position.y + f * (b.position.y - a.position.y)};
  }

  /// User standing still at one point for `duration` seconds.
  static Trajectory stationary(GridPosition p, double duration) {
    if (!(duration > 0.0)) throw std::invalid_argument("trajectory: duration must be positive");
    return Trajectory{{{p, 0.0}, {p, duration}}, 0.0, "Static"};
  }

  bool operator==(const Trajectory&) const = default;
};

/// Vertex timestamps from segment lengths (tiles converted to meters) at a constant pace.
inline Trajectory generate_trajectory(std::span<const GridPosition> vertices, double pace, Bounds bounds,
                                      std::string pace_label = {}) {
  if (vertices.size() < 2) throw std::invalid_argument("generate_trajectory: fewer than 2 vertices");
  if (!(pace > 0.0)) throw std::invalid_argument("generate_trajectory: pace must be positive");
  Trajectory t;
  t.pace = pace;
  t.pace_label = std::move(pace_label);
  double time = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!bounds.contains(vertices[i])) throw std::invalid_argument("generate_trajectory: vertex outside bounds");
    if (i > 0) {
      const double len = distance_m(vertices[i - 1], vertices[i]);
      if (!(len > 0.0)) throw std::invalid_argument("generate_trajectory: repeated vertex");
      time += len / pace;
    }
    t.vertices.push_back({vertices[i], time});
  }
  return t;
}

inline Trajectory generate_trajectory(std::span<const GridPosition> vertices, Pace pace, Bounds bounds) {
  return generate_trajectory(vertices, pace_mps(pace), bounds, to_string(pace));
}

struct WalkSample {
  double time = 0.0;
  Fingerprint fingerprint;

  bool operator==(const WalkSample&) const = default;
};

/// Fingerprints captured while walking a trajectory.
struct WalkLog {
  AttributeSchema schema;
  Trajectory trajectory;
  OrientationMode orientation = OrientationMode::constant;
  std::vector<WalkSample> samples;

  bool operator==(const WalkLog&) const = default;
};

}  // namespace fploc
