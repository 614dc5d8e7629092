#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fploc/core.hpp"
#include "fploc/trajectory.hpp"
#include "fploc/util.hpp"

namespace fploc {

struct Radio {
  std::string name;
  int ap = 0;
  GridPosition position;
  /// Received power at the reference distance.
  double tx_power_dbm = -40.0;
  double ref_distance_m = 1.0;

  bool operator==(const Radio&) const = default;
};

/// Axis-aligned rectangle in tile coordinates that attenuates every radio path crossing it.
struct Obstacle {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double attenuation_db = 0.0;
  /// Survey points inside the rectangle cannot be recorded.
  bool blocks_survey = true;

  bool covers(const GridPosition& p) const noexcept { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  bool operator==(const Obstacle&) const = default;
};

/// Position-independent baselines of the auxiliary sensors.
struct SensorModel {
  double light_lux = 300.0;
  double light_sd = 20.0;
  double gps_lat = 41.6036;
  double gps_lon = -93.6526;
  double gravity = 9.81;
  double accel_sd = 0.05;
  double mag_horizontal_ut = 20.0;
  double mag_vertical_ut = -45.0;
  double mag_sd = 1.0;
  double rot_sd = 0.01;
  double orient_sd_deg = 2.0;
  /// Heading of the device while surveying ("facing south").
  double survey_azimuth_deg = 180.0;

  bool operator==(const SensorModel&) const = default;
};

/// Log-distance path-loss radio world over the tile grid.
struct Environment {
  Bounds bounds = kBuildingBounds;
  std::vector<Radio> radios;
  std::vector<Obstacle> obstacles;
  double path_loss_exponent = 3.0;
  double shadowing_sd_db = 4.0;
  double detection_threshold_dbm = -95.0;
  /// Round readings to whole dBm like a phone's scan results.
  bool quantize_dbm = true;
  SensorModel sensors;

  void validate() const {
    if (bounds.width_tiles <= 0 || bounds.height_tiles <= 0) throw DataError("environment: bounds must be positive");
    if (radios.empty()) throw DataError("environment: at least one radio required");
    if (!(shadowing_sd_db >= 0.0)) throw DataError("environment: shadowing sigma must be >= 0");
    if (!(detection_threshold_dbm > kMissingRssi))
      throw DataError("environment: detection threshold must exceed the missing sentinel");
    for (const auto& r : radios)
      if (!(r.ref_distance_m > 0.0)) throw DataError("environment: reference distance must be positive");
  }

  AttributeSchema schema() const {
    std::vector<std::string> names;
    for (const auto& r : radios) names.push_back(r.name);
    return standard_schema(names);
  }

  bool surveyable(const GridPosition& p) const {
    return std::none_of(obstacles.begin(), obstacles.end(),
                        [&](const Obstacle& o) { return o.blocks_survey && o.covers(p); });
  }

  bool operator==(const Environment&) const = default;
};

/// True when the segment a-b passes through the rectangle's interior for a positive length (Liang-Barsky).
inline bool segment_crosses(const GridPosition& a, const GridPosition& b, const Obstacle& o) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - o.x0, o.x1 - a.x, a.y - o.y0, o.y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] <= 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0)
      t0 = std::max(t0, r);
    else
      t1 = std::min(t1, r);
    if (t0 >= t1) return false;
  }
  return t1 > t0;
}

inline double wall_loss_db(const Environment& env, const GridPosition& a, const GridPosition& b) {
  double loss = 0.0;
  for (const auto& o : env.obstacles)
    if (segment_crosses(a, b, o)) loss += o.attenuation_db;
  return loss;
}

/// Noise-free received power: P0 - 10 n log10(max(d, d0) / d0) - wall losses.
inline double mean_rssi(const Environment& env, const Radio& radio, const GridPosition& p) {
  const double d = distance_m(radio.position, p);
  return radio.tx_power_dbm -
         10.0 * env.path_loss_exponent * std::log10(std::max(d, radio.ref_distance_m) / radio.ref_distance_m) -
         wall_loss_db(env, radio.position, p);
}

/// One reading with lognormal shadowing; nullopt when below the detection threshold.
inline std::optional<double> rssi_at(const Environment& env, const Radio& radio, const GridPosition& p, Rng& rng) {
  double v = mean_rssi(env, radio, p);
  if (env.shadowing_sd_db > 0.0) v += std::normal_distribution<double>(0.0, env.shadowing_sd_db)(rng);
  if (env.quantize_dbm) v = std::round(v);
  if (v < env.detection_threshold_dbm) return std::nullopt;
  return v;
}

namespace detail {

inline double noisy(double mean, double sd, Rng& rng) {
  return sd > 0.0 ? mean + std::normal_distribution<double>(0.0, sd)(rng) : mean;
}

}  // namespace detail

/// Full fingerprint at a position: every radio in environment order, then the auxiliary block.
inline Fingerprint sample_fingerprint(const Environment& env, const GridPosition& p, double azimuth_deg, Rng& rng) {
  const std::size_t nr = env.radios.size();
  Fingerprint f(nr + kAuxiliaryCount);
  for (std::size_t i = 0; i < nr; ++i) {
    auto v = rssi_at(env, env.radios[i], p, rng);
    if (v)
      f.values[i] = *v;
    else
      f.set_missing(i);
  }
  const auto& s = env.sensors;
  const double heading = detail::noisy(azimuth_deg, s.orient_sd_deg, rng);
  const double rad = heading * std::numbers::pi / 180.0;
  // Light is reported in whole lux; the motion and field sensors are continuous.
  double aux[kAuxiliaryCount] = {
      std::max(0.0, std::round(detail::noisy(s.light_lux, s.light_sd, rng))),
      s.gps_lat,
      s.gps_lon,
      detail::noisy(0.0, s.accel_sd, rng),
      detail::noisy(0.0, s.accel_sd, rng),
      detail::noisy(s.gravity, s.accel_sd, rng),
      detail::noisy(-s.mag_horizontal_ut * std::sin(rad), s.mag_sd, rng),
      detail::noisy(s.mag_horizontal_ut * std::cos(rad), s.mag_sd, rng),
      detail::noisy(s.mag_vertical_ut, s.mag_sd, rng),
      detail::noisy(0.0, s.rot_sd, rng),
      detail::noisy(0.0, s.rot_sd, rng),
      detail::noisy(std::sin(rad / 2.0), s.rot_sd, rng),
      std::fmod(std::fmod(heading, 360.0) + 360.0, 360.0),
      detail::noisy(0.0, s.orient_sd_deg, rng),
      detail::noisy(0.0, s.orient_sd_deg, rng),
  };
  for (std::size_t k = 0; k < kAuxiliaryCount; ++k) f.values[nr + k] = aux[k];
  return f;
}

/// Survey grid step in tiles along each axis.
struct Spacing {
  int x = 1;
  int y = 1;

  Spacing() = default;
  Spacing(int both) : x(both), y(both) {}  // NOLINT(google-explicit-constructor)
  Spacing(int sx, int sy) : x(sx), y(sy) {}
};

/// One reading per surveyable grid position, rows (y) outer and columns (x) inner.
/// Each row draws from its own derived random stream.
inline Dataset generate_dataset(const Environment& env, Spacing spacing, std::uint64_t seed) {
  env.validate();
  if (spacing.x < 1 || spacing.y < 1) throw std::invalid_argument("generate_dataset: spacing must be >= 1");
  Dataset d(env.schema(), env.bounds);
  for (int y = 0; y < env.bounds.height_tiles; y += spacing.y) {
    Rng rng(derive_seed(seed, "survey-row", static_cast<std::uint64_t>(y)));
    for (int x = 0; x < env.bounds.width_tiles; x += spacing.x) {
      GridPosition p{static_cast<double>(x), static_cast<double>(y)};
      if (!env.surveyable(p)) continue;
      d.push_back({sample_fingerprint(env, p, env.sensors.survey_azimuth_deg, rng), p});
    }
  }
  return d;
}

/// Walk the trajectory and capture a fingerprint every `interval` seconds, starting at its first vertex.
inline WalkLog sample_walk(const Environment& env, const Trajectory& traj, double interval, std::uint64_t seed,
                           OrientationMode mode = OrientationMode::constant) {
  env.validate();
  if (!(interval > 0.0)) throw std::invalid_argument("sample_walk: interval must be positive");
  if (traj.vertices.empty()) throw std::invalid_argument("sample_walk: empty trajectory");
  WalkLog log{env.schema(), traj, mode, {}};
  const double t0 = traj.start_time(), t1 = traj.end_time();
  for (std::uint64_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * interval;
    if (t > t1) break;
    Rng rng(derive_seed(seed, "walk-sample", k));
    double azimuth = env.sensors.survey_azimuth_deg;
    if (mode == OrientationMode::changing) azimuth = std::uniform_real_distribution<double>(0.0, 360.0)(rng);
    log.samples.push_back({t, sample_fingerprint(env, traj.position_at(t), azimuth, rng)});
  }
  return log;
}

// ---------------------------------------------------------------------------
// Environment fixtures

/// Open floor with APs on a regular cols x rows grid and `radios_per_ap` radios each.
inline Environment open_environment(Bounds bounds, int ap_cols, int ap_rows, int radios_per_ap) {
  Environment env;
  env.bounds = bounds;
  int ap = 0;
  for (int r = 0; r < ap_rows; ++r)
    for (int c = 0; c < ap_cols; ++c, ++ap) {
      GridPosition pos{bounds.width_tiles * (c + 0.5) / ap_cols, bounds.height_tiles * (r + 0.5) / ap_rows};
      for (int k = 0; k < radios_per_ap; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "ap%02d_r%d", ap, k);
        env.radios.push_back({name, ap, pos, -40.0 - 1.5 * k, 1.0});
      }
    }
  return env;
}

/// Library-sized world: 102 x 64 tiles, 21 APs carrying the standard radio count, a bank of
/// bookshelves on the left and a few pillars. Surveyed at spacing (1, 2) it yields 3110 points.
inline Environment library_environment() {
  Environment env;
  env.bounds = kBuildingBounds;
  constexpr int kAps = 21, kCols = 7, kRows = 3;
  for (int ap = 0; ap < kAps; ++ap) {
    const int c = ap % kCols, r = ap / kCols;
    GridPosition pos{env.bounds.width_tiles * (c + 0.5) / kCols, env.bounds.height_tiles * (r + 0.5) / kRows};
    // 157 radios: the first ten APs carry 8, the rest 7.
    const int radios = static_cast<int>(kStandardRadioCount / kAps) + (ap < static_cast<int>(kStandardRadioCount % kAps) ? 1 : 0);
    for (int k = 0; k < radios; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "ap%02d_r%d", ap, k);
      env.radios.push_back({name, ap, pos, -40.0 - 1.5 * k, 1.0});
    }
  }
  // Bookshelves: one tile thick, 48 tiles long.
  for (int i = 0; i < 6; ++i) {
    const double x = 3.0 + 4.0 * i;
    env.obstacles.push_back({x, 8.0, x + 1.0, 56.0, 8.0, true});
  }
  // Pillars.
  const GridPosition pillars[] = {{40, 20}, {60, 20}, {80, 20}, {50, 44}, {70, 44}};
  for (const auto& p : pillars) env.obstacles.push_back({p.x, p.y, p.x + 2.0, p.y + 2.0, 4.0, true});
  return env;
}

inline const Spacing kLibrarySpacing{1, 2};

// ---------------------------------------------------------------------------
// Environment file

inline nlohmann::json environment_to_json(const Environment& env) {
  nlohmann::json j;
  j["format"] = "fploc-environment";
  j["version"] = 1;
  j["bounds"] = {{"width_tiles", env.bounds.width_tiles}, {"height_tiles", env.bounds.height_tiles}};
  j["path_loss_exponent"] = env.path_loss_exponent;
  j["shadowing_sd_db"] = env.shadowing_sd_db;
  j["detection_threshold_dbm"] = env.detection_threshold_dbm;
  j["quantize_dbm"] = env.quantize_dbm;
  auto& radios = j["radios"] = nlohmann::json::array();
  for (const auto& r : env.radios)
    radios.push_back({{"name", r.name},
                      {"ap", r.ap},
                      {"x", r.position.x},
                      {"y", r.position.y},
                      {"tx_power_dbm", r.tx_power_dbm},
                      {"ref_distance_m", r.ref_distance_m}});
  auto& obs = j["obstacles"] = nlohmann::json::array();
  for (const auto& o : env.obstacles)
    obs.push_back({{"x0", o.x0},
                   {"y0", o.y0},
                   {"x1", o.x1},
                   {"y1", o.y1},
                   {"attenuation_db", o.attenuation_db},
                   {"blocks_survey", o.blocks_survey}});
  const auto& s = env.sensors;
  j["sensors"] = {{"light_lux", s.light_lux},
                  {"light_sd", s.light_sd},
                  {"gps_lat", s.gps_lat},
                  {"gps_lon", s.gps_lon},
                  {"gravity", s.gravity},
                  {"accel_sd", s.accel_sd},
                  {"mag_horizontal_ut", s.mag_horizontal_ut},
                  {"mag_vertical_ut", s.mag_vertical_ut},
                  {"mag_sd", s.mag_sd},
                  {"rot_sd", s.rot_sd},
                  {"orient_sd_deg", s.orient_sd_deg},
                  {"survey_azimuth_deg", s.survey_azimuth_deg}};
  return j;
}

inline Environment environment_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fploc-environment") throw DataError("environment: wrong format tag");
  if (j.value("version", 0) != 1) throw DataError("environment: unsupported version");
  Environment env;
  try {
    env.bounds = {j.at("bounds").at("width_tiles").get<int>(), j.at("bounds").at("height_tiles").get<int>()};
    env.path_loss_exponent = j.at("path_loss_exponent").get<double>();
    env.shadowing_sd_db = j.at("shadowing_sd_db").get<double>();
    env.detection_threshold_dbm = j.at("detection_threshold_dbm").get<double>();
    env.quantize_dbm = j.value("quantize_dbm", true);
    for (const auto& r : j.at("radios"))
      env.radios.push_back({r.at("name").get<std::string>(), r.at("ap").get<int>(),
                            {r.at("x").get<double>(), r.at("y").get<double>()}, r.at("tx_power_dbm").get<double>(),
                            r.at("ref_distance_m").get<double>()});
    for (const auto& o : j.at("obstacles"))
      env.obstacles.push_back({o.at("x0").get<double>(), o.at("y0").get<double>(), o.at("x1").get<double>(),
                               o.at("y1").get<double>(), o.at("attenuation_db").get<double>(),
                               o.value("blocks_survey", true)});
    if (j.contains("sensors")) {
      const auto& s = j.at("sensors");
      auto& m = env.sensors;
      m.light_lux = s.value("light_lux", m.light_lux);
      m.light_sd = s.value("light_sd", m.light_sd);
      m.gps_lat = s.value("gps_lat", m.gps_lat);
      m.gps_lon = s.value("gps_lon", m.gps_lon);
      m.gravity = s.value("gravity", m.gravity);
      m.accel_sd = s.value("accel_sd", m.accel_sd);
      m.mag_horizontal_ut = s.value("mag_horizontal_ut", m.mag_horizontal_ut);
      m.mag_vertical_ut = s.value("mag_vertical_ut", m.mag_vertical_ut);
      m.mag_sd = s.value("mag_sd", m.mag_sd);
      m.rot_sd = s.value("rot_sd", m.rot_sd);
      m.orient_sd_deg = s.value("orient_sd_deg", m.orient_sd_deg);
      m.survey_azimuth_deg = s.value("survey_azimuth_deg", m.survey_azimuth_deg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("environment: ") + e.what());
  }
  env.validate();
  return env;
}

}  // namespace fploc
