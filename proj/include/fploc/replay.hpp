#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fploc/core.hpp"
#include "fploc/dataset_io.hpp"
#include "fploc/models.hpp"
#include "fploc/trajectory.hpp"

namespace fploc {

/// Ground truth at time t: linear between the bracketing vertices, exact at vertices.
inline GridPosition interpolate_truth(const Trajectory& traj, double t) { return traj.position_at(t); }

struct ReplayPoint {
  double time = 0.0;
  GridPosition predicted;
  GridPosition truth;
  double error_m = 0.0;
  std::size_t comparisons = 0;
};

struct ReplayReport {
  double latency_s = 0.0;
  std::string pace_label;
  OrientationMode orientation = OrientationMode::constant;
  std::vector<ReplayPoint> series;
  double average_error_m = 0.0;
};

using Locator = std::function<Prediction(const Fingerprint&)>;

/// Scores each sample captured at t against the truth at t + latency_s. A prediction that would
/// complete after the walk ended is compared with the final vertex, where the user stopped.
inline ReplayReport replay_eval(const Locator& locate, const WalkLog& log, double latency_s = 0.0) {
  if (log.samples.empty()) throw std::invalid_argument("replay: empty walk log");
  if (!(latency_s >= 0.0)) throw std::invalid_argument("replay: latency must be non-negative");
  ReplayReport r;
  r.latency_s = latency_s;
  r.pace_label = log.trajectory.pace_label;
  r.orientation = log.orientation;
  double sum = 0.0;
  for (const auto& s : log.samples) {
    auto p = locate(s.fingerprint);
    const double t = std::min(s.time + latency_s, log.trajectory.end_time());
    const auto truth = interpolate_truth(log.trajectory, t);
    const double e = distance_m(p.position, truth);
    r.series.push_back({s.time, p.position, truth, e, p.comparisons});
    sum += e;
  }
  r.average_error_m = sum / static_cast<double>(r.series.size());
  return r;
}

inline ReplayReport replay_eval(const PositionModel& model, const WalkLog& log, double latency_s = 0.0) {
  return replay_eval([&](const Fingerprint& f) { return model.predict(f); }, log, latency_s);
}

/// t,pred_x,pred_y,true_x,true_y,error_m
inline void write_series_csv(const ReplayReport& r, std::ostream& os) {
  os << "t,pred_x,pred_y,true_x,true_y,error_m\n";
  for (const auto& p : r.series)
    os << format_number(p.time) << ',' << format_number(p.predicted.x) << ',' << format_number(p.predicted.y) << ','
       << format_number(p.truth.x) << ',' << format_number(p.truth.y) << ',' << format_number(p.error_m) << '\n';
}

// ---------------------------------------------------------------------------
// Walk logs: `<name>.csv` holds t plus fingerprint columns, `<name>.walk.json` the schema,
// trajectory and orientation mode.

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
  auto v = nlohmann::json::array();
  for (const auto& x : t.vertices) v.push_back({{"x", x.position.x}, {"y", x.position.y}, {"t", x.time}});
  return {{"pace_mps", t.pace}, {"pace_label", t.pace_label}, {"vertices", std::move(v)}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  t.pace = j.at("pace_mps").get<double>();
  t.pace_label = j.at("pace_label").get<std::string>();
  for (const auto& v : j.at("vertices"))
    t.vertices.push_back({{v.at("x").get<double>(), v.at("y").get<double>()}, v.at("t").get<double>()});
  if (t.vertices.empty()) throw DataError("trajectory: no vertices");
  for (std::size_t i = 1; i < t.vertices.size(); ++i)
    if (!(t.vertices[i].time > t.vertices[i - 1].time)) throw DataError("trajectory: timestamps must increase");
  return t;
}

inline std::filesystem::path walk_sidecar_path(std::filesystem::path csv) { return csv.replace_extension(".walk.json"); }

inline void write_walk_csv(const WalkLog& log, std::ostream& os) {
  os << 't';
  for (const auto& a : log.schema.attributes()) os << ',' << a.name;
  os << '\n';
  for (const auto& s : log.samples) {
    os << format_number(s.time);
    const auto& f = s.fingerprint;
    for (std::size_t i = 0; i < f.size(); ++i) os << ',' << format_number(f.missing[i] ? kMissingRssi : f.values[i]);
    os << '\n';
  }
}

inline void save_walk(const WalkLog& log, const std::filesystem::path& path, Bounds bounds) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    write_walk_csv(log, os);
  }
  nlohmann::json j{{"format", "fploc-walk"},
                   {"version", 1},
                   {"orientation", to_string(log.orientation)},
                   {"trajectory", trajectory_to_json(log.trajectory)},
                   {"schema", schema_to_json(log.schema, bounds)}};
  std::ofstream js(walk_sidecar_path(path), std::ios::binary);
  if (!js) throw DataError("cannot write " + walk_sidecar_path(path).string());
  js << j.dump(2) << '\n';
}

inline WalkLog load_walk(const std::filesystem::path& path) {
  std::ifstream js(walk_sidecar_path(path));
  if (!js) throw DataError("cannot open " + walk_sidecar_path(path).string());
  WalkLog log;
  try {
    auto j = nlohmann::json::parse(js);
    if (j.value("format", "") != "fploc-walk") throw DataError("walk sidecar: wrong format tag");
    log.orientation = orientation_from_string(j.at("orientation").get<std::string>());
    log.trajectory = trajectory_from_json(j.at("trajectory"));
    log.schema = schema_from_json(j.at("schema")).first;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("walk sidecar: " + std::string(e.what()));
  }

  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.empty()) throw DataError("no header");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "t") throw DataError("walk log: first column must be 't'");
  if (header.size() != log.schema.size() + 1) throw DataError("walk log: header does not match schema");
  for (std::size_t i = 0; i < log.schema.size(); ++i)
    if (header[i + 1] != log.schema[i].name) throw DataError("walk log: header does not match schema");

  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("walk log row " + std::to_string(row) + ": wrong cell count");
    WalkSample s;
    auto t = parse_number(cells[0]);
    if (!t) throw DataError("walk log row " + std::to_string(row) + ": non-numeric timestamp");
    s.time = *t;
    s.fingerprint = Fingerprint(log.schema.size());
    for (std::size_t i = 0; i < log.schema.size(); ++i) {
      auto v = parse_number(cells[i + 1]);
      if (!v) throw DataError("walk log row " + std::to_string(row) + ": non-numeric cell");
      if (log.schema[i].kind == AttributeKind::rssi && *v <= kMissingRssi)
        s.fingerprint.set_missing(i);
      else
        s.fingerprint.values[i] = *v;
    }
    if (!log.samples.empty() && !(s.time > log.samples.back().time))
      throw DataError("walk log row " + std::to_string(row) + ": timestamps must increase");
    if (s.time < log.trajectory.start_time() || s.time > log.trajectory.end_time())
      throw DataError("walk log row " + std::to_string(row) + ": timestamp outside the trajectory");
    log.samples.push_back(std::move(s));
  }
  return log;
}

}  // namespace fploc
