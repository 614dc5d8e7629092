#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fploc/core.hpp"
#include "fploc/dataset_io.hpp"
#include "fploc/models.hpp"
#include "fploc/util.hpp"

namespace fploc {

/// Mean absolute error in meters of tile-valued predictions.
inline double axis_mean_error(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("axis_mean_error: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("axis_mean_error: no predictions");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - truths[i]);
  return tiles_to_meters(s / static_cast<double>(predictions.size()));
}

inline double absolute_mean_error(double mean_x_m, double mean_y_m) {
  if (mean_x_m < 0.0 || mean_y_m < 0.0) throw std::invalid_argument("absolute_mean_error: negative input");
  return std::hypot(mean_x_m, mean_y_m);
}

struct CvOptions {
  std::size_t folds = 10;
  std::size_t repetitions = 1;
  std::uint64_t base_seed = 1;
  /// Worker threads over the folds x repetitions grid.
  unsigned jobs = 1;
  /// Record per-prediction wall time. Off by default so reports stay byte-identical.
  bool timing = false;
  /// Keep every individual prediction in the report.
  bool keep_predictions = false;
};

struct CvPrediction {
  std::size_t repetition = 0;
  std::size_t index = 0;
  GridPosition predicted;
  GridPosition truth;
  std::size_t comparisons = 0;
};

struct FoldSummary {
  std::size_t repetition = 0;
  std::size_t fold = 0;
  std::size_t size = 0;
  double mean_x_m = 0.0;
  double mean_y_m = 0.0;
};

struct TimingStats {
  double mean_s = 0.0;
  double median_s = 0.0;
  double max_s = 0.0;
};

struct EvalReport {
  std::string learner;
  nlohmann::json params;
  std::uint64_t seed = 0;
  std::size_t folds = 0;
  std::size_t repetitions = 0;
  std::size_t dataset_size = 0;
  std::size_t predictions = 0;
  double mean_x_m = 0.0;
  double mean_y_m = 0.0;
  double absolute_m = 0.0;
  /// Population standard deviation of per-prediction absolute errors, meters.
  double sd_x_m = 0.0;
  double sd_y_m = 0.0;
  double comparisons_mean = 0.0;
  std::size_t comparisons_max = 0;
  std::vector<FoldSummary> fold_summaries;
  std::optional<TimingStats> timing;
  std::vector<CvPrediction> records;
};

/// k-fold cross-validation repeated `repetitions` times. Repetition r shuffles with seed base_seed + r.
inline EvalReport kfold_cv(const Dataset& d, const LearnerSpec& spec, const CvOptions& opt = {}) {
  if (opt.folds < 2) throw std::invalid_argument("kfold_cv: k must be >= 2");
  if (d.size() < opt.folds) throw std::invalid_argument("kfold_cv: fewer points than folds");
  if (opt.repetitions < 1) throw std::invalid_argument("kfold_cv: repetitions must be >= 1");

  const std::size_t n = d.size(), k = opt.folds;
  std::vector<std::vector<std::size_t>> assignment(opt.repetitions);
  for (std::size_t r = 0; r < opt.repetitions; ++r) assignment[r] = make_folds(n, k, opt.base_seed + r);

  struct Slot {
    std::vector<std::size_t> test;
    std::vector<Prediction> out;
    std::vector<double> seconds;
  };
  std::vector<Slot> slots(k * opt.repetitions);
  parallel_for(slots.size(), opt.jobs, [&](std::size_t s) {
    const std::size_t r = s / k, f = s % k;
    std::vector<std::size_t> train;
    auto& slot = slots[s];
    for (std::size_t i = 0; i < n; ++i) (assignment[r][i] == f ? slot.test : train).push_back(i);
    LearnerSpec fs = spec;
    fs.seed = derive_seed(spec.seed, "fold", s);
    std::unique_ptr<PositionModel> model;
    try {
      model = train_model(d.select(train), fs);
    } catch (const std::exception& e) {
      throw TrainingError("repetition " + std::to_string(r) + ", fold " + std::to_string(f) + ": " + e.what());
    }
    for (auto i : slot.test) {
      auto t0 = std::chrono::steady_clock::now();
      slot.out.push_back(model->predict(d[i].fingerprint));
      if (opt.timing)
        slot.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  });

  EvalReport rep;
  rep.learner = std::string(to_string(spec.kind));
  rep.params = spec.to_json();
  rep.seed = opt.base_seed;
  rep.folds = k;
  rep.repetitions = opt.repetitions;
  rep.dataset_size = n;

  std::vector<double> ex, ey, seconds;
  double comparisons = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& slot = slots[s];
    FoldSummary fsum{s / k, s % k, slot.test.size(), 0.0, 0.0};
    for (std::size_t j = 0; j < slot.test.size(); ++j) {
      const auto& truth = d[slot.test[j]].position;
      const auto& p = slot.out[j];
      double dx = tiles_to_meters(std::abs(p.position.x - truth.x));
      double dy = tiles_to_meters(std::abs(p.position.y - truth.y));
      ex.push_back(dx);
      ey.push_back(dy);
      fsum.mean_x_m += dx;
      fsum.mean_y_m += dy;
      comparisons += static_cast<double>(p.comparisons);
      rep.comparisons_max = std::max(rep.comparisons_max, p.comparisons);
      if (opt.keep_predictions) rep.records.push_back({s / k, slot.test[j], p.position, truth, p.comparisons});
    }
    if (!slot.test.empty()) {
      fsum.mean_x_m /= static_cast<double>(slot.test.size());
      fsum.mean_y_m /= static_cast<double>(slot.test.size());
    }
    rep.fold_summaries.push_back(fsum);
    seconds.insert(seconds.end(), slot.seconds.begin(), slot.seconds.end());
  }

  rep.predictions = ex.size();
  const double m = static_cast<double>(rep.predictions);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    rep.mean_x_m += ex[i];
    rep.mean_y_m += ey[i];
  }
  rep.mean_x_m /= m;
  rep.mean_y_m /= m;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    rep.sd_x_m += (ex[i] - rep.mean_x_m) * (ex[i] - rep.mean_x_m);
    rep.sd_y_m += (ey[i] - rep.mean_y_m) * (ey[i] - rep.mean_y_m);
  }
  rep.sd_x_m = std::sqrt(rep.sd_x_m / m);
  rep.sd_y_m = std::sqrt(rep.sd_y_m / m);
  rep.absolute_m = absolute_mean_error(rep.mean_x_m, rep.mean_y_m);
  rep.comparisons_mean = comparisons / m;

  if (opt.timing && !seconds.empty()) {
    TimingStats t;
    for (double v : seconds) t.mean_s += v;
    t.mean_s /= static_cast<double>(seconds.size());
    std::sort(seconds.begin(), seconds.end());
    t.median_s = seconds[seconds.size() / 2];
    t.max_s = seconds.back();
    rep.timing = t;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Comparisons

struct AxisDelta {
  double dx_m = 0.0;
  double dy_m = 0.0;
};

/// other - baseline on each axis; negative values are improvements.
inline AxisDelta compare_reports(const EvalReport& baseline, const EvalReport& other) {
  return {other.mean_x_m - baseline.mean_x_m, other.mean_y_m - baseline.mean_y_m};
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["learner"] = r.learner;
  j["params"] = r.params;
  j["seed"] = r.seed;
  j["folds"] = r.folds;
  j["repetitions"] = r.repetitions;
  j["dataset_size"] = r.dataset_size;
  j["predictions"] = r.predictions;
  j["mean_x_error_m"] = r.mean_x_m;
  j["mean_y_error_m"] = r.mean_y_m;
  j["absolute_mean_error_m"] = r.absolute_m;
  j["sd_x_error_m"] = r.sd_x_m;
  j["sd_y_error_m"] = r.sd_y_m;
  j["comparisons_per_query_mean"] = r.comparisons_mean;
  j["comparisons_per_query_max"] = r.comparisons_max;
  std::vector<double> fx, fy;
  std::vector<std::size_t> sizes;
  for (const auto& f : r.fold_summaries) {
    fx.push_back(f.mean_x_m);
    fy.push_back(f.mean_y_m);
    sizes.push_back(f.size);
  }
  j["fold_sizes"] = sizes;
  j["fold_mean_x_error_m"] = fx;
  j["fold_mean_y_error_m"] = fy;
  if (r.timing) {
    j["predict_seconds_mean"] = r.timing->mean_s;
    j["predict_seconds_median"] = r.timing->median_s;
    j["predict_seconds_max"] = r.timing->max_s;
  }
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.learner = j.at("learner").get<std::string>();
    r.params = j.at("params");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.folds = j.at("folds").get<std::size_t>();
    r.repetitions = j.at("repetitions").get<std::size_t>();
    r.dataset_size = j.at("dataset_size").get<std::size_t>();
    r.predictions = j.at("predictions").get<std::size_t>();
    r.mean_x_m = j.at("mean_x_error_m").get<double>();
    r.mean_y_m = j.at("mean_y_error_m").get<double>();
    r.absolute_m = j.at("absolute_mean_error_m").get<double>();
    r.sd_x_m = j.at("sd_x_error_m").get<double>();
    r.sd_y_m = j.at("sd_y_error_m").get<double>();
    r.comparisons_mean = j.at("comparisons_per_query_mean").get<double>();
    r.comparisons_max = j.at("comparisons_per_query_max").get<std::size_t>();
    auto sizes = j.at("fold_sizes").get<std::vector<std::size_t>>();
    auto fx = j.at("fold_mean_x_error_m").get<std::vector<double>>();
    auto fy = j.at("fold_mean_y_error_m").get<std::vector<double>>();
    for (std::size_t i = 0; i < sizes.size(); ++i)
      r.fold_summaries.push_back({i / std::max<std::size_t>(r.folds, 1), i % std::max<std::size_t>(r.folds, 1),
                                  sizes[i], fx.at(i), fy.at(i)});
    if (j.contains("predict_seconds_mean"))
      r.timing = TimingStats{j.at("predict_seconds_mean").get<double>(), j.at("predict_seconds_median").get<double>(),
                             j.at("predict_seconds_max").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  return r;
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // No negative zero in tables.
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

inline std::string signed_fixed(double v, int decimals) {
  auto s = fixed(v, decimals);
  return s.front() == '-' ? s : "+" + s;
}

/// Quotes a CSV cell when needed.
inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

struct TableRow {
  std::string algorithm;
  EvalReport report;
};

/// Per-learner mean errors: Algorithm, Best x Mean Error (m), Best y Mean Error (m).
inline std::string error_table_csv(std::span<const TableRow> rows) {
  std::ostringstream os;
  os << "Algorithm,Best x Mean Error (m),Best y Mean Error (m)\n";
  for (const auto& r : rows)
    os << csv_cell(r.algorithm) << ',' << fixed(r.report.mean_x_m, 3) << ',' << fixed(r.report.mean_y_m, 3) << '\n';
  return os.str();
}

struct DeltaRow {
  std::string algorithm;
  EvalReport baseline;
  EvalReport other;
};

/// Subset errors and their differences from the full set: "x/y Difference" like "-0.572/-0.368".
inline std::string delta_table_csv(std::span<const DeltaRow> rows) {
  std::ostringstream os;
  os << "Algorithm,Mean x Error (m),Mean y Error (m),x/y Difference (m)\n";
  for (const auto& r : rows) {
    auto d = compare_reports(r.baseline, r.other);
    os << csv_cell(r.algorithm) << ',' << fixed(r.other.mean_x_m, 3) << ',' << fixed(r.other.mean_y_m, 3) << ','
       << signed_fixed(d.dx_m, 3) << '/' << signed_fixed(d.dy_m, 3) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// In-motion summary rows: Algorithm, Pace, Orientation, Average Error (m)

struct PaceRow {
  std::string algorithm;
  std::string pace;
  std::string orientation;
  double average_error_m = 0.0;

  bool operator==(const PaceRow&) const = default;
};

inline constexpr const char* kPaceTableHeader = "Algorithm,Pace,Orientation,Average Error (m)";

inline std::string format_pace_row(const PaceRow& r) {
  return csv_cell(r.algorithm) + ',' + csv_cell(r.pace) + ',' + csv_cell(r.orientation) + ',' +
         fixed(r.average_error_m, 2);
}

inline PaceRow parse_pace_row(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  if (cells.size() != 4) throw DataError("pace row: expected 4 cells, got " + std::to_string(cells.size()));
  auto v = parse_number(cells[3]);
  if (!v) throw DataError("pace row: non-numeric error '" + cells[3] + "'");
  return {cells[0], cells[1], cells[2], *v};
}

}  // namespace fploc
