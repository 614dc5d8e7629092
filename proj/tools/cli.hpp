#pragma once

// Command-line front end. `run` takes the arguments after the program name so tests can drive
// it in-process.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fploc/fploc.hpp"

namespace fploc::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kTraining = 4 };

/// Usage problems found after flag parsing (bad values, conflicting flags).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw DataError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << text;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("no such file: " + p.string());
}

inline fs::path resolve(const std::string& s) { return fs::absolute(fs::path(s)).lexically_normal(); }

inline Dataset load_data(const std::string& path) {
  require_file(path);
  return load_dataset(path);
}

inline DatasetLoader dataset_loader() {
  return [](const std::string& p) { return load_data(p); };
}

inline Environment load_environment(const std::string& path) {
  require_file(path);
  return environment_from_json(read_json(path));
}

inline std::unique_ptr<PositionModel> load_model_file(const std::string& path) {
  require_file(path);
  return load_model(read_json(path), dataset_loader());
}

/// "x,y;x,y;..." in tiles.
inline std::vector<GridPosition> parse_path(const std::string& s) {
  std::vector<GridPosition> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    auto comma = item.find(',');
    if (comma == std::string::npos) throw UsageError("--path: expected x,y pairs separated by ';'");
    auto x = parse_number(item.substr(0, comma));
    auto y = parse_number(item.substr(comma + 1));
    if (!x || !y) throw UsageError("--path: non-numeric coordinate in '" + item + "'");
    out.push_back({*x, *y});
  }
  return out;
}

/// Rectangular loop about 15% in from the walls. Each leg moves to the nearest grid line whose tiles
/// are all surveyable, so the walk goes around shelves and pillars rather than through them.
inline std::vector<GridPosition> default_route(const Environment& env) {
  const int w = env.bounds.width_tiles, h = env.bounds.height_tiles;
  int x0 = static_cast<int>(std::lround(0.15 * w)), x1 = static_cast<int>(std::lround(0.85 * w));
  int y0 = static_cast<int>(std::lround(0.15 * h)), y1 = static_cast<int>(std::lround(0.85 * h));
  auto clear = [&](int fixed, int a, int b, bool vertical) {
    for (int t = a; t <= b; ++t) {
      const double f = fixed, v = t;
      if (!env.surveyable(vertical ? GridPosition{f, v} : GridPosition{v, f})) return false;
    }
    return true;
  };
  // Lower line first at each distance; keeps the start when nothing in [lo, hi] is clear.
  auto nearest = [](int start, int lo, int hi, auto&& ok) {
    for (int d = 0; d <= hi - lo; ++d)
      for (int c : {start - d, start + d})
        if (c >= lo && c <= hi && ok(c)) return c;
    return start;
  };
  for (bool moved = true; moved;) {
    const int before[] = {x0, x1, y0, y1};
    x0 = nearest(x0, 0, x1 - 1, [&](int x) { return clear(x, y0, y1, true); });
    x1 = nearest(x1, x0 + 1, w - 1, [&](int x) { return clear(x, y0, y1, true); });
    y0 = nearest(y0, 0, y1 - 1, [&](int y) { return clear(y, x0, x1, false); });
    y1 = nearest(y1, y0 + 1, h - 1, [&](int y) { return clear(y, x0, x1, false); });
    moved = before[0] != x0 || before[1] != x1 || before[2] != y0 || before[3] != y1;
  }
  const double ax = x0, bx = x1, ay = y0, by = y1;
  return {{ax, ay}, {bx, ay}, {bx, by}, {ax, by}, {ax, ay}};
}

/// A preset name (slow, normal, fast) or a speed in m/s.
inline std::pair<double, std::string> parse_pace(const std::string& s) {
  try {
    auto p = pace_from_string(s);
    return {pace_mps(p), to_string(p)};
  } catch (const std::invalid_argument&) {
  }
  auto v = parse_number(s);
  if (!v || !(*v > 0.0)) throw UsageError("--pace: expected slow, normal, fast or a positive speed in m/s");
  return {*v, format_number(*v) + " m/s"};
}

/// Flags shared by every command that trains a learner.
struct LearnerFlags {
  std::string normalization;
  double blend = kDefaultBlend;
  std::size_t neighbors = kDefaultK;
  std::string weighting = "inverse-distance";
  std::size_t centers = kDefaultRbfCenters;
  std::size_t max_iters = RbfOptions{}.max_iters;
  std::size_t trees = kDefaultTrees;
  std::size_t split_features = 0;
  std::size_t min_leaf = 1;
  std::size_t target = kDefaultPartitionTarget;
  double fallback = 0.5;
  std::vector<std::string> members{"kstar", "rbf"};

  void add(CLI::App* app, bool with_hybrid = true) {
    app->add_option("--normalization", normalization, "zscore, minmax or none (default: per learner)")
        ->check(CLI::IsMember({"zscore", "minmax", "none"}));
    app->add_option("--blend", blend, "K* blend percentage")->check(CLI::Range(0.0, 100.0))->capture_default_str();
    app->add_option("--neighbors", neighbors, "kNN neighbour count")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--weighting", weighting, "kNN weighting")
        ->check(CLI::IsMember({"uniform", "inverse-distance"}))
        ->capture_default_str();
    app->add_option("--centers", centers, "RBF basis functions")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--max-iters", max_iters, "RBF optimizer iterations")->capture_default_str();
    app->add_option("--trees", trees, "forest size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--split-features", split_features, "features tried per split (0: default)");
    app->add_option("--min-leaf", min_leaf, "minimum leaf size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--members", members, "vote members")->delimiter(',');
    if (with_hybrid) {
      app->add_option("--target", target, "hybrid points per partition")->check(CLI::PositiveNumber)->capture_default_str();
      app->add_option("--fallback", fallback, "hybrid fallback vote threshold")
          ->check(CLI::Range(0.0, 1.0))
          ->capture_default_str();
    }
  }

  LearnerSpec spec(LearnerKind kind, std::uint64_t seed, unsigned jobs) const {
    LearnerSpec s;
    s.kind = kind;
    if (!normalization.empty()) s.normalization = normalization_from_string(normalization);
    s.blend = blend;
    s.neighbors = neighbors;
    s.weighting = knn_weighting_from_string(weighting);
    s.rbf.centers = centers;
    s.rbf.max_iters = max_iters;
    s.trees = trees;
    s.split_features = split_features;
    s.min_leaf = min_leaf;
    s.partition_target = target;
    s.fallback_threshold = fallback;
    s.members.clear();
    for (const auto& m : members) s.members.push_back(learner_from_string(m));
    s.seed = derive_seed(seed, "learner");
    s.jobs = jobs;
    return s;
  }
};

inline std::string learner_names() {
  std::string s;
  for (const auto& [k, n] : kLearnerNames) s += (s.empty() ? "" : ", ") + std::string(n);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Fingerprint localization: synthetic surveys, learners, cross-validation, hybrid K* and replay"};
  app.name("fploc");
  app.require_subcommand(1);
  app.fallthrough(false);

  std::uint64_t seed = 1;
  unsigned jobs = 1;
  auto add_common = [&](CLI::App* s, bool with_seed = true) {
    if (with_seed) s->add_option("--seed", seed, "base seed for every derived random stream")->capture_default_str();
    s->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  };

  // gen-env
  std::string preset = "library", env_out;
  std::optional<double> sigma, exponent, threshold;
  auto* gen_env = app.add_subcommand("gen-env", "write a synthetic radio environment");
  gen_env->add_option("--preset", preset, "library or open")->check(CLI::IsMember({"library", "open"}))->capture_default_str();
  gen_env->add_option("--sigma", sigma, "shadowing standard deviation (dB)")->check(CLI::NonNegativeNumber);
  gen_env->add_option("--exponent", exponent, "path-loss exponent")->check(CLI::PositiveNumber);
  gen_env->add_option("--threshold", threshold, "detection threshold (dBm)");
  gen_env->add_option("--out", env_out, "environment JSON")->required();

  // gen-data
  std::string env_in, data_out;
  int spacing_x = kLibrarySpacing.x, spacing_y = kLibrarySpacing.y;
  auto* gen_data = app.add_subcommand("gen-data", "survey an environment on the tile grid");
  gen_data->add_option("--env", env_in, "environment JSON")->required();
  gen_data->add_option("--spacing-x", spacing_x, "grid step along x (tiles)")->check(CLI::PositiveNumber)->capture_default_str();
  gen_data->add_option("--spacing-y", spacing_y, "grid step along y (tiles)")->check(CLI::PositiveNumber)->capture_default_str();
  gen_data->add_option("--out", data_out, "dataset CSV (default: <env>_seed<seed>.csv beside the environment)");
  add_common(gen_data);

  // subsample
  std::string data_in, sub_out;
  std::size_t stride = 2, offset = 0;
  auto* sub = app.add_subcommand("subsample", "keep every stride-th reading");
  sub->add_option("--data", data_in, "dataset CSV")->required();
  sub->add_option("--stride", stride, "keep indices offset, offset+stride, ...")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--offset", offset, "first kept index")->capture_default_str();
  sub->add_option("--out", sub_out, "output dataset CSV")->required();

  // train
  std::string learner = "kstar", model_out;
  bool embed = false;
  LearnerFlags lf;
  auto* train = app.add_subcommand("train", "train one learner on a dataset");
  train->add_option("--data", data_in, "dataset CSV")->required();
  train->add_option("--learner", learner, learner_names())->capture_default_str();
  train->add_option("--out", model_out, "model JSON")->required();
  train->add_flag("--embed-data", embed, "copy training data into the model instead of referencing the dataset file");
  lf.add(train);
  add_common(train);

  // cv
  std::vector<std::string> learners;
  std::size_t folds = 10, reps = 1;
  std::string cv_out, baseline_dir;
  bool timing = false;
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation study");
  cv->add_option("--data", data_in, "dataset CSV")->required();
  cv->add_option("--learner", learners, "learner(s): " + learner_names())->required();
  cv->add_option("--k", folds, "folds")->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))->capture_default_str();
  cv->add_option("--reps", reps, "repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  cv->add_option("--out-dir", cv_out, "directory for reports and tables")->required();
  cv->add_option("--baseline", baseline_dir, "directory of a previous cv run to diff against");
  cv->add_flag("--timing", timing, "record per-prediction wall time (makes reports machine-dependent)");
  lf.add(cv);
  add_common(cv);

  // hybrid-train
  std::size_t gate_cv = 10;
  auto* htrain = app.add_subcommand("hybrid-train", "partition the survey, train the gate and the K* experts");
  htrain->add_option("--data", data_in, "dataset CSV")->required();
  htrain->add_option("--out", model_out, "model JSON")->required();
  htrain->add_option("--gate-cv", gate_cv, "folds for the gate accuracy estimate (0 skips it)")->capture_default_str();
  htrain->add_flag("--embed-data", embed, "copy training data into the model");
  lf.add(htrain);
  add_common(htrain);

  // bench
  std::size_t queries = 100;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "per-query latency and comparisons: monolithic K* vs hybrid");
  bench->add_option("--data", data_in, "dataset CSV")->required();
  bench->add_option("--queries", queries, "held-out query count")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--out", bench_out, "CSV summary");
  lf.add(bench);
  add_common(bench);

  // replay
  std::string model_in, walk_in, path_spec, pace_spec = "normal", orientation = "constant", series_out, walk_out;
  double interval = 1.0, latency = 0.0;
  auto* replay = app.add_subcommand("replay", "score a model on a walk");
  replay->add_option("--model", model_in, "model JSON")->required();
  auto* walk_opt = replay->add_option("--walk", walk_in, "recorded walk CSV");
  auto* env_opt = replay->add_option("--env", env_in, "environment to synthesize a walk in");
  walk_opt->excludes(env_opt);
  replay->add_option("--path", path_spec, "vertices 'x,y;x,y;...' in tiles (default: loop about 15% inside the walls, clear of obstacles)");
  replay->add_option("--pace", pace_spec, "slow, normal, fast or m/s")->capture_default_str();
  replay->add_option("--orientation", orientation, "constant or changing")
      ->check(CLI::IsMember({"constant", "changing", "Constant", "Changing"}))
      ->capture_default_str();
  replay->add_option("--interval", interval, "seconds between samples")->check(CLI::PositiveNumber)->capture_default_str();
  replay->add_option("--latency", latency, "seconds from capture to output")->check(CLI::NonNegativeNumber)->capture_default_str();
  replay->add_option("--out", series_out, "error series CSV");
  replay->add_option("--save-walk", walk_out, "write the synthesized walk CSV");
  add_common(replay);

  // export-plot
  std::string kind, plot_out, series_in;
  auto* plot = app.add_subcommand("export-plot", "point series for external plotting");
  plot->add_option("--kind", kind, "survey, partitions or replay")->required()->check(CLI::IsMember({"survey", "partitions", "replay"}));
  plot->add_option("--data", data_in, "dataset CSV (survey)");
  plot->add_option("--model", model_in, "hybrid model JSON (partitions)");
  plot->add_option("--walk", walk_in, "walk CSV (replay)");
  plot->add_option("--series", series_in, "replay series CSV (replay)");
  plot->add_option("--out", plot_out, "output CSV")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "fploc: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (gen_env->parsed()) {
      Environment env = preset == "library" ? library_environment() : open_environment(kBuildingBounds, 7, 3, 8);
      if (sigma) env.shadowing_sd_db = *sigma;
      if (exponent) env.path_loss_exponent = *exponent;
      if (threshold) env.detection_threshold_dbm = *threshold;
      env.validate();
      write_json(env_out, environment_to_json(env));
      out << "environment: " << env.radios.size() << " radios, " << env.obstacles.size() << " obstacles -> " << env_out
          << '\n';
    } else if (gen_data->parsed()) {
      auto env = load_environment(env_in);
      fs::path dst = data_out;
      if (dst.empty()) {
        fs::path e(env_in);
        dst = e.parent_path() / (e.stem().string() + "_seed" + std::to_string(seed) + ".csv");
      }
      auto d = generate_dataset(env, Spacing(spacing_x, spacing_y), derive_seed(seed, "dataset"));
      if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
      save_dataset(d, dst);
      out << "dataset: " << d.size() << " points, " << d.schema().size() << " attributes -> " << dst.string() << '\n';
    } else if (sub->parsed()) {
      auto d = load_data(data_in);
      if (offset >= stride) throw UsageError("--offset must be smaller than --stride");
      auto s = subsample(d, stride, offset);
      fs::path dst(sub_out);
      if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
      save_dataset(s, dst);
      out << "subsample: " << s.size() << " of " << d.size() << " points -> " << sub_out << '\n';
    } else if (train->parsed()) {
      auto kind_l = learner_from_string(learner);
      const auto path = resolve(data_in);
      auto d = load_data(path.string());
      auto model = train_model(d, lf.spec(kind_l, seed, jobs));
      write_json(model_out, model_document(*model, embed ? std::string() : path.string()));
      out << display_name(kind_l) << ": trained on " << d.size() << " points -> " << model_out << '\n';
    } else if (cv->parsed()) {
      std::vector<LearnerKind> kinds;
      for (const auto& l : learners) kinds.push_back(learner_from_string(l));
      auto d = load_data(data_in);
      if (!baseline_dir.empty())
        for (auto k : kinds) require_file(fs::path(baseline_dir) / (std::string(to_string(k)) + ".report.json"));
      CvOptions opt;
      opt.folds = folds;
      opt.repetitions = reps;
      opt.base_seed = derive_seed(seed, "folds");
      opt.jobs = jobs;
      opt.timing = timing;
      std::vector<TableRow> rows;
      std::vector<DeltaRow> deltas;
      for (auto k : kinds) {
        auto spec = lf.spec(k, seed, 1);
        auto rep = kfold_cv(d, spec, opt);
        const auto name = std::string(to_string(k));
        write_json(fs::path(cv_out) / (name + ".report.json"), report_to_json(rep));
        out << display_name(k) << ": x " << fixed(rep.mean_x_m, 3) << " m, y " << fixed(rep.mean_y_m, 3)
            << " m, absolute " << fixed(rep.absolute_m, 3) << " m over " << rep.predictions << " predictions\n";
        if (!baseline_dir.empty()) {
          auto base = report_from_json(read_json(fs::path(baseline_dir) / (name + ".report.json")));
          deltas.push_back({display_name(k), base, rep});
        }
        rows.push_back({display_name(k), std::move(rep)});
      }
      write_text(fs::path(cv_out) / "errors.csv", error_table_csv(rows));
      if (!deltas.empty()) write_text(fs::path(cv_out) / "deltas.csv", delta_table_csv(deltas));
    } else if (htrain->parsed()) {
      const auto path = resolve(data_in);
      auto d = load_data(path.string());
      auto spec = lf.spec(LearnerKind::hybrid, seed, jobs);
      spec.gate_cv_folds = gate_cv;
      auto model = train_model(d, spec);
      const auto& h = dynamic_cast<const HybridPositionModel&>(*model).model();
      write_json(model_out, model_document(*model, embed ? std::string() : path.string()));
      auto pop = h.scheme.populations(d);
      for (const auto& b : h.scheme.blocks)
        out << "partition " << b.id << " [" << b.x0 << ',' << b.x1 << ")x[" << b.y0 << ',' << b.y1 << "): "
            << pop[static_cast<std::size_t>(b.id)] << " points\n";
      for (int id : h.dropped_partitions) out << "partition " << id << " dropped (no points)\n";
      if (h.gate_cv_accuracy)
        out << "gate " << gate_cv << "-fold accuracy: " << fixed(*h.gate_cv_accuracy, 4) << '\n';
      out << "hybrid model -> " << model_out << '\n';
    } else if (bench->parsed()) {
      auto d = load_data(data_in);
      if (queries >= d.size()) throw UsageError("--queries must be smaller than the dataset");
      std::vector<std::size_t> order(d.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(seed, "bench-holdout"));
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(queries));
      std::vector<std::size_t> tr(order.begin() + static_cast<std::ptrdiff_t>(queries), order.end());
      std::sort(test.begin(), test.end());
      std::sort(tr.begin(), tr.end());
      auto train_set = d.select(tr);

      struct Row {
        std::string name;
        std::vector<double> seconds;
        double comparisons = 0.0;
        std::size_t comparisons_max = 0;
        double error = 0.0;
        std::size_t bound = 0;
        std::size_t fallbacks = 0;
      };
      std::vector<Row> rows;
      for (auto k : {LearnerKind::kstar, LearnerKind::hybrid}) {
        auto model = train_model(train_set, lf.spec(k, seed, jobs));
        Row r{display_name(k), {}, 0.0, 0, 0.0, train_set.size(), 0};
        const auto* hybrid = dynamic_cast<const HybridPositionModel*>(model.get());
        if (hybrid) r.bound = hybrid->model().max_expert_size();
        for (auto i : test) {
          auto t0 = std::chrono::steady_clock::now();
          auto p = model->predict(d[i].fingerprint);
          r.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          // A blended answer consults two experts, so it may exceed the single-partition bound.
          if (hybrid && hybrid->predict_detailed(d[i].fingerprint).fallback) ++r.fallbacks;
          r.comparisons += static_cast<double>(p.comparisons);
          r.comparisons_max = std::max(r.comparisons_max, p.comparisons);
          r.error += distance_m(p.position, d[i].position);
        }
        r.comparisons /= static_cast<double>(test.size());
        r.error /= static_cast<double>(test.size());
        rows.push_back(std::move(r));
      }
      std::ostringstream csv;
      csv << "model,training_points,queries,latency_mean_s,latency_median_s,latency_max_s,comparisons_mean,"
             "comparisons_max,comparisons_bound,fallback_queries,mean_error_m\n";
      std::vector<double> means;
      for (auto& r : rows) {
        double mean = 0.0;
        for (double s : r.seconds) mean += s;
        mean /= static_cast<double>(r.seconds.size());
        means.push_back(mean);
        std::sort(r.seconds.begin(), r.seconds.end());
        csv << csv_cell(r.name) << ',' << train_set.size() << ',' << test.size() << ',' << format_number(mean) << ','
            << format_number(r.seconds[r.seconds.size() / 2]) << ',' << format_number(r.seconds.back()) << ','
            << format_number(r.comparisons) << ',' << r.comparisons_max << ',' << r.bound << ',' << r.fallbacks
            << ',' << format_number(r.error) << '\n';
      }
      if (!bench_out.empty()) write_text(bench_out, csv.str());
      out << csv.str() << "speedup: " << fixed(means[0] / means[1], 2) << "x\n";
    } else if (replay->parsed()) {
      auto model = load_model_file(model_in);
      WalkLog log;
      if (!walk_in.empty()) {
        require_file(walk_in);
        log = load_walk(walk_in);
      } else {
        if (env_in.empty()) throw UsageError("replay needs --walk or --env");
        auto env = load_environment(env_in);
        auto route = path_spec.empty() ? default_route(env) : parse_path(path_spec);
        auto [mps, label] = parse_pace(pace_spec);
        auto traj = generate_trajectory(route, mps, env.bounds, label);
        log = sample_walk(env, traj, interval, derive_seed(seed, "walk"), orientation_from_string(orientation));
        if (!walk_out.empty()) {
          fs::path w(walk_out);
          if (w.has_parent_path()) fs::create_directories(w.parent_path());
          save_walk(log, w, env.bounds);
        }
      }
      ReplayReport rep;
      try {
        rep = replay_eval(*model, log, latency);
      } catch (const std::invalid_argument& e) {
        throw DataError(std::string("walk does not fit the model: ") + e.what());
      }
      if (!series_out.empty()) {
        std::ostringstream os;
        write_series_csv(rep, os);
        write_text(series_out, os.str());
      }
      out << kPaceTableHeader << '\n'
          << format_pace_row({display_name(model->kind()), rep.pace_label, to_string(rep.orientation),
                              rep.average_error_m})
          << '\n';
    } else if (plot->parsed()) {
      std::ostringstream os;
      if (kind == "survey") {
        if (data_in.empty()) throw UsageError("export-plot --kind survey needs --data");
        auto d = load_data(data_in);
        os << "x,y,detected_radios\n";
        for (const auto& p : d.points()) {
          std::size_t seen = 0;
          for (std::size_t i = 0; i < d.schema().size(); ++i)
            if (d.schema()[i].kind == AttributeKind::rssi && !p.fingerprint.missing[i]) ++seen;
          os << format_number(p.position.x) << ',' << format_number(p.position.y) << ',' << seen << '\n';
        }
      } else if (kind == "partitions") {
        if (model_in.empty()) throw UsageError("export-plot --kind partitions needs --model");
        auto model = load_model_file(model_in);
        auto* h = dynamic_cast<const HybridPositionModel*>(model.get());
        if (!h) throw UsageError("export-plot --kind partitions needs a hybrid model");
        os << "x,y,partition\n";
        for (const auto& [id, e] : h->model().experts)
          for (std::size_t i = 0; i < e.size(); ++i)
            os << format_number(e.x_model().targets()[i]) << ',' << format_number(e.y_targets()[i]) << ',' << id << '\n';
      } else {
        if (walk_in.empty()) throw UsageError("export-plot --kind replay needs --walk");
        require_file(walk_in);
        auto log = load_walk(walk_in);
        os << "series,t,x,y\n";
        for (const auto& v : log.trajectory.vertices)
          os << "vertex," << format_number(v.time) << ',' << format_number(v.position.x) << ','
             << format_number(v.position.y) << '\n';
        if (!series_in.empty()) {
          require_file(series_in);
          std::ifstream is(series_in);
          std::string line;
          std::getline(is, line);
          if (line != "t,pred_x,pred_y,true_x,true_y,error_m") throw DataError(series_in + ": not a replay series");
          while (std::getline(is, line)) {
            if (line.empty()) continue;
            auto c = split_csv_line(line);
            if (c.size() != 6) throw DataError(series_in + ": wrong cell count");
            os << "predicted," << c[0] << ',' << c[1] << ',' << c[2] << '\n';
          }
        }
      }
      write_text(plot_out, os.str());
    }
  } catch (const UsageError& e) {
    err << "fploc: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "fploc: " << e.what() << '\n';
    return kData;
  } catch (const TrainingError& e) {
    err << "fploc: " << e.what() << '\n';
    return kTraining;
  } catch (const std::invalid_argument& e) {
    err << "fploc: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "fploc: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

}  // namespace fploc::cli
