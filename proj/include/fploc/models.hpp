#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fploc/core.hpp"
#include "fploc/forest.hpp"
#include "fploc/hybrid.hpp"
#include "fploc/knn.hpp"
#include "fploc/kstar.hpp"
#include "fploc/linear.hpp"
#include "fploc/persistence.hpp"
#include "fploc/rbf.hpp"

namespace fploc {

enum class LearnerKind { kstar, knn, rbf, linear, zeror, forest, vote, hybrid };

inline constexpr std::pair<LearnerKind, std::string_view> kLearnerNames[] = {
    {LearnerKind::kstar, "kstar"},   {LearnerKind::knn, "knn"},     {LearnerKind::rbf, "rbf"},
    {LearnerKind::linear, "linear"}, {LearnerKind::zeror, "zeror"}, {LearnerKind::forest, "forest"},
    {LearnerKind::vote, "vote"},     {LearnerKind::hybrid, "hybrid"},
};

inline std::string_view to_string(LearnerKind k) {
  for (const auto& [kind, name] : kLearnerNames)
    if (kind == k) return name;
  return "?";
}

inline LearnerKind learner_from_string(std::string_view s) {
  for (const auto& [kind, name] : kLearnerNames)
    if (name == s) return kind;
  throw std::invalid_argument("unknown learner '" + std::string(s) + "'");
}

/// Display names used in the result tables.
inline std::string display_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::kstar: return "K*";
    case LearnerKind::knn: return "k-Nearest Neighbor";
    case LearnerKind::rbf: return "RBFRegressor";
    case LearnerKind::linear: return "LinearRegression";
    case LearnerKind::zeror: return "ZeroR";
    case LearnerKind::forest: return "RandomForest";
    case LearnerKind::vote: return "Voting";
    case LearnerKind::hybrid: return "Hybrid K*";
  }
  return "?";
}

/// Everything needed to train one learner. Unset normalization picks the learner default:
/// z-score for distance-based learners and RBF, none for trees, linear and ZeroR.
struct LearnerSpec {
  LearnerKind kind = LearnerKind::kstar;
  std::optional<NormalizationMethod> normalization;
  double blend = kDefaultBlend;
  std::size_t neighbors = kDefaultK;
  KnnWeighting weighting = KnnWeighting::inverse_distance;
  RbfOptions rbf{};
  std::size_t trees = kDefaultTrees;
  std::size_t split_features = 0;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 1;
  std::size_t partition_target = kDefaultPartitionTarget;
  double fallback_threshold = 0.5;
  /// Gate cross-validation folds reported by hybrid training; 0 skips it.
  std::size_t gate_cv_folds = 0;
  std::vector<LearnerKind> members{LearnerKind::kstar, LearnerKind::rbf};
  unsigned jobs = 1;

  NormalizationMethod effective_normalization() const {
    if (normalization) return *normalization;
    switch (kind) {
      case LearnerKind::kstar:
      case LearnerKind::knn:
      case LearnerKind::rbf:
      case LearnerKind::hybrid: return NormalizationMethod::zscore;
      default: return NormalizationMethod::none;
    }
  }

  /// Parameters that affect the trained model, for report headers.
  nlohmann::json to_json() const {
    nlohmann::json j{{"learner", std::string(to_string(kind))},
                     {"normalization", to_string(effective_normalization())},
                     {"seed", seed}};
    switch (kind) {
      case LearnerKind::kstar: j["blend"] = blend; break;
      case LearnerKind::knn:
        j["neighbors"] = neighbors;
        j["weighting"] = to_string(weighting);
        break;
      case LearnerKind::rbf:
        j["centers"] = rbf.centers;
        j["max_iters"] = rbf.max_iters;
        j["tol"] = rbf.tol;
        break;
      case LearnerKind::forest:
        j["trees"] = trees;
        j["split_features"] = split_features;
        j["min_leaf"] = min_leaf;
        break;
      case LearnerKind::vote: {
        auto& m = j["members"] = nlohmann::json::array();
        for (auto k : members) m.push_back(std::string(to_string(k)));
        j["blend"] = blend;
        j["centers"] = rbf.centers;
        break;
      }
      case LearnerKind::hybrid:
        j["blend"] = blend;
        j["trees"] = trees;
        j["partition_target"] = partition_target;
        j["fallback_threshold"] = fallback_threshold;
        break;
      default: break;
    }
    return j;
  }
};

struct Prediction {
  GridPosition position;
  /// Training instances the query was compared against (0 for parametric models).
  std::size_t comparisons = 0;
};

/// A trained model that locates raw fingerprints on both axes. Immutable; predict is thread-safe.
class PositionModel {
 public:
  virtual ~PositionModel() = default;
  virtual LearnerKind kind() const = 0;
  virtual Prediction predict(const Fingerprint& query) const = 0;
  /// Model document body; `dataset_path` non-empty makes instance models reference the data file.
  virtual nlohmann::json to_json(const std::string& dataset_path = {}) const = 0;
};

namespace detail {

inline void check_width(const Fingerprint& q, std::size_t dims) {
  if (q.values.size() != dims)
    throw std::invalid_argument("query has " + std::to_string(q.values.size()) + " values, model expects " +
                                std::to_string(dims));
}

}  // namespace detail

class KStarPositionModel final : public PositionModel {
 public:
  KStarPositionModel(TrainingData data, NormalizationParams norm, double blend)
      : data_(std::move(data)),
        norm_(std::move(norm)),
        locator_(norm_.apply(data_.raw), data_.targets(Axis::x), data_.targets(Axis::y), blend) {}

  LearnerKind kind() const override { return LearnerKind::kstar; }
  const KStarLocator& locator() const { return locator_; }
  const NormalizationParams& normalization() const { return norm_; }

  Prediction predict(const Fingerprint& q) const override {
    detail::check_width(q, norm_.size());
    return {locator_.locate(norm_.apply(q.values)), locator_.size()};
  }

  nlohmann::json to_json(const std::string& dataset_path) const override {
    return {{"blend", locator_.blend()},
            {"normalization", fploc::to_json(norm_)},
            {"data", training_data_to_json(data_, dataset_path)}};
  }

 private:
  TrainingData data_;
  NormalizationParams norm_;
  KStarLocator locator_;
};

class KnnPositionModel final : public PositionModel {
 public:
  KnnPositionModel(TrainingData data, NormalizationParams norm, std::size_t k, KnnWeighting w)
      : data_(std::move(data)),
        norm_(std::move(norm)),
        model_(norm_.apply(data_.raw), data_.targets(Axis::x), k, w),
        y_(data_.targets(Axis::y)) {}

  LearnerKind kind() const override { return LearnerKind::knn; }

  Prediction predict(const Fingerprint& q) const override {
    detail::check_width(q, norm_.size());
    auto nn = model_.neighbors(norm_.apply(q.values));
    return {{knn_combine(nn, model_.targets(), model_.weighting()), knn_combine(nn, y_, model_.weighting())},
            model_.size()};
  }

  nlohmann::json to_json(const std::string& dataset_path) const override {
    return {{"neighbors", model_.k()},
            {"weighting", to_string(model_.weighting())},
            {"normalization", fploc::to_json(norm_)},
            {"data", training_data_to_json(data_, dataset_path)}};
  }

 private:
  TrainingData data_;
  NormalizationParams norm_;
  KnnModel model_;
  std::vector<double> y_;
};

/// Two independent single-axis regressors sharing one normalization.
template <class Model, LearnerKind Kind>
class AxisPairModel final : public PositionModel {
 public:
  AxisPairModel(NormalizationParams norm, Model x, Model y, std::function<double(const Model&, std::span<const double>)> f,
                std::function<nlohmann::json(const Model&)> enc, std::size_t comparisons = 0)
      : norm_(std::move(norm)),
        x_(std::move(x)),
        y_(std::move(y)),
        f_(std::move(f)),
        enc_(std::move(enc)),
        comparisons_(comparisons) {}

  LearnerKind kind() const override { return Kind; }
  const Model& model(Axis a) const { return a == Axis::x ? x_ : y_; }

  Prediction predict(const Fingerprint& q) const override {
    detail::check_width(q, norm_.size());
    auto v = norm_.apply(q.values);
    return {{f_(x_, v), f_(y_, v)}, comparisons_};
  }

  nlohmann::json to_json(const std::string&) const override {
    return {{"normalization", fploc::to_json(norm_)}, {"x", enc_(x_)}, {"y", enc_(y_)}};
  }

 private:
  NormalizationParams norm_;
  Model x_, y_;
  std::function<double(const Model&, std::span<const double>)> f_;
  std::function<nlohmann::json(const Model&)> enc_;
  std::size_t comparisons_;
};

using RbfPositionModel = AxisPairModel<RbfModel, LearnerKind::rbf>;
using LinearPositionModel = AxisPairModel<LinearModel, LearnerKind::linear>;
using ZeroRPositionModel = AxisPairModel<ZeroRModel, LearnerKind::zeror>;
using ForestPositionModel = AxisPairModel<Forest, LearnerKind::forest>;

inline std::unique_ptr<PositionModel> make_rbf_model(NormalizationParams n, RbfModel x, RbfModel y) {
  return std::make_unique<RbfPositionModel>(
      std::move(n), std::move(x), std::move(y), [](const RbfModel& m, std::span<const double> v) { return rbf_predict(m, v); },
      [](const RbfModel& m) { return to_json(m); });
}

inline std::unique_ptr<PositionModel> make_linear_model(NormalizationParams n, LinearModel x, LinearModel y) {
  return std::make_unique<LinearPositionModel>(
      std::move(n), std::move(x), std::move(y),
      [](const LinearModel& m, std::span<const double> v) { return m.predict(v); },
      [](const LinearModel& m) { return to_json(m); });
}

inline std::unique_ptr<PositionModel> make_zeror_model(NormalizationParams n, ZeroRModel x, ZeroRModel y) {
  return std::make_unique<ZeroRPositionModel>(
      std::move(n), x, y, [](const ZeroRModel& m, std::span<const double>) { return m.constant; },
      [](const ZeroRModel& m) { return nlohmann::json{{"constant", m.constant}}; });
}

inline std::unique_ptr<PositionModel> make_forest_model(NormalizationParams n, Forest x, Forest y) {
  return std::make_unique<ForestPositionModel>(
      std::move(n), std::move(x), std::move(y),
      [](const Forest& f, std::span<const double> v) { return forest_regress(f, v); },
      [](const Forest& f) { return to_json(f); });
}

/// Unweighted average of member models on each axis.
class VotePositionModel final : public PositionModel {
 public:
  explicit VotePositionModel(std::vector<std::unique_ptr<PositionModel>> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("vote: no members");
  }

  LearnerKind kind() const override { return LearnerKind::vote; }
  const std::vector<std::unique_ptr<PositionModel>>& members() const { return members_; }

  Prediction predict(const Fingerprint& q) const override {
    std::vector<double> xs, ys;
    std::size_t comparisons = 0;
    for (const auto& m : members_) {
      auto p = m->predict(q);
      xs.push_back(p.position.x);
      ys.push_back(p.position.y);
      comparisons += p.comparisons;
    }
    return {{vote_average(xs), vote_average(ys)}, comparisons};
  }

  nlohmann::json to_json(const std::string& dataset_path) const override;

 private:
  std::vector<std::unique_ptr<PositionModel>> members_;
};

class HybridPositionModel final : public PositionModel {
 public:
  HybridPositionModel(HybridModel model, TrainingData data) : model_(std::move(model)), data_(std::move(data)) {}

  LearnerKind kind() const override { return LearnerKind::hybrid; }
  const HybridModel& model() const { return model_; }

  HybridPrediction predict_detailed(const Fingerprint& q) const {
    detail::check_width(q, model_.normalization.size());
    return hybrid_predict(model_, q);
  }

  Prediction predict(const Fingerprint& q) const override {
    auto p = predict_detailed(q);
    return {p.position, p.candidates};
  }

  nlohmann::json to_json(const std::string& dataset_path) const override {
    nlohmann::json j{{"blend", model_.blend},
                     {"fallback_threshold", model_.fallback_threshold},
                     {"scheme", fploc::to_json(model_.scheme)},
                     {"normalization", fploc::to_json(model_.normalization)},
                     {"gate", fploc::to_json(model_.gate)},
                     {"gate_partitions", model_.gate_partitions},
                     {"dropped_partitions", model_.dropped_partitions},
                     {"data", training_data_to_json(data_, dataset_path)}};
    if (model_.gate_cv_accuracy) j["gate_cv_accuracy"] = *model_.gate_cv_accuracy;
    return j;
  }

 private:
  HybridModel model_;
  TrainingData data_;
};

// ---------------------------------------------------------------------------
// Training

inline std::unique_ptr<PositionModel> train_model(const Dataset& d, const LearnerSpec& spec) {
  if (d.empty()) throw std::invalid_argument("train: empty dataset");
  const auto method = spec.effective_normalization();
  switch (spec.kind) {
    case LearnerKind::kstar: {
      auto data = TrainingData::from(d);
      auto norm = fit_normalization(data.raw, method);
      return std::make_unique<KStarPositionModel>(std::move(data), std::move(norm), spec.blend);
    }
    case LearnerKind::knn: {
      auto data = TrainingData::from(d);
      auto norm = fit_normalization(data.raw, method);
      return std::make_unique<KnnPositionModel>(std::move(data), std::move(norm), spec.neighbors, spec.weighting);
    }
    case LearnerKind::rbf: {
      auto vx = preprocess(d, Axis::x, method);
      auto vy = preprocess(d, Axis::y, method);
      RbfOptions opt = spec.rbf;
      opt.centers = std::min(opt.centers, d.size());
      opt.seed = derive_seed(spec.seed, "rbf", 0);
      auto mx = rbf_train(vx.features, vx.targets, opt).model;
      opt.seed = derive_seed(spec.seed, "rbf", 1);
      auto my = rbf_train(vy.features, vy.targets, opt).model;
      return make_rbf_model(vx.normalization, std::move(mx), std::move(my));
    }
    case LearnerKind::linear: {
      auto vx = preprocess(d, Axis::x, method);
      auto vy = preprocess(d, Axis::y, method);
      return make_linear_model(vx.normalization, linreg_train(vx.features, vx.targets),
                               linreg_train(vy.features, vy.targets));
    }
    case LearnerKind::zeror: {
      auto vx = preprocess(d, Axis::x, method);
      return make_zeror_model(vx.normalization, zeror_train(vx.targets), zeror_train(axis_targets(d, Axis::y)));
    }
    case LearnerKind::forest: {
      auto vx = preprocess(d, Axis::x, method);
      auto vy = preprocess(d, Axis::y, method);
      ForestOptions opt;
      opt.trees = spec.trees;
      opt.mode = TreeMode::regression;
      opt.m = spec.split_features;
      opt.min_leaf = spec.min_leaf;
      opt.jobs = spec.jobs;
      opt.seed = derive_seed(spec.seed, "forest", 0);
      auto fx = forest_train(vx.features, vx.targets, opt);
      opt.seed = derive_seed(spec.seed, "forest", 1);
      auto fy = forest_train(vy.features, vy.targets, opt);
      return make_forest_model(vx.normalization, std::move(fx), std::move(fy));
    }
    case LearnerKind::vote: {
      std::vector<std::unique_ptr<PositionModel>> members;
      for (auto k : spec.members) {
        if (k == LearnerKind::vote) throw std::invalid_argument("vote: members cannot be votes");
        LearnerSpec s = spec;
        s.kind = k;
        s.normalization.reset();
        members.push_back(train_model(d, s));
      }
      return std::make_unique<VotePositionModel>(std::move(members));
    }
    case LearnerKind::hybrid: {
      auto scheme = build_partition_scheme(d, spec.partition_target);
      HybridOptions opt;
      opt.blend = spec.blend;
      opt.fallback_threshold = spec.fallback_threshold;
      opt.gate_cv_folds = spec.gate_cv_folds;
      opt.gate.trees = spec.trees;
      opt.gate.m = spec.split_features;
      opt.gate.min_leaf = spec.min_leaf;
      opt.gate.jobs = spec.jobs;
      opt.gate.seed = derive_seed(spec.seed, "gate");
      return std::make_unique<HybridPositionModel>(hybrid_train(d, scheme, opt), TrainingData::from(d));
    }
  }
  throw std::logic_error("train: unhandled learner");
}

// ---------------------------------------------------------------------------
// Model documents

inline nlohmann::json VotePositionModel::to_json(const std::string& dataset_path) const {
  auto arr = nlohmann::json::array();
  for (const auto& m : members_)
    arr.push_back({{"learner", std::string(fploc::to_string(m->kind()))}, {"model", m->to_json(dataset_path)}});
  return {{"members", std::move(arr)}};
}

inline nlohmann::json model_document(const PositionModel& m, const std::string& dataset_path = {}) {
  return {{"format", "fploc-model"},
          {"version", kModelFormatVersion},
          {"learner", std::string(to_string(m.kind()))},
          {"model", m.to_json(dataset_path)}};
}

using DatasetLoader = std::function<Dataset(const std::string&)>;

inline std::unique_ptr<PositionModel> model_from_json(LearnerKind kind, const nlohmann::json& j,
                                                      const DatasetLoader& load) {
  switch (kind) {
    case LearnerKind::kstar:
      return std::make_unique<KStarPositionModel>(training_data_from_json(j.at("data"), load),
                                                  normalization_from_json(j.at("normalization")),
                                                  j.at("blend").get<double>());
    case LearnerKind::knn:
      return std::make_unique<KnnPositionModel>(
          training_data_from_json(j.at("data"), load), normalization_from_json(j.at("normalization")),
          j.at("neighbors").get<std::size_t>(), knn_weighting_from_string(j.at("weighting").get<std::string>()));
    case LearnerKind::rbf:
      return make_rbf_model(normalization_from_json(j.at("normalization")), rbf_from_json(j.at("x")),
                            rbf_from_json(j.at("y")));
    case LearnerKind::linear:
      return make_linear_model(normalization_from_json(j.at("normalization")), linear_from_json(j.at("x")),
                               linear_from_json(j.at("y")));
    case LearnerKind::zeror:
      return make_zeror_model(normalization_from_json(j.at("normalization")),
                              {j.at("x").at("constant").get<double>()}, {j.at("y").at("constant").get<double>()});
    case LearnerKind::forest:
      return make_forest_model(normalization_from_json(j.at("normalization")), forest_from_json(j.at("x")),
                               forest_from_json(j.at("y")));
    case LearnerKind::vote: {
      std::vector<std::unique_ptr<PositionModel>> members;
      for (const auto& m : j.at("members"))
        members.push_back(model_from_json(learner_from_string(m.at("learner").get<std::string>()), m.at("model"), load));
      return std::make_unique<VotePositionModel>(std::move(members));
    }
    case LearnerKind::hybrid: {
      HybridModel h;
      h.scheme = scheme_from_json(j.at("scheme"));
      h.normalization = normalization_from_json(j.at("normalization"));
      h.gate = forest_from_json(j.at("gate"));
      h.gate_partitions = j.at("gate_partitions").get<std::vector<int>>();
      h.dropped_partitions = j.at("dropped_partitions").get<std::vector<int>>();
      h.fallback_threshold = j.at("fallback_threshold").get<double>();
      if (j.contains("gate_cv_accuracy")) h.gate_cv_accuracy = j.at("gate_cv_accuracy").get<double>();
      if (h.gate_partitions.size() != static_cast<std::size_t>(h.gate.num_classes))
        throw DataError("hybrid: gate label set does not match its partitions");
      auto data = training_data_from_json(j.at("data"), load);
      hybrid_build_experts(h, data.raw, data.positions, j.at("blend").get<double>());
      return std::make_unique<HybridPositionModel>(std::move(h), std::move(data));
    }
  }
  throw DataError("model: unhandled learner");
}

/// Parses a model document. `load` resolves dataset references of instance-based models.
inline std::unique_ptr<PositionModel> load_model(const nlohmann::json& doc, const DatasetLoader& load) {
  if (doc.value("format", "") != "fploc-model") throw DataError("model: wrong format tag");
  if (doc.value("version", 0) != kModelFormatVersion) throw DataError("model: unsupported version");
  try {
    return model_from_json(learner_from_string(doc.at("learner").get<std::string>()), doc.at("model"), load);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

}  // namespace fploc
