#pragma once

// JSON encodings of trained parameters. nlohmann writes doubles in shortest round-trip form, so
// a save/load cycle reproduces every parameter bit for bit.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fploc/core.hpp"
#include "fploc/forest.hpp"
#include "fploc/hybrid.hpp"
#include "fploc/linear.hpp"
#include "fploc/rbf.hpp"
#include "fploc/util.hpp"

namespace fploc {

using nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

inline json matrix_to_json(const FeatureMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.data()}};
}

inline FeatureMatrix matrix_from_json(const json& j) {
  return FeatureMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                       j.at("values").get<std::vector<double>>());
}

inline json to_json(const NormalizationParams& p) {
  return {{"method", to_string(p.method)}, {"shift", p.shift}, {"scale", p.scale}};
}

inline NormalizationParams normalization_from_json(const json& j) {
  NormalizationParams p;
  p.method = normalization_from_string(j.at("method").get<std::string>());
  p.shift = j.at("shift").get<std::vector<double>>();
  p.scale = j.at("scale").get<std::vector<double>>();
  if (p.shift.size() != p.scale.size()) throw DataError("normalization: shift/scale length mismatch");
  for (double s : p.scale)
    if (!(s > 0.0)) throw DataError("normalization: non-positive scale");
  return p;
}

// Trees: one array per node, [feature, threshold, left, right, value, histogram], in pre-order.
inline json to_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.histogram});
  return {{"mode", to_string(t.mode)}, {"num_classes", t.num_classes}, {"nodes", std::move(nodes)}};
}

inline TreeMode tree_mode_from_string(const std::string& s) {
  if (s == "classification") return TreeMode::classification;
  if (s == "regression") return TreeMode::regression;
  throw DataError("unknown tree mode '" + s + "'");
}

inline DecisionTree tree_from_json(const json& j) {
  DecisionTree t;
  t.mode = tree_mode_from_string(j.at("mode").get<std::string>());
  t.num_classes = j.at("num_classes").get<int>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.value = n.at(4).get<double>();
    node.histogram = n.at(5).get<std::vector<double>>();
    t.nodes.push_back(std::move(node));
  }
  const int size = static_cast<int>(t.nodes.size());
  if (size == 0) throw DataError("tree: no nodes");
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size))
      throw DataError("tree: child index out of range");
  return t;
}

inline json to_json(const Forest& f) {
  json trees = json::array();
  for (const auto& t : f.trees) trees.push_back(to_json(t));
  return {{"mode", to_string(f.mode)},
          {"num_classes", f.num_classes},
          {"m", f.m},
          {"seed", f.seed},
          {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const json& j) {
  Forest f;
  f.mode = tree_mode_from_string(j.at("mode").get<std::string>());
  f.num_classes = j.at("num_classes").get<int>();
  f.m = j.at("m").get<std::size_t>();
  f.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) f.trees.push_back(tree_from_json(t));
  if (f.trees.empty()) throw DataError("forest: no trees");
  return f;
}

inline json to_json(const RbfModel& m) {
  return {{"centers", matrix_to_json(m.centers)}, {"widths", m.widths}, {"weights", m.weights}, {"bias", m.bias}};
}

inline RbfModel rbf_from_json(const json& j) {
  RbfModel m;
  m.centers = matrix_from_json(j.at("centers"));
  m.widths = j.at("widths").get<std::vector<double>>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  try {
    m.check();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return m;
}

inline json to_json(const LinearModel& m) {
  return {{"coefficients", m.coefficients}, {"intercept", m.intercept}, {"ridge", m.ridge}};
}

inline LinearModel linear_from_json(const json& j) {
  return {j.at("coefficients").get<std::vector<double>>(), j.at("intercept").get<double>(), j.at("ridge").get<bool>()};
}

inline json to_json(const PartitionScheme& s) {
  json blocks = json::array();
  for (const auto& b : s.blocks) blocks.push_back({{"id", b.id}, {"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}});
  return {{"bounds", {{"width_tiles", s.bounds.width_tiles}, {"height_tiles", s.bounds.height_tiles}}},
          {"target_points_per_partition", s.target_points_per_partition},
          {"blocks", std::move(blocks)}};
}

inline PartitionScheme scheme_from_json(const json& j) {
  PartitionScheme s;
  s.bounds = {j.at("bounds").at("width_tiles").get<int>(), j.at("bounds").at("height_tiles").get<int>()};
  s.target_points_per_partition = j.at("target_points_per_partition").get<std::size_t>();
  for (const auto& b : j.at("blocks"))
    s.blocks.push_back({b.at("id").get<int>(), b.at("x0").get<int>(), b.at("y0").get<int>(), b.at("x1").get<int>(),
                        b.at("y1").get<int>()});
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training data carried by instance-based models

/// Raw (unnormalized) fingerprints and positions an instance-based model was built from.
struct TrainingData {
  FeatureMatrix raw;
  std::vector<GridPosition> positions;

  static TrainingData from(const Dataset& d) {
    TrainingData t{raw_features(d), {}};
    for (const auto& p : d.points()) t.positions.push_back(p.position);
    return t;
  }

  std::vector<double> targets(Axis a) const {
    std::vector<double> v;
    v.reserve(positions.size());
    for (const auto& p : positions) v.push_back(p[a]);
    return v;
  }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.update(raw.data());
    for (const auto& p : positions) {
      h.update(&p.x, sizeof p.x);
      h.update(&p.y, sizeof p.y);
    }
    return h.digest();
  }
};

/// Either the full data inline, or a reference to the dataset file plus a content hash that is
/// checked on load.
inline json training_data_to_json(const TrainingData& t, const std::string& dataset_path = {}) {
  const std::string hash = std::to_string(t.content_hash());
  if (!dataset_path.empty()) return {{"dataset", dataset_path}, {"content_hash", hash}};
  std::vector<double> xs, ys;
  for (const auto& p : t.positions) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  return {{"features", matrix_to_json(t.raw)}, {"x", xs}, {"y", ys}, {"content_hash", hash}};
}

template <class LoadDataset>
TrainingData training_data_from_json(const json& j, LoadDataset&& load) {
  TrainingData t;
  if (j.contains("dataset")) {
    t = TrainingData::from(load(j.at("dataset").get<std::string>()));
  } else {
    t.raw = matrix_from_json(j.at("features"));
    auto xs = j.at("x").get<std::vector<double>>();
    auto ys = j.at("y").get<std::vector<double>>();
    if (xs.size() != t.raw.rows() || ys.size() != t.raw.rows()) throw DataError("training data: length mismatch");
    for (std::size_t i = 0; i < xs.size(); ++i) t.positions.push_back({xs[i], ys[i]});
  }
  if (std::to_string(t.content_hash()) != j.at("content_hash").get<std::string>())
    throw DataError("training data: content hash mismatch (dataset changed since the model was saved)");
  return t;
}

}  // namespace fploc
