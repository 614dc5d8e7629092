#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fploc/core.hpp"
#include "fploc/forest.hpp"
#include "fploc/kstar.hpp"
#include "fploc/util.hpp"

namespace fploc {

/// Rectangle [x0, x1) x [y0, y1) of whole tiles.
struct PartitionBlock {
  int id = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(const GridPosition& p) const noexcept { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  long area() const noexcept { return static_cast<long>(x1 - x0) * (y1 - y0); }
  bool operator==(const PartitionBlock&) const = default;
};

/// Rectangular blocks that tile the building exactly.
struct PartitionScheme {
  Bounds bounds;
  std::vector<PartitionBlock> blocks;
  std::size_t target_points_per_partition = 0;

  std::optional<int> partition_of(const GridPosition& p) const {
    for (const auto& b : blocks)
      if (b.contains(p)) return b.id;
    return std::nullopt;
  }

  int max_id() const {
    int m = -1;
    for (const auto& b : blocks) m = std::max(m, b.id);
    return m;
  }

  /// Throws unless the blocks cover the bounds with no gaps or overlaps and ids are unique.
  void validate() const {
    long area = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& a = blocks[i];
      if (a.x0 < 0 || a.y0 < 0 || a.x1 > bounds.width_tiles || a.y1 > bounds.height_tiles || a.x0 >= a.x1 || a.y0 >= a.y1)
        throw std::invalid_argument("partition scheme: block " + std::to_string(a.id) + " is empty or out of bounds");
      area += a.area();
      for (std::size_t j = i + 1; j < blocks.size(); ++j) {
        const auto& b = blocks[j];
        if (a.id == b.id) throw std::invalid_argument("partition scheme: duplicate id " + std::to_string(a.id));
        if (a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1)
          throw std::invalid_argument("partition scheme: blocks " + std::to_string(a.id) + " and " +
                                      std::to_string(b.id) + " overlap");
      }
    }
    if (area != static_cast<long>(bounds.width_tiles) * bounds.height_tiles)
      throw std::invalid_argument("partition scheme: blocks leave gaps");
  }

  std::vector<std::size_t> populations(const Dataset& d) const {
    std::vector<std::size_t> pop(static_cast<std::size_t>(max_id() + 1), 0);
    for (const auto& p : d.points()) {
      auto id = partition_of(p.position);
      if (!id) throw std::invalid_argument("partition scheme: point outside every block");
      ++pop[static_cast<std::size_t>(*id)];
    }
    return pop;
  }

  /// Uniform cols x rows grid of blocks, ids row-major.
  static PartitionScheme grid(Bounds bounds, int cols, int rows) {
    if (cols < 1 || rows < 1 || cols > bounds.width_tiles || rows > bounds.height_tiles)
      throw std::invalid_argument("partition grid: bad block counts");
    PartitionScheme s;
    s.bounds = bounds;
    int id = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        s.blocks.push_back({id++, bounds.width_tiles * c / cols, bounds.height_tiles * r / rows,
                            bounds.width_tiles * (c + 1) / cols, bounds.height_tiles * (r + 1) / rows});
    return s;
  }

  bool operator==(const PartitionScheme&) const = default;
};

inline constexpr std::size_t kDefaultPartitionTarget = 450;
inline constexpr double kPartitionSlack = 1.25;
/// A cut may miss its population share by this fraction when that puts it through a sparser line.
inline constexpr double kCutBalanceTolerance = 0.05;

namespace detail {

/// Recursive population-balanced cuts: a region that must hold k partitions is cut across its longer
/// side so that the two halves hold populations roughly proportional to floor(k/2) and ceil(k/2).
/// Cuts drift toward empty survey lines (shelves, walls) so fewer points sit right on a boundary.
inline void split_region(const std::vector<GridPosition>& pts, std::vector<std::size_t> members, PartitionBlock r,
                         int k, std::vector<PartitionBlock>& out) {
  const int w = r.x1 - r.x0, h = r.y1 - r.y0;
  if (k <= 1 || (w < 2 && h < 2)) {
    r.id = static_cast<int>(out.size());
    out.push_back(r);
    return;
  }
  const bool cut_x = w >= 2 && (w >= h || h < 2);
  const int k_left = k / 2;
  const double want = static_cast<double>(members.size()) * k_left / k;
  const int lo = cut_x ? r.x0 : r.y0, hi = cut_x ? r.x1 : r.y1;

  std::vector<std::size_t> below(static_cast<std::size_t>(hi - lo + 1), 0);
  for (auto i : members) {
    const double c = cut_x ? pts[i].x : pts[i].y;
    ++below[static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(c)) - lo + 1, 0, hi - lo))];
  }
  for (std::size_t i = 1; i < below.size(); ++i) below[i] += below[i - 1];

  std::vector<std::size_t> line(static_cast<std::size_t>(hi - lo), 0);
  for (auto i : members) {
    const double c = cut_x ? pts[i].x : pts[i].y;
    ++line[static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(c)) - lo, 0, hi - lo - 1))];
  }
  auto err = [&](int c) { return std::abs(static_cast<double>(below[static_cast<std::size_t>(c - lo)]) - want); };
  double best_err = err(lo + 1);
  for (int c = lo + 2; c < hi; ++c) best_err = std::min(best_err, err(c));

  // Among near-balanced cuts, take the one with the fewest points on the two lines it separates.
  const double tol = best_err + kCutBalanceTolerance * want;
  int best = -1;
  std::size_t best_crowd = 0;
  for (int c = lo + 1; c < hi; ++c) {
    if (err(c) > tol) continue;
    const std::size_t crowd = line[static_cast<std::size_t>(c - 1 - lo)] + line[static_cast<std::size_t>(c - lo)];
    if (best < 0 || crowd < best_crowd || (crowd == best_crowd && err(c) < err(best))) {
      best = c;
      best_crowd = crowd;
    }
  }
  PartitionBlock a = r, b = r;
  (cut_x ? a.x1 : a.y1) = best;
  (cut_x ? b.x0 : b.y0) = best;
  std::vector<std::size_t> ma, mb;
  for (auto i : members) ((cut_x ? pts[i].x : pts[i].y) < best ? ma : mb).push_back(i);
  split_region(pts, std::move(ma), a, k_left, out);
  split_region(pts, std::move(mb), b, k - k_left, out);
}

}  // namespace detail

/// Smallest balanced block layout with max population <= 1.25 x target, starting from
/// ceil(N / target) partitions.
inline PartitionScheme build_partition_scheme(const Dataset& d, std::size_t target = kDefaultPartitionTarget) {
  if (target < 1) throw std::invalid_argument("build_partition_scheme: target must be >= 1");
  std::vector<GridPosition> pts;
  for (const auto& p : d.points()) pts.push_back(p.position);
  std::vector<std::size_t> all(pts.size());
  std::iota(all.begin(), all.end(), 0);
  const PartitionBlock whole{0, 0, 0, d.bounds().width_tiles, d.bounds().height_tiles};

  std::size_t k = std::max<std::size_t>(1, (d.size() + target - 1) / target);
  for (;; ++k) {
    PartitionScheme s;
    s.bounds = d.bounds();
    s.target_points_per_partition = target;
    detail::split_region(pts, all, whole, static_cast<int>(k), s.blocks);
    auto pop = s.populations(d);
    const auto mx = pop.empty() ? 0 : *std::max_element(pop.begin(), pop.end());
    if (static_cast<double>(mx) <= kPartitionSlack * static_cast<double>(target) || k >= d.size() ||
        s.blocks.size() < k)
      return s;
  }
}

// ---------------------------------------------------------------------------
// Hybrid model

struct HybridOptions {
  double blend = kDefaultBlend;
  ForestOptions gate{};
  /// Below this top vote fraction the two leading experts are blended.
  double fallback_threshold = 0.5;
  /// Folds for the reported gate accuracy; 0 skips the cross-validation.
  std::size_t gate_cv_folds = 10;
};

struct HybridModel {
  PartitionScheme scheme;
  /// z-score parameters shared by every expert, fitted on the whole training set.
  NormalizationParams normalization;
  /// Classifies raw fingerprints; gate class c stands for partition `gate_partitions[c]`.
  Forest gate;
  std::vector<int> gate_partitions;
  std::map<int, KStarLocator> experts;
  std::vector<int> dropped_partitions;
  double fallback_threshold = 0.5;
  double blend = kDefaultBlend;
  std::optional<double> gate_cv_accuracy;

  std::size_t max_expert_size() const {
    std::size_t m = 0;
    for (const auto& [id, e] : experts) m = std::max(m, e.size());
    return m;
  }
};

struct HybridPrediction {
  GridPosition position;
  int partition = -1;
  /// Training instances compared against the query.
  std::size_t candidates = 0;
  /// Gate vote fraction per partition id.
  std::vector<double> vote_fractions;
  /// Two experts were blended because the top vote was below the threshold.
  bool fallback = false;
  /// The gate picked a partition without an expert and the runner-up was used.
  bool redirected = false;
};

/// Gate accuracy under k-fold cross-validation.
inline double gate_cross_validate(const FeatureMatrix& x, std::span<const double> labels, const ForestOptions& opt,
                                  std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || folds > x.rows()) throw std::invalid_argument("gate_cross_validate: bad fold count");
  auto fold = make_folds(x.rows(), folds, seed);
  std::size_t correct = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < x.rows(); ++i) (fold[i] == f ? test : train).push_back(i);
    std::vector<double> y;
    for (auto i : train) y.push_back(labels[i]);
    ForestOptions o = opt;
    o.seed = derive_seed(opt.seed, "gate-cv", f);
    auto forest = forest_train(x.select_rows(train), y, o);
    for (auto i : test)
      if (forest_classify(forest, x.row(i)).label == static_cast<int>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

/// (Re)creates one K* expert per populated partition from raw training rows, using the model's
/// scheme and normalization. Rows keep their original order inside each expert.
inline void hybrid_build_experts(HybridModel& m, const FeatureMatrix& raw, std::span<const GridPosition> positions,
                                 double blend) {
  if (raw.rows() != positions.size()) throw std::invalid_argument("hybrid: row/position count mismatch");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto id = m.scheme.partition_of(positions[i]);
    if (!id) throw std::invalid_argument("hybrid: training point outside every block");
    members[*id].push_back(i);
  }
  auto features = m.normalization.apply(raw);
  m.blend = blend;
  m.experts.clear();
  for (const auto& [id, idx] : members) {
    std::vector<double> xs, ys;
    for (auto i : idx) {
      xs.push_back(positions[i].x);
      ys.push_back(positions[i].y);
    }
    m.experts.emplace(id, KStarLocator(features.select_rows(idx), std::move(xs), std::move(ys), blend));
  }
}

inline HybridModel hybrid_train(const Dataset& d, const PartitionScheme& scheme, const HybridOptions& opt = {}) {
  if (d.empty()) throw std::invalid_argument("hybrid_train: empty dataset");
  if (scheme.bounds != d.bounds()) throw std::invalid_argument("hybrid_train: scheme bounds differ from dataset bounds");
  scheme.validate();

  HybridModel m;
  m.scheme = scheme;
  m.fallback_threshold = opt.fallback_threshold;

  std::vector<int> part(d.size());
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < d.size(); ++i) {
    part[i] = *scheme.partition_of(d[i].position);
    members[part[i]].push_back(i);
  }
  for (const auto& b : scheme.blocks)
    if (!members.count(b.id)) m.dropped_partitions.push_back(b.id);
  std::sort(m.dropped_partitions.begin(), m.dropped_partitions.end());

  std::map<int, int> class_of;
  for (const auto& [id, idx] : members) {
    class_of[id] = static_cast<int>(m.gate_partitions.size());
    m.gate_partitions.push_back(id);
  }

  auto raw = raw_features(d);
  std::vector<double> labels(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) labels[i] = class_of[part[i]];
  ForestOptions gopt = opt.gate;
  gopt.mode = TreeMode::classification;
  gopt.num_classes = static_cast<int>(m.gate_partitions.size());
  m.gate = forest_train(raw, labels, gopt);
  if (opt.gate_cv_folds >= 2 && d.size() >= opt.gate_cv_folds)
    m.gate_cv_accuracy = gate_cross_validate(raw, labels, gopt, opt.gate_cv_folds, derive_seed(gopt.seed, "gate-folds"));

  m.normalization = fit_normalization(raw, NormalizationMethod::zscore);
  std::vector<GridPosition> positions;
  for (const auto& p : d.points()) positions.push_back(p.position);
  hybrid_build_experts(m, raw, positions, opt.blend);
  return m;
}

/// Runs the expert of a given partition, bypassing the gate.
inline HybridPrediction hybrid_predict_in(const HybridModel& m, const Fingerprint& query, int partition) {
  auto it = m.experts.find(partition);
  if (it == m.experts.end()) throw std::invalid_argument("hybrid: no expert for partition " + std::to_string(partition));
  HybridPrediction p;
  p.partition = partition;
  p.position = it->second.locate(m.normalization.apply(query.values));
  p.candidates = it->second.size();
  return p;
}

inline HybridPrediction hybrid_predict(const HybridModel& m, const Fingerprint& query) {
  auto vote = forest_classify(m.gate, query.values);
  HybridPrediction p;
  p.vote_fractions.assign(static_cast<std::size_t>(m.scheme.max_id() + 1), 0.0);
  for (std::size_t c = 0; c < vote.fractions.size(); ++c)
    p.vote_fractions[static_cast<std::size_t>(m.gate_partitions[c])] = vote.fractions[c];

  std::vector<int> ranked(p.vote_fractions.size());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](int a, int b) { return p.vote_fractions[static_cast<std::size_t>(a)] > p.vote_fractions[static_cast<std::size_t>(b)]; });
  std::vector<int> usable;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (m.experts.count(ranked[r]))
      usable.push_back(ranked[r]);
    else if (usable.empty() && p.vote_fractions[static_cast<std::size_t>(ranked[r])] > 0.0)
      p.redirected = true;
  }
  if (usable.empty()) throw std::logic_error("hybrid: model has no experts");

  const int top = usable[0];
  const double top_frac = p.vote_fractions[static_cast<std::size_t>(top)];
  const auto q = m.normalization.apply(query.values);
  p.partition = top;
  if (top_frac >= m.fallback_threshold || usable.size() < 2 ||
      p.vote_fractions[static_cast<std::size_t>(usable[1])] <= 0.0) {
    const auto& e = m.experts.at(top);
    p.position = e.locate(q);
    p.candidates = e.size();
    return p;
  }
  const int second = usable[1];
  const double wa = top_frac, wb = p.vote_fractions[static_cast<std::size_t>(second)];
  const auto& ea = m.experts.at(top);
  const auto& eb = m.experts.at(second);
  const auto pa = ea.locate(q), pb = eb.locate(q);
  p.position = {(wa * pa.x + wb * pb.x) / (wa + wb), (wa * pa.y + wb * pb.y) / (wa + wb)};
  p.candidates = ea.size() + eb.size();
  p.fallback = true;
  return p;
}

}  // namespace fploc
