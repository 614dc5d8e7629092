#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace fploc {

/// One ceiling tile is 2 ft.
inline constexpr double kMetersPerTile = 0.6096;

/// Stored value of an access point that was not heard during a scan.
inline constexpr double kMissingRssi = -100.0;

constexpr double tiles_to_meters(double tiles) noexcept { return tiles * kMetersPerTile; }

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Axis { x, y };

inline const char* to_string(Axis a) { return a == Axis::x ? "x" : "y"; }

// ---------------------------------------------------------------------------
// Attribute schema

enum class AttributeKind {
  rssi,
  light,
  gps_lat,
  gps_lon,
  accel_x,
  accel_y,
  accel_z,
  mag_x,
  mag_y,
  mag_z,
  rot_x,
  rot_y,
  rot_z,
  orient_x,
  orient_y,
  orient_z,
};

inline constexpr std::pair<AttributeKind, std::string_view> kKindNames[] = {
    {AttributeKind::rssi, "rssi"},       {AttributeKind::light, "light"},
    {AttributeKind::gps_lat, "gps_lat"}, {AttributeKind::gps_lon, "gps_lon"},
    {AttributeKind::accel_x, "accel_x"}, {AttributeKind::accel_y, "accel_y"},
    {AttributeKind::accel_z, "accel_z"}, {AttributeKind::mag_x, "mag_x"},
    {AttributeKind::mag_y, "mag_y"},     {AttributeKind::mag_z, "mag_z"},
    {AttributeKind::rot_x, "rot_x"},     {AttributeKind::rot_y, "rot_y"},
    {AttributeKind::rot_z, "rot_z"},     {AttributeKind::orient_x, "orient_x"},
    {AttributeKind::orient_y, "orient_y"}, {AttributeKind::orient_z, "orient_z"},
};

inline std::string_view to_string(AttributeKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

inline std::optional<AttributeKind> kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

inline std::string_view default_unit(AttributeKind k) {
  switch (k) {
    case AttributeKind::rssi: return "dBm";
    case AttributeKind::light: return "lx";
    case AttributeKind::gps_lat:
    case AttributeKind::gps_lon: return "deg";
    case AttributeKind::accel_x:
    case AttributeKind::accel_y:
    case AttributeKind::accel_z: return "m/s^2";
    case AttributeKind::mag_x:
    case AttributeKind::mag_y:
    case AttributeKind::mag_z: return "uT";
    case AttributeKind::rot_x:
    case AttributeKind::rot_y:
    case AttributeKind::rot_z: return "1";
    case AttributeKind::orient_x:
    case AttributeKind::orient_y:
    case AttributeKind::orient_z: return "deg";
  }
  return "";
}

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::rssi;
  std::string unit;

  bool operator==(const Attribute&) const = default;
};

/// Ordered attribute list shared by every fingerprint of a dataset.
class AttributeSchema {
 public:
  AttributeSchema() = default;

  explicit AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    std::unordered_set<std::string> seen;
    for (const auto& a : attributes_) {
      if (a.name.empty()) throw DataError("schema: empty attribute name");
      if (a.name == "x" || a.name == "y")
        throw DataError("schema: attribute name '" + a.name + "' is reserved for positions");
      if (!seen.insert(a.name).second) throw DataError("schema: duplicate attribute '" + a.name + "'");
      if (a.kind == AttributeKind::rssi && a.unit != "dBm")
        throw DataError("schema: rssi attribute '" + a.name + "' must carry unit dBm");
    }
  }

  std::size_t size() const noexcept { return attributes_.size(); }
  bool empty() const noexcept { return attributes_.empty(); }
  const Attribute& operator[](std::size_t i) const { return attributes_[i]; }
  const std::vector<Attribute>& attributes() const noexcept { return attributes_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
      if (attributes_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t count(AttributeKind k) const {
    return static_cast<std::size_t>(
        std::count_if(attributes_.begin(), attributes_.end(), [k](const Attribute& a) { return a.kind == k; }));
  }

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attributes_;
};

/// Auxiliary (non-WiFi) sensor columns in their canonical order.
inline constexpr AttributeKind kAuxiliaryKinds[] = {
    AttributeKind::light,    AttributeKind::gps_lat,  AttributeKind::gps_lon,  AttributeKind::accel_x,
    AttributeKind::accel_y,  AttributeKind::accel_z,  AttributeKind::mag_x,    AttributeKind::mag_y,
    AttributeKind::mag_z,    AttributeKind::rot_x,    AttributeKind::rot_y,    AttributeKind::rot_z,
    AttributeKind::orient_x, AttributeKind::orient_y, AttributeKind::orient_z,
};

inline constexpr std::size_t kAuxiliaryCount = std::size(kAuxiliaryKinds);

/// Number of radio columns that makes the standard schema 172 wide.
inline constexpr std::size_t kStandardRadioCount = 172 - kAuxiliaryCount;

/// Radio columns named `<prefix>` followed by the auxiliary sensor block.
inline AttributeSchema standard_schema(const std::vector<std::string>& radio_names) {
  std::vector<Attribute> attrs;
  attrs.reserve(radio_names.size() + kAuxiliaryCount);
  for (const auto& n : radio_names) attrs.push_back({n, AttributeKind::rssi, "dBm"});
  for (auto k : kAuxiliaryKinds) attrs.push_back({std::string(to_string(k)), k, std::string(default_unit(k))});
  return AttributeSchema(std::move(attrs));
}

// ---------------------------------------------------------------------------
// Fingerprints and datasets

struct Fingerprint {
  std::vector<double> values;
  std::vector<bool> missing;

  Fingerprint() = default;
  explicit Fingerprint(std::size_t n) : values(n, 0.0), missing(n, false) {}
  Fingerprint(std::vector<double> v, std::vector<bool> m) : values(std::move(v)), missing(std::move(m)) {}

  std::size_t size() const noexcept { return values.size(); }

  void set_missing(std::size_t i) {
    values[i] = kMissingRssi;
    missing[i] = true;
  }

  bool operator==(const Fingerprint&) const = default;
};

/// Position on the ceiling-tile grid. Origin is the front-left corner, x to the right, y to the back.
struct GridPosition {
  double x = 0.0;
  double y = 0.0;

  double operator[](Axis a) const noexcept { return a == Axis::x ? x : y; }
  bool operator==(const GridPosition&) const = default;
};

/// Euclidean distance between two grid positions, in meters.
inline double distance_m(const GridPosition& a, const GridPosition& b) {
  return tiles_to_meters(std::hypot(a.x - b.x, a.y - b.y));
}

struct Bounds {
  int width_tiles = 0;
  int height_tiles = 0;

  bool contains(const GridPosition& p) const noexcept {
    return p.x >= 0.0 && p.y >= 0.0 && p.x < width_tiles && p.y < height_tiles;
  }
  bool operator==(const Bounds&) const = default;
};

/// 204 ft x 128 ft.
inline constexpr Bounds kBuildingBounds{102, 64};

struct LabeledPoint {
  Fingerprint fingerprint;
  GridPosition position;

  bool operator==(const LabeledPoint&) const = default;
};

class Dataset {
 public:
  Dataset() = default;

  Dataset(AttributeSchema schema, Bounds bounds, std::vector<LabeledPoint> points = {})
      : schema_(std::move(schema)), bounds_(bounds), points_(std::move(points)) {
    if (bounds_.width_tiles <= 0 || bounds_.height_tiles <= 0) throw DataError("dataset: bounds must be positive");
    for (std::size_t i = 0; i < points_.size(); ++i) check_point(points_[i], i);
  }

  void push_back(LabeledPoint p) {
    check_point(p, points_.size());
    points_.push_back(std::move(p));
  }

  const AttributeSchema& schema() const noexcept { return schema_; }
  Bounds bounds() const noexcept { return bounds_; }
  const std::vector<LabeledPoint>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const LabeledPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Subset in the order given by `indices`.
  Dataset select(std::span<const std::size_t> indices) const {
    std::vector<LabeledPoint> pts;
    pts.reserve(indices.size());
    for (auto i : indices) pts.push_back(points_.at(i));
    Dataset d;
    d.schema_ = schema_;
    d.bounds_ = bounds_;
    d.points_ = std::move(pts);
    return d;
  }

  bool operator==(const Dataset&) const = default;

 private:
  void check_point(const LabeledPoint& p, std::size_t row) const {
    if (p.fingerprint.values.size() != schema_.size() || p.fingerprint.missing.size() != schema_.size())
      throw DataError("dataset: point " + std::to_string(row) + " has " +
                      std::to_string(p.fingerprint.values.size()) + " values, schema has " +
                      std::to_string(schema_.size()));
    if (!bounds_.contains(p.position))
      throw DataError("dataset: point " + std::to_string(row) + " at (" + std::to_string(p.position.x) + ", " +
                      std::to_string(p.position.y) + ") lies outside the declared bounds");
  }

  AttributeSchema schema_;
  Bounds bounds_{};
  std::vector<LabeledPoint> points_;
};

/// Points at indices offset, offset + stride, ... in original order.
inline Dataset subsample(const Dataset& d, std::size_t stride, std::size_t offset = 0) {
  if (stride < 1) throw std::invalid_argument("subsample: stride must be >= 1");
  if (offset >= stride) throw std::invalid_argument("subsample: offset must be < stride");
  std::vector<std::size_t> idx;
  for (std::size_t i = offset; i < d.size(); i += stride) idx.push_back(i);
  return d.select(idx);
}

// ---------------------------------------------------------------------------
// Feature matrices and normalization

/// Dense row-major matrix of feature values.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw std::invalid_argument("FeatureMatrix: data size mismatch");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const noexcept { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw std::invalid_argument("FeatureMatrix: row width mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  FeatureMatrix select_rows(std::span<const std::size_t> indices) const {
    FeatureMatrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = row(indices[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class NormalizationMethod { none, zscore, minmax };

inline const char* to_string(NormalizationMethod m) {
  switch (m) {
    case NormalizationMethod::none: return "none";
    case NormalizationMethod::zscore: return "zscore";
    case NormalizationMethod::minmax: return "minmax";
  }
  return "?";
}

inline NormalizationMethod normalization_from_string(std::string_view s) {
  if (s == "none") return NormalizationMethod::none;
  if (s == "zscore" || s == "z-score") return NormalizationMethod::zscore;
  if (s == "minmax" || s == "min-max") return NormalizationMethod::minmax;
  throw std::invalid_argument("unknown normalization method '" + std::string(s) + "'");
}

/// Per-attribute affine map value -> (value - shift) / scale. Every scale is > 0.
struct NormalizationParams {
  NormalizationMethod method = NormalizationMethod::none;
  std::vector<double> shift;
  std::vector<double> scale;

  std::size_t size() const noexcept { return shift.size(); }

  void apply(std::span<const double> raw, std::span<double> out) const {
    if (raw.size() != shift.size() || out.size() != raw.size())
      throw std::invalid_argument("NormalizationParams: width mismatch");
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - shift[i]) / scale[i];
  }

  std::vector<double> apply(std::span<const double> raw) const {
    std::vector<double> out(raw.size());
    apply(raw, out);
    return out;
  }

  FeatureMatrix apply(const FeatureMatrix& raw) const {
    FeatureMatrix out(raw.rows(), raw.cols());
    for (std::size_t r = 0; r < raw.rows(); ++r) apply(raw.row(r), out.row(r));
    return out;
  }

  bool operator==(const NormalizationParams&) const = default;
};

inline NormalizationParams fit_normalization(const FeatureMatrix& m, NormalizationMethod method) {
  NormalizationParams p;
  p.method = method;
  p.shift.assign(m.cols(), 0.0);
  p.scale.assign(m.cols(), 1.0);
  if (method == NormalizationMethod::none || m.rows() == 0) return p;

  const double n = static_cast<double>(m.rows());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (method == NormalizationMethod::zscore) {
      double mean = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
      mean /= n;
      double var = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) var += (m(r, c) - mean) * (m(r, c) - mean);
      double sd = std::sqrt(var / n);
      p.shift[c] = mean;
      // Constant columns keep scale 1 and normalize to 0.
      p.scale[c] = sd > 0.0 ? sd : 1.0;
    } else {
      double lo = m(0, c), hi = m(0, c);
      for (std::size_t r = 1; r < m.rows(); ++r) {
        lo = std::min(lo, m(r, c));
        hi = std::max(hi, m(r, c));
      }
      p.shift[c] = lo;
      p.scale[c] = hi > lo ? hi - lo : 1.0;
    }
  }
  return p;
}

/// Raw fingerprint values of every point, one row each. Positions are never part of the matrix.
inline FeatureMatrix raw_features(const Dataset& d) {
  FeatureMatrix m(d.size(), d.schema().size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& v = d[i].fingerprint.values;
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

inline std::vector<double> axis_targets(const Dataset& d, Axis a) {
  std::vector<double> t(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) t[i] = d[i].position[a];
  return t;
}

/// Learner-facing view of a dataset: normalized fingerprint features and one coordinate as target.
struct TrainingView {
  Axis axis = Axis::x;
  std::vector<std::string> feature_names;
  FeatureMatrix features;
  std::vector<double> targets;
  NormalizationParams normalization;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dims() const noexcept { return features.cols(); }
};

/// Builds the training view for one target axis. Neither coordinate is a feature, so the
/// opposite axis can never leak into the model. The input dataset is not modified.
inline TrainingView preprocess(const Dataset& d, Axis target_axis, NormalizationMethod method) {
  if (d.empty()) throw std::invalid_argument("preprocess: dataset is empty");
  TrainingView v;
  v.axis = target_axis;
  for (const auto& a : d.schema().attributes()) v.feature_names.push_back(a.name);
  auto raw = raw_features(d);
  v.normalization = fit_normalization(raw, method);
  v.features = v.normalization.apply(raw);
  v.targets = axis_targets(d, target_axis);
  return v;
}

}  // namespace fploc
