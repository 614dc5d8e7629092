#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "fploc/fploc.hpp"

namespace testing_util {

using namespace fploc;

/// Schema of `n` rssi columns named r0, r1, ...
inline AttributeSchema rssi_schema(std::size_t n) {
  std::vector<Attribute> a;
  for (std::size_t i = 0; i < n; ++i) a.push_back({"r" + std::to_string(i), AttributeKind::rssi, "dBm"});
  return AttributeSchema(std::move(a));
}

inline Fingerprint fp(std::vector<double> values) {
  Fingerprint f(values.size());
  f.values = std::move(values);
  return f;
}

/// Dataset from rows of values and positions, on a schema of rssi columns.
inline Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<GridPosition>& pos,
                            Bounds b = {20, 20}) {
  Dataset d(rssi_schema(rows.empty() ? 0 : rows[0].size()), b);
  for (std::size_t i = 0; i < rows.size(); ++i) d.push_back({fp(rows[i]), pos[i]});
  return d;
}

/// Small open world: 24 x 16 tiles, 4 APs with 3 radios each, no obstacles.
inline Environment small_world(double sigma = 4.0) {
  auto env = open_environment({24, 16}, 2, 2, 3);
  env.shadowing_sd_db = sigma;
  return env;
}

/// Library fixture (3110 points), generated once per process.
inline const Dataset& library_fixture() {
  static const Dataset d = generate_dataset(library_environment(), kLibrarySpacing, 42);
  return d;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fploc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace testing_util
