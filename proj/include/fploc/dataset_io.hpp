#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fploc/core.hpp"

namespace fploc {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Schema used when a CSV has no sidecar: kinds are inferred from names, everything else is a radio.
inline AttributeSchema infer_schema(const std::vector<std::string>& names) {
  std::vector<Attribute> attrs;
  for (const auto& n : names) {
    auto k = kind_from_string(n);
    if (k && *k != AttributeKind::rssi)
      attrs.push_back({n, *k, std::string(default_unit(*k))});
    else
      attrs.push_back({n, AttributeKind::rssi, "dBm"});
  }
  return AttributeSchema(std::move(attrs));
}

// ---------------------------------------------------------------------------
// Schema sidecar

inline nlohmann::json schema_to_json(const AttributeSchema& s, Bounds b) {
  nlohmann::json j;
  j["format"] = "fploc-schema";
  j["version"] = 1;
  j["bounds"] = {{"width_tiles", b.width_tiles}, {"height_tiles", b.height_tiles}};
  auto& attrs = j["attributes"] = nlohmann::json::array();
  for (const auto& a : s.attributes())
    attrs.push_back({{"name", a.name}, {"kind", std::string(to_string(a.kind))}, {"unit", a.unit}});
  return j;
}

inline std::pair<AttributeSchema, Bounds> schema_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fploc-schema") throw DataError("schema sidecar: wrong format tag");
  if (j.value("version", 0) != 1) throw DataError("schema sidecar: unsupported version");
  Bounds b{j.at("bounds").at("width_tiles").get<int>(), j.at("bounds").at("height_tiles").get<int>()};
  std::vector<Attribute> attrs;
  for (const auto& a : j.at("attributes")) {
    auto kind = kind_from_string(a.at("kind").get<std::string>());
    if (!kind) throw DataError("schema sidecar: unknown kind '" + a.at("kind").get<std::string>() + "'");
    attrs.push_back({a.at("name").get<std::string>(), *kind, a.at("unit").get<std::string>()});
  }
  return {AttributeSchema(std::move(attrs)), b};
}

inline std::filesystem::path schema_sidecar_path(std::filesystem::path csv) {
  return csv.replace_extension(".schema.json");
}

// ---------------------------------------------------------------------------
// Dataset CSV: x,y,<attr_1>,...,<attr_n>

inline void write_dataset_csv(const Dataset& d, std::ostream& os) {
  os << "x,y";
  for (const auto& a : d.schema().attributes()) os << ',' << a.name;
  os << '\n';
  for (const auto& p : d.points()) {
    os << format_number(p.position.x) << ',' << format_number(p.position.y);
    const auto& f = p.fingerprint;
    for (std::size_t i = 0; i < f.size(); ++i) os << ',' << format_number(f.missing[i] ? kMissingRssi : f.values[i]);
    os << '\n';
  }
}

/// Parses a dataset CSV. With `schema` given the header must list exactly its attribute names in order;
/// otherwise the schema is inferred from the header.
inline Dataset read_dataset_csv(std::istream& is, const std::optional<AttributeSchema>& schema = std::nullopt,
                                Bounds bounds = kBuildingBounds) {
  std::string line;
  if (!std::getline(is, line) || line.empty()) throw DataError("no header");

  auto header = split_csv_line(line);
  std::optional<std::size_t> xcol, ycol;
  std::vector<std::string> names;
  std::vector<std::size_t> attr_cols;
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name(header[c]);
    if (!seen.insert(name).second) throw DataError("duplicate column '" + name + "'");
    if (name == "x")
      xcol = c;
    else if (name == "y")
      ycol = c;
    else {
      names.push_back(name);
      attr_cols.push_back(c);
    }
  }
  if (!xcol) throw DataError("missing column 'x'");
  if (!ycol) throw DataError("missing column 'y'");

  AttributeSchema s;
  if (schema) {
    if (schema->size() != names.size()) throw DataError("header does not match schema: column count differs");
    for (std::size_t i = 0; i < names.size(); ++i)
      if ((*schema)[i].name != names[i])
        throw DataError("header does not match schema: expected '" + (*schema)[i].name + "', found '" + names[i] + "'");
    s = *schema;
  } else {
    s = infer_schema(names);
  }

  Dataset d(s, bounds);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    auto cell = [&](std::size_t c) {
      auto v = parse_number(cells[c]);
      if (!v) throw DataError("row " + std::to_string(row) + ", column '" + std::string(header[c]) + "': non-numeric cell '" +
                              std::string(cells[c]) + "'");
      return *v;
    };
    LabeledPoint p;
    p.position = {cell(*xcol), cell(*ycol)};
    p.fingerprint = Fingerprint(s.size());
    for (std::size_t i = 0; i < attr_cols.size(); ++i) {
      double v = cell(attr_cols[i]);
      if (s[i].kind == AttributeKind::rssi && v <= kMissingRssi)
        p.fingerprint.set_missing(i);
      else
        p.fingerprint.values[i] = v;
    }
    if (!bounds.contains(p.position))
      throw DataError("row " + std::to_string(row) + ": position (" + std::string(cells[*xcol]) + ", " +
                      std::string(cells[*ycol]) + ") outside bounds " + std::to_string(bounds.width_tiles) + "x" +
                      std::to_string(bounds.height_tiles));
    d.push_back(std::move(p));
  }
  return d;
}

/// Writes `<path>` and its schema sidecar `<stem>.schema.json`.
inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    write_dataset_csv(d, os);
  }
  std::ofstream js(schema_sidecar_path(path), std::ios::binary);
  if (!js) throw DataError("cannot write " + schema_sidecar_path(path).string());
  js << schema_to_json(d.schema(), d.bounds()).dump(2) << '\n';
}

/// Loads a dataset CSV, using the schema sidecar next to it when present.
inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  auto sidecar = schema_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream js(sidecar);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("schema sidecar " + sidecar.string() + ": " + e.what());
    }
    auto [schema, bounds] = schema_from_json(j);
    return read_dataset_csv(is, schema, bounds);
  }
  return read_dataset_csv(is);
}

}  // namespace fploc
