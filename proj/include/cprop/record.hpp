#pragma once

// Experiment output: a config echo, named numeric tables and named scalars.
//
// On disk (see write_record):
//   <kind>.cfg            resolved parameters, `key = value`
//   <kind>_<table>.csv    one file per table, header row first
//   <kind>_summary.json   scalars, config and wall-clock time

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cprop/config.hpp"
#include "cprop/error.hpp"
#include "cprop/graph_io.hpp"

namespace cprop {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw Error("table row width does not match its header");
    rows.push_back(std::move(row));
  }

  std::vector<double> column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] != name) continue;
      std::vector<double> out;
      out.reserve(rows.size());
      for (const auto& r : rows) out.push_back(r[c]);
      return out;
    }
    throw Error("no column '" + name + "'");
  }

  void write_csv(std::ostream& out) const {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_real(r[c]);
      out << '\n';
    }
  }
};

struct EnsembleStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single member
  std::size_t count = 0;
};

/// Accumulates in index order so results do not depend on how members were scheduled.
inline EnsembleStats ensemble_stats(std::span<const double> xs) {
  EnsembleStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct ExperimentRecord {
  std::string kind;
  KeyValues config;
  std::vector<std::pair<std::string, Table>> tables;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;

  Table& add_table(std::string name, std::vector<std::string> columns) {
    tables.emplace_back(std::move(name), Table{std::move(columns), {}});
    return tables.back().second;
  }

  void set(std::string name, double value) {
    for (auto& [k, v] : scalars)
      if (k == name) {
        v = value;
        return;
      }
    scalars.emplace_back(std::move(name), value);
  }

  bool has(const std::string& name) const {
    for (const auto& [k, v] : scalars)
      if (k == name) return true;
    return false;
  }

  double scalar(const std::string& name) const {
    for (const auto& [k, v] : scalars)
      if (k == name) return v;
    throw Error("record '" + kind + "' has no scalar '" + name + "'");
  }

  const Table& table(const std::string& name) const {
    for (const auto& [k, t] : tables)
      if (k == name) return t;
    throw Error("record '" + kind + "' has no table '" + name + "'");
  }

  std::string summary_line() const {
    std::ostringstream s;
    s << kind << ':';
    for (const auto& [k, v] : scalars) s << ' ' << k << '=' << format_real(v);
    return s.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    j["wall_seconds"] = wall_seconds;
    auto& sc = j["scalars"] = nlohmann::json::object();
    for (const auto& [k, v] : scalars) sc[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    auto& cfg = j["config"] = nlohmann::json::object();
    for (const auto& [k, v] : config.entries()) cfg[k] = v;
    j["notes"] = notes;
    return j;
  }
};

inline void write_record(const ExperimentRecord& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open(rec.kind + ".cfg");
    rec.config.write(out);
  }
  for (const auto& [name, table] : rec.tables) {
    auto out = open(rec.kind + "_" + name + ".csv");
    table.write_csv(out);
  }
  auto out = open(rec.kind + "_summary.json");
  out << rec.to_json().dump(2) << '\n';
}

}  // namespace cprop
