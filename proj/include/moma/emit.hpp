// SPDX-License-Identifier: Apache-2.0
//
// Result emission. CSV files start with '# key=value' metadata lines
// (scenario hash, seed, trial count, tool version, UTC timestamp) followed by
// a mandatory header row; numbers are printed with 17 significant digits so
// emitted values parse back exactly. The timestamp line is the only
// non-deterministic content and can be disabled.

#pragma once

#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "moma/harness.hpp"
#include "moma/version.hpp"

namespace moma {

struct EmitMeta {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  int trials = 0;
  bool include_timestamp = true;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_meta(std::ostream& os, const EmitMeta& meta) {
  os << "# scenario_hash=" << meta.scenario_hash << "\n";
  os << "# seed=" << meta.seed << "\n";
  os << "# trials=" << meta.trials << "\n";
  os << "# version=" << kVersion << "\n";
  if (meta.include_timestamp) os << "# generated_utc=" << utc_timestamp() << "\n";
}

}  // namespace detail

inline void write_csv(std::ostream& os, const SweepTable& table, const EmitMeta& meta) {
  detail::write_meta(os, meta);
  os << table.x_name;
  for (const std::string& c : table.columns) os << "," << c;
  os << "\n";
  for (std::size_t i = 0; i < table.x.size(); ++i) {
    os << detail::format_double(table.x[i]);
    for (double v : table.cells[i]) os << "," << detail::format_double(v);
    os << "\n";
  }
}

inline void write_csv(std::ostream& os, const MonteCarloSummary& summary, const EmitMeta& meta) {
  detail::write_meta(os, meta);
  os << "metric,mean,stddev,ci95_half,n\n";
  for (const auto& [name, agg] : summary.metrics)
    os << name << "," << detail::format_double(agg.mean) << ","
       << detail::format_double(agg.stddev) << "," << detail::format_double(agg.ci95_half) << ","
       << agg.n << "\n";
}

inline nlohmann::json meta_json(const EmitMeta& meta) {
  nlohmann::json j = {{"scenario_hash", meta.scenario_hash},
                      {"seed", meta.seed},
                      {"trials", meta.trials},
                      {"version", kVersion}};
  if (meta.include_timestamp) j["generated_utc"] = detail::utc_timestamp();
  return j;
}

inline void write_json(std::ostream& os, const SweepTable& table, const EmitMeta& meta) {
  nlohmann::json j;
  j["meta"] = meta_json(meta);
  j["x_name"] = table.x_name;
  j["columns"] = table.columns;
  j["x"] = table.x;
  j["rows"] = table.cells;
  os << j.dump(2) << "\n";
}

inline void write_json(std::ostream& os, const MonteCarloSummary& summary, const EmitMeta& meta) {
  nlohmann::json j;
  j["meta"] = meta_json(meta);
  nlohmann::json metrics;
  for (const auto& [name, agg] : summary.metrics)
    metrics[name] = {{"mean", agg.mean},
                     {"stddev", agg.stddev},
                     {"ci95_half", agg.ci95_half},
                     {"n", agg.n}};
  j["metrics"] = metrics;
  os << j.dump(2) << "\n";
}

// Writes to a file, or to stdout when path is "-".
template <typename Payload>
inline void emit(const Payload& payload, const std::string& path, const std::string& format,
                 const EmitMeta& meta) {
  const bool csv = format == "csv";
  if (!csv && format != "json")
    throw std::invalid_argument("emit: format must be 'csv' or 'json'");
  if (path == "-") {
    if (csv)
      write_csv(std::cout, payload, meta);
    else
      write_json(std::cout, payload, meta);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
  if (csv)
    write_csv(os, payload, meta);
  else
    write_json(os, payload, meta);
  if (!os) throw std::runtime_error("emit: write failed for '" + path + "'");
}

// Parses a CSV produced by write_csv(SweepTable); returns the table and the
// metadata key/value lines.
inline SweepTable parse_table_csv(std::istream& is, std::map<std::string, std::string>* meta_out = nullptr) {
  SweepTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (meta_out) {
        const std::size_t eq = line.find('=');
        if (eq != std::string::npos && line.size() > 2)
          (*meta_out)[line.substr(2, eq - 2)] = line.substr(eq + 1);
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!header_seen) {
      if (fields.empty()) throw std::runtime_error("parse_table_csv: missing header");
      table.x_name = fields[0];
      table.columns.assign(fields.begin() + 1, fields.end());
      header_seen = true;
      continue;
    }
    if (fields.size() != table.columns.size() + 1)
      throw std::runtime_error("parse_table_csv: column count mismatch");
    table.x.push_back(std::stod(fields[0]));
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(std::stod(fields[i]));
    table.cells.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error("parse_table_csv: empty document");
  return table;
}

}  // namespace moma
