// Copyright 2026 The ctxbandit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxbandit/context_model.hpp"
#include "ctxbandit/errors.hpp"

// CSV ingestion of empirical context distributions.
//
// A distribution file has a header row naming the context coordinates, an
// optional `weight` column (uniform weights when absent) and one row per
// support point. A group directory holds one such file per group, keyed by
// filename stem; all files must share the same coordinate header.

namespace ctxbandit::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline double parse_number(const std::string& cell, const std::string& where) {
  double value = 0.0;
  const auto* begin = cell.data();
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ValidationError(where + ": non-numeric cell '" + cell + "'");
  }
  return value;
}

}  // namespace detail

struct EmpiricalTable {
  std::vector<std::string> columns;  // context coordinates, weight column excluded
  std::vector<Context> points;
  std::vector<double> weights;

  ContextDistribution distribution(std::string label = {}) const {
    return ContextDistribution::empirical(points, weights, std::move(label));
  }
};

inline EmpiricalTable load_empirical_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_row(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError(path.string() + ": missing header row");

  std::optional<std::size_t> weight_col;
  EmpiricalTable table;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": empty column name");
    }
    if (header[i] == "weight") {
      if (weight_col) throw ValidationError(path.string() + ": duplicate weight column");
      weight_col = i;
    } else {
      table.columns.push_back(header[i]);
    }
  }
  if (table.columns.empty()) throw ValidationError(path.string() + ": no context columns");

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto cells = detail::split_row(line);
    if (cells.size() != header.size()) {
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
    }
    Context c(static_cast<Eigen::Index>(table.columns.size()));
    Eigen::Index k = 0;
    double w = 1.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double v = detail::parse_number(cells[i], where);
      if (weight_col && i == *weight_col) {
        if (v < 0.0) throw ValidationError(where + ": negative weight");
        w = v;
      } else {
        c[k++] = v;
      }
    }
    table.points.push_back(std::move(c));
    table.weights.push_back(w);
  }
  if (table.points.empty()) throw ValidationError(path.string() + ": no data rows");

  if (!weight_col) {
    std::fill(table.weights.begin(), table.weights.end(), 1.0 / table.points.size());
  } else {
    double total = 0.0;
    for (double w : table.weights) total += w;
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError(path.string() + ": weights sum to " + std::to_string(total) +
                            ", expected 1");
    }
  }
  return table;
}

struct GroupedContexts {
  std::vector<std::string> columns;
  std::vector<std::string> keys;       // filename stems, sorted
  std::vector<EmpiricalTable> tables;  // parallel to keys
  std::vector<double> frequencies;     // probability of picking each group; uniform by default

  std::size_t size() const { return keys.size(); }
};

// Optional frequency file: header `group,weight`, one row per group key.
inline std::vector<double> load_group_frequencies(const std::filesystem::path& path,
                                                  const std::vector<std::string>& keys) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string() + ": cannot open");
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  std::vector<double> freq(keys.size(), -1.0);
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto cells = detail::split_row(line);
    if (!seen_header) {
      if (cells.size() != 2 || cells[0] != "group" || cells[1] != "weight") {
        throw ValidationError(where + ": frequency header must be 'group,weight'");
      }
      seen_header = true;
      continue;
    }
    if (cells.size() != 2) throw ValidationError(where + ": expected 2 cells");
    const auto it = std::find(keys.begin(), keys.end(), cells[0]);
    if (it == keys.end()) throw ValidationError(where + ": unknown group '" + cells[0] + "'");
    const double w = detail::parse_number(cells[1], where);
    if (w < 0.0) throw ValidationError(where + ": negative weight");
    freq[static_cast<std::size_t>(it - keys.begin())] = w;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (freq[i] < 0.0) throw ValidationError(path.string() + ": no weight for group '" + keys[i] + "'");
    total += freq[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError(path.string() + ": group weights sum to " + std::to_string(total) +
                          ", expected 1");
  }
  return freq;
}

inline GroupedContexts load_group_directory(const std::filesystem::path& dir,
                                            const std::optional<std::filesystem::path>& frequencies = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError(dir.string() + ": no .csv group files");

  GroupedContexts groups;
  for (const auto& file : files) {
    auto table = load_empirical_csv(file);
    if (groups.keys.empty()) {
      groups.columns = table.columns;
    } else if (table.columns != groups.columns) {
      throw ValidationError(file.string() + ": header does not match " + files.front().string());
    }
    groups.keys.push_back(file.stem().string());
    groups.tables.push_back(std::move(table));
  }
  if (frequencies) {
    groups.frequencies = load_group_frequencies(*frequencies, groups.keys);
  } else {
    groups.frequencies.assign(groups.keys.size(), 1.0 / groups.keys.size());
  }
  return groups;
}

}  // namespace ctxbandit::io
