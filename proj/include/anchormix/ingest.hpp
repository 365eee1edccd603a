#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"

namespace anchormix {

struct CsvSchema {
  std::vector<std::string> value_columns;  // empty: autodetect "y" or "y1..yp"
  std::string id_column = "id";
  std::string group_column = "group";
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

inline double parse_cell(const std::string& field, int row, const std::string& column) {
  if (field.empty())
    throw validation_error("missing value at row " + std::to_string(row) + ", column '" + column + "'");
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw validation_error("unparseable value '" + field + "' at row " + std::to_string(row) +
                           ", column '" + column + "'");
  }
  if (pos != field.size())
    throw validation_error("unparseable value '" + field + "' at row " + std::to_string(row) +
                           ", column '" + column + "'");
  if (!std::isfinite(v))
    throw validation_error("non-finite value at row " + std::to_string(row) + ", column '" + column +
                           "'");
  return v;
}

}  // namespace detail

// CSV ingestion: header row, p numeric columns (named y1..yp or a single y
// unless the schema lists them), optional id and group string columns.
inline Dataset load_dataset_stream(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw validation_error("empty file: no header row");
  auto header = detail::split_csv_line(line);

  std::vector<int> value_idx;
  std::vector<std::string> value_names;
  int id_idx = -1, group_idx = -1;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.id_column) id_idx = static_cast<int>(c);
    if (header[c] == schema.group_column) group_idx = static_cast<int>(c);
  }
  if (!schema.value_columns.empty()) {
    for (const auto& name : schema.value_columns) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw validation_error("value column '" + name + "' not found in header");
      value_idx.push_back(static_cast<int>(it - header.begin()));
      value_names.push_back(name);
    }
  } else {
    auto ity = std::find(header.begin(), header.end(), "y");
    if (ity != header.end()) {
      value_idx.push_back(static_cast<int>(ity - header.begin()));
      value_names.push_back("y");
    } else {
      for (int d = 1;; ++d) {
        std::string name = "y" + std::to_string(d);
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) break;
        value_idx.push_back(static_cast<int>(it - header.begin()));
        value_names.push_back(name);
      }
      if (value_idx.empty())
        throw validation_error("no value columns found: expected 'y' or 'y1..yp' in the header");
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids, groups;
  int row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw validation_error("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                             " fields but the header declares " + std::to_string(header.size()));
    std::vector<double> vals;
    vals.reserve(value_idx.size());
    for (size_t d = 0; d < value_idx.size(); ++d)
      vals.push_back(detail::parse_cell(fields[static_cast<size_t>(value_idx[d])], row, value_names[d]));
    rows.push_back(std::move(vals));
    ids.push_back(id_idx >= 0 ? fields[static_cast<size_t>(id_idx)] : std::to_string(row));
    if (group_idx >= 0) groups.push_back(fields[static_cast<size_t>(group_idx)]);
  }
  if (rows.empty()) throw validation_error("no data rows in file");

  Dataset data;
  data.points = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(value_idx.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t d = 0; d < value_idx.size(); ++d)
      data.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
  data.ids = std::move(ids);
  if (group_idx >= 0) data.groups = std::move(groups);
  data.validate();
  return data;
}

inline Dataset load_dataset(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open dataset file '" + path + "'");
  return load_dataset_stream(in, schema);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  out << "id";
  if (data.groups) out << ",group";
  if (data.p() == 1) {
    out << ",y";
  } else {
    for (int d = 1; d <= data.p(); ++d) out << ",y" << d;
  }
  out << "\n";
  char buf[40];
  for (int i = 0; i < data.n(); ++i) {
    out << data.ids[static_cast<size_t>(i)];
    if (data.groups) out << "," << (*data.groups)[static_cast<size_t>(i)];
    for (int d = 0; d < data.p(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.points(i, d));
      out << "," << buf;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// SisFall-style accelerometer trials.

struct TriaxialSeries {
  Eigen::MatrixXd samples;  // T x 3
  std::string trial_id;
  std::string activity;

  void validate() const {
    if (samples.rows() < 2) throw validation_error("triaxial series needs at least two samples");
    if (samples.cols() != 3) throw validation_error("triaxial series must have three axes");
    if (!samples.allFinite()) throw validation_error("triaxial series contains non-finite entries");
  }
};

// Published per-trial text format: lines of comma-separated integer ADC
// readings (semicolon line terminators tolerated). Three consecutive columns
// starting at column_offset form the accelerometer; readings are multiplied
// by the calibration scale.
inline TriaxialSeries parse_trial_stream(std::istream& in, const std::string& trial_id,
                                         const std::string& activity, double scale = 1.0,
                                         int column_offset = 0) {
  std::vector<std::array<double, 3>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    while (!t.empty() && (t.back() == ';' || t.back() == ',')) t.pop_back();
    if (t.empty()) continue;
    auto fields = detail::split_csv_line(t);
    if (static_cast<int>(fields.size()) < column_offset + 3)
      throw validation_error("trial '" + trial_id + "' line " + std::to_string(lineno) +
                             " has fewer than " + std::to_string(column_offset + 3) + " columns");
    std::array<double, 3> xyz{};
    for (int d = 0; d < 3; ++d)
      xyz[static_cast<size_t>(d)] =
          scale * detail::parse_cell(fields[static_cast<size_t>(column_offset + d)], lineno,
                                     "axis" + std::to_string(d + 1));
    rows.push_back(xyz);
  }
  if (rows.size() < 2)
    throw validation_error("trial '" + trial_id + "' has fewer than two samples");
  TriaxialSeries series;
  series.samples = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), 3);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int d = 0; d < 3; ++d) series.samples(static_cast<Eigen::Index>(i), d) = rows[i][static_cast<size_t>(d)];
  series.trial_id = trial_id;
  series.activity = activity;
  series.validate();
  return series;
}

inline TriaxialSeries parse_trial_file(const std::string& path, double scale = 1.0,
                                       int column_offset = 0) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open trial file '" + path + "'");
  // SisFall naming convention: ACTIVITY_SUBJECT_TRIAL.txt
  std::string stem = path;
  size_t slash = stem.find_last_of("/\\");
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  size_t us = stem.find('_');
  std::string activity = us == std::string::npos ? stem : stem.substr(0, us);
  return parse_trial_stream(in, stem, activity, scale, column_offset);
}

// (log max_t SMV_t, log min_t SMV_t, log max_t |SMV_t - SMV_{t-1}|) with
// SMV_t = sqrt(x^2 + y^2 + z^2), natural logs.
inline Eigen::Vector3d smv_features(const TriaxialSeries& series) {
  series.validate();
  const Eigen::Index T = series.samples.rows();
  Eigen::VectorXd smv(T);
  for (Eigen::Index t = 0; t < T; ++t) smv[t] = series.samples.row(t).norm();
  double mx = smv.maxCoeff();
  double mn = smv.minCoeff();
  double md = 0.0;
  for (Eigen::Index t = 1; t < T; ++t) md = std::max(md, std::abs(smv[t] - smv[t - 1]));
  if (!(mn > 0.0))
    throw validation_error("degenerate series '" + series.trial_id + "': zero minimum SMV");
  if (!(md > 0.0))
    throw validation_error("degenerate series '" + series.trial_id +
                           "': constant SMV (zero maximum successive difference)");
  return {std::log(mx), std::log(mn), std::log(md)};
}

inline void write_feature_csv(std::ostream& out, const std::vector<TriaxialSeries>& trials) {
  out << "id,activity,f1,f2,f3\n";
  char buf[40];
  for (const auto& trial : trials) {
    Eigen::Vector3d f = smv_features(trial);
    out << trial.trial_id << "," << trial.activity;
    for (int d = 0; d < 3; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", f[d]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace anchormix
