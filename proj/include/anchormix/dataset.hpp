#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "anchormix/common.hpp"

namespace anchormix {

// n observations in p dimensions, with unique row ids and optional group tags
// (e.g. activity codes).
struct Dataset {
  Eigen::MatrixXd points;                             // n x p
  std::vector<std::string> ids;                       // size n, unique
  std::optional<std::vector<std::string>> groups;     // size n when present

  int n() const { return static_cast<int>(points.rows()); }
  int p() const { return static_cast<int>(points.cols()); }

  void validate() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw validation_error("dataset must have n >= 1 and p >= 1");
    if (!points.allFinite())
      throw validation_error("dataset contains non-finite entries");
    if (static_cast<int>(ids.size()) != n())
      throw validation_error("dataset ids must have one entry per row");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second)
        throw validation_error("dataset ids must be unique (duplicate '" + id + "')");
    if (groups && static_cast<int>(groups->size()) != n())
      throw validation_error("dataset groups must have one entry per row");
  }

  static Dataset from_column(const std::vector<double>& values) {
    Dataset d;
    d.points = Eigen::MatrixXd(values.size(), 1);
    d.ids.reserve(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
      d.points(static_cast<Eigen::Index>(i), 0) = values[i];
      d.ids.push_back(std::to_string(i + 1));
    }
    d.validate();
    return d;
  }

  static Dataset from_matrix(Eigen::MatrixXd values) {
    Dataset d;
    d.points = std::move(values);
    d.ids.reserve(d.points.rows());
    for (Eigen::Index i = 0; i < d.points.rows(); ++i) d.ids.push_back(std::to_string(i + 1));
    d.validate();
    return d;
  }
};

}  // namespace anchormix
