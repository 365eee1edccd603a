#pragma once

// Test-only oracles. Everything here is an independent route to a quantity
// the library computes: quadrature instead of closed forms, executive
// recursion instead of bitmask enumeration, sequential predictive updates
// instead of grouped sufficient statistics. Keep these decoupled from the
// library implementations they check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/density.hpp"
#include "anchormix/enumeration.hpp"

namespace oracles {

// log integral of prod_i N(y_i; theta, sigma2) * N(theta; mu, tau2) dtheta by
// Simpson's rule on a wide bracket around the posterior location.
inline double quad_group_marginal(const std::vector<double>& ys, double mu, double tau2,
                                  double sigma2, int panels = 200000) {
  if (ys.empty()) return 0.0;
  double prec = 1.0 / tau2;
  double sum = 0.0;
  for (double y : ys) {
    prec += 1.0 / sigma2;
    sum += y / sigma2;
  }
  double center = (mu / tau2 + sum) / prec;
  double width = 12.0 * std::sqrt(1.0 / prec) + 3.0 * std::sqrt(tau2);
  double lo = center - width, hi = center + width;
  auto log_integrand = [&](double theta) {
    double acc = anchormix::normal_logpdf(theta, mu, tau2);
    for (double y : ys) acc += anchormix::normal_logpdf(y, theta, sigma2);
    return acc;
  };
  // Simpson in shifted log space for stability.
  double shift = log_integrand(center);
  double h = (hi - lo) / panels;
  double acc = std::exp(log_integrand(lo) - shift) + std::exp(log_integrand(hi) - shift);
  for (int i = 1; i < panels; ++i) {
    double w = (i % 2 == 1) ? 4.0 : 2.0;
    acc += w * std::exp(log_integrand(lo + i * h) - shift);
  }
  return shift + std::log(acc * h / 3.0);
}

// Exact group marginal via the chain of one-step predictive densities
// m(y_1..y_g) = prod_i N(y_i; m_{i-1}, v_{i-1} + sigma2), a different
// factorization from the library's grouped closed form.
inline double sequential_group_marginal(const std::vector<double>& ys, double mu, double tau2,
                                        double sigma2) {
  double m = mu, v = tau2, acc = 0.0;
  for (double y : ys) {
    acc += anchormix::normal_logpdf(y, m, v + sigma2);
    double w = v / (v + sigma2);
    m = m + w * (y - m);
    v = v * sigma2 / (v + sigma2);
  }
  return acc;
}

inline double sequential_allocation_marginal(const anchormix::Dataset& data,
                                             const std::vector<int>& labels, int k, double mu,
                                             double tau2, double sigma2) {
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    std::vector<double> ys;
    for (int i = 0; i < data.n(); ++i)
      if (labels[static_cast<size_t>(i)] == j) ys.push_back(data.points(i, 0));
    acc += sequential_group_marginal(ys, mu, tau2, sigma2);
  }
  return acc;
}

// Recursive enumeration of S^A (depth-first over unanchored rows), summing
// m(y|s) p_A(s) with the sequential marginal above.
inline double recursive_anchor_marginal(const anchormix::Dataset& data,
                                        const anchormix::AnchorSet& anchors, double mu, double tau2,
                                        double sigma2) {
  auto row_comp = anchors.row_components();
  std::vector<int> free_rows;
  for (int i = 0; i < data.n(); ++i)
    if (row_comp[static_cast<size_t>(i)] < 0) free_rows.push_back(i);
  std::vector<int> labels(row_comp.begin(), row_comp.end());
  for (int& l : labels)
    if (l < 0) l = 0;
  const int k = anchors.k();
  std::vector<double> terms;
  std::function<void(size_t)> rec = [&](size_t depth) {
    if (depth == free_rows.size()) {
      terms.push_back(sequential_allocation_marginal(data, labels, k, mu, tau2, sigma2));
      return;
    }
    for (int j = 0; j < k; ++j) {
      labels[static_cast<size_t>(free_rows[depth])] = j;
      rec(depth + 1);
    }
  };
  rec(0);
  double lse = anchormix::log_sum_exp(terms);
  return lse - static_cast<double>(free_rows.size()) * std::log(static_cast<double>(k));
}

// Exhaustive maximum of sum_j sum_{i in A_j} r_ij over disjoint sets with the
// given budgets, by depth-first search over rows.
inline double exhaustive_assignment_max(const Eigen::MatrixXd& r, const std::vector<int>& budgets) {
  const int n = static_cast<int>(r.rows());
  const int k = static_cast<int>(r.cols());
  int total = 0;
  for (int b : budgets) total += b;
  std::vector<int> remaining = budgets;
  double best = -1.0;
  std::function<void(int, int, double)> rec = [&](int row, int placed, double acc) {
    if (placed == total) {
      best = std::max(best, acc);
      return;
    }
    if (row == n || n - row < total - placed) return;
    rec(row + 1, placed, acc);  // leave this row unanchored
    for (int j = 0; j < k; ++j) {
      if (remaining[static_cast<size_t>(j)] == 0) continue;
      --remaining[static_cast<size_t>(j)];
      rec(row + 1, placed + 1, acc + r(row, j));
      ++remaining[static_cast<size_t>(j)];
    }
  };
  rec(0, 0, 0.0);
  return best;
}

// Joint KL divergence over all k^n allocation vectors for row-factorized q
// and q*.
inline double joint_allocation_kl(const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  const int n = static_cast<int>(q.rows());
  const int k = static_cast<int>(q.cols());
  double acc = 0.0;
  std::vector<int> labels(static_cast<size_t>(n), 0);
  while (true) {
    double qs = 1.0, rs = 1.0;
    for (int i = 0; i < n; ++i) {
      qs *= q(i, labels[static_cast<size_t>(i)]);
      rs *= r(i, labels[static_cast<size_t>(i)]);
    }
    if (qs > 0.0) acc += qs * (std::log(qs) - std::log(rs));
    int pos = 0;
    for (; pos < n; ++pos) {
      if (++labels[static_cast<size_t>(pos)] < k) break;
      labels[static_cast<size_t>(pos)] = 0;
    }
    if (pos == n) break;
  }
  return acc;
}

// All ways to pick disjoint (x1, x2) subsets of sizes m each from rows of a
// univariate dataset, reported as sorted index pairs.
inline std::vector<std::pair<std::vector<int>, std::vector<int>>> all_disjoint_subset_pairs(int n,
                                                                                            int m) {
  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  std::vector<int> first;
  std::function<void(int)> pick_first = [&](int start) {
    if (static_cast<int>(first.size()) == m) {
      std::vector<int> second;
      std::function<void(int)> pick_second = [&](int s2) {
        if (static_cast<int>(second.size()) == m) {
          out.emplace_back(first, second);
          return;
        }
        for (int i = s2; i < n; ++i) {
          if (std::find(first.begin(), first.end(), i) != first.end()) continue;
          second.push_back(i);
          pick_second(i + 1);
          second.pop_back();
        }
      };
      pick_second(0);
      return;
    }
    for (int i = start; i < n; ++i) {
      first.push_back(i);
      pick_first(i + 1);
      first.pop_back();
    }
  };
  pick_first(0);
  return out;
}

inline anchormix::Dataset random_univariate_dataset(std::mt19937_64& g, int n, double spread = 4.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-spread, spread);
  std::vector<double> ys(static_cast<size_t>(n));
  for (auto& y : ys) y = unif(g) + 0.3 * normal(g);
  return anchormix::Dataset::from_column(ys);
}

inline Eigen::MatrixXd random_responsibilities(std::mt19937_64& g, int n, int k) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Eigen::MatrixXd r(n, k);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      r(i, j) = unif(g);
      sum += r(i, j);
    }
    r.row(i) /= sum;
  }
  return r;
}

}  // namespace oracles
