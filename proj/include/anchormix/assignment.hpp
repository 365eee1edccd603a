#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/common.hpp"
#include "anchormix/density.hpp"

namespace anchormix {

enum class EStepSolver { kExact, kGreedy };

// Min-cost assignment of m rows to distinct columns of an m x n cost matrix
// (m <= n), by shortest augmenting paths with potentials. Returns the chosen
// column per row.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int m = static_cast<int>(cost.rows());
  const int n = static_cast<int>(cost.cols());
  if (m > n) throw validation_error("assignment needs at least as many columns as rows");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(m) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= m; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assigned(static_cast<size_t>(m), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0) assigned[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  return assigned;
}

inline void validate_budgets(const std::vector<int>& budgets, int n) {
  int total = 0;
  for (int b : budgets) {
    if (b < 0) throw validation_error("anchor budgets must be non-negative");
    total += b;
  }
  if (total > n)
    throw validation_error("infeasible anchor budget: " + std::to_string(total) + " anchors for " +
                           std::to_string(n) + " rows");
}

inline double anchor_objective(const ResponsibilityMatrix& resp, const AnchorSet& anchors) {
  double acc = 0.0;
  for (int j = 0; j < anchors.k(); ++j)
    for (int i : anchors.set(j)) acc += resp.r(i, j);
  return acc;
}

// Exact E-step anchor choice: disjoint sets A_j with |A_j| = m_j maximizing
// sum_j sum_{i in A_j} r_ij. The transportation problem is solved as a
// min-cost assignment with component j replicated m_j times and edge cost
// -r_ij. Labels stay paired with the responsibility columns.
inline AnchorSet e_step_assign_exact(const ResponsibilityMatrix& resp, const std::vector<int>& budgets) {
  const int n = resp.n();
  const int k = resp.k();
  if (static_cast<int>(budgets.size()) != k) throw validation_error("one anchor budget per component required");
  validate_budgets(budgets, n);
  std::vector<int> slot_comp;
  for (int j = 0; j < k; ++j)
    for (int t = 0; t < budgets[static_cast<size_t>(j)]; ++t) slot_comp.push_back(j);
  std::vector<std::vector<int>> sets(static_cast<size_t>(k));
  if (!slot_comp.empty()) {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(slot_comp.size()), n);
    for (size_t t = 0; t < slot_comp.size(); ++t)
      for (int i = 0; i < n; ++i) cost(static_cast<Eigen::Index>(t), i) = -resp.r(i, slot_comp[t]);
    auto assigned = min_cost_assignment(cost);
    for (size_t t = 0; t < slot_comp.size(); ++t)
      sets[static_cast<size_t>(slot_comp[t])].push_back(assigned[t]);
  }
  return AnchorSet(std::move(sets), n);
}

// The greedy heuristic: repeatedly anchor the largest remaining r_ij among
// unanchored rows and unfilled components. Ties go to the lowest row index,
// then the lowest component.
inline AnchorSet e_step_assign_greedy(const ResponsibilityMatrix& resp, const std::vector<int>& budgets) {
  const int n = resp.n();
  const int k = resp.k();
  if (static_cast<int>(budgets.size()) != k) throw validation_error("one anchor budget per component required");
  validate_budgets(budgets, n);
  std::vector<std::vector<int>> sets(static_cast<size_t>(k));
  std::vector<char> taken(static_cast<size_t>(n), 0);
  int total = 0;
  for (int b : budgets) total += b;
  for (int placed = 0; placed < total; ++placed) {
    int best_i = -1, best_j = -1;
    double best_r = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<size_t>(i)]) continue;
      for (int j = 0; j < k; ++j) {
        if (static_cast<int>(sets[static_cast<size_t>(j)].size()) >= budgets[static_cast<size_t>(j)]) continue;
        if (resp.r(i, j) > best_r) {
          best_r = resp.r(i, j);
          best_i = i;
          best_j = j;
        }
      }
    }
    taken[static_cast<size_t>(best_i)] = 1;
    sets[static_cast<size_t>(best_j)].push_back(best_i);
  }
  return AnchorSet(std::move(sets), n);
}

inline AnchorSet e_step_assign(const ResponsibilityMatrix& resp, const std::vector<int>& budgets,
                               EStepSolver solver = EStepSolver::kExact) {
  return solver == EStepSolver::kExact ? e_step_assign_exact(resp, budgets)
                                       : e_step_assign_greedy(resp, budgets);
}

}  // namespace anchormix
