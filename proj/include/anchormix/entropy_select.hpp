#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/asymptotics.hpp"
#include "anchormix/bfgs.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/params.hpp"
#include "anchormix/parallel.hpp"
#include "anchormix/rng.hpp"

namespace anchormix {

struct MinEntropyConfig {
  std::vector<int> budgets;  // anchors per component
  double opt_tol = 1e-10;
  int max_iter = 500;
  int n_starts = 10;
  std::uint64_t seed = 0;
  int workers = 0;
  std::uint64_t factorial_cap = kDefaultFactorialCap;
};

struct MinEntropyResult {
  AnchorSet anchors;               // canonical labels
  MixtureParams gamma0;            // gamma0 relabeled to match the anchors
  Eigen::MatrixXd x_star;          // continuous optimum, canonical slot order
  double entropy_continuous = 0.0;
  double entropy = 0.0;            // entropy of the snapped anchor set
  double alpha_hat = 0.0;          // quasi-consistency at the snapped anchors
  bool converged = false;          // any start met the optimizer tolerance
  int best_start = -1;
};

namespace detail {

inline std::vector<Eigen::MatrixXd> slots_to_blocks(const Eigen::VectorXd& x,
                                                    const std::vector<int>& budgets, int p) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(budgets.size());
  int offset = 0;
  for (int b : budgets) {
    Eigen::MatrixXd block(b, p);
    for (int t = 0; t < b; ++t)
      for (int d = 0; d < p; ++d) block(t, d) = x[offset + t * p + d];
    offset += b * p;
    blocks.push_back(std::move(block));
  }
  return blocks;
}

// Greedy snap: slots ordered by distance to their nearest observation, each
// taking the nearest still-free row; ties go to the lowest row index.
inline std::vector<int> snap_to_rows(const Dataset& data, const Eigen::VectorXd& x, int m) {
  const int p = data.p();
  const int n = data.n();
  std::vector<double> nearest(static_cast<size_t>(m));
  for (int l = 0; l < m; ++l) {
    Eigen::RowVectorXd target = x.segment(l * p, p).transpose();
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) best = std::min(best, (data.points.row(i) - target).norm());
    nearest[static_cast<size_t>(l)] = best;
  }
  std::vector<int> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (nearest[static_cast<size_t>(a)] != nearest[static_cast<size_t>(b)])
      return nearest[static_cast<size_t>(a)] < nearest[static_cast<size_t>(b)];
    return a < b;
  });
  std::vector<char> taken(static_cast<size_t>(n), 0);
  std::vector<int> rows(static_cast<size_t>(m), -1);
  for (int l : order) {
    Eigen::RowVectorXd target = x.segment(l * p, p).transpose();
    int best_i = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<size_t>(i)]) continue;
      double d = (data.points.row(i) - target).norm();
      if (d < best_d) {
        best_d = d;
        best_i = i;
      }
    }
    taken[static_cast<size_t>(best_i)] = 1;
    rows[static_cast<size_t>(l)] = best_i;
  }
  return rows;
}

}  // namespace detail

// Treats the relabeling entropy En(P_x, gamma0) as a continuous function of
// the m x p anchor coordinates, minimizes it by BFGS with finite-difference
// gradients from several random starts, snaps each optimum to observations,
// and keeps the start whose snapped anchor set has the lowest entropy.
//
// The continuous entropy has no interior minimum: it keeps decaying as
// coordinates escape the data, which would make the snap degenerate. The
// optimization is therefore confined to the data's bounding box (coordinates
// clamped inside the objective and before snapping).
inline MinEntropyResult min_entropy_select(const Dataset& data, const MixtureParams& gamma0,
                                           const MinEntropyConfig& config) {
  data.validate();
  gamma0.validate();
  const int k = gamma0.k();
  const int p = data.p();
  if (static_cast<int>(config.budgets.size()) != k)
    throw validation_error("one anchor budget per component required");
  int m = 0;
  for (int b : config.budgets) {
    if (b < 0) throw validation_error("anchor budgets must be non-negative");
    m += b;
  }
  if (m == 0 || m > data.n()) throw validation_error("anchor budget must be in [1, n]");
  if (config.n_starts < 1) throw validation_error("min-entropy selection needs n_starts >= 1");
  if (factorial_u64(k) > config.factorial_cap)
    throw validation_error("k! exceeds the factorial cap; refusing to subsample permutations");

  Eigen::VectorXd box_lo = data.points.colwise().minCoeff().transpose();
  Eigen::VectorXd box_hi = data.points.colwise().maxCoeff().transpose();
  auto clamp_to_box = [&](Eigen::VectorXd x) {
    for (int l = 0; l < m; ++l)
      for (int d = 0; d < p; ++d) {
        double& v = x[l * p + d];
        v = std::min(std::max(v, box_lo[d]), box_hi[d]);
      }
    return x;
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    auto blocks = detail::slots_to_blocks(clamp_to_box(x), config.budgets, p);
    return relabeling_entropy(relabeling_probs(blocks, gamma0, config.factorial_cap));
  };

  struct StartOutcome {
    Eigen::VectorXd x_star;
    std::vector<int> rows;
    double entropy_cont = std::numeric_limits<double>::infinity();
    double entropy_snap = std::numeric_limits<double>::infinity();
    bool converged = false;
  };
  std::vector<StartOutcome> outcomes(static_cast<size_t>(config.n_starts));

  parallel_for(config.n_starts, config.workers, [&](int s) {
    auto g = rng::stream(config.seed, {rng::kTagEntropyStart, static_cast<std::uint64_t>(s)});
    std::vector<int> order(static_cast<size_t>(data.n()));
    std::iota(order.begin(), order.end(), 0);
    for (int l = 0; l < m; ++l) {
      std::uniform_int_distribution<int> pick(l, data.n() - 1);
      std::swap(order[static_cast<size_t>(l)], order[static_cast<size_t>(pick(g))]);
    }
    Eigen::VectorXd x0(m * p);
    for (int l = 0; l < m; ++l) x0.segment(l * p, p) = data.points.row(order[static_cast<size_t>(l)]).transpose();

    BfgsOptions opts;
    opts.tol = config.opt_tol;
    opts.max_iter = config.max_iter;
    auto res = minimize_bfgs(objective, x0, opts);

    auto& out = outcomes[static_cast<size_t>(s)];
    out.x_star = clamp_to_box(res.x);
    out.entropy_cont = res.f;
    out.converged = res.converged;
    out.rows = detail::snap_to_rows(data, out.x_star, m);
    Eigen::VectorXd snapped(m * p);
    for (int l = 0; l < m; ++l)
      snapped.segment(l * p, p) = data.points.row(out.rows[static_cast<size_t>(l)]).transpose();
    out.entropy_snap = objective(snapped);
  });

  int best = -1;
  bool any_converged = false;
  for (int s = 0; s < config.n_starts; ++s) {
    any_converged = any_converged || outcomes[static_cast<size_t>(s)].converged;
    if (best < 0 || outcomes[static_cast<size_t>(s)].entropy_snap < outcomes[static_cast<size_t>(best)].entropy_snap)
      best = s;
  }
  const auto& win = outcomes[static_cast<size_t>(best)];

  std::vector<std::vector<int>> sets(static_cast<size_t>(k));
  int offset = 0;
  for (int j = 0; j < k; ++j) {
    for (int t = 0; t < config.budgets[static_cast<size_t>(j)]; ++t)
      sets[static_cast<size_t>(j)].push_back(win.rows[static_cast<size_t>(offset + t)]);
    offset += config.budgets[static_cast<size_t>(j)];
  }
  AnchorSet anchors(std::move(sets), data.n());
  auto perm = anchors.canonical_permutation();

  MinEntropyResult result;
  result.anchors = anchors.permuted(perm);
  result.gamma0 = gamma0.permuted(perm);
  result.x_star = Eigen::MatrixXd(m, p);
  int row = 0;
  std::vector<int> block_offsets(static_cast<size_t>(k), 0);
  {
    int off = 0;
    for (int j = 0; j < k; ++j) {
      block_offsets[static_cast<size_t>(j)] = off;
      off += config.budgets[static_cast<size_t>(j)];
    }
  }
  for (int j = 0; j < k; ++j) {
    int old = perm[static_cast<size_t>(j)];
    for (int t = 0; t < config.budgets[static_cast<size_t>(old)]; ++t)
      result.x_star.row(row++) =
          win.x_star.segment((block_offsets[static_cast<size_t>(old)] + t) * p, p).transpose();
  }
  result.entropy_continuous = win.entropy_cont;
  auto dist = relabeling_probs(anchor_values(data, result.anchors), result.gamma0, config.factorial_cap);
  result.entropy = relabeling_entropy(dist);
  result.alpha_hat = quasi_consistency_alpha(dist);
  result.converged = any_converged;
  result.best_start = best;
  return result;
}

}  // namespace anchormix
