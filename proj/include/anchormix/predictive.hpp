#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/enumeration.hpp"
#include "anchormix/parallel.hpp"
#include "anchormix/rng.hpp"

namespace anchormix {

// Two-component location-mixture predictive study: batches of standardized
// data, exhaustive best-anchor-model search, and exact-posterior ELPPD.

struct SimConfig {
  std::vector<double> delta_grid = {0.25, 1.75, 2.75};
  std::vector<double> sigma_grid = {0.1, 1.0};
  int datasets = 100;         // J
  int n = 10;
  int replicates = 100;       // N tilde
  int posterior_draws = 500;  // T
  int m_min = 2;
  int m_max = 10;
  LocationPrior prior{0.0, 25.0};
  double sigma2_model = 1.0;  // known component variance in the fitted model
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const {
    if (delta_grid.empty() || sigma_grid.empty()) throw validation_error("empty simulation grid");
    if (datasets < 1 || replicates < 1 || posterior_draws < 1)
      throw validation_error("simulation counts must be >= 1");
    if (n < 2 || n > 20) throw validation_error("simulation dataset size must be in [2, 20]");
    if (m_min < 2) throw validation_error("anchor models need at least one anchor per component (m >= 2)");
    if (m_max < m_min || m_max > n) throw validation_error("invalid anchor count range");
    for (int m = m_min; m <= m_max; ++m) {
      double models = 0.0;
      // C(n, m) * (2^{m-1} - 1) canonical anchor sets with both components
      // non-empty.
      double cnm = 1.0;
      for (int t = 0; t < m; ++t) cnm = cnm * (n - t) / (t + 1);
      models = cnm * (std::pow(2.0, m - 1) - 1.0);
      if (models > 1e6)
        throw validation_error("exhaustive anchor search guard exceeded at m = " + std::to_string(m));
    }
  }
};

// J standardized datasets: z ~ N(0,1) with labels c ~ Bernoulli(1/2) + 1.
struct MasterBatch {
  int n = 0;
  std::vector<Eigen::VectorXd> z;
  std::vector<std::vector<int>> c;  // 0-based labels
};

inline MasterBatch make_master_batch(int batch_size, int n, std::uint64_t seed,
                                     std::uint64_t stream_tag = rng::kTagSimMaster) {
  if (batch_size < 1 || n < 1) throw validation_error("master batch needs positive sizes");
  MasterBatch batch;
  batch.n = n;
  batch.z.reserve(static_cast<size_t>(batch_size));
  batch.c.reserve(static_cast<size_t>(batch_size));
  for (int j = 0; j < batch_size; ++j) {
    auto g = rng::stream(seed, {stream_tag, static_cast<std::uint64_t>(j)});
    Eigen::VectorXd z(n);
    std::vector<int> c(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      z[i] = rng::normal(g);
      c[static_cast<size_t>(i)] = rng::uniform(g) < 0.5 ? 0 : 1;
    }
    batch.z.push_back(std::move(z));
    batch.c.push_back(std::move(c));
  }
  return batch;
}

// Per-label affine map realizing the (delta, sigma) cell: component 1 keeps
// the standard normal values, component 2 becomes sigma * z + delta.
inline std::vector<Eigen::VectorXd> transform_batch(const MasterBatch& batch, double delta,
                                                    double sigma) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(batch.z.size());
  for (size_t j = 0; j < batch.z.size(); ++j) {
    Eigen::VectorXd y = batch.z[j];
    for (int i = 0; i < batch.n; ++i)
      if (batch.c[j][static_cast<size_t>(i)] == 1) y[i] = sigma * y[i] + delta;
    out.push_back(std::move(y));
  }
  return out;
}

namespace detail {

// log m(y|s) for every allocation bitmask of a k=2 dataset (bit i set means
// row i in component 2).
inline std::vector<double> allocation_score_table(const Eigen::VectorXd& y, const LocationPrior& prior,
                                                  double sigma2) {
  const int n = static_cast<int>(y.size());
  if (n > 20) throw validation_error("allocation table limited to n <= 20");
  std::vector<double> table(static_cast<size_t>(1) << n);
  for (std::uint32_t mask = 0; mask < table.size(); ++mask) {
    int n2 = 0;
    double s2 = 0.0, q2 = 0.0, s1 = 0.0, q1 = 0.0;
    for (int i = 0; i < n; ++i) {
      double v = y[i];
      if (mask >> i & 1u) {
        ++n2;
        s2 += v;
        q2 += v * v;
      } else {
        s1 += v;
        q1 += v * v;
      }
    }
    int n1 = n - n2;
    double m1 = n1 > 0 ? s1 / n1 : 0.0;
    double m2 = n2 > 0 ? s2 / n2 : 0.0;
    double w1 = n1 > 0 ? q1 - n1 * m1 * m1 : 0.0;
    double w2 = n2 > 0 ? q2 - n2 * m2 * m2 : 0.0;
    table[mask] = group_marginal_loglik(n1, m1, std::max(0.0, w1), prior, sigma2) +
                  group_marginal_loglik(n2, m2, std::max(0.0, w2), prior, sigma2);
  }
  return table;
}

inline double anchor_score_from_table(const std::vector<double>& table, std::uint32_t a2,
                                      std::uint32_t free_mask, int n_free) {
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(1) << n_free);
  std::uint32_t sub = free_mask;
  while (true) {
    terms.push_back(table[a2 | sub]);
    if (sub == 0) break;
    sub = (sub - 1) & free_mask;
  }
  return log_sum_exp(terms) - static_cast<double>(n_free) * std::log(2.0);
}

}  // namespace detail

// Exhaustive best anchor model with m total anchors for a k=2 location
// mixture with known variance and equal weights. Canonical labeling: the
// smallest anchored row index always sits in A_1. Enumeration order (total
// anchor set lexicographic, then split mask ascending) breaks score ties.
// With require_both_components the study constraint |A_2| >= 1 is
// enforced; without it single-component anchorings compete too.
inline AnchorSet best_anchor_model(const Dataset& data, int m, const LocationPrior& prior,
                                   double sigma2, bool require_both_components = true) {
  if (data.p() != 1) throw validation_error("best_anchor_model requires p == 1");
  const int n = data.n();
  if (m < 1 || m > n) throw validation_error("anchor count m must be in [1, n]");
  if (require_both_components && m < 2)
    throw validation_error("both components need an anchor, so m >= 2");
  double cnm = 1.0;
  for (int t = 0; t < m; ++t) cnm = cnm * (n - t) / (t + 1);
  if (cnm * std::pow(2.0, m - 1) > 1e6)
    throw validation_error("anchor-model search guard exceeded: use smaller n or m");

  auto table = detail::allocation_score_table(data.points.col(0), prior, sigma2);
  const std::uint32_t full = (n == 32 ? ~0u : (1u << n) - 1u);

  std::vector<int> comb(static_cast<size_t>(m));
  for (int t = 0; t < m; ++t) comb[static_cast<size_t>(t)] = t;
  double best_score = kNegInf;
  std::uint32_t best_a2 = 0, best_anchor_mask = 0;
  bool found = false;

  while (true) {
    std::uint32_t anchor_mask = 0;
    for (int t = 0; t < m; ++t) anchor_mask |= 1u << comb[static_cast<size_t>(t)];
    std::uint32_t free_mask = full & ~anchor_mask;
    int n_free = n - m;
    // Element comb[0] (the smallest) is pinned to component 1; bits of the
    // split mask send the remaining elements to component 2.
    for (std::uint32_t split = require_both_components ? 1u : 0u; split < (1u << (m - 1)); ++split) {
      std::uint32_t a2 = 0;
      for (int t = 1; t < m; ++t)
        if (split >> (t - 1) & 1u) a2 |= 1u << comb[static_cast<size_t>(t)];
      double score = detail::anchor_score_from_table(table, a2, free_mask, n_free);
      if (!found || score > best_score) {
        found = true;
        best_score = score;
        best_a2 = a2;
        best_anchor_mask = anchor_mask;
      }
    }
    // next combination in lexicographic order
    int t = m - 1;
    while (t >= 0 && comb[static_cast<size_t>(t)] == n - m + t) --t;
    if (t < 0) break;
    ++comb[static_cast<size_t>(t)];
    for (int u = t + 1; u < m; ++u) comb[static_cast<size_t>(u)] = comb[static_cast<size_t>(u - 1)] + 1;
  }

  std::vector<std::vector<int>> sets(2);
  for (int i = 0; i < n; ++i) {
    if (!(best_anchor_mask >> i & 1u)) continue;
    sets[static_cast<size_t>((best_a2 >> i & 1u) ? 1 : 0)].push_back(i);
  }
  return AnchorSet(std::move(sets), n);
}

// ELPPD estimate: T exact posterior draws of the component
// means given the anchored dataset, then the double average of log predictive
// densities over the replicate datasets.
inline double elppd(const Dataset& data, const AnchorSet& anchors, const LocationPrior& prior,
                    const std::vector<Eigen::VectorXd>& replicates, int T, std::uint64_t seed,
                    double sigma2 = 1.0) {
  if (T < 1) throw validation_error("elppd needs at least one posterior draw");
  if (replicates.empty()) throw validation_error("elppd needs replicate datasets");
  auto post = enumerate_posterior(data, anchors, LocationPrior{prior.mu, prior.tau2}, sigma2);
  auto g = rng::stream(seed, {rng::kTagSimCell});
  std::vector<double> th1(static_cast<size_t>(T)), th2(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd theta = post.sample(g);
    th1[static_cast<size_t>(t)] = theta[0];
    th2[static_cast<size_t>(t)] = theta[1];
  }
  const double inv_norm = 1.0 / std::sqrt(2.0 * M_PI * sigma2);
  const double half_prec = 0.5 / sigma2;
  double total = 0.0;
  for (const auto& rep : replicates) {
    for (int i = 0; i < rep.size(); ++i) {
      double y = rep[i];
      double acc = 0.0;
      for (int t = 0; t < T; ++t) {
        double z1 = y - th1[static_cast<size_t>(t)];
        double z2 = y - th2[static_cast<size_t>(t)];
        acc += 0.5 * inv_norm * (std::exp(-half_prec * z1 * z1) + std::exp(-half_prec * z2 * z2));
      }
      if (acc > 0.0) {
        total += std::log(acc / T);
      } else {
        std::vector<double> terms;
        terms.reserve(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
          double z1 = y - th1[static_cast<size_t>(t)];
          double z2 = y - th2[static_cast<size_t>(t)];
          terms.push_back(std::log(0.5 * inv_norm) +
                          log_sum_exp(-half_prec * z1 * z1, -half_prec * z2 * z2));
        }
        total += log_sum_exp(terms) - std::log(static_cast<double>(T));
      }
    }
  }
  return total / static_cast<double>(replicates.size());
}

struct SimRow {
  double delta = 0.0;
  double sigma = 0.0;
  int m = 0;
  int dataset = 0;  // 0-based
  double elppd = 0.0;
};

struct SimCellSummary {
  double delta = 0.0;
  double sigma = 0.0;
  int m = 0;
  double median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};

struct SimResults {
  std::vector<SimRow> rows;               // ordered by (delta, sigma, m, dataset)
  std::vector<SimCellSummary> summaries;  // ordered by (delta, sigma, m)
};

// Full factorial over (delta, sigma, m, dataset). The (cell, dataset) pairs
// are independent work units with derived seeds; outputs are ordered by index
// regardless of scheduling.
inline SimResults run_simulation(const SimConfig& config) {
  config.validate();
  MasterBatch fit_batch = make_master_batch(config.datasets, config.n, config.seed, rng::kTagSimMaster);
  MasterBatch rep_batch =
      make_master_batch(config.replicates, config.n, config.seed, rng::kTagSimReplicates);

  const int n_cells = static_cast<int>(config.delta_grid.size() * config.sigma_grid.size());
  const int n_m = config.m_max - config.m_min + 1;
  std::vector<std::vector<Eigen::VectorXd>> cell_fit(static_cast<size_t>(n_cells));
  std::vector<std::vector<Eigen::VectorXd>> cell_rep(static_cast<size_t>(n_cells));
  for (size_t di = 0; di < config.delta_grid.size(); ++di) {
    for (size_t si = 0; si < config.sigma_grid.size(); ++si) {
      size_t cell = di * config.sigma_grid.size() + si;
      cell_fit[cell] = transform_batch(fit_batch, config.delta_grid[di], config.sigma_grid[si]);
      cell_rep[cell] = transform_batch(rep_batch, config.delta_grid[di], config.sigma_grid[si]);
    }
  }

  std::vector<double> elppd_values(static_cast<size_t>(n_cells) * config.datasets * n_m, 0.0);
  const int n_jobs = n_cells * config.datasets;
  parallel_for(n_jobs, config.workers, [&](int job) {
    int cell = job / config.datasets;
    int j = job % config.datasets;
    Dataset data = Dataset::from_column(std::vector<double>(
        cell_fit[static_cast<size_t>(cell)][static_cast<size_t>(j)].data(),
        cell_fit[static_cast<size_t>(cell)][static_cast<size_t>(j)].data() + config.n));
    for (int mi = 0; mi < n_m; ++mi) {
      int m = config.m_min + mi;
      AnchorSet anchors = best_anchor_model(data, m, config.prior, config.sigma2_model, true);
      std::uint64_t sub_seed = rng::derive(config.seed, {rng::kTagSimCell, static_cast<std::uint64_t>(cell),
                                                         static_cast<std::uint64_t>(j),
                                                         static_cast<std::uint64_t>(m)});
      double val = elppd(data, anchors, config.prior, cell_rep[static_cast<size_t>(cell)],
                         config.posterior_draws, sub_seed, config.sigma2_model);
      elppd_values[(static_cast<size_t>(cell) * config.datasets + j) * n_m + mi] = val;
    }
  });

  SimResults results;
  for (size_t di = 0; di < config.delta_grid.size(); ++di) {
    for (size_t si = 0; si < config.sigma_grid.size(); ++si) {
      size_t cell = di * config.sigma_grid.size() + si;
      for (int mi = 0; mi < n_m; ++mi) {
        std::vector<double> vals(static_cast<size_t>(config.datasets));
        for (int j = 0; j < config.datasets; ++j) {
          double v = elppd_values[(cell * config.datasets + j) * n_m + mi];
          vals[static_cast<size_t>(j)] = v;
          results.rows.push_back(SimRow{config.delta_grid[di], config.sigma_grid[si],
                                        config.m_min + mi, j, v});
        }
        std::sort(vals.begin(), vals.end());
        SimCellSummary s;
        s.delta = config.delta_grid[di];
        s.sigma = config.sigma_grid[si];
        s.m = config.m_min + mi;
        s.median = median_of_sorted(vals);
        s.q1 = quantile_of_sorted(vals, 0.25);
        s.q3 = quantile_of_sorted(vals, 0.75);
        s.min = vals.front();
        s.max = vals.back();
        results.summaries.push_back(s);
      }
    }
  }
  return results;
}

}  // namespace anchormix
