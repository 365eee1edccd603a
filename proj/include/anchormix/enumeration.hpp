#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/density.hpp"
#include "anchormix/rng.hpp"

namespace anchormix {

// Exact small-instance machinery for the univariate location model with a
// known common variance and Normal(mu, tau2) priors on the component means.
// Everything here enumerates the allocation space, so it is gated by a term
// cap (default 2^20).

struct LocationPrior {
  double mu = 0.0;
  double tau2 = 1.0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 20;

namespace detail {

struct GroupStats {
  std::vector<int> count;
  std::vector<double> mean;
  std::vector<double> wgss;  // within-group sum of squares
};

inline GroupStats group_stats(const Dataset& data, const AllocationVector& alloc, int k) {
  GroupStats s;
  s.count.assign(static_cast<size_t>(k), 0);
  s.mean.assign(static_cast<size_t>(k), 0.0);
  s.wgss.assign(static_cast<size_t>(k), 0.0);
  for (int i = 0; i < data.n(); ++i) {
    int j = alloc.labels[static_cast<size_t>(i)];
    ++s.count[static_cast<size_t>(j)];
    s.mean[static_cast<size_t>(j)] += data.points(i, 0);
  }
  for (int j = 0; j < k; ++j)
    if (s.count[static_cast<size_t>(j)] > 0) s.mean[static_cast<size_t>(j)] /= s.count[static_cast<size_t>(j)];
  for (int i = 0; i < data.n(); ++i) {
    int j = alloc.labels[static_cast<size_t>(i)];
    double d = data.points(i, 0) - s.mean[static_cast<size_t>(j)];
    s.wgss[static_cast<size_t>(j)] += d * d;
  }
  return s;
}

}  // namespace detail

// Full Normal-Normal marginal for the group anchored at prior (mu_j, tau2_j):
// all constants kept so that values are comparable across allocations and
// across anchor models of different size.
inline double group_marginal_loglik(int n_j, double mean_j, double wgss_j,
                                    const LocationPrior& prior, double sigma2) {
  if (n_j == 0) return 0.0;
  double shrink = static_cast<double>(n_j) * prior.tau2 + sigma2;
  double dev = mean_j - prior.mu;
  return -0.5 * n_j * (kLogTwoPi + std::log(sigma2)) + 0.5 * (std::log(sigma2) - std::log(shrink)) -
         0.5 * (wgss_j / sigma2 + n_j * dev * dev / shrink);
}

// log m(y|s): the model evidence with the component means integrated out
// under a fixed allocation. Empty groups contribute only the (unit) prior
// normalization.
inline double cond_marginal_loglik(const Dataset& data, const AllocationVector& alloc,
                                   std::span<const LocationPrior> priors, double sigma2) {
  if (data.p() != 1) throw validation_error("conditional marginal likelihood requires p == 1");
  if (!(sigma2 > 0.0)) throw validation_error("sigma2 must be > 0");
  const int k = static_cast<int>(priors.size());
  alloc.validate(k);
  if (alloc.n() != data.n()) throw validation_error("allocation length mismatch");
  auto stats = detail::group_stats(data, alloc, k);
  double total = 0.0;
  for (int j = 0; j < k; ++j)
    total += group_marginal_loglik(stats.count[static_cast<size_t>(j)], stats.mean[static_cast<size_t>(j)],
                                   stats.wgss[static_cast<size_t>(j)], priors[static_cast<size_t>(j)], sigma2);
  return total;
}

inline double cond_marginal_loglik(const Dataset& data, const AllocationVector& alloc, int k,
                                   const LocationPrior& prior, double sigma2) {
  std::vector<LocationPrior> priors(static_cast<size_t>(k), prior);
  return cond_marginal_loglik(data, alloc, priors, sigma2);
}

// Visits every allocation in S^A (anchored rows fixed, all k labels for the
// rest), in odometer order over the unanchored rows.
inline void for_each_allocation(const AnchorSet& anchors,
                                const std::function<void(const AllocationVector&)>& fn,
                                std::uint64_t cap = kDefaultEnumerationCap) {
  const int n = anchors.n_rows();
  const int k = anchors.k();
  auto row_comp = anchors.row_components();
  std::vector<int> free_rows;
  for (int i = 0; i < n; ++i)
    if (row_comp[static_cast<size_t>(i)] < 0) free_rows.push_back(i);
  double log_terms = static_cast<double>(free_rows.size()) * std::log(static_cast<double>(k));
  if (log_terms > std::log(static_cast<double>(cap)) + 1e-9)
    throw validation_error("enumeration too large: k^(n-m) exceeds the cap of " + std::to_string(cap) +
                           " terms");
  AllocationVector alloc;
  alloc.labels.assign(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    if (row_comp[static_cast<size_t>(i)] >= 0) alloc.labels[static_cast<size_t>(i)] = row_comp[static_cast<size_t>(i)];
  while (true) {
    fn(alloc);
    int pos = 0;
    for (; pos < static_cast<int>(free_rows.size()); ++pos) {
      int& lab = alloc.labels[static_cast<size_t>(free_rows[static_cast<size_t>(pos)])];
      if (++lab < k) break;
      lab = 0;
    }
    if (pos == static_cast<int>(free_rows.size())) break;
  }
}

// log m_A(y) = log sum_{s in S^A} m(y|s) p_A(s) with equal weights
// eta_j = 1/k, so p_A(s) = k^{-(n-m)}.
inline double anchored_marginal_loglik_enumerate(const Dataset& data, const AnchorSet& anchors,
                                                 const LocationPrior& prior, double sigma2,
                                                 std::uint64_t cap = kDefaultEnumerationCap) {
  const int k = anchors.k();
  std::vector<double> terms;
  for_each_allocation(
      anchors, [&](const AllocationVector& alloc) { terms.push_back(cond_marginal_loglik(data, alloc, k, prior, sigma2)); },
      cap);
  double log_palloc = -static_cast<double>(data.n() - anchors.total()) * std::log(static_cast<double>(k));
  return log_sum_exp(terms) + log_palloc;
}

// One conjugate Normal posterior for a component mean under one allocation.
struct ComponentPosterior {
  double mean = 0.0;
  double var = 0.0;
};

// The exact anchored posterior over S^A: per-allocation weights plus the
// conjugate Normal posterior of each component mean.
struct AllocationPosterior {
  int k = 0;
  std::vector<double> log_weights;                        // normalized over S^A
  std::vector<std::vector<ComponentPosterior>> components;  // [allocation][component]
  double log_marginal = kNegInf;                          // log m_A(y)

  double component_mean(int j) const {
    double acc = 0.0;
    for (size_t s = 0; s < log_weights.size(); ++s)
      acc += std::exp(log_weights[s]) * components[s][static_cast<size_t>(j)].mean;
    return acc;
  }

  double component_var(int j) const {
    double m1 = 0.0, m2 = 0.0;
    for (size_t s = 0; s < log_weights.size(); ++s) {
      double w = std::exp(log_weights[s]);
      const auto& c = components[s][static_cast<size_t>(j)];
      m1 += w * c.mean;
      m2 += w * (c.var + c.mean * c.mean);
    }
    return m2 - m1 * m1;
  }

  // Marginal posterior density of theta_j at x.
  double component_density(int j, double x) const {
    double acc = 0.0;
    for (size_t s = 0; s < log_weights.size(); ++s) {
      const auto& c = components[s][static_cast<size_t>(j)];
      acc += std::exp(log_weights[s] + normal_logpdf(x, c.mean, c.var));
    }
    return acc;
  }

  // One exact posterior draw of the k component means: allocation by weight,
  // then means conjugately.
  Eigen::VectorXd sample(std::mt19937_64& g) const {
    int s = rng::categorical_from_logits(g, log_weights);
    Eigen::VectorXd theta(k);
    for (int j = 0; j < k; ++j) {
      const auto& c = components[static_cast<size_t>(s)][static_cast<size_t>(j)];
      theta[j] = c.mean + std::sqrt(c.var) * rng::normal(g);
    }
    return theta;
  }
};

inline AllocationPosterior enumerate_posterior(const Dataset& data, const AnchorSet& anchors,
                                               std::span<const LocationPrior> priors, double sigma2,
                                               std::uint64_t cap = kDefaultEnumerationCap) {
  if (data.p() != 1) throw validation_error("enumerate_posterior requires p == 1");
  const int k = anchors.k();
  if (static_cast<int>(priors.size()) != k) throw validation_error("one location prior per component required");
  AllocationPosterior post;
  post.k = k;
  for_each_allocation(
      anchors,
      [&](const AllocationVector& alloc) {
        auto stats = detail::group_stats(data, alloc, k);
        double logm = 0.0;
        std::vector<ComponentPosterior> comps(static_cast<size_t>(k));
        for (int j = 0; j < k; ++j) {
          const auto& prior = priors[static_cast<size_t>(j)];
          int nj = stats.count[static_cast<size_t>(j)];
          logm += group_marginal_loglik(nj, stats.mean[static_cast<size_t>(j)], stats.wgss[static_cast<size_t>(j)],
                                        prior, sigma2);
          double prec = 1.0 / prior.tau2 + static_cast<double>(nj) / sigma2;
          double var = 1.0 / prec;
          double mean = var * (prior.mu / prior.tau2 + nj * stats.mean[static_cast<size_t>(j)] / sigma2);
          comps[static_cast<size_t>(j)] = ComponentPosterior{mean, var};
        }
        post.log_weights.push_back(logm);
        post.components.push_back(std::move(comps));
      },
      cap);
  double lse = log_sum_exp(post.log_weights);
  for (double& w : post.log_weights) w -= lse;
  double log_palloc = -static_cast<double>(data.n() - anchors.total()) * std::log(static_cast<double>(k));
  post.log_marginal = lse + log_palloc;
  return post;
}

inline AllocationPosterior enumerate_posterior(const Dataset& data, const AnchorSet& anchors,
                                               const LocationPrior& prior, double sigma2,
                                               std::uint64_t cap = kDefaultEnumerationCap) {
  std::vector<LocationPrior> priors(static_cast<size_t>(anchors.k()), prior);
  return enumerate_posterior(data, anchors, priors, sigma2, cap);
}

}  // namespace anchormix
