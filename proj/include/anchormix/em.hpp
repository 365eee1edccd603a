#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/assignment.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/density.hpp"
#include "anchormix/parallel.hpp"
#include "anchormix/params.hpp"
#include "anchormix/priors_logpdf.hpp"
#include "anchormix/rng.hpp"

namespace anchormix {

struct EMConfig {
  int k = 2;
  std::vector<int> budgets;        // anchors per component
  double tol = 1e-8;               // stop when the F increase falls below this
  int max_iter = 500;
  int n_starts = 25;
  EStepSolver solver = EStepSolver::kExact;
  std::uint64_t seed = 0;
  int workers = 0;

  void validate(int n) const {
    if (k < 2) throw validation_error("anchored EM requires k >= 2");
    if (k > n) throw validation_error("anchored EM requires k <= n to seed distinct means");
    if (!(tol > 0.0)) throw validation_error("EM tolerance must be > 0");
    if (max_iter < 1 || n_starts < 1) throw validation_error("EM iteration/start counts must be >= 1");
    if (static_cast<int>(budgets.size()) != k)
      throw validation_error("one anchor budget per component required");
    int zero = 0, total = 0;
    for (int b : budgets) {
      if (b < 0) throw validation_error("anchor budgets must be non-negative");
      zero += (b == 0);
      total += b;
    }
    if (zero > 1)
      throw validation_error("at least k-1 components must receive an anchor (unique labeling)");
    if (total > n) throw validation_error("anchor budget exceeds the number of rows");
  }
};

struct EMState {
  MixtureParams params;
  AnchorSet anchors;
  ResponsibilityMatrix resp;  // the anchored q: one-hot on anchors, r elsewhere
  double lower_bound = kNegInf;
  int iterations = 0;
};

struct EMStartTrace {
  int start = 0;
  std::vector<double> f_trace;
  std::vector<AnchorSet> anchor_trace;  // anchors chosen at each iteration
  bool failed = false;
  bool converged = false;
  std::string message;
};

struct EMResult {
  EMState best;
  int best_start = -1;
  std::vector<EMStartTrace> traces;
  std::vector<double> final_f;  // per start; -inf for failed starts
};

// M step for the univariate Normal/Gamma-precision model: the (theta_j,
// sigma2_j) pair is cycled to joint convergence, weights get the Dirichlet
// MAP. A random b0 is held at its hyperprior mean.
inline MixtureParams m_step_univariate(const Dataset& data, const ResponsibilityMatrix& q,
                                       const PriorSpec& prior) {
  const int k = q.k();
  const int n = data.n();
  const double mu = prior.mean.mu[0];
  const double kappa = prior.mean.kappa;
  const double a0 = prior.precision.a0;
  const double b0 = prior.precision.b0_point_value();
  const double alpha = prior.dirichlet_alpha;

  MixtureParams params;
  params.means = Eigen::MatrixXd(k, 1);
  params.covs.resize(static_cast<size_t>(k));
  params.weights = Eigen::VectorXd(k);

  for (int j = 0; j < k; ++j) {
    double nj = 0.0, s1 = 0.0;
    for (int i = 0; i < n; ++i) {
      nj += q.r(i, j);
      s1 += q.r(i, j) * data.points(i, 0);
    }
    double wmean = nj > 0.0 ? s1 / nj : mu;
    double wgss = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = data.points(i, 0) - wmean;
      wgss += q.r(i, j) * d * d;
    }
    // Coordinate updates on the stationarity conditions
    //   theta   = (kappa mu + sigma^{-2} s1) / (kappa + sigma^{-2} nj)
    //   sigma^2 = (2 b0 + sum_i q_ij (y_i - theta)^2) / (2 a0 + 2 + nj)
    double theta = wmean;
    double ss = wgss;
    double sigma2 = (2.0 * b0 + ss) / (2.0 * a0 + 2.0 + nj);
    for (int sweep = 0; sweep < 100; ++sweep) {
      double prec = 1.0 / sigma2;
      double theta_new = (kappa * mu + prec * s1) / (kappa + prec * nj);
      double dmean = wmean - theta_new;
      double ss_new = wgss + nj * dmean * dmean;
      double sigma2_new = (2.0 * b0 + ss_new) / (2.0 * a0 + 2.0 + nj);
      bool done = std::abs(theta_new - theta) <= 1e-10 * std::max(1.0, std::abs(theta)) &&
                  std::abs(sigma2_new - sigma2) <= 1e-10 * std::max(1.0, sigma2);
      theta = theta_new;
      sigma2 = sigma2_new;
      if (done) break;
    }
    params.means(j, 0) = theta;
    params.covs[static_cast<size_t>(j)] = Eigen::MatrixXd::Constant(1, 1, sigma2);

    double num = nj + alpha - 1.0;
    if (num < 0.0)
      throw numeric_error("weight MAP undefined: component " + std::to_string(j + 1) +
                          " has expected count " + std::to_string(nj) + " below 1 - alpha");
    params.weights[j] = num / (static_cast<double>(n) + k * (alpha - 1.0));
  }
  return params;
}

// M step for the multivariate Normal-Wishart model; closed form.
inline MixtureParams m_step_multivariate(const Dataset& data, const ResponsibilityMatrix& q,
                                         const PriorSpec& prior) {
  const int k = q.k();
  const int n = data.n();
  const int p = data.p();
  const double kappa = prior.mean.kappa;
  const double alpha = prior.dirichlet_alpha;
  const double nu = prior.wishart->nu;
  Eigen::MatrixXd w_inv = prior.wishart->scale.llt().solve(Eigen::MatrixXd::Identity(p, p));

  MixtureParams params;
  params.means = Eigen::MatrixXd(k, p);
  params.covs.resize(static_cast<size_t>(k));
  params.weights = Eigen::VectorXd(k);

  for (int j = 0; j < k; ++j) {
    double nj = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      nj += q.r(i, j);
      s1 += q.r(i, j) * data.points.row(i).transpose();
    }
    Eigen::VectorXd theta = (kappa * prior.mean.mu + s1) / (kappa + nj);
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd d = data.points.row(i).transpose() - theta;
      scatter.noalias() += q.r(i, j) * d * d.transpose();
    }
    Eigen::VectorXd dm = theta - prior.mean.mu;
    Eigen::MatrixXd sigma =
        (w_inv + scatter + kappa * dm * dm.transpose()) / (nj + nu + p + 2.0);
    params.means.row(j) = theta.transpose();
    params.covs[static_cast<size_t>(j)] = 0.5 * (sigma + sigma.transpose());

    double num = nj + alpha - 1.0;
    if (num < 0.0)
      throw numeric_error("weight MAP undefined: component " + std::to_string(j + 1) +
                          " has expected count " + std::to_string(nj) + " below 1 - alpha");
    params.weights[j] = num / (static_cast<double>(n) + k * (alpha - 1.0));
  }
  return params;
}

// Maximizer of E_q[log p(gamma, eta, s, y)].
inline MixtureParams m_step(const Dataset& data, const ResponsibilityMatrix& q, const PriorSpec& prior) {
  prior.validate(data.p());
  if (q.n() != data.n()) throw validation_error("responsibility / dataset size mismatch");
  return data.p() == 1 ? m_step_univariate(data, q, prior) : m_step_multivariate(data, q, prior);
}

// D_KL(q || q*) for row-factorized allocation distributions, via the per-row
// decomposition: -sum_{i in A_j} log r_ij for anchored rows plus the usual
// discrete KL for the rest.
inline double anchored_kl(const ResponsibilityMatrix& q, const ResponsibilityMatrix& r,
                          const AnchorSet& anchors) {
  auto row_comp = anchors.row_components();
  double acc = 0.0;
  for (int i = 0; i < q.n(); ++i) {
    int a = row_comp[static_cast<size_t>(i)];
    if (a >= 0) {
      double rij = r.r(i, a);
      if (rij <= 0.0) return std::numeric_limits<double>::infinity();
      acc -= std::log(rij);
      continue;
    }
    for (int j = 0; j < q.k(); ++j) {
      double qij = q.r(i, j);
      if (qij <= 0.0) continue;
      double rij = r.r(i, j);
      if (rij <= 0.0) return std::numeric_limits<double>::infinity();
      acc += qij * (std::log(qij) - std::log(rij));
    }
  }
  return acc;
}

// F(gamma, eta, q) = log p(gamma, eta | y) - D_KL(q || q*), up to the model
// evidence. Returns -inf (to be flagged by callers) when an anchored row has
// zero responsibility.
inline double lower_bound(const Dataset& data, const AnchorSet& anchors, const MixtureParams& params,
                          const PriorSpec& prior, const ResponsibilityMatrix& q) {
  auto [r, loglik] = responsibilities_and_loglik(data, params);
  double log_post = loglik + prior_logpdf(params, prior);
  double kl = anchored_kl(q, r, anchors);
  if (std::isinf(kl)) return kNegInf;
  return log_post - kl;
}

namespace detail {

inline MixtureParams em_initial_params(const Dataset& data, int k, std::mt19937_64& g) {
  const int n = data.n();
  const int p = data.p();
  // Means from k distinct rows; scales at the pooled covariance; uniform
  // weights.
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(order[static_cast<size_t>(j)], order[static_cast<size_t>(pick(g))]);
  }
  Eigen::RowVectorXd centroid = data.points.colwise().mean();
  Eigen::MatrixXd centered = data.points.rowwise() - centroid;
  Eigen::MatrixXd pooled = centered.transpose() * centered / std::max(1, n - 1);
  if (p == 1 && pooled(0, 0) <= 0.0) pooled(0, 0) = 1.0;
  MixtureParams params;
  params.means = Eigen::MatrixXd(k, p);
  params.covs.assign(static_cast<size_t>(k), pooled);
  params.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  for (int j = 0; j < k; ++j) params.means.row(j) = data.points.row(order[static_cast<size_t>(j)]);
  return params;
}

inline ResponsibilityMatrix constrain_to_anchors(const ResponsibilityMatrix& r, const AnchorSet& anchors) {
  ResponsibilityMatrix q = r;
  for (int j = 0; j < anchors.k(); ++j) {
    for (int i : anchors.set(j)) {
      q.r.row(i).setZero();
      q.r(i, j) = 1.0;
    }
  }
  return q;
}

}  // namespace detail

// Algorithm: from each random start, alternate the anchored E step (exact or
// greedy assignment of anchors, responsibilities elsewhere) with the MAP M
// step until the lower-bound increase drops below tol. The winner is the
// start with the largest final F (ties to the lowest start index), relabeled
// so the anchor sets are canonical.
inline EMResult anchored_em(const Dataset& data, const PriorSpec& prior, const EMConfig& config) {
  data.validate();
  prior.validate(data.p());
  config.validate(data.n());

  struct StartOutcome {
    EMState state;
    EMStartTrace trace;
    bool ok = false;
  };
  std::vector<StartOutcome> outcomes(static_cast<size_t>(config.n_starts));

  parallel_for(config.n_starts, config.workers, [&](int s) {
    auto& out = outcomes[static_cast<size_t>(s)];
    out.trace.start = s;
    auto g = rng::stream(config.seed, {rng::kTagEmStart, static_cast<std::uint64_t>(s)});
    try {
      MixtureParams params = detail::em_initial_params(data, config.k, g);
      double f_prev = kNegInf;
      EMState state;
      for (int t = 1; t <= config.max_iter; ++t) {
        auto r = responsibilities(data, params);
        AnchorSet anchors = e_step_assign(r, config.budgets, config.solver);
        ResponsibilityMatrix q = detail::constrain_to_anchors(r, anchors);
        params = m_step(data, q, prior);
        double f = lower_bound(data, anchors, params, prior, q);
        out.trace.f_trace.push_back(f);
        out.trace.anchor_trace.push_back(anchors);
        if (!std::isfinite(f)) throw numeric_error("lower bound is not finite");
        state = EMState{params, anchors, q, f, t};
        if (f - f_prev < config.tol && t >= 2) {
          out.trace.converged = true;
          break;
        }
        f_prev = f;
      }
      out.state = std::move(state);
      out.ok = true;
    } catch (const std::exception& e) {
      out.trace.failed = true;
      out.trace.message = e.what();
    }
  });

  EMResult result;
  result.final_f.resize(static_cast<size_t>(config.n_starts), kNegInf);
  std::string failures;
  for (int s = 0; s < config.n_starts; ++s) {
    auto& out = outcomes[static_cast<size_t>(s)];
    result.traces.push_back(out.trace);
    if (out.ok) {
      result.final_f[static_cast<size_t>(s)] = out.state.lower_bound;
      if (result.best_start < 0 || out.state.lower_bound > result.best.lower_bound) {
        result.best = out.state;
        result.best_start = s;
      }
    } else {
      failures += "start " + std::to_string(s) + ": " + out.trace.message + "; ";
    }
  }
  if (result.best_start < 0)
    throw numeric_error("all anchored EM starts failed: " + failures);

  auto perm = result.best.anchors.canonical_permutation();
  result.best.anchors = result.best.anchors.permuted(perm);
  result.best.params = result.best.params.permuted(perm);
  Eigen::MatrixXd qperm(result.best.resp.n(), result.best.resp.k());
  for (int j = 0; j < result.best.resp.k(); ++j)
    qperm.col(j) = result.best.resp.r.col(perm[static_cast<size_t>(j)]);
  result.best.resp.r = qperm;
  return result;
}

}  // namespace anchormix
