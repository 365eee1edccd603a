#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/density.hpp"
#include "anchormix/parallel.hpp"
#include "anchormix/params.hpp"
#include "anchormix/rng.hpp"

namespace anchormix {

struct SamplerConfig {
  int chains = 50;
  int iterations = 10000;  // per chain, including burn-in
  int burn_in = 1000;
  int total_draws = 5000;  // thinning target across all chains
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const {
    if (chains < 1) throw validation_error("sampler needs at least one chain");
    if (iterations <= burn_in) throw validation_error("iterations must exceed burn_in");
    if (burn_in < 0) throw validation_error("burn_in must be non-negative");
    if (total_draws < 1) throw validation_error("total_draws must be >= 1");
    long long avail = static_cast<long long>(chains) * (iterations - burn_in);
    if (static_cast<long long>(total_draws) > avail)
      throw validation_error("total_draws exceeds chains x (iterations - burn_in)");
  }
};

struct DrawRecord {
  int chain = 0;
  int iter = 0;  // 1-based within the chain
  Eigen::MatrixXd theta;               // k x p
  std::vector<Eigen::MatrixXd> covs;   // k of p x p (1x1 sigma2 when p = 1)
  Eigen::VectorXd eta;
  double b0 = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> s;                  // 0-based component labels
};

struct PosteriorDraws {
  int k = 0;
  int p = 0;
  bool b0_active = false;
  std::vector<DrawRecord> draws;

  // Posterior-mean plug-in parameters (weights renormalized for safety).
  MixtureParams posterior_mean_params() const {
    if (draws.empty()) throw validation_error("no posterior draws");
    MixtureParams params;
    params.means = Eigen::MatrixXd::Zero(k, p);
    params.covs.assign(static_cast<size_t>(k), Eigen::MatrixXd::Zero(p, p));
    params.weights = Eigen::VectorXd::Zero(k);
    for (const auto& d : draws) {
      params.means += d.theta;
      params.weights += d.eta;
      for (int j = 0; j < k; ++j) params.covs[static_cast<size_t>(j)] += d.covs[static_cast<size_t>(j)];
    }
    double m = static_cast<double>(draws.size());
    params.means /= m;
    params.weights /= params.weights.sum();
    for (auto& c : params.covs) c /= m;
    return params;
  }
};

// ---------------------------------------------------------------------------
// Univariate Normal / Gamma-precision model.

struct UnivariateGibbsState {
  Eigen::VectorXd theta;
  Eigen::VectorXd sigma2;
  Eigen::VectorXd eta;
  double b0 = 0.0;
  std::vector<int> s;
};

// One full conditional cycle: s -> theta -> sigma2 -> b0 -> eta. Anchored
// rows keep their labels; their counts enter every update, including the
// Dirichlet one.
inline void univariate_gibbs_sweep(UnivariateGibbsState& st, const Dataset& data,
                                   const std::vector<int>& row_comp, const PriorSpec& prior,
                                   std::mt19937_64& g) {
  const int n = data.n();
  const int k = static_cast<int>(st.theta.size());
  const double mu = prior.mean.mu[0];
  const double kappa = prior.mean.kappa;

  std::vector<double> logits(static_cast<size_t>(k));
  std::vector<double> log_eta(static_cast<size_t>(k));
  std::vector<double> log_sig(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    log_eta[static_cast<size_t>(j)] = st.eta[j] > 0.0 ? std::log(st.eta[j]) : kNegInf;
    log_sig[static_cast<size_t>(j)] = std::log(st.sigma2[j]);
  }
  for (int i = 0; i < n; ++i) {
    if (row_comp[static_cast<size_t>(i)] >= 0) continue;
    double y = data.points(i, 0);
    for (int j = 0; j < k; ++j) {
      double z = y - st.theta[j];
      logits[static_cast<size_t>(j)] =
          log_eta[static_cast<size_t>(j)] - 0.5 * (kLogTwoPi + log_sig[static_cast<size_t>(j)]) -
          0.5 * z * z / st.sigma2[j];
    }
    st.s[static_cast<size_t>(i)] = rng::categorical_from_logits(g, logits);
  }

  Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < n; ++i) {
    int j = st.s[static_cast<size_t>(i)];
    count[j] += 1.0;
    sum[j] += data.points(i, 0);
  }
  for (int j = 0; j < k; ++j) {
    double prec = kappa + count[j] / st.sigma2[j];
    double mean = (kappa * mu + sum[j] / st.sigma2[j]) / prec;
    st.theta[j] = mean + rng::normal(g) / std::sqrt(prec);
  }
  for (int j = 0; j < k; ++j) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      if (st.s[static_cast<size_t>(i)] != j) continue;
      double z = data.points(i, 0) - st.theta[j];
      ss += z * z;
    }
    double lambda = rng::gamma(g, prior.precision.a0 + 0.5 * count[j], st.b0 + 0.5 * ss);
    st.sigma2[j] = 1.0 / lambda;
  }
  if (prior.precision.b0_random) {
    double prec_sum = 0.0;
    for (int j = 0; j < k; ++j) prec_sum += 1.0 / st.sigma2[j];
    st.b0 = rng::gamma(g, prior.precision.g + k * prior.precision.a0, prior.precision.h + prec_sum);
  }
  Eigen::VectorXd conc = count.array() + prior.dirichlet_alpha;
  st.eta = rng::dirichlet(g, conc);
}

inline UnivariateGibbsState univariate_gibbs_init(const Dataset& data, const AnchorSet& anchors,
                                                  const PriorSpec& prior,
                                                  const std::optional<MixtureParams>& map,
                                                  std::mt19937_64& g) {
  const int n = data.n();
  const int k = anchors.k();
  auto row_comp = anchors.row_components();
  UnivariateGibbsState st;
  st.s.assign(static_cast<size_t>(n), 0);
  if (map) {
    auto resp = responsibilities(data, *map, anchors);
    for (int i = 0; i < n; ++i) {
      std::vector<double> probs(static_cast<size_t>(k));
      for (int j = 0; j < k; ++j) probs[static_cast<size_t>(j)] = resp.r(i, j);
      st.s[static_cast<size_t>(i)] = rng::categorical(g, probs);
    }
  } else {
    std::uniform_int_distribution<int> lab(0, k - 1);
    for (int i = 0; i < n; ++i)
      st.s[static_cast<size_t>(i)] = row_comp[static_cast<size_t>(i)] >= 0
                                         ? row_comp[static_cast<size_t>(i)]
                                         : lab(g);
  }
  for (int i = 0; i < n; ++i)
    if (row_comp[static_cast<size_t>(i)] >= 0) st.s[static_cast<size_t>(i)] = row_comp[static_cast<size_t>(i)];

  double pooled = std::max(1e-12, (data.points.col(0).array() - data.points.col(0).mean()).square().sum() /
                                       std::max(1, n - 1));
  st.theta = Eigen::VectorXd::Zero(k);
  st.sigma2 = Eigen::VectorXd::Constant(k, pooled);
  st.eta = Eigen::VectorXd::Constant(k, 1.0 / k);
  st.b0 = prior.precision.b0_point_value();

  // Complete the initialization with one parameter cycle given s.
  Eigen::VectorXd count = Eigen::VectorXd::Zero(k), sum = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < n; ++i) {
    count[st.s[static_cast<size_t>(i)]] += 1.0;
    sum[st.s[static_cast<size_t>(i)]] += data.points(i, 0);
  }
  const double mu = prior.mean.mu[0];
  const double kappa = prior.mean.kappa;
  for (int j = 0; j < k; ++j) {
    double prec = kappa + count[j] / st.sigma2[j];
    st.theta[j] = (kappa * mu + sum[j] / st.sigma2[j]) / prec + rng::normal(g) / std::sqrt(prec);
  }
  for (int j = 0; j < k; ++j) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i)
      if (st.s[static_cast<size_t>(i)] == j) {
        double z = data.points(i, 0) - st.theta[j];
        ss += z * z;
      }
    st.sigma2[j] = 1.0 / rng::gamma(g, prior.precision.a0 + 0.5 * count[j], st.b0 + 0.5 * ss);
  }
  if (prior.precision.b0_random) {
    double prec_sum = 0.0;
    for (int j = 0; j < k; ++j) prec_sum += 1.0 / st.sigma2[j];
    st.b0 = rng::gamma(g, prior.precision.g + k * prior.precision.a0, prior.precision.h + prec_sum);
  }
  st.eta = rng::dirichlet(g, Eigen::VectorXd(count.array() + prior.dirichlet_alpha));
  return st;
}

// ---------------------------------------------------------------------------
// Multivariate Normal-Wishart model: theta_j | Sigma_j ~ N(mu, Sigma_j/kappa)
// and Sigma_j^{-1} ~ Wishart(nu, W).

struct MultivariateGibbsState {
  Eigen::MatrixXd theta;                    // k x p
  std::vector<Eigen::MatrixXd> sigma;       // covariances
  std::vector<Eigen::MatrixXd> sigma_chol;  // lower Cholesky factors
  Eigen::VectorXd eta;
  std::vector<int> s;
};

inline void mvn_refresh_chol(MultivariateGibbsState& st, int j) {
  Eigen::LLT<Eigen::MatrixXd> llt(st.sigma[static_cast<size_t>(j)]);
  if (llt.info() != Eigen::Success)
    throw numeric_error("sampled covariance lost positive definiteness");
  st.sigma_chol[static_cast<size_t>(j)] = llt.matrixL();
}

inline void multivariate_gibbs_sweep(MultivariateGibbsState& st, const Dataset& data,
                                     const std::vector<int>& row_comp, const PriorSpec& prior,
                                     const Eigen::MatrixXd& w_inv, std::mt19937_64& g) {
  const int n = data.n();
  const int p = data.p();
  const int k = static_cast<int>(st.theta.rows());
  const double kappa = prior.mean.kappa;
  const double nu = prior.wishart->nu;

  std::vector<double> log_eta(static_cast<size_t>(k)), log_det(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    log_eta[static_cast<size_t>(j)] = st.eta[j] > 0.0 ? std::log(st.eta[j]) : kNegInf;
    log_det[static_cast<size_t>(j)] =
        2.0 * st.sigma_chol[static_cast<size_t>(j)].diagonal().array().log().sum();
  }
  std::vector<double> logits(static_cast<size_t>(k));
  for (int i = 0; i < n; ++i) {
    if (row_comp[static_cast<size_t>(i)] >= 0) continue;
    Eigen::VectorXd y = data.points.row(i).transpose();
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd z = st.sigma_chol[static_cast<size_t>(j)]
                              .triangularView<Eigen::Lower>()
                              .solve(y - st.theta.row(j).transpose());
      logits[static_cast<size_t>(j)] = log_eta[static_cast<size_t>(j)] -
                                       0.5 * (p * kLogTwoPi + log_det[static_cast<size_t>(j)] + z.squaredNorm());
    }
    st.s[static_cast<size_t>(i)] = rng::categorical_from_logits(g, logits);
  }

  Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, p);
  for (int i = 0; i < n; ++i) {
    int j = st.s[static_cast<size_t>(i)];
    count[j] += 1.0;
    sums.row(j) += data.points.row(i);
  }
  for (int j = 0; j < k; ++j) {
    double w = kappa + count[j];
    Eigen::VectorXd mean = (kappa * prior.mean.mu + sums.row(j).transpose()) / w;
    st.theta.row(j) =
        rng::mvn_from_chol(g, mean, st.sigma_chol[static_cast<size_t>(j)] / std::sqrt(w)).transpose();
  }
  for (int j = 0; j < k; ++j) {
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      if (st.s[static_cast<size_t>(i)] != j) continue;
      Eigen::VectorXd d = data.points.row(i).transpose() - st.theta.row(j).transpose();
      scatter.noalias() += d * d.transpose();
    }
    Eigen::VectorXd dm = st.theta.row(j).transpose() - prior.mean.mu;
    Eigen::MatrixXd v_inv = w_inv + scatter + kappa * dm * dm.transpose();
    Eigen::MatrixXd v = v_inv.llt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd prec = rng::wishart(g, nu + count[j] + 1.0, 0.5 * (v + v.transpose()));
    Eigen::MatrixXd sigma = prec.llt().solve(Eigen::MatrixXd::Identity(p, p));
    st.sigma[static_cast<size_t>(j)] = 0.5 * (sigma + sigma.transpose());
    mvn_refresh_chol(st, j);
  }
  st.eta = rng::dirichlet(g, Eigen::VectorXd(count.array() + prior.dirichlet_alpha));
}

inline MultivariateGibbsState multivariate_gibbs_init(const Dataset& data, const AnchorSet& anchors,
                                                      const PriorSpec& prior,
                                                      const std::optional<MixtureParams>& map,
                                                      std::mt19937_64& g) {
  const int n = data.n();
  const int p = data.p();
  const int k = anchors.k();
  auto row_comp = anchors.row_components();
  MultivariateGibbsState st;
  st.s.assign(static_cast<size_t>(n), 0);
  if (map) {
    auto resp = responsibilities(data, *map, anchors);
    for (int i = 0; i < n; ++i) {
      std::vector<double> probs(static_cast<size_t>(k));
      for (int j = 0; j < k; ++j) probs[static_cast<size_t>(j)] = resp.r(i, j);
      st.s[static_cast<size_t>(i)] = rng::categorical(g, probs);
    }
  } else {
    std::uniform_int_distribution<int> lab(0, k - 1);
    for (int i = 0; i < n; ++i) st.s[static_cast<size_t>(i)] = lab(g);
  }
  for (int i = 0; i < n; ++i)
    if (row_comp[static_cast<size_t>(i)] >= 0) st.s[static_cast<size_t>(i)] = row_comp[static_cast<size_t>(i)];

  Eigen::RowVectorXd centroid = data.points.colwise().mean();
  Eigen::MatrixXd centered = data.points.rowwise() - centroid;
  Eigen::MatrixXd pooled = centered.transpose() * centered / std::max(1, n - 1);
  pooled += 1e-8 * Eigen::MatrixXd::Identity(p, p);
  st.theta = Eigen::MatrixXd::Zero(k, p);
  st.sigma.assign(static_cast<size_t>(k), pooled);
  st.sigma_chol.assign(static_cast<size_t>(k), Eigen::MatrixXd());
  for (int j = 0; j < k; ++j) mvn_refresh_chol(st, j);
  st.eta = Eigen::VectorXd::Constant(k, 1.0 / k);

  Eigen::MatrixXd w_inv =
      prior.wishart->scale.llt().solve(Eigen::MatrixXd::Identity(p, p));
  // One parameter cycle given s completes the state.
  Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, p);
  for (int i = 0; i < n; ++i) {
    count[st.s[static_cast<size_t>(i)]] += 1.0;
    sums.row(st.s[static_cast<size_t>(i)]) += data.points.row(i);
  }
  for (int j = 0; j < k; ++j) {
    double w = prior.mean.kappa + count[j];
    Eigen::VectorXd mean = (prior.mean.kappa * prior.mean.mu + sums.row(j).transpose()) / w;
    st.theta.row(j) =
        rng::mvn_from_chol(g, mean, st.sigma_chol[static_cast<size_t>(j)] / std::sqrt(w)).transpose();
  }
  for (int j = 0; j < k; ++j) {
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      if (st.s[static_cast<size_t>(i)] != j) continue;
      Eigen::VectorXd d = data.points.row(i).transpose() - st.theta.row(j).transpose();
      scatter.noalias() += d * d.transpose();
    }
    Eigen::VectorXd dm = st.theta.row(j).transpose() - prior.mean.mu;
    Eigen::MatrixXd v_inv = w_inv + scatter + prior.mean.kappa * dm * dm.transpose();
    Eigen::MatrixXd v = v_inv.llt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd prec = rng::wishart(g, prior.wishart->nu + count[j] + 1.0, 0.5 * (v + v.transpose()));
    Eigen::MatrixXd sigma = prec.llt().solve(Eigen::MatrixXd::Identity(p, p));
    st.sigma[static_cast<size_t>(j)] = 0.5 * (sigma + sigma.transpose());
    mvn_refresh_chol(st, j);
  }
  st.eta = rng::dirichlet(g, Eigen::VectorXd(count.array() + prior.dirichlet_alpha));
  return st;
}

// ---------------------------------------------------------------------------

namespace detail {

inline void check_state_finite(bool ok, int chain, int iter) {
  if (!ok)
    throw numeric_error("gibbs chain " + std::to_string(chain + 1) + " failed at iteration " +
                        std::to_string(iter) + ": non-finite conditional parameters");
}

inline int chain_keep_count(const SamplerConfig& cfg, int chain) {
  int base = cfg.total_draws / cfg.chains;
  int rem = cfg.total_draws % cfg.chains;
  return base + (chain < rem ? 1 : 0);
}

}  // namespace detail

// Multi-chain anchored Gibbs sampler. Chains are independent streams derived
// from (seed, chain index); draws are thinned to the configured total with
// evenly spaced positions after burn-in, the remainder dropped from the
// tails.
inline PosteriorDraws gibbs_fit(const Dataset& data, const AnchorSet& anchors, const PriorSpec& prior,
                                const SamplerConfig& config,
                                const std::optional<MixtureParams>& init_map = std::nullopt) {
  data.validate();
  prior.validate(data.p());
  config.validate();
  if (anchors.n_rows() != data.n()) throw validation_error("anchor set / dataset size mismatch");
  // An anchor model needs k0 >= k - 1 for a unique labeling; a fully
  // exchangeable run (no anchors at all) is also allowed.
  if (anchors.total() > 0 && anchors.k0() < anchors.k() - 1)
    throw validation_error("anchor model needs k0 >= k - 1 components with anchors");

  const int p = data.p();
  const int k = anchors.k();
  auto row_comp = anchors.row_components();

  PosteriorDraws out;
  out.k = k;
  out.p = p;
  out.b0_active = (p == 1) && prior.precision.b0_random;

  std::vector<std::vector<DrawRecord>> per_chain(static_cast<size_t>(config.chains));
  Eigen::MatrixXd w_inv;
  if (p > 1) w_inv = prior.wishart->scale.llt().solve(Eigen::MatrixXd::Identity(p, p));

  parallel_for(config.chains, config.workers, [&](int c) {
    auto g = rng::stream(config.seed, {rng::kTagChain, static_cast<std::uint64_t>(c)});
    int keep = detail::chain_keep_count(config, c);
    int span = config.iterations - config.burn_in;
    int stride = keep > 0 ? span / keep : span;
    auto& records = per_chain[static_cast<size_t>(c)];
    records.reserve(static_cast<size_t>(keep));

    auto record_draw = [&](int iter, const Eigen::MatrixXd& theta,
                           const std::vector<Eigen::MatrixXd>& covs, const Eigen::VectorXd& eta,
                           double b0, const std::vector<int>& s) {
      // Hard S^A assertion: anchored labels can never move.
      for (int j = 0; j < k; ++j)
        for (int i : anchors.set(j))
          if (s[static_cast<size_t>(i)] != j)
            throw numeric_error("gibbs chain " + std::to_string(c + 1) +
                                ": anchored allocation escaped its component at iteration " +
                                std::to_string(iter));
      DrawRecord rec;
      rec.chain = c;
      rec.iter = iter;
      rec.theta = theta;
      rec.covs = covs;
      rec.eta = eta;
      rec.b0 = b0;
      rec.s = s;
      records.push_back(std::move(rec));
    };

    if (p == 1) {
      auto st = univariate_gibbs_init(data, anchors, prior, init_map, g);
      for (int iter = 1; iter <= config.iterations; ++iter) {
        univariate_gibbs_sweep(st, data, row_comp, prior, g);
        detail::check_state_finite(st.theta.allFinite() && st.sigma2.allFinite() &&
                                       st.sigma2.minCoeff() > 0.0 && st.eta.allFinite() &&
                                       std::isfinite(st.b0),
                                   c, iter);
        int rel = iter - config.burn_in;
        if (rel > 0 && keep > 0 && rel % stride == 0 && rel / stride <= keep) {
          std::vector<Eigen::MatrixXd> covs(static_cast<size_t>(k));
          for (int j = 0; j < k; ++j) covs[static_cast<size_t>(j)] = Eigen::MatrixXd::Constant(1, 1, st.sigma2[j]);
          Eigen::MatrixXd theta(k, 1);
          theta.col(0) = st.theta;
          record_draw(iter, theta, covs, st.eta,
                      prior.precision.b0_random ? st.b0 : std::numeric_limits<double>::quiet_NaN(),
                      st.s);
        }
      }
    } else {
      auto st = multivariate_gibbs_init(data, anchors, prior, init_map, g);
      for (int iter = 1; iter <= config.iterations; ++iter) {
        multivariate_gibbs_sweep(st, data, row_comp, prior, w_inv, g);
        bool ok = st.theta.allFinite() && st.eta.allFinite();
        for (const auto& m : st.sigma) ok = ok && m.allFinite();
        detail::check_state_finite(ok, c, iter);
        int rel = iter - config.burn_in;
        if (rel > 0 && keep > 0 && rel % stride == 0 && rel / stride <= keep)
          record_draw(iter, st.theta, st.sigma, st.eta, std::numeric_limits<double>::quiet_NaN(), st.s);
      }
    }
  });

  for (auto& chain_records : per_chain)
    for (auto& rec : chain_records) out.draws.push_back(std::move(rec));
  return out;
}

}  // namespace anchormix
