#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

#include "anchormix/common.hpp"
#include "anchormix/params.hpp"

namespace anchormix {

// Prior log-densities in the (theta, sigma^2 / Sigma, eta) parameterization.
// The EM M step maximizes the expected log posterior in this same
// parameterization, so the two must stay in sync.

inline double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// Density of sigma^2 when the precision is Gamma(shape, rate).
inline double inv_gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

inline double dirichlet_logpdf(const Eigen::VectorXd& eta, double alpha) {
  const int k = static_cast<int>(eta.size());
  double acc = std::lgamma(alpha * k) - k * std::lgamma(alpha);
  if (alpha != 1.0) {
    for (int j = 0; j < k; ++j) {
      if (eta[j] <= 0.0) return alpha > 1.0 ? kNegInf : std::numeric_limits<double>::infinity();
      acc += (alpha - 1.0) * std::log(eta[j]);
    }
  }
  return acc;
}

inline double log_multigamma(double a, int p) {
  double acc = 0.25 * p * (p - 1) * std::log(M_PI);
  for (int i = 1; i <= p; ++i) acc += std::lgamma(a + 0.5 * (1.0 - i));
  return acc;
}

// Density of Sigma when Sigma^{-1} ~ Wishart(nu, W), i.e. inverse-Wishart
// with scale W^{-1}.
inline double inv_wishart_logpdf(const Eigen::MatrixXd& sigma, double nu, const Eigen::MatrixXd& w) {
  const int p = static_cast<int>(sigma.rows());
  Eigen::LLT<Eigen::MatrixXd> llt_sigma(sigma);
  Eigen::LLT<Eigen::MatrixXd> llt_w(w);
  if (llt_sigma.info() != Eigen::Success || llt_w.info() != Eigen::Success) return kNegInf;
  double logdet_sigma = 2.0 * Eigen::MatrixXd(llt_sigma.matrixL()).diagonal().array().log().sum();
  double logdet_w = 2.0 * Eigen::MatrixXd(llt_w.matrixL()).diagonal().array().log().sum();
  // tr(W^{-1} Sigma^{-1})
  Eigen::MatrixXd sigma_inv = llt_sigma.solve(Eigen::MatrixXd::Identity(p, p));
  double trace = (llt_w.solve(sigma_inv)).trace();
  return -0.5 * nu * logdet_w - 0.5 * nu * p * std::log(2.0) - log_multigamma(0.5 * nu, p) -
         0.5 * (nu + p + 1.0) * logdet_sigma - 0.5 * trace;
}

// log pi(gamma, eta) for the conjugate prior family, with a random b0 held at
// its hyperprior mean.
inline double prior_logpdf(const MixtureParams& params, const PriorSpec& prior) {
  const int p = params.p();
  prior.validate(p);
  double acc = dirichlet_logpdf(params.weights, prior.dirichlet_alpha);
  for (int j = 0; j < params.k(); ++j) {
    if (p == 1) {
      double theta = params.means(j, 0);
      double z = theta - prior.mean.mu[0];
      acc += -0.5 * (kLogTwoPi - std::log(prior.mean.kappa)) - 0.5 * prior.mean.kappa * z * z;
      acc += inv_gamma_logpdf(params.sigma2(j), prior.precision.a0, prior.precision.b0_point_value());
    } else {
      const Eigen::MatrixXd& sigma = params.covs[static_cast<size_t>(j)];
      Eigen::VectorXd z = params.means.row(j).transpose() - prior.mean.mu;
      Eigen::LLT<Eigen::MatrixXd> llt(sigma);
      double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
      double maha = prior.mean.kappa * llt.matrixL().solve(z).squaredNorm();
      acc += -0.5 * (p * kLogTwoPi + logdet - p * std::log(prior.mean.kappa)) - 0.5 * maha;
      acc += inv_wishart_logpdf(sigma, prior.wishart->nu, prior.wishart->scale);
    }
  }
  return acc;
}

}  // namespace anchormix
