#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "anchormix/anchors.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/params.hpp"

namespace anchormix {

inline double normal_logpdf(double y, double mean, double sigma2) {
  if (!(sigma2 > 0.0)) throw validation_error("normal_logpdf: variance must be > 0");
  double z = y - mean;
  return -0.5 * (kLogTwoPi + std::log(sigma2)) - 0.5 * z * z / sigma2;
}

// Cached Cholesky factor of one component covariance, for repeated density
// evaluation.
struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol_lower;
  double log_det = 0.0;  // log |Sigma|

  GaussianComponent(const Eigen::VectorXd& mean_in, const Eigen::MatrixXd& cov) : mean(mean_in) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw validation_error("component covariance is not positive definite");
    chol_lower = llt.matrixL();
    log_det = 2.0 * chol_lower.diagonal().array().log().sum();
  }

  double logpdf(const Eigen::VectorXd& y) const {
    Eigen::VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(y - mean);
    return -0.5 * (static_cast<double>(y.size()) * kLogTwoPi + log_det + z.squaredNorm());
  }
};

inline std::vector<GaussianComponent> make_components(const MixtureParams& params) {
  std::vector<GaussianComponent> comps;
  comps.reserve(static_cast<size_t>(params.k()));
  for (int j = 0; j < params.k(); ++j)
    comps.emplace_back(params.means.row(j).transpose(), params.covs[static_cast<size_t>(j)]);
  return comps;
}

inline double mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& cov) {
  return GaussianComponent(mean, cov).logpdf(y);
}

// log sum_j eta_j phi_p(point; theta_j, Sigma_j), via log-sum-exp.
inline double mixture_logpdf(const MixtureParams& params, const Eigen::VectorXd& point) {
  params.validate();
  auto comps = make_components(params);
  std::vector<double> terms(static_cast<size_t>(params.k()), kNegInf);
  for (int j = 0; j < params.k(); ++j) {
    double w = params.weights[j];
    if (w > 0.0) terms[static_cast<size_t>(j)] = std::log(w) + comps[static_cast<size_t>(j)].logpdf(point);
  }
  return log_sum_exp(terms);
}

inline double mixture_logpdf(const MixtureParams& params, double point) {
  return mixture_logpdf(params, Eigen::VectorXd::Constant(1, point));
}

// Log-likelihood of the data under an anchor model: unanchored rows get the
// full mixture density, rows in A_j get phi_p(y_i; gamma_j) with no weight
// factor.
inline double anchored_loglik(const Dataset& data, const AnchorSet& anchors,
                              const MixtureParams& params) {
  params.validate();
  if (anchors.n_rows() != data.n()) throw validation_error("anchor set / dataset size mismatch");
  if (anchors.k() != params.k()) throw validation_error("anchor set / params component mismatch");
  auto comps = make_components(params);
  auto row_comp = anchors.row_components();
  std::vector<double> terms(static_cast<size_t>(params.k()));
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    Eigen::VectorXd y = data.points.row(i).transpose();
    int a = row_comp[static_cast<size_t>(i)];
    if (a >= 0) {
      total += comps[static_cast<size_t>(a)].logpdf(y);
    } else {
      for (int j = 0; j < params.k(); ++j) {
        double w = params.weights[j];
        terms[static_cast<size_t>(j)] =
            w > 0.0 ? std::log(w) + comps[static_cast<size_t>(j)].logpdf(y) : kNegInf;
      }
      total += log_sum_exp(terms);
    }
  }
  return total;
}

// n x k allocation probabilities; anchored rows are one-hot.
struct ResponsibilityMatrix {
  Eigen::MatrixXd r;

  int n() const { return static_cast<int>(r.rows()); }
  int k() const { return static_cast<int>(r.cols()); }

  void validate() const {
    for (int i = 0; i < n(); ++i) {
      double sum = r.row(i).sum();
      if (std::abs(sum - 1.0) > kSimplexTol)
        throw validation_error("responsibility row " + std::to_string(i) + " does not sum to 1");
      if (r.row(i).minCoeff() < 0.0 || r.row(i).maxCoeff() > 1.0)
        throw validation_error("responsibility entries must lie in [0, 1]");
    }
  }
};

// Posterior allocation probabilities r_ij at fixed parameters, computed in
// log space; rows anchored in A_j are set one-hot.
inline ResponsibilityMatrix responsibilities(const Dataset& data, const MixtureParams& params,
                                             const AnchorSet& anchors) {
  params.validate();
  if (anchors.n_rows() != data.n()) throw validation_error("anchor set / dataset size mismatch");
  auto comps = make_components(params);
  auto row_comp = anchors.row_components();
  const int k = params.k();
  ResponsibilityMatrix out;
  out.r = Eigen::MatrixXd::Zero(data.n(), k);
  std::vector<double> logits(static_cast<size_t>(k));
  for (int i = 0; i < data.n(); ++i) {
    int a = row_comp[static_cast<size_t>(i)];
    if (a >= 0) {
      out.r(i, a) = 1.0;
      continue;
    }
    Eigen::VectorXd y = data.points.row(i).transpose();
    for (int j = 0; j < k; ++j) {
      double w = params.weights[j];
      logits[static_cast<size_t>(j)] =
          w > 0.0 ? std::log(w) + comps[static_cast<size_t>(j)].logpdf(y) : kNegInf;
    }
    double lse = log_sum_exp(logits);
    if (!std::isfinite(lse))
      throw numeric_error("responsibilities underflowed to zero in every component at row " +
                          std::to_string(i));
    for (int j = 0; j < k; ++j) out.r(i, j) = std::exp(logits[static_cast<size_t>(j)] - lse);
  }
  return out;
}

inline ResponsibilityMatrix responsibilities(const Dataset& data, const MixtureParams& params) {
  return responsibilities(data, params, AnchorSet::empty(params.k(), data.n()));
}

// Unconstrained responsibilities together with the total mixture
// log-likelihood; the row-wise log-sum-exp serves both.
inline std::pair<ResponsibilityMatrix, double> responsibilities_and_loglik(const Dataset& data,
                                                                           const MixtureParams& params) {
  params.validate();
  auto comps = make_components(params);
  const int k = params.k();
  ResponsibilityMatrix out;
  out.r = Eigen::MatrixXd::Zero(data.n(), k);
  std::vector<double> logits(static_cast<size_t>(k));
  double loglik = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    Eigen::VectorXd y = data.points.row(i).transpose();
    for (int j = 0; j < k; ++j) {
      double w = params.weights[j];
      logits[static_cast<size_t>(j)] =
          w > 0.0 ? std::log(w) + comps[static_cast<size_t>(j)].logpdf(y) : kNegInf;
    }
    double lse = log_sum_exp(logits);
    if (!std::isfinite(lse))
      throw numeric_error("responsibilities underflowed to zero in every component at row " +
                          std::to_string(i));
    loglik += lse;
    for (int j = 0; j < k; ++j) out.r(i, j) = std::exp(logits[static_cast<size_t>(j)] - lse);
  }
  return {std::move(out), loglik};
}

}  // namespace anchormix
