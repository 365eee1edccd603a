#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "anchormix/common.hpp"

namespace anchormix {

// Component means, scales and mixture weights. Scales are stored as
// covariance matrices throughout; the univariate case is the 1x1 matrix
// holding sigma^2.
struct MixtureParams {
  Eigen::MatrixXd means;                 // k x p
  std::vector<Eigen::MatrixXd> covs;     // k matrices, each p x p SPD
  Eigen::VectorXd weights;               // k-simplex

  int k() const { return static_cast<int>(means.rows()); }
  int p() const { return static_cast<int>(means.cols()); }

  double sigma2(int j) const { return covs[static_cast<size_t>(j)](0, 0); }
  double& sigma2(int j) { return covs[static_cast<size_t>(j)](0, 0); }

  void validate() const {
    if (k() < 1) throw validation_error("mixture needs at least one component");
    if (static_cast<int>(covs.size()) != k())
      throw validation_error("mixture needs one scale matrix per component");
    if (!means.allFinite()) throw validation_error("component means must be finite");
    for (int j = 0; j < k(); ++j) {
      const auto& c = covs[static_cast<size_t>(j)];
      if (c.rows() != p() || c.cols() != p())
        throw validation_error("scale matrix dimension mismatch");
      if (!c.allFinite() || !c.isApprox(c.transpose(), 1e-10))
        throw validation_error("scale matrix must be finite and symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(c);
      if (llt.info() != Eigen::Success || c.diagonal().minCoeff() <= 0.0)
        throw validation_error("scale matrix must be positive definite");
    }
    if (weights.size() != k()) throw validation_error("one weight per component required");
    if (weights.minCoeff() < 0.0) throw validation_error("weights must be non-negative");
    if (std::abs(weights.sum() - 1.0) > kSimplexTol)
      throw validation_error("weights must sum to 1");
  }

  // Relabel components: new component j is old component perm[j].
  MixtureParams permuted(const std::vector<int>& perm) const {
    MixtureParams out;
    out.means = Eigen::MatrixXd(k(), p());
    out.covs.resize(static_cast<size_t>(k()));
    out.weights = Eigen::VectorXd(k());
    for (int j = 0; j < k(); ++j) {
      out.means.row(j) = means.row(perm[static_cast<size_t>(j)]);
      out.covs[static_cast<size_t>(j)] = covs[static_cast<size_t>(perm[static_cast<size_t>(j)])];
      out.weights[j] = weights[perm[static_cast<size_t>(j)]];
    }
    return out;
  }

  static MixtureParams univariate(const std::vector<double>& means_in,
                                  const std::vector<double>& sigma2_in,
                                  const std::vector<double>& weights_in) {
    MixtureParams params;
    const int k = static_cast<int>(means_in.size());
    params.means = Eigen::MatrixXd(k, 1);
    params.weights = Eigen::VectorXd(k);
    params.covs.resize(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
      params.means(j, 0) = means_in[static_cast<size_t>(j)];
      params.covs[static_cast<size_t>(j)] = Eigen::MatrixXd::Constant(1, 1, sigma2_in[static_cast<size_t>(j)]);
      params.weights[j] = weights_in[static_cast<size_t>(j)];
    }
    params.validate();
    return params;
  }
};

// theta_j ~ N(mu, 1/kappa) in the univariate model, N(mu, Sigma_j/kappa) in
// the multivariate model.
struct MeanPrior {
  Eigen::VectorXd mu;
  double kappa = 1.0;
};

// Precision sigma_j^{-2} ~ Gamma(a0, b0), shape-rate (mean a0/b0), with an
// optional Gamma(g, h) hyperprior on the rate b0.
struct PrecisionPrior {
  double a0 = 2.0;
  double b0 = 1.0;
  bool b0_random = false;
  double g = 0.0;
  double h = 0.0;

  // During EM a random b0 is held at its hyperprior mean.
  double b0_point_value() const { return b0_random ? g / h : b0; }
};

// Sigma_j^{-1} ~ Wishart(nu, scale) with E[Sigma^{-1}] = nu * scale.
struct WishartPrior {
  double nu = 0.0;
  Eigen::MatrixXd scale;
};

struct PriorSpec {
  double dirichlet_alpha = 1.0;
  MeanPrior mean;
  PrecisionPrior precision;           // used when p == 1
  std::optional<WishartPrior> wishart;  // required when p > 1

  void validate(int p) const {
    if (!(dirichlet_alpha > 0.0)) throw validation_error("Dirichlet concentration must be > 0");
    if (mean.mu.size() != p) throw validation_error("mean prior dimension mismatch");
    if (!(mean.kappa > 0.0)) throw validation_error("mean prior kappa must be > 0");
    if (p == 1) {
      if (!(precision.a0 > 0.0)) throw validation_error("precision shape a0 must be > 0");
      if (precision.b0_random) {
        if (!(precision.g > 0.0) || !(precision.h > 0.0))
          throw validation_error("b0 hyperprior (g, h) must be > 0");
      } else if (!(precision.b0 > 0.0)) {
        throw validation_error("precision rate b0 must be > 0");
      }
    } else {
      if (!wishart) throw validation_error("multivariate model requires a Wishart prior");
      if (!(wishart->nu > static_cast<double>(p) - 1.0))
        throw validation_error("Wishart degrees of freedom must exceed p - 1");
      if (wishart->scale.rows() != p || wishart->scale.cols() != p)
        throw validation_error("Wishart scale dimension mismatch");
      Eigen::LLT<Eigen::MatrixXd> llt(wishart->scale);
      if (llt.info() != Eigen::Success)
        throw validation_error("Wishart scale must be positive definite");
    }
  }
};

}  // namespace anchormix
