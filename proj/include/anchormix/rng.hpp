#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "anchormix/common.hpp"

namespace anchormix::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Every random stream in the project is derived from (seed, tag, indices...).
// A stream's draws depend only on its own coordinates, so e.g. adding chains
// or starts never perturbs existing ones.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id));
  return h;
}

inline std::mt19937_64 stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  return std::mt19937_64(derive(seed, ids));
}

// Fixed stream tags (first id after the seed).
enum stream_tag : std::uint64_t {
  kTagEmStart = 1,
  kTagEntropyStart = 2,
  kTagChain = 3,
  kTagSimMaster = 4,
  kTagSimReplicates = 5,
  kTagSimCell = 6,
  kTagScaleMixture = 7,
};

inline double uniform(std::mt19937_64& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline double normal(std::mt19937_64& g) {
  return std::normal_distribution<double>(0.0, 1.0)(g);
}

// Shape-rate throughout: mean = shape / rate.
inline double gamma(std::mt19937_64& g, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(g);
}

inline Eigen::VectorXd dirichlet(std::mt19937_64& g, const Eigen::VectorXd& conc) {
  Eigen::VectorXd out(conc.size());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < conc.size(); ++j) {
    out[j] = gamma(g, conc[j], 1.0);
    sum += out[j];
  }
  if (sum <= 0.0) throw numeric_error("dirichlet draw degenerated to zero mass");
  return out / sum;
}

inline int categorical_from_logits(std::mt19937_64& g, std::span<const double> logits) {
  double lse = log_sum_exp(logits);
  if (!std::isfinite(lse)) throw numeric_error("categorical draw: all logits -inf");
  double u = uniform(g);
  double acc = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    acc += std::exp(logits[j] - lse);
    if (u <= acc) return static_cast<int>(j);
  }
  return static_cast<int>(logits.size()) - 1;
}

inline int categorical(std::mt19937_64& g, std::span<const double> probs) {
  double u = uniform(g);
  double acc = 0.0;
  for (size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    if (u <= acc) return static_cast<int>(j);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Sample from Wishart(nu, V) with E[X] = nu * V, via the Bartlett factor:
// X = L A A^T L^T where V = L L^T.
inline Eigen::MatrixXd wishart(std::mt19937_64& g, double nu, const Eigen::MatrixXd& scale) {
  const Eigen::Index p = scale.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw validation_error("wishart scale matrix is not positive definite");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    double chi2 = 2.0 * gamma(g, 0.5 * (nu - static_cast<double>(i)), 1.0);
    a(i, i) = std::sqrt(chi2);
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(g);
  }
  Eigen::MatrixXd la = llt.matrixL() * a;
  return la * la.transpose();
}

// theta ~ N(mean, cov) given the lower Cholesky factor of cov.
inline Eigen::VectorXd mvn_from_chol(std::mt19937_64& g, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& chol_lower) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(g);
  return mean + chol_lower * z;
}

}  // namespace anchormix::rng
