#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "anchormix/common.hpp"
#include "anchormix/density.hpp"
#include "anchormix/params.hpp"

namespace anchormix {

inline constexpr std::uint64_t kDefaultFactorialCap = 3628800;  // 10!

// Permutation with index q (0-based) in lexicographic order over sequences
// (perm[0], ..., perm[k-1]), via the factorial number system.
inline std::vector<int> permutation_at(std::uint64_t q, int k) {
  std::vector<int> pool(static_cast<size_t>(k));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> perm;
  perm.reserve(static_cast<size_t>(k));
  std::uint64_t rem = q;
  for (int pos = k; pos >= 1; --pos) {
    std::uint64_t f = factorial_u64(pos - 1);
    auto idx = static_cast<size_t>(rem / f);
    rem %= f;
    perm.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return perm;
}

// The asymptotic distribution over the k! relabelings of gamma0 induced by
// the anchor values; probabilities indexed by lexicographic permutation
// order.
struct RelabelingDistribution {
  int k = 0;
  std::vector<double> probs;  // length k!

  void validate() const {
    double sum = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw validation_error("relabeling probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
      throw validation_error("relabeling probabilities must sum to 1");
  }

  std::vector<int> permutation(std::uint64_t q) const { return permutation_at(q, k); }
};

// p_q proportional to prod_{j <= k0} phi_p(x_j; [rho_q(gamma0)]_j), in log
// space. The weights eta0 play no role. anchor_values[j] holds the m_j
// anchor coordinates of component j as rows; trailing components may be
// empty.
inline RelabelingDistribution relabeling_probs(const std::vector<Eigen::MatrixXd>& anchor_values,
                                               const MixtureParams& gamma0,
                                               std::uint64_t cap = kDefaultFactorialCap) {
  gamma0.validate();
  const int k = gamma0.k();
  if (static_cast<int>(anchor_values.size()) != k)
    throw validation_error("one anchor value block per component required");
  std::uint64_t n_perm = factorial_u64(k);
  if (n_perm > cap)
    throw validation_error("k! = " + std::to_string(n_perm) + " exceeds the factorial cap of " +
                           std::to_string(cap));
  auto comps = make_components(gamma0);

  // Cache log phi(x_l; gamma_c) for every anchor point and component.
  std::vector<Eigen::VectorXd> pts;
  std::vector<int> pt_comp;
  for (int j = 0; j < k; ++j) {
    const auto& block = anchor_values[static_cast<size_t>(j)];
    if (block.size() != 0 && block.cols() != gamma0.p())
      throw validation_error("anchor value dimension mismatch");
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      pts.push_back(block.row(r).transpose());
      pt_comp.push_back(j);
    }
  }
  Eigen::MatrixXd logphi(static_cast<Eigen::Index>(pts.size()), k);
  for (size_t l = 0; l < pts.size(); ++l)
    for (int c = 0; c < k; ++c) logphi(static_cast<Eigen::Index>(l), c) = comps[static_cast<size_t>(c)].logpdf(pts[l]);

  std::vector<double> logp(static_cast<size_t>(n_perm));
  std::vector<int> perm(static_cast<size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::uint64_t q = 0; q < n_perm; ++q) {
    double acc = 0.0;
    for (size_t l = 0; l < pts.size(); ++l)
      acc += logphi(static_cast<Eigen::Index>(l), perm[static_cast<size_t>(pt_comp[l])]);
    logp[static_cast<size_t>(q)] = acc;
    std::next_permutation(perm.begin(), perm.end());
  }
  double lse = log_sum_exp(logp);
  RelabelingDistribution dist;
  dist.k = k;
  dist.probs.resize(logp.size());
  for (size_t q = 0; q < logp.size(); ++q) dist.probs[q] = std::exp(logp[q] - lse);
  return dist;
}

// Quasi-consistency coefficient: the largest relabeling probability.
inline double quasi_consistency_alpha(const RelabelingDistribution& dist) {
  dist.validate();
  return *std::max_element(dist.probs.begin(), dist.probs.end());
}

// Shannon entropy of the relabeling distribution (0 log 0 = 0); lower values
// mean better asymptotic identifiability.
inline double relabeling_entropy(const RelabelingDistribution& dist) {
  dist.validate();
  double acc = 0.0;
  for (double p : dist.probs) acc -= xlogx(p);
  return acc;
}

// Anchor coordinate blocks for an AnchorSet over a dataset.
inline std::vector<Eigen::MatrixXd> anchor_values(const Dataset& data, const AnchorSet& anchors) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(static_cast<size_t>(anchors.k()));
  for (int j = 0; j < anchors.k(); ++j) {
    Eigen::MatrixXd block(anchors.size(j), data.p());
    for (int t = 0; t < anchors.size(j); ++t) block.row(t) = data.points.row(anchors.set(j)[static_cast<size_t>(t)]);
    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace anchormix
