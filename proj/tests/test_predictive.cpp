#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "anchormix/predictive.hpp"
#include "support/oracles.hpp"

using namespace anchormix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("master batches are reproducible and balanced") {
  auto a = make_master_batch(200, 10, 31);
  auto b = make_master_batch(200, 10, 31);
  REQUIRE(a.z.size() == 200);
  for (size_t j = 0; j < a.z.size(); ++j) {
    REQUIRE(a.z[j] == b.z[j]);
    REQUIRE(a.c[j] == b.c[j]);
  }
  double mean = 0.0, freq2 = 0.0;
  const double count = 200.0 * 10.0;
  for (size_t j = 0; j < a.z.size(); ++j)
    for (int i = 0; i < 10; ++i) {
      mean += a.z[j][i];
      freq2 += a.c[j][static_cast<size_t>(i)] == 1 ? 1.0 : 0.0;
    }
  mean /= count;
  freq2 /= count;
  REQUIRE(std::abs(mean) <= 4.0 / std::sqrt(count));
  REQUIRE(std::abs(freq2 - 0.5) <= 4.0 * std::sqrt(0.25 / count));
}

TEST_CASE("cell transformation is the stated per-label affine map") {
  auto batch = make_master_batch(50, 10, 7);
  auto identity = transform_batch(batch, 0.0, 1.0);
  for (size_t j = 0; j < batch.z.size(); ++j) REQUIRE(identity[j] == batch.z[j]);

  auto shifted = transform_batch(batch, 3.0, 1.0);
  auto scaled = transform_batch(batch, 1.0, 0.1);
  for (size_t j = 0; j < batch.z.size(); ++j) {
    for (int i = 0; i < 10; ++i) {
      if (batch.c[j][static_cast<size_t>(i)] == 1) {
        REQUIRE(shifted[j][i] == batch.z[j][i] + 3.0);
        REQUIRE(scaled[j][i] == 0.1 * batch.z[j][i] + 1.0);
      } else {
        REQUIRE(shifted[j][i] == batch.z[j][i]);
        REQUIRE(scaled[j][i] == batch.z[j][i]);
      }
    }
  }
  // group-2 sample variance scales by exactly sigma^2
  for (size_t j = 0; j < 3; ++j) {
    std::vector<double> base, after;
    for (int i = 0; i < 10; ++i)
      if (batch.c[j][static_cast<size_t>(i)] == 1) {
        base.push_back(batch.z[j][i]);
        after.push_back(scaled[j][i]);
      }
    if (base.size() < 2) continue;
    auto var = [](const std::vector<double>& xs) {
      double m = 0.0;
      for (double x : xs) m += x;
      m /= static_cast<double>(xs.size());
      double v = 0.0;
      for (double x : xs) v += (x - m) * (x - m);
      return v / static_cast<double>(xs.size() - 1);
    };
    REQUIRE_THAT(var(after), WithinRel(0.01 * var(base), 1e-12));
  }
}

namespace {

struct OracleBest {
  double score = kNegInf;
  std::vector<int> a1, a2;
};

// Independent exhaustive search: recursive subset choice and the sequential
// marginal oracle, never the library's bitmask scorer.
OracleBest oracle_best_anchor_model(const Dataset& data, int m, const LocationPrior& prior,
                                    double sigma2, bool require_both) {
  OracleBest best;
  const int n = data.n();
  std::vector<int> chosen;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(chosen.size()) == m) {
      for (int b = 0; b < (1 << (m - 1)); ++b) {
        std::vector<int> a1 = {chosen[0]}, a2;
        for (int t = 1; t < m; ++t)
          ((b >> (t - 1)) & 1 ? a2 : a1).push_back(chosen[static_cast<size_t>(t)]);
        if (require_both && a2.empty()) continue;
        AnchorSet anchors({a1, a2}, n);
        double score = oracles::recursive_anchor_marginal(data, anchors, prior.mu, prior.tau2, sigma2);
        if (score > best.score) {
          best.score = score;
          best.a1 = a1;
          best.a2 = a2;
        }
      }
      return;
    }
    for (int i = start; i < n; ++i) {
      chosen.push_back(i);
      rec(i + 1);
      chosen.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace

TEST_CASE("fully anchored search degenerates to allocation enumeration") {
  std::mt19937_64 g(12);
  auto data = oracles::random_univariate_dataset(g, 6);
  LocationPrior prior{0.0, 25.0};
  auto anchors = best_anchor_model(data, 6, prior, 1.0, true);
  REQUIRE(anchors.total() == 6);
  auto oracle = oracle_best_anchor_model(data, 6, prior, 1.0, true);
  REQUIRE(anchors.set(0) == oracle.a1);
  REQUIRE(anchors.set(1) == oracle.a2);
}

TEST_CASE("best anchor model matches an independent enumeration") {
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 5; ++trial) {
    auto data = oracles::random_univariate_dataset(g, 6);
    LocationPrior prior{0.0, 25.0};
    for (int m : {2, 3}) {
      auto anchors = best_anchor_model(data, m, prior, 1.0, true);
      REQUIRE(anchors.is_canonical());
      auto oracle = oracle_best_anchor_model(data, m, prior, 1.0, true);
      REQUIRE(anchors.set(0) == oracle.a1);
      REQUIRE(anchors.set(1) == oracle.a2);
    }
  }
}

TEST_CASE("bitmask scorer agrees with the enumeration scorer") {
  std::mt19937_64 g(14);
  auto data = oracles::random_univariate_dataset(g, 8);
  LocationPrior prior{0.3, 9.0};
  auto table = anchormix::detail::allocation_score_table(data.points.col(0), prior, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::uint32_t a1 = 0, a2 = 0;
    a1 |= 1u << (g() % 8);
    std::uint32_t bit = 1u << (g() % 8);
    if (!(a1 & bit)) a2 |= bit;
    std::uint32_t free_mask = 0xffu & ~(a1 | a2);
    int n_free = 8 - __builtin_popcount(a1 | a2);
    double fast = anchormix::detail::anchor_score_from_table(table, a2, free_mask, n_free);
    std::vector<std::vector<int>> sets(2);
    for (int i = 0; i < 8; ++i) {
      if (a1 >> i & 1u) sets[0].push_back(i);
      if (a2 >> i & 1u) sets[1].push_back(i);
    }
    AnchorSet anchors(std::move(sets), 8);
    double slow = anchored_marginal_loglik_enumerate(data, anchors, prior, 1.0);
    REQUIRE_THAT(fast, WithinAbs(slow, 1e-10));
  }
}

TEST_CASE("the best-model chain is exactly monotone in m") {
  std::mt19937_64 g(15);
  for (int trial = 0; trial < 4; ++trial) {
    auto data = oracles::random_univariate_dataset(g, 8);
    LocationPrior prior{0.0, 25.0};
    double prev = kNegInf;
    for (int m = 1; m <= 8; ++m) {
      auto anchors = best_anchor_model(data, m, prior, 1.0, false);
      double score = anchored_marginal_loglik_enumerate(data, anchors, prior, 1.0);
      REQUIRE(score >= prev - 1e-10);
      prev = score;
    }
    // the both-components-anchored chain is monotone as well
    prev = kNegInf;
    for (int m = 2; m <= 8; ++m) {
      auto anchors = best_anchor_model(data, m, prior, 1.0, true);
      double score = anchored_marginal_loglik_enumerate(data, anchors, prior, 1.0);
      REQUIRE(score >= prev - 1e-10);
      prev = score;
    }
  }
}

TEST_CASE("a point-mass posterior collapses the estimator") {
  auto data = Dataset::from_column({0.1, -0.2, 2.1, 1.9});
  AnchorSet anchors({{0}, {2}}, data.n());
  LocationPrior prior{1.0, 1e-18};  // theta_1 = theta_2 = 1 almost surely
  std::vector<Eigen::VectorXd> replicates;
  Eigen::VectorXd rep(3);
  rep << 0.5, 1.5, -0.3;
  replicates.push_back(rep);
  double est = elppd(data, anchors, prior, replicates, 5, 77);
  double expected = 0.0;
  for (int i = 0; i < rep.size(); ++i) {
    double z = rep[i] - 1.0;
    expected += std::log(std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI));
  }
  REQUIRE_THAT(est, WithinAbs(expected, 1e-6));
}

TEST_CASE("fully anchored estimator approaches the closed-form predictive") {
  auto data = Dataset::from_column({0.2, -0.1, 0.4, 2.2, 1.8, 2.0});
  AnchorSet anchors({{0, 1, 2}, {3, 4, 5}}, data.n());
  LocationPrior prior{0.0, 25.0};
  std::vector<Eigen::VectorXd> replicates;
  Eigen::VectorXd rep(4);
  rep << 0.0, 1.0, 2.0, 3.0;
  replicates.push_back(rep);

  // closed form: the posterior is a product of two conjugate normals
  auto conj = [&](std::initializer_list<double> ys) {
    double prec = 1.0 / prior.tau2, num = prior.mu / prior.tau2;
    for (double y : ys) {
      prec += 1.0;
      num += y;
    }
    return std::pair<double, double>{num / prec, 1.0 / prec};
  };
  auto [m1, v1] = conj({0.2, -0.1, 0.4});
  auto [m2, v2] = conj({2.2, 1.8, 2.0});
  double exact = 0.0;
  for (int i = 0; i < rep.size(); ++i)
    exact += std::log(0.5 * std::exp(normal_logpdf(rep[i], m1, 1.0 + v1)) +
                      0.5 * std::exp(normal_logpdf(rep[i], m2, 1.0 + v2)));

  std::vector<double> ests;
  for (std::uint64_t seed = 1; seed <= 6; ++seed)
    ests.push_back(elppd(data, anchors, prior, replicates, 20000, seed));
  double mean = 0.0;
  for (double e : ests) mean += e;
  mean /= static_cast<double>(ests.size());
  double sd = 0.0;
  for (double e : ests) sd += (e - mean) * (e - mean);
  sd = std::sqrt(sd / (ests.size() - 1.0));
  REQUIRE(std::abs(mean - exact) <= 3.0 * sd / std::sqrt(static_cast<double>(ests.size())) + 1e-4);
}

TEST_CASE("Monte Carlo error bands shrink with more posterior draws") {
  auto data = Dataset::from_column({0.2, -0.1, 2.2, 1.8});
  AnchorSet anchors({{0}, {2}}, data.n());
  LocationPrior prior{0.0, 25.0};
  std::vector<Eigen::VectorXd> replicates;
  Eigen::VectorXd rep(4);
  rep << 0.3, 0.9, 1.7, 2.4;
  replicates.push_back(rep);
  auto spread = [&](int T) {
    std::vector<double> ests;
    for (std::uint64_t seed = 1; seed <= 8; ++seed)
      ests.push_back(elppd(data, anchors, prior, replicates, T, seed));
    double mean = 0.0;
    for (double e : ests) mean += e;
    mean /= static_cast<double>(ests.size());
    double sd = 0.0;
    for (double e : ests) sd += (e - mean) * (e - mean);
    return std::sqrt(sd / (ests.size() - 1.0));
  };
  REQUIRE(spread(1600) < 0.7 * spread(100));
}

TEST_CASE("elppd is invariant to replicate order") {
  auto data = Dataset::from_column({0.2, -0.1, 2.2, 1.8});
  AnchorSet anchors({{0}, {2}}, data.n());
  LocationPrior prior{0.0, 25.0};
  std::vector<Eigen::VectorXd> reps;
  for (int r = 0; r < 4; ++r) {
    Eigen::VectorXd rep(3);
    rep << 0.1 * r, 1.0 - 0.2 * r, 2.0 + 0.1 * r;
    reps.push_back(rep);
  }
  auto reversed = reps;
  std::reverse(reversed.begin(), reversed.end());
  REQUIRE_THAT(elppd(data, anchors, prior, reps, 500, 3),
               WithinAbs(elppd(data, anchors, prior, reversed, 500, 3), 1e-12));
}

TEST_CASE("a small simulation run is complete, ordered, and reproducible") {
  SimConfig cfg;
  cfg.delta_grid = {0.5, 2.0};
  cfg.sigma_grid = {1.0};
  cfg.datasets = 6;
  cfg.n = 8;
  cfg.replicates = 5;
  cfg.posterior_draws = 60;
  cfg.m_min = 2;
  cfg.m_max = 4;
  cfg.seed = 11;
  auto a = run_simulation(cfg);
  auto b = run_simulation(cfg);
  REQUIRE(a.rows.size() == 2 * 1 * 3 * 6);
  REQUIRE(a.summaries.size() == 2 * 1 * 3);
  for (size_t i = 0; i < a.rows.size(); ++i) {
    REQUIRE(a.rows[i].elppd == b.rows[i].elppd);
    REQUIRE(a.rows[i].dataset == b.rows[i].dataset);
  }
  // ordered by (delta, sigma, m, dataset)
  for (size_t i = 1; i < a.rows.size(); ++i) {
    auto key = [](const SimRow& r) {
      return std::tuple<double, double, int, int>(r.delta, r.sigma, r.m, r.dataset);
    };
    REQUIRE(key(a.rows[i - 1]) < key(a.rows[i]));
  }
}
