#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "anchormix/density.hpp"
#include "support/oracles.hpp"

using namespace anchormix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("mixture logpdf, single standard normal at zero") {
  auto params = MixtureParams::univariate({0.0}, {1.0}, {1.0});
  REQUIRE_THAT(mixture_logpdf(params, 0.0), WithinAbs(-0.9189385, 1e-7));
}

TEST_CASE("mixture logpdf with identical components collapses to one") {
  auto one = MixtureParams::univariate({1.3}, {0.7}, {1.0});
  for (double w1 : {0.2, 0.5, 0.9}) {
    auto two = MixtureParams::univariate({1.3, 1.3}, {0.7, 0.7}, {w1, 1.0 - w1});
    for (double y : {-2.0, 0.0, 1.3, 4.5})
      REQUIRE_THAT(mixture_logpdf(two, y), WithinAbs(mixture_logpdf(one, y), 1e-13));
  }
}

TEST_CASE("mixture logpdf matches a plain two-term sum") {
  auto params = MixtureParams::univariate({0.0, 3.0}, {1.0, 1.0}, {0.3, 0.7});
  double y = 1.0;
  double phi1 = std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI);
  double phi2 = std::exp(-0.5 * (y - 3.0) * (y - 3.0)) / std::sqrt(2.0 * M_PI);
  REQUIRE_THAT(mixture_logpdf(params, y), WithinAbs(std::log(0.3 * phi1 + 0.7 * phi2), 1e-12));
}

TEST_CASE("multivariate logpdf matches the direct diagonal formula") {
  Eigen::VectorXd mean(2);
  mean << 1.0, -2.0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  cov(0, 0) = 2.0;
  cov(1, 1) = 0.5;
  Eigen::VectorXd y(2);
  y << 0.2, -1.0;
  double expected = normal_logpdf(y[0], mean[0], 2.0) + normal_logpdf(y[1], mean[1], 0.5);
  REQUIRE_THAT(mvn_logpdf(y, mean, cov), WithinAbs(expected, 1e-12));
}

TEST_CASE("mixture logpdf rejects a non-SPD scale") {
  MixtureParams params;
  params.means = Eigen::MatrixXd::Zero(1, 2);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  params.covs = {bad};
  params.weights = Eigen::VectorXd::Constant(1, 1.0);
  REQUIRE_THROWS_AS(mixture_logpdf(params, Eigen::VectorXd::Zero(2)), validation_error);
}

TEST_CASE("anchored loglik with no anchors equals the mixture loglik") {
  auto data = Dataset::from_column({-1.0, 0.2, 0.4, 2.9, 3.3});
  auto params = MixtureParams::univariate({0.0, 3.0}, {1.0, 0.5}, {0.4, 0.6});
  double expected = 0.0;
  for (int i = 0; i < data.n(); ++i) expected += mixture_logpdf(params, data.points(i, 0));
  REQUIRE(anchored_loglik(data, AnchorSet::empty(2, data.n()), params) == expected);
}

TEST_CASE("fully anchored loglik carries no weight factor") {
  auto data = Dataset::from_column({-1.0, 0.2, 2.9, 3.3});
  AnchorSet anchors({{0, 1}, {2, 3}}, data.n());
  auto a = MixtureParams::univariate({0.0, 3.0}, {1.0, 0.5}, {0.5, 0.5});
  auto b = MixtureParams::univariate({0.0, 3.0}, {1.0, 0.5}, {0.05, 0.95});
  double expected = 0.0;
  for (int i : {0, 1}) expected += normal_logpdf(data.points(i, 0), 0.0, 1.0);
  for (int i : {2, 3}) expected += normal_logpdf(data.points(i, 0), 3.0, 0.5);
  REQUIRE_THAT(anchored_loglik(data, anchors, a), WithinAbs(expected, 1e-12));
  REQUIRE(anchored_loglik(data, anchors, a) == anchored_loglik(data, anchors, b));
}

TEST_CASE("anchored loglik matches a hand-expanded four-row model") {
  auto data = Dataset::from_column({0.1, 2.8, 1.0, 1.7});
  AnchorSet anchors({{0}, {1}}, data.n());
  auto params = MixtureParams::univariate({0.0, 3.0}, {1.0, 2.0}, {0.25, 0.75});
  auto phi = [](double y, double m, double s2) {
    return std::exp(-0.5 * (y - m) * (y - m) / s2) / std::sqrt(2.0 * M_PI * s2);
  };
  double expected = std::log(phi(0.1, 0.0, 1.0)) + std::log(phi(2.8, 3.0, 2.0)) +
                    std::log(0.25 * phi(1.0, 0.0, 1.0) + 0.75 * phi(1.0, 3.0, 2.0)) +
                    std::log(0.25 * phi(1.7, 0.0, 1.0) + 0.75 * phi(1.7, 3.0, 2.0));
  REQUIRE_THAT(anchored_loglik(data, anchors, params), WithinAbs(expected, 1e-12));
}

TEST_CASE("responsibilities of identical components equal the weights") {
  auto data = Dataset::from_column({-0.3, 0.8, 5.1});
  auto params = MixtureParams::univariate({1.0, 1.0, 1.0}, {2.0, 2.0, 2.0}, {0.2, 0.5, 0.3});
  auto resp = responsibilities(data, params);
  for (int i = 0; i < data.n(); ++i)
    for (int j = 0; j < 3; ++j) REQUIRE_THAT(resp.r(i, j), WithinAbs(params.weights[j], 1e-12));
}

TEST_CASE("anchored rows are one-hot") {
  auto data = Dataset::from_column({-0.3, 0.8, 5.1});
  auto params = MixtureParams::univariate({0.0, 5.0}, {1.0, 1.0}, {0.5, 0.5});
  AnchorSet anchors({{}, {1}}, data.n());
  auto resp = responsibilities(data, params, anchors);
  REQUIRE(resp.r(1, 0) == 0.0);
  REQUIRE(resp.r(1, 1) == 1.0);
}

TEST_CASE("two-component responsibility has the logistic form") {
  auto data = Dataset::from_column({1.0});
  auto params = MixtureParams::univariate({0.0, 4.0}, {1.0, 1.0}, {0.5, 0.5});
  auto resp = responsibilities(data, params);
  double logit = (-0.5 * 1.0) - (-0.5 * 9.0);  // log phi(1;0,1) - log phi(1;4,1)
  REQUIRE_THAT(resp.r(0, 0), WithinAbs(1.0 / (1.0 + std::exp(-logit)), 1e-12));
}

TEST_CASE("responsibility rows are stochastic on random inputs") {
  std::mt19937_64 g(71);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(g() % 10);
    int k = 2 + static_cast<int>(g() % 3);
    auto data = oracles::random_univariate_dataset(g, n);
    std::vector<double> means(static_cast<size_t>(k)), vars(static_cast<size_t>(k)), w(static_cast<size_t>(k));
    double wsum = 0.0;
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    for (int j = 0; j < k; ++j) {
      means[static_cast<size_t>(j)] = unif(g) * 6.0 - 3.0;
      vars[static_cast<size_t>(j)] = 0.2 + unif(g);
      w[static_cast<size_t>(j)] = unif(g);
      wsum += w[static_cast<size_t>(j)];
    }
    for (auto& x : w) x /= wsum;
    w[0] += 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
    auto params = MixtureParams::univariate(means, vars, w);
    auto resp = responsibilities(data, params);
    REQUIRE_NOTHROW(resp.validate());
  }
}

TEST_CASE("jointly underflowing row raises a numerical-degeneracy error naming it") {
  auto data = Dataset::from_column({0.0, 1e160});
  auto params = MixtureParams::univariate({0.0, 1.0}, {1.0, 1.0}, {0.5, 0.5});
  try {
    responsibilities(data, params);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    REQUIRE(std::string(e.what()).find("row 1") != std::string::npos);
  }
}
