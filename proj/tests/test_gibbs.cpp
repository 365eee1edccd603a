#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "anchormix/gibbs.hpp"
#include "anchormix/io_json.hpp"
#include "anchormix/summary.hpp"
#include "support/oracles.hpp"

using namespace anchormix;
using Catch::Matchers::WithinAbs;

namespace {

PriorSpec univariate_prior(double mu, double kappa, double a0, double b0, double alpha = 1.0) {
  PriorSpec prior;
  prior.dirichlet_alpha = alpha;
  prior.mean.mu = Eigen::VectorXd::Constant(1, mu);
  prior.mean.kappa = kappa;
  prior.precision.a0 = a0;
  prior.precision.b0 = b0;
  return prior;
}

struct MomentAccumulator {
  std::vector<std::vector<double>> batches;  // for batch-means errors
  std::vector<double> current;
  int batch_size;
  int filled = 0;

  explicit MomentAccumulator(int n_stats, int batch_size_in)
      : current(static_cast<size_t>(n_stats), 0.0), batch_size(batch_size_in) {}

  void add(const std::vector<double>& stats) {
    for (size_t t = 0; t < stats.size(); ++t) current[t] += stats[t];
    if (++filled == batch_size) {
      for (auto& c : current) c /= batch_size;
      batches.push_back(current);
      std::fill(current.begin(), current.end(), 0.0);
      filled = 0;
    }
  }

  // mean and standard error of each statistic from batch means
  std::pair<std::vector<double>, std::vector<double>> summarize() const {
    size_t n_stats = batches.front().size();
    std::vector<double> mean(n_stats, 0.0), se(n_stats, 0.0);
    for (const auto& b : batches)
      for (size_t t = 0; t < n_stats; ++t) mean[t] += b[t];
    for (auto& m : mean) m /= static_cast<double>(batches.size());
    for (const auto& b : batches)
      for (size_t t = 0; t < n_stats; ++t) se[t] += (b[t] - mean[t]) * (b[t] - mean[t]);
    for (auto& s : se)
      s = std::sqrt(s / (static_cast<double>(batches.size()) - 1.0) /
                    static_cast<double>(batches.size()));
    return {mean, se};
  }
};

}  // namespace

TEST_CASE("near-degenerate precision prior recovers the conjugate mean") {
  // With the variance pinned at ~0.8, the posterior mean of theta has the
  // usual Normal-Normal closed form.
  std::vector<double> ys = {0.4, 1.2, 0.8, 1.6, 0.2, 1.1, 0.9, 0.6};
  auto data = Dataset::from_column(ys);
  double sigma2 = 0.8, kappa = 1.5, mu = 0.0;
  PriorSpec prior = univariate_prior(mu, kappa, 1e6, 1e6 * sigma2);
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.iterations = 4000;
  cfg.burn_in = 500;
  cfg.total_draws = 2000;
  cfg.seed = 17;
  auto draws = gibbs_fit(data, AnchorSet::empty(1, data.n()), prior, cfg);
  REQUIRE(draws.draws.size() == 2000);

  double sum = 0.0, sumsq = 0.0;
  for (const auto& d : draws.draws) {
    sum += d.theta(0, 0);
    sumsq += d.theta(0, 0) * d.theta(0, 0);
  }
  double m = sum / 2000.0;
  double sd = std::sqrt(sumsq / 2000.0 - m * m);
  double ybar_total = 0.0;
  for (double y : ys) ybar_total += y;
  double expected = (kappa * mu + ybar_total / sigma2) / (kappa + ys.size() / sigma2);
  // 3 Monte Carlo standard errors, inflated for autocorrelation
  REQUIRE_THAT(m, WithinAbs(expected, 3.0 * sd / std::sqrt(2000.0) * 3.0 + 1e-3));
}

TEST_CASE("fully anchored data never moves its allocations") {
  auto data = Dataset::from_column({-1.0, -0.8, 2.0, 2.2});
  AnchorSet anchors({{0, 1}, {2, 3}}, data.n());
  PriorSpec prior = univariate_prior(0.0, 1.0, 2.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 200;
  cfg.burn_in = 50;
  cfg.total_draws = 100;
  cfg.seed = 3;
  auto draws = gibbs_fit(data, anchors, prior, cfg);
  for (const auto& d : draws.draws) REQUIRE(d.s == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("every stored draw stays inside the anchored support") {
  std::mt19937_64 g(64);
  auto data = oracles::random_univariate_dataset(g, 12);
  AnchorSet anchors({{0, 5}, {3}}, data.n());
  PriorSpec prior = univariate_prior(0.0, 0.5, 2.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.iterations = 500;
  cfg.burn_in = 100;
  cfg.total_draws = 300;
  cfg.seed = 5;
  auto draws = gibbs_fit(data, anchors, prior, cfg);
  for (const auto& d : draws.draws) {
    AllocationVector alloc{d.s};
    REQUIRE(alloc.compatible_with(anchors));
  }
}

TEST_CASE("exchangeable two-point symmetry holds without anchors") {
  auto data = Dataset::from_column({-2.0, -1.9, -2.1, 1.9, 2.0, 2.1});
  PriorSpec prior = univariate_prior(0.0, 0.5, 3.0, 2.0);
  SamplerConfig cfg;
  cfg.chains = 24;
  cfg.iterations = 3000;
  cfg.burn_in = 500;
  cfg.total_draws = 6000;
  cfg.seed = 23;
  auto draws = gibbs_fit(data, AnchorSet::empty(2, data.n()), prior, cfg);
  double m1 = 0.0, m2 = 0.0;
  for (const auto& d : draws.draws) {
    m1 += d.theta(0, 0);
    m2 += d.theta(1, 0);
  }
  m1 /= static_cast<double>(draws.draws.size());
  m2 /= static_cast<double>(draws.draws.size());
  // Posterior symmetry: both component means target the same value; chains
  // mix across labelings, so agreement is within Monte Carlo noise.
  REQUIRE_THAT(m1 - m2, WithinAbs(0.0, 0.35));
}

TEST_CASE("anchored separated data orders the component means by anchor value") {
  auto data = Dataset::from_column({-2.0, -1.9, -2.1, 1.9, 2.0, 2.1});
  AnchorSet anchors({{0}, {4}}, data.n());
  PriorSpec prior = univariate_prior(0.0, 0.5, 3.0, 2.0);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.iterations = 1500;
    cfg.burn_in = 300;
    cfg.total_draws = 2000;
    cfg.seed = seed;
    auto draws = gibbs_fit(data, anchors, prior, cfg);
    double m1 = 0.0, m2 = 0.0;
    for (const auto& d : draws.draws) {
      m1 += d.theta(0, 0);
      m2 += d.theta(1, 0);
    }
    REQUIRE(m1 < m2);
  }
}

TEST_CASE("forward and successive-conditional moments agree (fixed rate)") {
  // Joint-correctness check on a k=2, n=6 anchored model: the sampler's
  // transition must preserve the prior-times-likelihood joint.
  const int n = 6, k = 2;
  PriorSpec prior = univariate_prior(0.0, 1.0, 3.0, 2.0);
  AnchorSet anchors({{0}, {1}}, n);
  auto row_comp = anchors.row_components();

  const int forward_draws = 60000;
  auto g_fwd = rng::stream(2024, {11});
  MomentAccumulator fwd(6, 600);
  for (int t = 0; t < forward_draws; ++t) {
    Eigen::VectorXd eta = rng::dirichlet(g_fwd, Eigen::VectorXd::Constant(k, 1.0));
    double th1 = rng::normal(g_fwd), th2 = rng::normal(g_fwd);
    double s21 = 1.0 / rng::gamma(g_fwd, 3.0, 2.0), s22 = 1.0 / rng::gamma(g_fwd, 3.0, 2.0);
    fwd.add({th1, th2, s21, s22, th1 * th1, eta[0]});
  }

  const int chain_steps = 60000;
  auto g_cond = rng::stream(2024, {12});
  UnivariateGibbsState st;
  st.theta = Eigen::VectorXd::Zero(k);
  st.sigma2 = Eigen::VectorXd::Ones(k);
  st.eta = Eigen::VectorXd::Constant(k, 0.5);
  st.b0 = prior.precision.b0;
  st.s = {0, 1, 0, 0, 1, 1};
  Dataset data = Dataset::from_column(std::vector<double>(n, 0.0));
  MomentAccumulator cond(6, 600);
  for (int t = 0; t < chain_steps; ++t) {
    for (int i = 0; i < n; ++i) {
      int j = st.s[static_cast<size_t>(i)];
      data.points(i, 0) = st.theta[j] + std::sqrt(st.sigma2[j]) * rng::normal(g_cond);
    }
    univariate_gibbs_sweep(st, data, row_comp, prior, g_cond);
    cond.add({st.theta[0], st.theta[1], st.sigma2[0], st.sigma2[1], st.theta[0] * st.theta[0],
              st.eta[0]});
  }

  auto [fm, fse] = fwd.summarize();
  auto [cm, cse] = cond.summarize();
  for (size_t t = 0; t < fm.size(); ++t) {
    double se = std::sqrt(fse[t] * fse[t] + cse[t] * cse[t]);
    INFO("statistic " << t << ": forward " << fm[t] << " conditional " << cm[t] << " se " << se);
    REQUIRE(std::abs(fm[t] - cm[t]) <= 4.0 * se);
  }
}

TEST_CASE("forward and successive-conditional moments agree (random rate)") {
  const int n = 6, k = 2;
  PriorSpec prior = univariate_prior(0.0, 1.0, 3.0, 0.0);
  prior.precision.b0_random = true;
  prior.precision.g = 4.0;
  prior.precision.h = 2.0;
  AnchorSet anchors({{0}, {1}}, n);
  auto row_comp = anchors.row_components();

  const int forward_draws = 60000;
  auto g_fwd = rng::stream(99, {21});
  MomentAccumulator fwd(5, 600);
  for (int t = 0; t < forward_draws; ++t) {
    double b0 = rng::gamma(g_fwd, 4.0, 2.0);
    double th1 = rng::normal(g_fwd);
    double s21 = 1.0 / rng::gamma(g_fwd, 3.0, b0), s22 = 1.0 / rng::gamma(g_fwd, 3.0, b0);
    fwd.add({b0, th1, s21, s22, b0 * b0});
  }

  const int chain_steps = 60000;
  auto g_cond = rng::stream(99, {22});
  UnivariateGibbsState st;
  st.theta = Eigen::VectorXd::Zero(k);
  st.sigma2 = Eigen::VectorXd::Ones(k);
  st.eta = Eigen::VectorXd::Constant(k, 0.5);
  st.b0 = 2.0;
  st.s = {0, 1, 1, 0, 1, 0};
  Dataset data = Dataset::from_column(std::vector<double>(n, 0.0));
  MomentAccumulator cond(5, 600);
  for (int t = 0; t < chain_steps; ++t) {
    for (int i = 0; i < n; ++i) {
      int j = st.s[static_cast<size_t>(i)];
      data.points(i, 0) = st.theta[j] + std::sqrt(st.sigma2[j]) * rng::normal(g_cond);
    }
    univariate_gibbs_sweep(st, data, row_comp, prior, g_cond);
    cond.add({st.b0, st.theta[0], st.sigma2[0], st.sigma2[1], st.b0 * st.b0});
  }

  auto [fm, fse] = fwd.summarize();
  auto [cm, cse] = cond.summarize();
  for (size_t t = 0; t < fm.size(); ++t) {
    double se = std::sqrt(fse[t] * fse[t] + cse[t] * cse[t]);
    INFO("statistic " << t << ": forward " << fm[t] << " conditional " << cm[t] << " se " << se);
    REQUIRE(std::abs(fm[t] - cm[t]) <= 4.0 * se);
  }
}

TEST_CASE("multivariate forward and successive-conditional moments agree") {
  const int n = 6, k = 2, p = 2;
  PriorSpec prior;
  prior.dirichlet_alpha = 1.0;
  prior.mean.mu = Eigen::VectorXd::Zero(p);
  prior.mean.kappa = 2.0;
  prior.wishart = WishartPrior{6.0, Eigen::MatrixXd::Identity(p, p) * 0.5};
  AnchorSet anchors({{0}, {1}}, n);
  auto row_comp = anchors.row_components();
  Eigen::MatrixXd w_inv = prior.wishart->scale.llt().solve(Eigen::MatrixXd::Identity(p, p));

  const int forward_draws = 40000;
  auto g_fwd = rng::stream(7, {31});
  MomentAccumulator fwd(4, 400);
  for (int t = 0; t < forward_draws; ++t) {
    Eigen::MatrixXd prec = rng::wishart(g_fwd, prior.wishart->nu, prior.wishart->scale);
    Eigen::MatrixXd sigma = prec.llt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    Eigen::VectorXd theta =
        rng::mvn_from_chol(g_fwd, prior.mean.mu, Eigen::MatrixXd(llt.matrixL()) / std::sqrt(prior.mean.kappa));
    fwd.add({theta[0], theta[1], sigma(0, 0), sigma(0, 1)});
  }

  const int chain_steps = 40000;
  auto g_cond = rng::stream(7, {32});
  MultivariateGibbsState st;
  st.theta = Eigen::MatrixXd::Zero(k, p);
  st.sigma.assign(static_cast<size_t>(k), Eigen::MatrixXd::Identity(p, p));
  st.sigma_chol.assign(static_cast<size_t>(k), Eigen::MatrixXd::Identity(p, p));
  st.eta = Eigen::VectorXd::Constant(k, 0.5);
  st.s = {0, 1, 0, 1, 0, 1};
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(n, p);
  Dataset data = Dataset::from_matrix(pts);
  MomentAccumulator cond(4, 400);
  for (int t = 0; t < chain_steps; ++t) {
    for (int i = 0; i < n; ++i) {
      int j = st.s[static_cast<size_t>(i)];
      data.points.row(i) =
          rng::mvn_from_chol(g_cond, st.theta.row(j).transpose(), st.sigma_chol[static_cast<size_t>(j)])
              .transpose();
    }
    multivariate_gibbs_sweep(st, data, row_comp, prior, w_inv, g_cond);
    cond.add({st.theta(0, 0), st.theta(0, 1), st.sigma[0](0, 0), st.sigma[0](0, 1)});
  }

  auto [fm, fse] = fwd.summarize();
  auto [cm, cse] = cond.summarize();
  for (size_t t = 0; t < fm.size(); ++t) {
    double se = std::sqrt(fse[t] * fse[t] + cse[t] * cse[t]);
    INFO("statistic " << t << ": forward " << fm[t] << " conditional " << cm[t] << " se " << se);
    REQUIRE(std::abs(fm[t] - cm[t]) <= 4.0 * se);
  }
}

TEST_CASE("same seed reproduces the draws exactly") {
  std::mt19937_64 g(77);
  auto data = oracles::random_univariate_dataset(g, 10);
  AnchorSet anchors({{0}, {1}}, data.n());
  PriorSpec prior = univariate_prior(0.0, 1.0, 2.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.iterations = 300;
  cfg.burn_in = 100;
  cfg.total_draws = 150;
  cfg.seed = 42;
  auto a = gibbs_fit(data, anchors, prior, cfg);
  auto b = gibbs_fit(data, anchors, prior, cfg);
  REQUIRE(a.draws.size() == b.draws.size());
  for (size_t t = 0; t < a.draws.size(); ++t) {
    REQUIRE(a.draws[t].chain == b.draws[t].chain);
    REQUIRE(a.draws[t].iter == b.draws[t].iter);
    REQUIRE(a.draws[t].theta == b.draws[t].theta);
    REQUIRE(a.draws[t].s == b.draws[t].s);
  }
}

TEST_CASE("summaries are order-invariant and handle constant draws") {
  PosteriorDraws draws;
  draws.k = 1;
  draws.p = 1;
  for (int t = 0; t < 40; ++t) {
    DrawRecord rec;
    rec.chain = t % 4;
    rec.iter = t;
    rec.theta = Eigen::MatrixXd::Constant(1, 1, 2.5);
    rec.covs = {Eigen::MatrixXd::Constant(1, 1, 1.21)};
    rec.eta = Eigen::VectorXd::Constant(1, 1.0);
    rec.s = {0, 0};
    draws.draws.push_back(rec);
  }
  auto summary = summarize(draws);
  REQUIRE(summary.components[0].theta[0].sd == 0.0);
  REQUIRE(summary.components[0].theta_kde[0].point_mass);
  REQUIRE_THAT(summary.components[0].theta_kde[0].value, WithinAbs(2.5, 1e-15));
  REQUIRE_THAT(summary.components[0].scale[0].mean, WithinAbs(1.1, 1e-12));  // sigma scale

  auto shuffled = draws;
  std::mt19937_64 g(5);
  std::shuffle(shuffled.draws.begin(), shuffled.draws.end(), g);
  auto summary2 = summarize(shuffled);
  REQUIRE(summary2.components[0].theta[0].mean == summary.components[0].theta[0].mean);
  REQUIRE(summary2.components[0].theta[0].sd == summary.components[0].theta[0].sd);
}

TEST_CASE("allocation tables are one-hot for fully anchored single-row groups") {
  auto data = Dataset::from_column({-1.0, 2.0, 5.0});
  data.groups = std::vector<std::string>{"a", "b", "c"};
  AnchorSet anchors({{0}, {1}, {2}}, data.n());
  PriorSpec prior = univariate_prior(0.0, 1.0, 2.0, 1.0);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 100;
  cfg.burn_in = 20;
  cfg.total_draws = 60;
  cfg.seed = 9;
  auto draws = gibbs_fit(data, anchors, prior, cfg);
  auto table = allocation_table(draws, data);
  REQUIRE(table.groups == std::vector<std::string>{"a", "b", "c"});
  for (int gi = 0; gi < 3; ++gi) {
    REQUIRE_THAT(table.probs.row(gi).sum(), WithinAbs(1.0, 1e-12));
    REQUIRE(table.probs(gi, gi) == 1.0);
  }
}

TEST_CASE("multivariate draws survive a CSV round-trip") {
  std::mt19937_64 g(404);
  const int n = 10, p = 2;
  Eigen::MatrixXd pts(n, p);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < p; ++d) pts(i, d) = normal(g) + (i % 2 ? 3.0 : 0.0);
  auto data = Dataset::from_matrix(pts);
  AnchorSet anchors({{0}, {1}}, n);
  PriorSpec prior;
  prior.dirichlet_alpha = 1.0;
  prior.mean.mu = Eigen::VectorXd::Zero(p);
  prior.mean.kappa = 0.5;
  prior.wishart = WishartPrior{5.0, Eigen::MatrixXd::Identity(p, p)};
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 120;
  cfg.burn_in = 20;
  cfg.total_draws = 50;
  cfg.seed = 12;
  auto draws = gibbs_fit(data, anchors, prior, cfg);

  std::ostringstream os;
  write_draws_csv(os, draws);
  std::istringstream in(os.str());
  auto back = read_draws_csv(in, 2, p);
  REQUIRE_FALSE(back.b0_active);
  REQUIRE(back.draws.size() == draws.draws.size());
  for (size_t t = 0; t < draws.draws.size(); ++t) {
    REQUIRE(back.draws[t].chain == draws.draws[t].chain);
    REQUIRE(back.draws[t].iter == draws.draws[t].iter);
    REQUIRE(back.draws[t].theta == draws.draws[t].theta);
    REQUIRE(back.draws[t].eta == draws.draws[t].eta);
    REQUIRE(back.draws[t].s == draws.draws[t].s);
    for (int j = 0; j < 2; ++j)
      REQUIRE(back.draws[t].covs[static_cast<size_t>(j)] == draws.draws[t].covs[static_cast<size_t>(j)]);
  }
}

TEST_CASE("allocation table requires groups") {
  auto data = Dataset::from_column({0.0, 1.0});
  PosteriorDraws draws;
  draws.k = 1;
  draws.p = 1;
  DrawRecord rec;
  rec.theta = Eigen::MatrixXd::Zero(1, 1);
  rec.covs = {Eigen::MatrixXd::Ones(1, 1)};
  rec.eta = Eigen::VectorXd::Ones(1);
  rec.s = {0, 0};
  draws.draws.push_back(rec);
  REQUIRE_THROWS_AS(allocation_table(draws, data), validation_error);
}
