#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/gibbs.hpp"

namespace anchormix {

struct SeriesSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct KdeGrid {
  bool point_mass = false;
  double value = 0.0;  // the point-mass location when degenerate
  std::vector<double> grid;
  std::vector<double> density;
};

struct Kde2dGrid {
  int dim_a = 0, dim_b = 0;
  std::vector<double> grid_a, grid_b;
  std::vector<double> density;  // row-major over (grid_a, grid_b)
};

namespace detail {

inline SeriesSummary series_summary(const std::vector<double>& xs) {
  SeriesSummary s;
  double n = static_cast<double>(xs.size());
  for (double x : xs) s.mean += x;
  s.mean /= n;
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / (n - 1.0));
  }
  return s;
}

inline double silverman_bandwidth(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  auto s = series_summary(xs);
  double iqr = quantile_of_sorted(xs, 0.75) - quantile_of_sorted(xs, 0.25);
  double spread = iqr > 0.0 ? std::min(s.sd, iqr / 1.34) : s.sd;
  return 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
}

inline KdeGrid kde_1d(const std::vector<double>& xs, int grid_size) {
  KdeGrid out;
  double h = silverman_bandwidth(xs);
  if (!(h > 0.0)) {
    out.point_mass = true;
    out.value = xs.front();
    return out;
  }
  double lo = *std::min_element(xs.begin(), xs.end()) - 3.0 * h;
  double hi = *std::max_element(xs.begin(), xs.end()) + 3.0 * h;
  out.grid.resize(static_cast<size_t>(grid_size));
  out.density.resize(static_cast<size_t>(grid_size));
  const double norm = 1.0 / (static_cast<double>(xs.size()) * h * std::sqrt(2.0 * M_PI));
  for (int t = 0; t < grid_size; ++t) {
    double gx = lo + (hi - lo) * t / (grid_size - 1);
    double acc = 0.0;
    for (double x : xs) {
      double z = (gx - x) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out.grid[static_cast<size_t>(t)] = gx;
    out.density[static_cast<size_t>(t)] = norm * acc;
  }
  return out;
}

inline Kde2dGrid kde_2d(const std::vector<double>& xa, const std::vector<double>& xb, int dim_a,
                        int dim_b, int grid_size) {
  Kde2dGrid out;
  out.dim_a = dim_a;
  out.dim_b = dim_b;
  double ha = silverman_bandwidth(xa), hb = silverman_bandwidth(xb);
  if (!(ha > 0.0) || !(hb > 0.0)) return out;  // degenerate: empty grid
  double alo = *std::min_element(xa.begin(), xa.end()) - 3.0 * ha;
  double ahi = *std::max_element(xa.begin(), xa.end()) + 3.0 * ha;
  double blo = *std::min_element(xb.begin(), xb.end()) - 3.0 * hb;
  double bhi = *std::max_element(xb.begin(), xb.end()) + 3.0 * hb;
  out.grid_a.resize(static_cast<size_t>(grid_size));
  out.grid_b.resize(static_cast<size_t>(grid_size));
  for (int t = 0; t < grid_size; ++t) {
    out.grid_a[static_cast<size_t>(t)] = alo + (ahi - alo) * t / (grid_size - 1);
    out.grid_b[static_cast<size_t>(t)] = blo + (bhi - blo) * t / (grid_size - 1);
  }
  out.density.assign(static_cast<size_t>(grid_size) * grid_size, 0.0);
  const double norm =
      1.0 / (static_cast<double>(xa.size()) * ha * hb * 2.0 * M_PI);
  for (size_t i = 0; i < xa.size(); ++i) {
    for (int ta = 0; ta < grid_size; ++ta) {
      double za = (out.grid_a[static_cast<size_t>(ta)] - xa[i]) / ha;
      double ea = std::exp(-0.5 * za * za);
      if (ea < 1e-16) continue;
      for (int tb = 0; tb < grid_size; ++tb) {
        double zb = (out.grid_b[static_cast<size_t>(tb)] - xb[i]) / hb;
        out.density[static_cast<size_t>(ta) * grid_size + tb] += ea * std::exp(-0.5 * zb * zb);
      }
    }
  }
  for (double& d : out.density) d *= norm;
  return out;
}

}  // namespace detail

struct ComponentSummary {
  std::vector<SeriesSummary> theta;      // one per dimension
  std::vector<SeriesSummary> scale;      // p=1: sigma (sd scale); p>1: Sigma diagonal
  std::vector<KdeGrid> theta_kde;
  std::vector<KdeGrid> scale_kde;
  std::vector<Kde2dGrid> theta_kde2d;    // pairwise, multivariate only
};

struct FitSummary {
  int k = 0;
  int p = 0;
  size_t n_draws = 0;
  std::vector<ComponentSummary> components;
  std::vector<SeriesSummary> eta;
  std::optional<SeriesSummary> b0;
  std::string kde_bandwidth = "silverman";
  int kde_grid = 512;
  int kde2d_grid = 64;
};

// Deterministic posterior summaries: means/sds, Silverman-bandwidth Gaussian
// KDE grids per scalar series, pairwise 2-D grids for multivariate means.
inline FitSummary summarize(const PosteriorDraws& draws) {
  if (draws.draws.empty()) throw validation_error("cannot summarize an empty draw set");
  FitSummary out;
  out.k = draws.k;
  out.p = draws.p;
  out.n_draws = draws.draws.size();
  const size_t m = draws.draws.size();

  for (int j = 0; j < draws.k; ++j) {
    ComponentSummary cs;
    for (int d = 0; d < draws.p; ++d) {
      std::vector<double> series(m);
      for (size_t t = 0; t < m; ++t) series[t] = draws.draws[t].theta(j, d);
      cs.theta.push_back(detail::series_summary(series));
      cs.theta_kde.push_back(detail::kde_1d(series, out.kde_grid));
    }
    for (int d = 0; d < draws.p; ++d) {
      std::vector<double> series(m);
      for (size_t t = 0; t < m; ++t) {
        double v = draws.draws[t].covs[static_cast<size_t>(j)](d, d);
        series[t] = draws.p == 1 ? std::sqrt(v) : v;
      }
      cs.scale.push_back(detail::series_summary(series));
      cs.scale_kde.push_back(detail::kde_1d(series, out.kde_grid));
    }
    if (draws.p > 1) {
      for (int a = 0; a < draws.p; ++a) {
        for (int b = a + 1; b < draws.p; ++b) {
          std::vector<double> xa(m), xb(m);
          for (size_t t = 0; t < m; ++t) {
            xa[t] = draws.draws[t].theta(j, a);
            xb[t] = draws.draws[t].theta(j, b);
          }
          cs.theta_kde2d.push_back(detail::kde_2d(xa, xb, a, b, out.kde2d_grid));
        }
      }
    }
    out.components.push_back(std::move(cs));
  }
  for (int j = 0; j < draws.k; ++j) {
    std::vector<double> series(m);
    for (size_t t = 0; t < m; ++t) series[t] = draws.draws[t].eta[j];
    out.eta.push_back(detail::series_summary(series));
  }
  if (draws.b0_active) {
    std::vector<double> series(m);
    for (size_t t = 0; t < m; ++t) series[t] = draws.draws[t].b0;
    out.b0 = detail::series_summary(series);
  }
  return out;
}

struct AllocationTable {
  std::vector<std::string> groups;  // first-appearance order
  Eigen::MatrixXd probs;            // groups x components, rows sum to 1
};

// Relative allocation frequency of each component, averaged over the rows of
// each group.
inline AllocationTable allocation_table(const PosteriorDraws& draws, const Dataset& data) {
  if (!data.groups) throw validation_error("allocation table requires group tags on the dataset");
  if (draws.draws.empty()) throw validation_error("allocation table requires posterior draws");
  AllocationTable out;
  std::map<std::string, int> index;
  std::vector<std::vector<int>> rows_in_group;
  for (int i = 0; i < data.n(); ++i) {
    const std::string& gname = (*data.groups)[static_cast<size_t>(i)];
    auto it = index.find(gname);
    if (it == index.end()) {
      index.emplace(gname, static_cast<int>(out.groups.size()));
      out.groups.push_back(gname);
      rows_in_group.emplace_back();
      it = index.find(gname);
    }
    rows_in_group[static_cast<size_t>(it->second)].push_back(i);
  }
  out.probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.groups.size()), draws.k);
  for (const auto& rec : draws.draws)
    for (size_t gidx = 0; gidx < rows_in_group.size(); ++gidx)
      for (int i : rows_in_group[gidx]) out.probs(static_cast<Eigen::Index>(gidx), rec.s[static_cast<size_t>(i)]) += 1.0;
  for (size_t gidx = 0; gidx < rows_in_group.size(); ++gidx)
    out.probs.row(static_cast<Eigen::Index>(gidx)) /=
        static_cast<double>(draws.draws.size() * rows_in_group[gidx].size());
  return out;
}

}  // namespace anchormix
