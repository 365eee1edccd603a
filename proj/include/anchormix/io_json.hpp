#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchormix/anchors.hpp"
#include "anchormix/asymptotics.hpp"
#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/em.hpp"
#include "anchormix/entropy_select.hpp"
#include "anchormix/gibbs.hpp"
#include "anchormix/params.hpp"
#include "anchormix/predictive.hpp"
#include "anchormix/summary.hpp"

namespace anchormix {

using nlohmann::json;

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw validation_error("expected a non-empty numeric matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw validation_error("ragged matrix in JSON");
    for (size_t c = 0; c < j[i].size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
  }
  return m;
}

inline json params_to_json(const MixtureParams& params) {
  json covs = json::array();
  for (const auto& c : params.covs) covs.push_back(to_json(c));
  return json{{"means", to_json(params.means)}, {"covs", covs}, {"weights", to_json(params.weights)}};
}

inline MixtureParams params_from_json(const json& j) {
  MixtureParams params;
  params.means = matrix_from_json(j.at("means"));
  for (const auto& c : j.at("covs")) params.covs.push_back(matrix_from_json(c));
  Eigen::MatrixXd w = matrix_from_json(json::array({j.at("weights")}));
  params.weights = w.row(0).transpose();
  params.validate();
  return params;
}

// Row indices are serialized 1-based everywhere a person will read them.
inline json anchors_to_json(const AnchorSet& anchors, const Dataset& data) {
  json out = json::array();
  for (int j = 0; j < anchors.k(); ++j) {
    json rows = json::array(), ids = json::array(), values = json::array();
    for (int i : anchors.set(j)) {
      rows.push_back(i + 1);
      ids.push_back(data.ids[static_cast<size_t>(i)]);
      json coord = json::array();
      for (int d = 0; d < data.p(); ++d) coord.push_back(data.points(i, d));
      values.push_back(std::move(coord));
    }
    out.push_back(json{{"component", j + 1}, {"rows", rows}, {"ids", ids}, {"values", values}});
  }
  return out;
}

inline AnchorSet anchors_from_json(const json& j, int n_rows, int k) {
  std::vector<std::vector<int>> sets(static_cast<size_t>(k));
  for (const auto& entry : j) {
    int comp = entry.at("component").get<int>();
    if (comp < 1 || comp > k) throw validation_error("anchor component label out of range");
    for (const auto& r : entry.at("rows")) sets[static_cast<size_t>(comp - 1)].push_back(r.get<int>() - 1);
  }
  return AnchorSet(std::move(sets), n_rows);
}

inline json diagnostics_to_json(const RelabelingDistribution& dist, const std::string& gamma0_source) {
  json top = json::array();
  std::vector<size_t> order(dist.probs.size());
  for (size_t q = 0; q < order.size(); ++q) order[q] = q;
  std::partial_sort(order.begin(), order.begin() + std::min<size_t>(5, order.size()), order.end(),
                    [&](size_t a, size_t b) { return dist.probs[a] > dist.probs[b]; });
  for (size_t t = 0; t < std::min<size_t>(5, order.size()); ++t) {
    auto perm = dist.permutation(order[t]);
    json p = json::array();
    for (int x : perm) p.push_back(x + 1);
    top.push_back(json{{"permutation", p}, {"prob", dist.probs[order[t]]}});
  }
  return json{{"schema", "anchormix/diagnostics/v1"},
              {"alpha_hat", quasi_consistency_alpha(dist)},
              {"entropy", relabeling_entropy(dist)},
              {"top_permutations", top},
              {"gamma0_source", gamma0_source}};
}

inline json kde_to_json(const KdeGrid& k) {
  if (k.point_mass) return json{{"point_mass", k.value}};
  return json{{"grid", k.grid}, {"density", k.density}};
}

inline json kde2d_to_json(const Kde2dGrid& k) {
  return json{{"dims", {k.dim_a + 1, k.dim_b + 1}},
              {"grid_a", k.grid_a},
              {"grid_b", k.grid_b},
              {"density", k.density}};
}

inline json summary_to_json(const FitSummary& s, const AllocationTable* table = nullptr) {
  json comps = json::array();
  for (const auto& c : s.components) {
    json theta_mean = json::array(), theta_sd = json::array();
    json scale_mean = json::array(), scale_sd = json::array();
    for (const auto& t : c.theta) {
      theta_mean.push_back(t.mean);
      theta_sd.push_back(t.sd);
    }
    for (const auto& t : c.scale) {
      scale_mean.push_back(t.mean);
      scale_sd.push_back(t.sd);
    }
    json jc{{"theta_mean", theta_mean},
            {"theta_sd", theta_sd},
            {"scale_name", s.p == 1 ? "sigma" : "Sigma_diag"},
            {"scale_mean", scale_mean},
            {"scale_sd", scale_sd}};
    json tk = json::array(), sk = json::array();
    for (const auto& k : c.theta_kde) tk.push_back(kde_to_json(k));
    for (const auto& k : c.scale_kde) sk.push_back(kde_to_json(k));
    jc["theta_kde"] = tk;
    jc["scale_kde"] = sk;
    if (!c.theta_kde2d.empty()) {
      json k2 = json::array();
      for (const auto& k : c.theta_kde2d) k2.push_back(kde2d_to_json(k));
      jc["theta_kde2d"] = k2;
    }
    comps.push_back(std::move(jc));
  }
  json eta_mean = json::array(), eta_sd = json::array();
  for (const auto& e : s.eta) {
    eta_mean.push_back(e.mean);
    eta_sd.push_back(e.sd);
  }
  json out{{"schema", "anchormix/summary/v1"},
           {"k", s.k},
           {"p", s.p},
           {"n_draws", s.n_draws},
           {"components", comps},
           {"eta_mean", eta_mean},
           {"eta_sd", eta_sd},
           {"settings",
            {{"kde_bandwidth", s.kde_bandwidth}, {"kde_grid", s.kde_grid}, {"kde2d_grid", s.kde2d_grid}}}};
  if (s.b0) out["b0"] = json{{"mean", s.b0->mean}, {"sd", s.b0->sd}};
  if (table) {
    json probs = json::array();
    for (Eigen::Index g = 0; g < table->probs.rows(); ++g) {
      json row = json::array();
      for (Eigen::Index j = 0; j < table->probs.cols(); ++j) row.push_back(table->probs(g, j));
      probs.push_back(std::move(row));
    }
    out["allocation_table"] = json{{"groups", table->groups}, {"probs", probs}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Draw storage: CSV, one row per draw, schema-tagged comment first.

inline constexpr const char* kDrawsSchema = "anchormix/draws/v1";

inline void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  out << "# schema: " << kDrawsSchema << "\n";
  out << "chain,iter";
  if (draws.p == 1) {
    for (int j = 1; j <= draws.k; ++j) out << ",theta." << j;
    for (int j = 1; j <= draws.k; ++j) out << ",sigma2." << j;
  } else {
    for (int j = 1; j <= draws.k; ++j)
      for (int d = 1; d <= draws.p; ++d) out << ",theta." << j << "." << d;
    for (int j = 1; j <= draws.k; ++j)
      for (int r = 1; r <= draws.p; ++r)
        for (int c = r; c <= draws.p; ++c) out << ",Sigma." << j << "." << r << "." << c;
  }
  for (int j = 1; j <= draws.k; ++j) out << ",eta." << j;
  if (draws.b0_active) out << ",b0";
  size_t n = draws.draws.empty() ? 0 : draws.draws.front().s.size();
  for (size_t i = 1; i <= n; ++i) out << ",s." << i;
  out << "\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << "," << buf;
  };
  for (const auto& d : draws.draws) {
    out << d.chain + 1 << "," << d.iter;
    if (draws.p == 1) {
      for (int j = 0; j < draws.k; ++j) put(d.theta(j, 0));
      for (int j = 0; j < draws.k; ++j) put(d.covs[static_cast<size_t>(j)](0, 0));
    } else {
      for (int j = 0; j < draws.k; ++j)
        for (int dd = 0; dd < draws.p; ++dd) put(d.theta(j, dd));
      for (int j = 0; j < draws.k; ++j)
        for (int r = 0; r < draws.p; ++r)
          for (int c = r; c < draws.p; ++c) put(d.covs[static_cast<size_t>(j)](r, c));
    }
    for (int j = 0; j < draws.k; ++j) put(d.eta[j]);
    if (draws.b0_active) put(d.b0);
    for (int lab : d.s) out << "," << lab + 1;
    out << "\n";
  }
}

inline PosteriorDraws read_draws_csv(std::istream& in, int k, int p) {
  PosteriorDraws draws;
  draws.k = k;
  draws.p = p;
  std::string line;
  if (!std::getline(in, line) || line.find(kDrawsSchema) == std::string::npos)
    throw validation_error("draws file is missing its schema tag");
  if (!std::getline(in, line)) throw validation_error("draws file has no header");
  draws.b0_active = (("," + line + ",").find(",b0,") != std::string::npos);
  const bool b0_active = draws.b0_active;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> f;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      f.push_back(std::stod(line.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    DrawRecord rec;
    size_t at = 0;
    rec.chain = static_cast<int>(f[at++]) - 1;
    rec.iter = static_cast<int>(f[at++]);
    rec.theta = Eigen::MatrixXd(k, p);
    rec.covs.assign(static_cast<size_t>(k), Eigen::MatrixXd::Zero(p, p));
    for (int j = 0; j < k; ++j)
      for (int d = 0; d < p; ++d) rec.theta(j, d) = f[at++];
    for (int j = 0; j < k; ++j)
      for (int r = 0; r < p; ++r)
        for (int c = r; c < p; ++c) {
          rec.covs[static_cast<size_t>(j)](r, c) = f[at];
          rec.covs[static_cast<size_t>(j)](c, r) = f[at];
          ++at;
        }
    rec.eta = Eigen::VectorXd(k);
    for (int j = 0; j < k; ++j) rec.eta[j] = f[at++];
    if (b0_active) rec.b0 = f[at++];
    while (at < f.size()) rec.s.push_back(static_cast<int>(f[at++]) - 1);
    draws.draws.push_back(std::move(rec));
  }
  return draws;
}

// ---------------------------------------------------------------------------
// Simulation outputs.

inline void write_sim_results_csv(std::ostream& out, const SimResults& results) {
  out << "# schema: anchormix/sim-results/v1\n";
  out << "delta,sigma,m,dataset_id,elppd\n";
  char buf[40];
  for (const auto& r : results.rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.elppd);
    out << r.delta << "," << r.sigma << "," << r.m << "," << r.dataset + 1 << "," << buf << "\n";
  }
}

inline json sim_summary_to_json(const SimResults& results) {
  json cells = json::array();
  for (const auto& s : results.summaries)
    cells.push_back(json{{"delta", s.delta},
                         {"sigma", s.sigma},
                         {"m", s.m},
                         {"median", s.median},
                         {"q1", s.q1},
                         {"q3", s.q3},
                         {"min", s.min},
                         {"max", s.max}});
  return json{{"schema", "anchormix/sim-summary/v1"}, {"cells", cells}};
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write file '" + path + "'");
  out << text;
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw validation_error("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace anchormix
