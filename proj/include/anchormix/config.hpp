#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchormix/common.hpp"
#include "anchormix/dataset.hpp"
#include "anchormix/em.hpp"
#include "anchormix/entropy_select.hpp"
#include "anchormix/gibbs.hpp"
#include "anchormix/ingest.hpp"
#include "anchormix/io_json.hpp"
#include "anchormix/params.hpp"
#include "anchormix/predictive.hpp"

namespace anchormix {

// Structured run configuration. The JSON document is schema-validated before
// any compute; unknown keys are rejected outright.

namespace detail {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw validation_error("config section '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw validation_error("unknown config key '" + where + "." + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<T>();
}

}  // namespace detail

struct DataConfig {
  std::string path;
  CsvSchema schema;
};

struct MeanPriorConfig {
  std::string mode = "mean";  // "mean" | "midpoint" | explicit values
  std::vector<double> values;
  double kappa = 1.0;
};

struct PriorConfig {
  double dirichlet_alpha = 1.0;
  MeanPriorConfig mean;
  std::optional<double> a0, b0;
  std::optional<std::pair<double, double>> b0_gamma;  // (shape, rate)
  std::optional<double> wishart_nu;
  std::optional<Eigen::MatrixXd> wishart_scale;  // empty: identity

  PriorSpec resolve(const Dataset& data) const {
    PriorSpec prior;
    prior.dirichlet_alpha = dirichlet_alpha;
    prior.mean.kappa = mean.kappa;
    if (mean.mode == "midpoint") {
      prior.mean.mu = 0.5 * (data.points.colwise().minCoeff() + data.points.colwise().maxCoeff()).transpose();
    } else if (mean.mode == "mean") {
      prior.mean.mu = data.points.colwise().mean().transpose();
    } else {
      if (static_cast<int>(mean.values.size()) != data.p())
        throw validation_error("prior mean dimension does not match the data");
      prior.mean.mu = Eigen::Map<const Eigen::VectorXd>(mean.values.data(),
                                                        static_cast<Eigen::Index>(mean.values.size()));
    }
    if (data.p() == 1) {
      if (!a0) throw validation_error("univariate prior needs precision.a0");
      prior.precision.a0 = *a0;
      if (b0_gamma) {
        prior.precision.b0_random = true;
        prior.precision.g = b0_gamma->first;
        prior.precision.h = b0_gamma->second;
        prior.precision.b0 = prior.precision.g / prior.precision.h;
      } else if (b0) {
        prior.precision.b0 = *b0;
      } else {
        throw validation_error("univariate prior needs precision.b0 or precision.b0_gamma");
      }
    } else {
      if (!wishart_nu) throw validation_error("multivariate prior needs wishart.nu");
      WishartPrior w;
      w.nu = *wishart_nu;
      w.scale = wishart_scale ? *wishart_scale
                              : Eigen::MatrixXd(Eigen::MatrixXd::Identity(data.p(), data.p()));
      prior.wishart = w;
    }
    prior.validate(data.p());
    return prior;
  }
};

struct AnchorsConfig {
  std::string method = "em";  // "em" | "min_entropy" | "explicit"
  std::vector<int> per_component;  // broadcast when length 1
  EMConfig em;                     // k/budgets/seed filled in later
  MinEntropyConfig min_entropy;
  std::vector<std::vector<int>> explicit_sets;  // 0-based after parsing
  std::string file;                             // anchors.json produced earlier

  std::vector<int> budgets(int k) const {
    if (per_component.empty()) return std::vector<int>(static_cast<size_t>(k), 1);
    if (per_component.size() == 1) return std::vector<int>(static_cast<size_t>(k), per_component[0]);
    if (static_cast<int>(per_component.size()) != k)
      throw validation_error("anchors.per_component must have one entry or one per component");
    return per_component;
  }
};

struct SimBlockConfig {
  SimConfig sim;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out = "out";
  std::optional<DataConfig> data;
  int k = 0;
  std::optional<PriorConfig> prior;
  AnchorsConfig anchors;
  SamplerConfig sampler;
  bool sampler_present = false;
  std::optional<SimConfig> sim;
  std::string gamma0_source = "em_map";  // for diagnose: "em_map" | "gibbs_posterior_mean"
  std::string anchors_file;              // for diagnose
  std::string draws_file;                // for diagnose with posterior-mean source
};

inline RunConfig parse_run_config(const json& j) {
  detail::check_keys(j, "config",
                     {"schema", "seed", "workers", "out", "data", "model", "prior", "anchors",
                      "sampler", "sim", "diagnose"});
  std::string schema = detail::get_or<std::string>(j, "schema", "anchormix/run-config/v1");
  if (schema != "anchormix/run-config/v1")
    throw validation_error("unsupported config schema '" + schema + "'");
  RunConfig cfg;
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  cfg.workers = detail::get_or<int>(j, "workers", 0);
  cfg.out = detail::get_or<std::string>(j, "out", "out");

  if (j.contains("data")) {
    const auto& jd = j.at("data");
    detail::check_keys(jd, "data", {"path", "value_columns", "id_column", "group_column"});
    DataConfig d;
    d.path = jd.at("path").get<std::string>();
    if (jd.contains("value_columns"))
      d.schema.value_columns = jd.at("value_columns").get<std::vector<std::string>>();
    d.schema.id_column = detail::get_or<std::string>(jd, "id_column", "id");
    d.schema.group_column = detail::get_or<std::string>(jd, "group_column", "group");
    cfg.data = d;
  }
  if (j.contains("model")) {
    detail::check_keys(j.at("model"), "model", {"k"});
    cfg.k = j.at("model").at("k").get<int>();
    if (cfg.k < 1) throw validation_error("model.k must be >= 1");
  }
  if (j.contains("prior")) {
    const auto& jp = j.at("prior");
    detail::check_keys(jp, "prior", {"dirichlet_alpha", "mean", "precision", "wishart"});
    PriorConfig p;
    p.dirichlet_alpha = detail::get_or<double>(jp, "dirichlet_alpha", 1.0);
    if (jp.contains("mean")) {
      const auto& jm = jp.at("mean");
      detail::check_keys(jm, "prior.mean", {"mu", "kappa"});
      p.mean.kappa = jm.at("kappa").get<double>();
      const auto& mu = jm.at("mu");
      if (mu.is_string()) {
        p.mean.mode = mu.get<std::string>();
        if (p.mean.mode != "mean" && p.mean.mode != "midpoint")
          throw validation_error("prior.mean.mu must be 'mean', 'midpoint', or numbers");
      } else if (mu.is_number()) {
        p.mean.mode = "values";
        p.mean.values = {mu.get<double>()};
      } else {
        p.mean.mode = "values";
        p.mean.values = mu.get<std::vector<double>>();
      }
    } else {
      throw validation_error("prior.mean is required");
    }
    if (jp.contains("precision")) {
      const auto& jq = jp.at("precision");
      detail::check_keys(jq, "prior.precision", {"a0", "b0", "b0_gamma"});
      p.a0 = jq.at("a0").get<double>();
      if (jq.contains("b0")) p.b0 = jq.at("b0").get<double>();
      if (jq.contains("b0_gamma")) {
        detail::check_keys(jq.at("b0_gamma"), "prior.precision.b0_gamma", {"shape", "rate"});
        p.b0_gamma = {jq.at("b0_gamma").at("shape").get<double>(),
                      jq.at("b0_gamma").at("rate").get<double>()};
      }
      if (jq.contains("b0") && jq.contains("b0_gamma"))
        throw validation_error("prior.precision: give b0 or b0_gamma, not both");
    }
    if (jp.contains("wishart")) {
      const auto& jw = jp.at("wishart");
      detail::check_keys(jw, "prior.wishart", {"nu", "scale"});
      p.wishart_nu = jw.at("nu").get<double>();
      if (jw.contains("scale") && !jw.at("scale").is_string())
        p.wishart_scale = matrix_from_json(jw.at("scale"));
      else if (jw.contains("scale") && jw.at("scale").get<std::string>() != "identity")
        throw validation_error("prior.wishart.scale must be 'identity' or a matrix");
    }
    cfg.prior = p;
  }
  if (j.contains("anchors")) {
    const auto& ja = j.at("anchors");
    detail::check_keys(ja, "anchors",
                       {"method", "per_component", "em", "min_entropy", "explicit_sets", "file"});
    cfg.anchors.method = detail::get_or<std::string>(ja, "method", "em");
    if (cfg.anchors.method != "em" && cfg.anchors.method != "min_entropy" &&
        cfg.anchors.method != "explicit")
      throw validation_error("anchors.method must be em, min_entropy, or explicit");
    if (ja.contains("per_component")) {
      if (ja.at("per_component").is_number())
        cfg.anchors.per_component = {ja.at("per_component").get<int>()};
      else
        cfg.anchors.per_component = ja.at("per_component").get<std::vector<int>>();
    }
    if (ja.contains("em")) {
      const auto& je = ja.at("em");
      detail::check_keys(je, "anchors.em", {"n_starts", "tol", "max_iter", "solver"});
      cfg.anchors.em.n_starts = detail::get_or<int>(je, "n_starts", 25);
      cfg.anchors.em.tol = detail::get_or<double>(je, "tol", 1e-8);
      cfg.anchors.em.max_iter = detail::get_or<int>(je, "max_iter", 500);
      std::string solver = detail::get_or<std::string>(je, "solver", "exact");
      if (solver == "exact")
        cfg.anchors.em.solver = EStepSolver::kExact;
      else if (solver == "greedy")
        cfg.anchors.em.solver = EStepSolver::kGreedy;
      else
        throw validation_error("anchors.em.solver must be exact or greedy");
    }
    if (ja.contains("min_entropy")) {
      const auto& jm = ja.at("min_entropy");
      detail::check_keys(jm, "anchors.min_entropy", {"n_starts", "opt_tol", "max_iter"});
      cfg.anchors.min_entropy.n_starts = detail::get_or<int>(jm, "n_starts", 10);
      cfg.anchors.min_entropy.opt_tol = detail::get_or<double>(jm, "opt_tol", 1e-10);
      cfg.anchors.min_entropy.max_iter = detail::get_or<int>(jm, "max_iter", 500);
    }
    if (ja.contains("explicit_sets")) {
      for (const auto& s : ja.at("explicit_sets")) {
        std::vector<int> rows;
        for (const auto& r : s) rows.push_back(r.get<int>() - 1);  // 1-based in config
        cfg.anchors.explicit_sets.push_back(std::move(rows));
      }
    }
    cfg.anchors.file = detail::get_or<std::string>(ja, "file", "");
  }
  if (j.contains("sampler")) {
    const auto& js = j.at("sampler");
    detail::check_keys(js, "sampler", {"chains", "iterations", "burn_in", "total_draws"});
    cfg.sampler.chains = detail::get_or<int>(js, "chains", 50);
    cfg.sampler.iterations = detail::get_or<int>(js, "iterations", 10000);
    cfg.sampler.burn_in = detail::get_or<int>(js, "burn_in", 1000);
    cfg.sampler.total_draws = detail::get_or<int>(js, "total_draws", 5000);
    cfg.sampler_present = true;
  }
  if (j.contains("sim")) {
    const auto& js = j.at("sim");
    detail::check_keys(js, "sim",
                       {"delta_grid", "sigma_grid", "datasets", "n", "replicates", "posterior_draws",
                        "m_min", "m_max", "prior", "sigma2"});
    SimConfig sim;
    if (js.contains("delta_grid")) sim.delta_grid = js.at("delta_grid").get<std::vector<double>>();
    if (js.contains("sigma_grid")) sim.sigma_grid = js.at("sigma_grid").get<std::vector<double>>();
    sim.datasets = detail::get_or<int>(js, "datasets", 100);
    sim.n = detail::get_or<int>(js, "n", 10);
    sim.replicates = detail::get_or<int>(js, "replicates", 100);
    sim.posterior_draws = detail::get_or<int>(js, "posterior_draws", 500);
    sim.m_min = detail::get_or<int>(js, "m_min", 2);
    sim.m_max = detail::get_or<int>(js, "m_max", 10);
    if (js.contains("prior")) {
      detail::check_keys(js.at("prior"), "sim.prior", {"mu", "tau2"});
      sim.prior.mu = js.at("prior").at("mu").get<double>();
      sim.prior.tau2 = js.at("prior").at("tau2").get<double>();
    }
    sim.sigma2_model = detail::get_or<double>(js, "sigma2", 1.0);
    cfg.sim = sim;
  }
  if (j.contains("diagnose")) {
    const auto& jd = j.at("diagnose");
    detail::check_keys(jd, "diagnose", {"anchors_file", "gamma0_source", "draws_file"});
    cfg.anchors_file = detail::get_or<std::string>(jd, "anchors_file", "");
    cfg.gamma0_source = detail::get_or<std::string>(jd, "gamma0_source", "em_map");
    cfg.draws_file = detail::get_or<std::string>(jd, "draws_file", "");
    if (cfg.gamma0_source != "em_map" && cfg.gamma0_source != "gibbs_posterior_mean")
      throw validation_error("diagnose.gamma0_source must be em_map or gibbs_posterior_mean");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_json_file(path));
}

}  // namespace anchormix
