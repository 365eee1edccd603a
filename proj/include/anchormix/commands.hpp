#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anchormix/config.hpp"
#include "anchormix/io_json.hpp"

namespace anchormix {

// Library-level command implementations behind the CLI. Every command is a
// pure function of (config, seed, input files) and writes fixed-name
// artifacts into the output directory.

namespace detail {

inline void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw validation_error("cannot create output directory '" + out + "'");
}

struct SelectionOutcome {
  AnchorSet anchors;
  MixtureParams map_params;
  json report;
};

inline SelectionOutcome run_selection(const Dataset& data, const PriorSpec& prior, RunConfig& cfg) {
  if (cfg.k < 2) throw validation_error("model.k must be >= 2 for anchor selection");
  auto budgets = cfg.anchors.budgets(cfg.k);

  EMConfig em_cfg = cfg.anchors.em;
  em_cfg.k = cfg.k;
  em_cfg.budgets = budgets;
  em_cfg.seed = cfg.seed;
  em_cfg.workers = cfg.workers;

  if (cfg.anchors.method == "explicit") {
    if (cfg.anchors.explicit_sets.empty())
      throw validation_error("anchors.method explicit requires anchors.explicit_sets");
    std::vector<std::vector<int>> sets = cfg.anchors.explicit_sets;
    sets.resize(static_cast<size_t>(cfg.k));
    AnchorSet anchors(std::move(sets), data.n());
    anchors = anchors.canonicalized();
    for (int j = 0; j < cfg.k; ++j) em_cfg.budgets[static_cast<size_t>(j)] = std::max(1, anchors.size(j));
    auto em = anchored_em(data, prior, em_cfg);
    auto dist = relabeling_probs(anchor_values(data, anchors), em.best.params);
    json report{{"schema", "anchormix/anchors/v1"},
                {"method", "explicit"},
                {"k", cfg.k},
                {"p", data.p()},
                {"n", data.n()},
                {"anchors", anchors_to_json(anchors, data)},
                {"map_params", params_to_json(em.best.params)},
                {"diagnostics", diagnostics_to_json(dist, "em_map")}};
    return {anchors, em.best.params, std::move(report)};
  }

  auto em = anchored_em(data, prior, em_cfg);
  json em_block;
  {
    json starts = json::array();
    for (const auto& t : em.traces) {
      json st{{"start", t.start}, {"converged", t.converged}, {"failed", t.failed}, {"f_trace", t.f_trace}};
      if (t.failed) st["message"] = t.message;
      starts.push_back(std::move(st));
    }
    em_block = json{{"n_starts", em_cfg.n_starts},
                    {"best_start", em.best_start},
                    {"iterations", em.best.iterations},
                    {"final_f", em.final_f},
                    {"starts", starts}};
  }

  if (cfg.anchors.method == "em") {
    auto dist = relabeling_probs(anchor_values(data, em.best.anchors), em.best.params);
    json report{{"schema", "anchormix/anchors/v1"},
                {"method", "em"},
                {"k", cfg.k},
                {"p", data.p()},
                {"n", data.n()},
                {"anchors", anchors_to_json(em.best.anchors, data)},
                {"map_params", params_to_json(em.best.params)},
                {"em", em_block},
                {"diagnostics", diagnostics_to_json(dist, "em_map")}};
    return {em.best.anchors, em.best.params, std::move(report)};
  }

  // min_entropy: continuous optimization seeded from the EM MAP.
  MinEntropyConfig me_cfg = cfg.anchors.min_entropy;
  me_cfg.budgets = budgets;
  me_cfg.seed = cfg.seed;
  me_cfg.workers = cfg.workers;
  auto me = min_entropy_select(data, em.best.params, me_cfg);
  auto dist = relabeling_probs(anchor_values(data, me.anchors), me.gamma0);
  json report{{"schema", "anchormix/anchors/v1"},
              {"method", "min_entropy"},
              {"k", cfg.k},
              {"p", data.p()},
              {"n", data.n()},
              {"anchors", anchors_to_json(me.anchors, data)},
              {"map_params", params_to_json(me.gamma0)},
              {"em", em_block},
              {"min_entropy",
               {{"x_star", to_json(me.x_star)},
                {"entropy_continuous", me.entropy_continuous},
                {"converged", me.converged},
                {"best_start", me.best_start}}},
              {"diagnostics", diagnostics_to_json(dist, "em_map")}};
  return {me.anchors, me.gamma0, std::move(report)};
}

inline Dataset load_config_data(const RunConfig& cfg) {
  if (!cfg.data) throw validation_error("config needs a data block");
  return load_dataset(cfg.data->path, cfg.data->schema);
}

}  // namespace detail

// select-anchors: run the configured selector, write anchors.json and
// diagnostics.json.
inline json cmd_select_anchors(RunConfig cfg) {
  Dataset data = detail::load_config_data(cfg);
  if (!cfg.prior) throw validation_error("config needs a prior block");
  PriorSpec prior = cfg.prior->resolve(data);
  auto outcome = detail::run_selection(data, prior, cfg);
  detail::ensure_out_dir(cfg.out);
  write_json_file(cfg.out + "/anchors.json", outcome.report);
  write_json_file(cfg.out + "/diagnostics.json", outcome.report.at("diagnostics"));
  return outcome.report;
}

// fit: anchors from file, explicit sets, or inline selection; Gibbs fit;
// draws.csv + summary.json (+ allocation table when groups exist).
inline json cmd_fit(RunConfig cfg) {
  Dataset data = detail::load_config_data(cfg);
  if (!cfg.prior) throw validation_error("config needs a prior block");
  PriorSpec prior = cfg.prior->resolve(data);
  if (!cfg.sampler_present) throw validation_error("config needs a sampler block");
  cfg.sampler.seed = cfg.seed;
  cfg.sampler.workers = cfg.workers;

  AnchorSet anchors;
  std::optional<MixtureParams> map_params;
  detail::ensure_out_dir(cfg.out);
  if (!cfg.anchors.file.empty()) {
    json j = read_json_file(cfg.anchors.file);
    if (j.value("schema", "") != "anchormix/anchors/v1")
      throw validation_error("anchors file has an unsupported schema");
    int k = j.at("k").get<int>();
    if (cfg.k != 0 && cfg.k != k) throw validation_error("model.k disagrees with the anchors file");
    cfg.k = k;
    anchors = anchors_from_json(j.at("anchors"), data.n(), k);
    if (j.contains("map_params")) map_params = params_from_json(j.at("map_params"));
  } else if (cfg.anchors.method == "explicit") {
    if (cfg.k < 1) throw validation_error("model.k required for explicit anchors");
    std::vector<std::vector<int>> sets = cfg.anchors.explicit_sets;
    sets.resize(static_cast<size_t>(cfg.k));
    anchors = AnchorSet(std::move(sets), data.n()).canonicalized();
  } else {
    auto outcome = detail::run_selection(data, prior, cfg);
    write_json_file(cfg.out + "/anchors.json", outcome.report);
    write_json_file(cfg.out + "/diagnostics.json", outcome.report.at("diagnostics"));
    anchors = outcome.anchors;
    map_params = outcome.map_params;
  }

  PosteriorDraws draws = gibbs_fit(data, anchors, prior, cfg.sampler, map_params);
  {
    std::ostringstream os;
    write_draws_csv(os, draws);
    write_text_file(cfg.out + "/draws.csv", os.str());
  }
  FitSummary summary = summarize(draws);
  json summary_json;
  if (data.groups) {
    AllocationTable table = allocation_table(draws, data);
    summary_json = summary_to_json(summary, &table);
  } else {
    summary_json = summary_to_json(summary);
  }
  write_json_file(cfg.out + "/summary.json", summary_json);
  return summary_json;
}

// simulate: the predictive study; sim_results.csv + sim_summary.json.
inline json cmd_simulate(RunConfig cfg) {
  if (!cfg.sim) throw validation_error("config needs a sim block");
  SimConfig sim = *cfg.sim;
  sim.seed = cfg.seed;
  sim.workers = cfg.workers;
  SimResults results = run_simulation(sim);
  detail::ensure_out_dir(cfg.out);
  {
    std::ostringstream os;
    write_sim_results_csv(os, results);
    write_text_file(cfg.out + "/sim_results.csv", os.str());
  }
  json summary = sim_summary_to_json(results);
  write_json_file(cfg.out + "/sim_summary.json", summary);
  return summary;
}

// extract-features: SisFall trial files to a feature CSV.
inline void cmd_extract_features(const std::vector<std::string>& paths, const std::string& out_file,
                                 double scale = 1.0, int column_offset = 0) {
  if (paths.empty()) throw validation_error("extract-features needs at least one trial file");
  std::vector<TriaxialSeries> trials;
  trials.reserve(paths.size());
  for (const auto& path : paths) trials.push_back(parse_trial_file(path, scale, column_offset));
  std::ostringstream os;
  write_feature_csv(os, trials);
  write_text_file(out_file, os.str());
}

// diagnose: recompute alpha-hat/entropy for stored anchors, optionally with a
// posterior-mean plug-in from a draws file.
inline json cmd_diagnose(RunConfig cfg) {
  Dataset data = detail::load_config_data(cfg);
  if (cfg.anchors_file.empty()) throw validation_error("diagnose needs diagnose.anchors_file");
  json j = read_json_file(cfg.anchors_file);
  if (j.value("schema", "") != "anchormix/anchors/v1")
    throw validation_error("anchors file has an unsupported schema");
  int k = j.at("k").get<int>();
  AnchorSet anchors = anchors_from_json(j.at("anchors"), data.n(), k);
  MixtureParams gamma0;
  if (cfg.gamma0_source == "gibbs_posterior_mean") {
    if (cfg.draws_file.empty())
      throw validation_error("gamma0_source gibbs_posterior_mean needs diagnose.draws_file");
    std::ifstream in(cfg.draws_file);
    if (!in) throw validation_error("cannot open draws file '" + cfg.draws_file + "'");
    PosteriorDraws draws = read_draws_csv(in, k, data.p());
    gamma0 = draws.posterior_mean_params();
  } else {
    gamma0 = params_from_json(j.at("map_params"));
  }
  auto dist = relabeling_probs(anchor_values(data, anchors), gamma0);
  json out = diagnostics_to_json(dist, cfg.gamma0_source);
  detail::ensure_out_dir(cfg.out);
  write_json_file(cfg.out + "/diagnostics.json", out);
  return out;
}

}  // namespace anchormix
