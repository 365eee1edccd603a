#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anchormix/commands.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run configuration (JSON)")->required();
  cmd->add_option("--out", flags.out, "Output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "Seed (overrides config)")->each([&](const std::string&) {
    flags.seed_set = true;
  });
  cmd->add_option("--workers", flags.workers, "Worker threads (0 = all cores; overrides config)");
}

anchormix::RunConfig load_with_overrides(const CommonFlags& flags) {
  auto cfg = anchormix::load_run_config(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.out.empty()) cfg.out = flags.out;
  if (flags.workers >= 0) cfg.workers = flags.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchored Bayesian Gaussian mixture models"};
  app.require_subcommand(1);

  CommonFlags select_flags, fit_flags, sim_flags, diag_flags;
  auto* select_cmd = app.add_subcommand("select-anchors", "Select anchor points (EM or minimum entropy)");
  add_common(select_cmd, select_flags);
  auto* fit_cmd = app.add_subcommand("fit", "Gibbs-sample an anchored mixture and summarize");
  add_common(fit_cmd, fit_flags);
  auto* sim_cmd = app.add_subcommand("simulate", "Run the predictive (ELPPD) simulation study");
  add_common(sim_cmd, sim_flags);
  auto* diag_cmd = app.add_subcommand("diagnose", "Recompute identifiability diagnostics for stored anchors");
  add_common(diag_cmd, diag_flags);

  std::vector<std::string> trial_paths;
  std::string features_out = "features.csv";
  double scale = 1.0;
  int column_offset = 0;
  auto* extract_cmd = app.add_subcommand("extract-features", "Extract SMV features from trial files");
  extract_cmd->add_option("paths", trial_paths, "Trial text files")->required();
  extract_cmd->add_option("--out", features_out, "Output feature CSV");
  extract_cmd->add_option("--scale", scale, "Calibration scale applied to raw readings");
  extract_cmd->add_option("--column-offset", column_offset, "First column of the accelerometer block");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (select_cmd->parsed()) {
      anchormix::cmd_select_anchors(load_with_overrides(select_flags));
    } else if (fit_cmd->parsed()) {
      anchormix::cmd_fit(load_with_overrides(fit_flags));
    } else if (sim_cmd->parsed()) {
      anchormix::cmd_simulate(load_with_overrides(sim_flags));
    } else if (diag_cmd->parsed()) {
      anchormix::cmd_diagnose(load_with_overrides(diag_flags));
    } else if (extract_cmd->parsed()) {
      anchormix::cmd_extract_features(trial_paths, features_out, scale, column_offset);
    }
  } catch (const anchormix::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
