#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fpfuse/harness.hpp"

namespace {

fpfuse::AppConfig load_config(const std::string& path) {
  if (path.empty()) {
    return fpfuse::AppConfig{};
  }
  return fpfuse::AppConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced indoor localization with FAI-adaptive fusion"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "Config file (JSON); defaults are built in")
      ->expected(1);
  app.add_option("--seed", seed, "Seed for every random stream");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic traces plus truth");
  std::string sim_out = "out/sim";
  int sim_traces = 1;
  bool sim_outliers = false;
  sim->add_option("--out", sim_out, "Output directory");
  sim->add_option("--traces", sim_traces, "Number of traces");
  sim->add_flag("--outliers", sim_outliers, "Inject RSS outlier epochs");

  // build-db
  auto* build = app.add_subcommand("build-db", "Build fingerprint databases from traces");
  std::vector<std::string> build_traces;
  std::string build_out = "out/db";
  build->add_option("--traces", build_traces, "Trace files (JSONL)")->required();
  build->add_option("--out", build_out, "Output directory");

  // fit-aps
  auto* fit = app.add_subcommand("fit-aps", "Estimate AP locations and path-loss parameters");
  std::vector<std::string> fit_traces;
  std::string fit_db;
  fit->add_option("--traces", fit_traces, "Trace files (JSONL)")->required();
  fit->add_option("--db-wifi", fit_db, "WiFi database to update")->required();

  // train-mc
  auto* train = app.add_subcommand("train-mc", "Fit the FAI combination coefficients");
  std::vector<std::string> train_traces;
  std::string train_db_wifi;
  std::string train_db_mag;
  std::string train_out = "out/config_trained.json";
  train->add_option("--traces", train_traces, "Trace files (JSONL)")->required();
  train->add_option("--db-wifi", train_db_wifi, "WiFi database")->required();
  train->add_option("--db-mag", train_db_mag, "Magnetic database")->required();
  train->add_option("--out", train_out, "Output config path");

  // run
  auto* run = app.add_subcommand("run", "Run the fusion pipeline on one trace");
  std::string run_strategy = "mcm";
  std::string run_mode = "dwm";
  std::string run_trace;
  std::string run_truth;
  std::string run_db_wifi;
  std::string run_db_mag;
  std::string run_out = "out/run";
  run->add_option("--strategy", run_strategy, "ct|ss|sd|wd|mc|mcm")
      ->check(CLI::IsMember({"ct", "ss", "sd", "wd", "mc", "mcm"}));
  run->add_option("--mode", run_mode, "dw|dm|dwm")
      ->check(CLI::IsMember({"dw", "dm", "dwm"}));
  run->add_option("--trace", run_trace, "Trace file (JSONL)")->required();
  run->add_option("--truth", run_truth, "Ground-truth CSV (optional)");
  run->add_option("--db-wifi", run_db_wifi, "WiFi database");
  run->add_option("--db-mag", run_db_mag, "Magnetic database");
  run->add_option("--out", run_out, "Output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Build comparison tables from run outputs");
  std::vector<std::string> eval_runs;
  std::string eval_out = "out/eval";
  eval->add_option("--run", eval_runs, "Run output directories")->required();
  eval->add_option("--out", eval_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fpfuse::AppConfig cfg = load_config(config_path);
    if (sim->parsed()) {
      return fpfuse::cmd_simulate(cfg, seed, sim_traces, sim_outliers, sim_out);
    }
    if (build->parsed()) {
      std::vector<std::filesystem::path> traces(build_traces.begin(), build_traces.end());
      return fpfuse::cmd_build_db(cfg, traces, build_out, seed);
    }
    if (fit->parsed()) {
      std::vector<std::filesystem::path> traces(fit_traces.begin(), fit_traces.end());
      return fpfuse::cmd_fit_aps(cfg, traces, fit_db, seed);
    }
    if (train->parsed()) {
      std::vector<std::filesystem::path> traces(train_traces.begin(), train_traces.end());
      return fpfuse::cmd_train_mc(cfg, traces, train_db_wifi, train_db_mag, train_out,
                                  seed);
    }
    if (run->parsed()) {
      std::optional<std::filesystem::path> truth;
      if (!run_truth.empty()) truth = run_truth;
      return fpfuse::cmd_run(cfg, fpfuse::strategy_from_string(run_strategy),
                             fpfuse::mode_from_string(run_mode), run_trace, truth,
                             run_db_wifi, run_db_mag, run_out, seed);
    }
    if (eval->parsed()) {
      std::vector<std::filesystem::path> dirs(eval_runs.begin(), eval_runs.end());
      return fpfuse::cmd_eval(dirs, eval_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
