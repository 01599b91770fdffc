// Command-line front end: train, eval, tune-pid, export-plots, matrix, plus
// helpers that regenerate the shipped patient and scenario data.
//
// Exit codes: 0 ok, 1 configuration error, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "etap/etap.hpp"

namespace fs = std::filesystem;
using namespace etap;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_or_fail(const std::string& path) {
  try {
    return load_config(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t pick_seed(const ExperimentConfig& cfg, long long seed_flag) {
  return seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : cfg.seeds.front();
}

void print_rows(const std::vector<EvalRow>& rows) {
  std::cout << format_metrics_header();
  for (const auto& r : rows) std::cout << format_metrics_row(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-triggered insulin control: training, evaluation and baselines"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed = -1;
  std::string out_dir = "out";
  std::string checkpoint;
  std::string eval_dir;
  int count = 10;
  int scenario_count = 5;
  std::uint64_t gen_seed = 2024;
  std::string patients_out = "data/patients.txt";
  std::string scenarios_out = "data/scenarios";

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* opt = sub->add_option("--config", config_path, "experiment config file");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed, "seed (default: first entry of 'seeds')");
    sub->add_option("--out-dir", out_dir, "output directory");
  };

  auto* train = app.add_subcommand("train", "train the configured method for one seed");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint greedily on the fixed scenarios");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out-dir>/checkpoint.txt)");
  auto* tune = app.add_subcommand("tune-pid", "grid-search PID gains for the configured patient");
  add_common(tune);
  auto* plots = app.add_subcommand("export-plots", "turn an eval directory into plot-ready CSV bundles");
  add_common(plots);
  plots->add_option("--eval-dir", eval_dir, "directory written by eval")->required();
  auto* matrix = app.add_subcommand("matrix", "train and evaluate patients x methods x seeds");
  add_common(matrix);
  auto* gen_patients = app.add_subcommand("gen-patients", "write a synthetic patient cohort");
  gen_patients->add_option("--count", count, "number of patients");
  gen_patients->add_option("--seed", gen_seed, "cohort seed");
  gen_patients->add_option("--out", patients_out, "output file");
  auto* gen_scen = app.add_subcommand("gen-scenarios", "write the fixed evaluation scenarios");
  gen_scen->add_option("--count", scenario_count, "number of scenarios");
  gen_scen->add_option("--out-dir", scenarios_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_patients) {
      const auto patients = generate_patients(nominal_patient(), count, gen_seed);
      fs::create_directories(fs::path(patients_out).parent_path().empty() ? "." : fs::path(patients_out).parent_path());
      auto out = open_out(patients_out);
      out << "# synthetic cohort: nominal parameters scaled by U[0.85, 1.15], seed " << gen_seed << '\n';
      for (const auto& p : patients) out << format_patient(p) << '\n';
      std::cout << "wrote " << patients.size() << " patients to " << patients_out << '\n';
      return 0;
    }
    if (*gen_scen) {
      const auto scenarios = make_eval_scenarios(scenario_count, scenario_days(EpisodeConfig{}));
      fs::create_directories(scenarios_out);
      for (std::size_t i = 0; i < scenarios.size(); ++i) {
        save_scenario(scenarios[i], (fs::path(scenarios_out) / ("eval_" + std::to_string(i) + ".txt")).string());
      }
      std::cout << "wrote " << scenarios.size() << " scenarios to " << scenarios_out << '\n';
      return 0;
    }

    auto cfg = load_or_fail(config_path);
    const auto s = pick_seed(cfg, seed);
    if (*train) {
      const auto ck = run_train(cfg, s, out_dir);
      std::cout << "checkpoint: " << ck << '\n';
    } else if (*eval) {
      const auto ck = checkpoint.empty() ? (fs::path(out_dir) / "checkpoint.txt").string() : checkpoint;
      const auto res = run_eval(cfg, ck, out_dir);
      print_rows(res.rows);
    } else if (*tune) {
      const auto result = tune_pid(cfg, config_patient(cfg));
      write_pid_report(result, fs::path(out_dir) / "pid_tuning.csv");
      save_checkpoint(make_pid_checkpoint(result.best, s), (fs::path(out_dir) / "checkpoint.txt").string());
      std::cout << "best kp=" << result.best.kp << " ki=" << result.best.ki << " kd=" << result.best.kd << '\n';
    } else if (*plots) {
      export_plotdata(cfg, eval_dir, out_dir);
      std::cout << "plot data written to " << out_dir << '\n';
    } else if (*matrix) {
      const auto rows = run_matrix(cfg, out_dir);
      std::cout << "matrix: " << rows.size() << " evaluation rows written to " << out_dir << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == "config" ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
