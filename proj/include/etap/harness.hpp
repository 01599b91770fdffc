#pragma once

// Train / evaluate / export orchestration behind the command-line tool.
// Every output is a plain CSV or text file written in a fixed format, so a
// rerun with the same configuration and seed reproduces it byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "etap/agent.hpp"
#include "etap/checkpoint.hpp"
#include "etap/config.hpp"
#include "etap/error.hpp"
#include "etap/metrics.hpp"
#include "etap/patients.hpp"
#include "etap/pid.hpp"
#include "etap/scenario.hpp"
#include "etap/trainer.hpp"

namespace etap {

namespace fs = std::filesystem;

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("io", "cannot write " + p.string());
  return out;
}

inline std::vector<PatientParams> config_patients(const ExperimentConfig& cfg) {
  if (cfg.patients_file.empty()) throw Error("config", "patients_file is not set");
  return load_patients(cfg.patients_file);
}

inline PatientParams config_patient(const ExperimentConfig& cfg) {
  return find_patient(config_patients(cfg), cfg.patient);
}

struct NamedScenario {
  std::string name;
  MealScenario scenario;
};

inline std::vector<NamedScenario> config_scenarios(const ExperimentConfig& cfg) {
  if (cfg.eval_scenarios.empty()) throw Error("config", "eval_scenarios is empty");
  std::vector<NamedScenario> out;
  for (const auto& path : cfg.eval_scenarios) out.push_back({fs::path(path).stem().string(), load_scenario(path)});
  return out;
}

inline std::vector<MealScenario> scenarios_only(const std::vector<NamedScenario>& v) {
  std::vector<MealScenario> out;
  for (const auto& s : v) out.push_back(s.scenario);
  return out;
}

inline EnvSettings config_env(const ExperimentConfig& cfg, Method m) {
  EnvSettings s = cfg.env;
  s.reward = effective_reward(cfg, m);
  return s;
}

// Tuning report: one line per grid candidate.
inline void write_pid_report(const PidSearchResult& r, const fs::path& path) {
  auto out = open_out(path);
  out << "kp,ki,kd,mean_tir,mean_ecf\n";
  for (const auto& c : r.table) {
    out << detail::format_double(c.gains.kp) << ',' << detail::format_double(c.gains.ki) << ','
        << detail::format_double(c.gains.kd) << ',' << fmt("%.6f", c.mean_tir) << ',' << fmt("%.6f", c.mean_ecf)
        << '\n';
  }
}

inline PidSearchResult tune_pid(const ExperimentConfig& cfg, const PatientParams& patient) {
  const auto scenarios = config_scenarios(cfg);
  return grid_search_pid(patient, config_env(cfg, Method::kPid), cfg.pid_grid, scenarios_only(scenarios),
                         cfg.pid_target);
}

// Trains cfg.method for one seed and writes checkpoint.txt plus logs to
// out_dir; returns the checkpoint path. PID runs the grid search instead.
inline std::string run_train(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto patient = config_patient(cfg);
  const auto ck_path = (out_dir / "checkpoint.txt").string();
  if (cfg.method == Method::kPid) {
    const auto result = tune_pid(cfg, patient);
    write_pid_report(result, out_dir / "pid_tuning.csv");
    save_checkpoint(make_pid_checkpoint(result.best, seed), ck_path);
    return ck_path;
  }
  auto agent = Agent::create(cfg.method, cfg.hyper, seed, cfg.trigger, cfg.event_pinned, cfg.hidden);
  auto log = open_out(out_dir / "train_log.csv");
  log << "episode,T,K,ECF,TIR,AURR,return\n";
  auto updates = open_out(out_dir / "updates.log");
  updates << "update policy_objective value_loss ratio_mean clip_fraction entropy minibatches aborted\n";
  std::size_t logged_updates = 0;
  const std::string run = cfg.patient + "/" + method_name(cfg.method) + "/seed " + std::to_string(seed);
  auto on_episode = [&](const EpisodeSummary& s, const Agent& a) {
    log << s.episode << ',' << s.T << ',' << s.K << ',' << fmt("%.6f", s.metrics.ecf) << ','
        << fmt("%.6f", s.metrics.tir) << ',' << fmt("%.6f", s.metrics.aurr) << ',' << fmt("%.6f", s.reward_sum)
        << '\n';
    for (; logged_updates < a.updates.size(); ++logged_updates) {
      const auto& u = a.updates[logged_updates];
      updates << logged_updates << ' ' << fmt("%.8g", u.policy_objective) << ' ' << fmt("%.8g", u.value_loss) << ' '
              << fmt("%.8g", u.ratio_mean) << ' ' << fmt("%.8g", u.clip_fraction) << ' ' << fmt("%.8g", u.entropy)
              << ' ' << u.minibatches << ' ' << (u.aborted ? 1 : 0) << '\n';
    }
    const int done = s.episode + 1;
    if (cfg.log_every > 0 && done % cfg.log_every == 0) {
      std::clog << run << ": episode " << done << "/" << cfg.episodes << " ECF " << fmt("%.1f", s.metrics.ecf)
                << " TIR " << fmt("%.1f", s.metrics.tir) << " AURR " << fmt("%.1f", s.metrics.aurr) << '\n';
    }
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.episodes) {
      save_checkpoint(make_checkpoint(a, done, cfg.hidden),
                      (out_dir / ("checkpoint_ep" + std::to_string(done) + ".txt")).string());
    }
  };
  try {
    train_agent(agent, patient, config_env(cfg, cfg.method), cfg.episodes, on_episode);
  } catch (const Error& e) {
    throw Error(e.code(), run + ": " + e.what());
  }
  save_checkpoint(make_checkpoint(agent, cfg.episodes, cfg.hidden), ck_path);
  return ck_path;
}

struct EvalRow {
  std::string patient;
  std::string method;
  std::uint64_t seed = 0;
  std::string scenario;
  EpisodeMetrics metrics;
};

inline std::string format_metrics_header() { return "patient,method,seed,scenario,ECF,TIR,AURR\n"; }

inline std::string format_metrics_row(const EvalRow& r) {
  return r.patient + ',' + r.method + ',' + std::to_string(r.seed) + ',' + r.scenario + ',' +
         fmt("%.6f", r.metrics.ecf) + ',' + fmt("%.6f", r.metrics.tir) + ',' + fmt("%.6f", r.metrics.aurr) + '\n';
}

// Threshold in force at each step, or an empty field if there is none.
inline std::vector<std::string> eta_column(const EpisodeRecord& r) {
  std::vector<std::string> out(r.T);
  for (std::size_t k = 0; k < r.etas.size() && k < r.update_times.size(); ++k) {
    const int end = k + 1 < r.update_times.size() ? r.update_times[k + 1] : r.T;
    for (int h = r.update_times[k]; h < end && h < r.T; ++h) out[h] = fmt("%.6f", r.etas[k]);
  }
  return out;
}

inline void write_trace(const EpisodeRecord& r, int period_min, const fs::path& path) {
  auto out = open_out(path);
  out << "h,t_min,y,u,eta,event_flag,reward\n";
  const auto eta = eta_column(r);
  for (int h = 0; h < r.T; ++h) {
    out << h << ',' << h * period_min << ',' << fmt("%.6f", r.y[h]) << ',' << fmt("%.8f", r.u[h]) << ',' << eta[h]
        << ',' << r.events[h] << ',' << fmt("%.6f", r.rewards[h]) << '\n';
  }
}

inline void write_hist(const Histogram2D& hist, const fs::path& path) {
  auto out = open_out(path);
  out << "cgm_lo,cgm_hi,eta_lo,eta_hi,count\n";
  const auto& b = hist.bins;
  for (int c = 0; c < b.cgm_bins(); ++c) {
    for (int e = 0; e < b.eta_bins(); ++e) {
      out << fmt("%g", b.cgm_lo + c * b.cgm_width) << ',' << fmt("%g", b.cgm_lo + (c + 1) * b.cgm_width) << ','
          << fmt("%g", b.eta_lo + e * b.eta_width) << ',' << fmt("%g", b.eta_lo + (e + 1) * b.eta_width) << ','
          << hist.counts[c][e] << '\n';
    }
  }
}

struct EvalResult {
  std::vector<EvalRow> rows;
  std::vector<EpisodeRecord> records;
  Histogram2D hist;
};

// Greedy evaluation of a checkpoint on the configured scenarios. Writes
// metrics.csv, hist.csv and traces/<scenario>.csv under out_dir.
inline EvalResult run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path, const fs::path& out_dir,
                           const std::string& method_label = {}) {
  const auto ck = load_checkpoint(checkpoint_path);
  if (ck.method != cfg.method) {
    throw Error("config", "checkpoint method " + method_name(ck.method) + " does not match config method " +
                              method_name(cfg.method));
  }
  const auto patient = config_patient(cfg);
  const auto scenarios = config_scenarios(cfg);
  const auto settings = config_env(cfg, ck.method);
  EvalResult res;
  if (ck.method == Method::kPid) {
    res.records = evaluate_pid(ck.pid, patient, settings, scenarios_only(scenarios));
  } else {
    auto agent = restore_agent(ck, cfg.hyper);
    res.records = evaluate_agent(agent, patient, settings, scenarios_only(scenarios));
  }
  const std::string label = method_label.empty() ? method_name(ck.method) : method_label;
  HistBins bins;
  bins.eta_lo = cfg.trigger.eta_lo;
  bins.eta_hi = cfg.trigger.eta_hi;
  res.hist = make_histogram(bins);
  fs::create_directories(out_dir);
  auto metrics = open_out(out_dir / "metrics.csv");
  metrics << format_metrics_header();
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& rec = res.records[i];
    res.rows.push_back({patient.name, label, ck.seed, scenarios[i].name, episode_metrics(rec)});
    metrics << format_metrics_row(res.rows.back());
    write_trace(rec, settings.episode.step_period_min, out_dir / "traces" / (scenarios[i].name + ".csv"));
    accumulate_interval_hist(rec, res.hist);
  }
  write_hist(res.hist, out_dir / "hist.csv");
  return res;
}

// ---- plot-data export -----------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error("parse", file + ": missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) throw Error("parse", path.string() + ": empty file");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
    t.rows.back().resize(t.header.size());
  }
  return t;
}

// Carbohydrate grams whose meal starts inside [t, t + period).
inline double meal_grams_in(const MealScenario& sc, int t, int period) {
  double g = 0.0;
  for (const auto& ev : sc.events) {
    if (ev.t_min >= t && ev.t_min < t + period) g += ev.carb_g;
  }
  return g;
}

// Turns an evaluation directory into plot-ready bundles:
// time_response_<scenario>.csv (t_min, y, u, eta, meal_g) per trace and
// hist_bundle.csv (bin centres and counts).
inline void export_plotdata(const ExperimentConfig& cfg, const fs::path& eval_dir, const fs::path& out_dir) {
  const auto scenarios = config_scenarios(cfg);
  fs::create_directories(out_dir);
  const int period = cfg.env.episode.step_period_min;
  for (const auto& s : scenarios) {
    const auto trace_path = eval_dir / "traces" / (s.name + ".csv");
    const auto t = read_csv(trace_path);
    const std::string f = trace_path.string();
    const auto ct = t.column("t_min", f), cy = t.column("y", f), cu = t.column("u", f), ce = t.column("eta", f);
    auto out = open_out(out_dir / ("time_response_" + s.name + ".csv"));
    out << "t_min,y,u,eta,meal_g\n";
    for (const auto& row : t.rows) {
      const int tm = std::stoi(row[ct]);
      out << row[ct] << ',' << row[cy] << ',' << row[cu] << ',' << row[ce] << ','
          << fmt("%.6f", meal_grams_in(s.scenario, tm, period)) << '\n';
    }
  }
  const auto hist_path = eval_dir / "hist.csv";
  const auto h = read_csv(hist_path);
  const std::string f = hist_path.string();
  const auto c0 = h.column("cgm_lo", f), c1 = h.column("cgm_hi", f), e0 = h.column("eta_lo", f),
             e1 = h.column("eta_hi", f), cn = h.column("count", f);
  auto out = open_out(out_dir / "hist_bundle.csv");
  out << "cgm_center,eta_center,count\n";
  for (const auto& row : h.rows) {
    const double cc = 0.5 * (std::stod(row[c0]) + std::stod(row[c1]));
    const double ec = 0.5 * (std::stod(row[e0]) + std::stod(row[e1]));
    out << fmt("%g", cc) << ',' << fmt("%g", ec) << ',' << row[cn] << '\n';
  }
}

// ---- experiment matrix ----------------------------------------------------

inline std::string safe_dir_name(std::string s) {
  for (char& c : s) {
    if (c == '#' || c == ':' || c == '/' || c == ' ') c = '_';
  }
  return s;
}

// patients x methods x seeds; each run trains and evaluates into
// out_dir/<patient>/<method>/seed_<n>/. Writes the pooled metrics.csv and a
// summary.csv of mean / population std over seeds.
inline std::vector<EvalRow> run_matrix(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (cfg.matrix_methods.empty()) throw Error("config", "matrix.methods is empty");
  std::vector<std::string> names = cfg.matrix_patients;
  if (names.empty()) {
    for (const auto& p : config_patients(cfg)) names.push_back(p.name);
  }
  fs::create_directories(out_dir);
  auto all = open_out(out_dir / "metrics.csv");
  all << format_metrics_header();
  auto summary = open_out(out_dir / "summary.csv");
  summary << "patient,method,n_seeds,ECF_mean,ECF_std,TIR_mean,TIR_std,AURR_mean,AURR_std\n";
  std::vector<EvalRow> rows;
  for (const auto& name : names) {
    for (const auto& mm : cfg.matrix_methods) {
      auto run_cfg = with_matrix_method(cfg, mm);
      run_cfg.patient = name;
      std::vector<RunMetrics> runs;
      std::string pid_checkpoint;
      for (auto seed : cfg.seeds) {
        const auto dir = out_dir / safe_dir_name(name) / safe_dir_name(mm.label) / ("seed_" + std::to_string(seed));
        std::string ck;
        if (mm.method == Method::kPid && !pid_checkpoint.empty()) {
          // The grid search does not depend on the seed; reuse its result.
          fs::create_directories(dir);
          auto c = load_checkpoint(pid_checkpoint);
          c.seed = seed;
          ck = (dir / "checkpoint.txt").string();
          save_checkpoint(c, ck);
        } else {
          ck = run_train(run_cfg, seed, dir);
          if (mm.method == Method::kPid) pid_checkpoint = ck;
        }
        const auto res = run_eval(run_cfg, ck, dir, mm.label);
        for (const auto& r : res.rows) {
          all << format_metrics_row(r);
          rows.push_back(r);
          runs.push_back({std::to_string(r.seed), r.scenario, r.metrics});
        }
      }
      const auto agg = aggregate(runs);
      summary << name << ',' << mm.label << ',' << agg.n_seeds << ',' << fmt("%.6f", agg.ecf.mean) << ','
              << fmt("%.6f", agg.ecf.std) << ',' << fmt("%.6f", agg.tir.mean) << ',' << fmt("%.6f", agg.tir.std)
              << ',' << fmt("%.6f", agg.aurr.mean) << ',' << fmt("%.6f", agg.aurr.std) << '\n';
    }
  }
  return rows;
}

}  // namespace etap
