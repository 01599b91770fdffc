#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "etap/env.hpp"
#include "etap/error.hpp"
#include "etap/meals.hpp"
#include "etap/metrics.hpp"

namespace etap {

struct PidGains {
  double kp = 0.001;
  double ki = 0.00001;
  double kd = 0.001;
  double target = 112.5;  // mg/dL

  auto key() const { return std::tie(kp, ki, kd); }
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool started = false;
};

struct PidStep {
  double u = 0.0;
  PidState state;
};

// e = y - target, so high glucose raises the rate. On the first call the
// derivative term is zero. The integral only advances while the output is
// inside the pump range.
inline PidStep pid_output(double y, const PidState& s, const PidGains& g, const PumpConfig& pump = {},
                          double dt_min = 3.0) {
  if (!std::isfinite(y)) throw Error("invalid-command", "pid: non-finite glucose");
  const double e = y - g.target;
  const double de = s.started ? (e - s.prev_error) / dt_min : 0.0;
  PidStep out;
  out.state.prev_error = e;
  out.state.started = true;
  const double integral = s.integral + e * dt_min;
  const double raw = g.kp * e + g.ki * integral + g.kd * de;
  if (raw > pump.u_max || raw < pump.u_min) {
    out.state.integral = s.integral;
    out.u = std::clamp(g.kp * e + g.ki * s.integral + g.kd * de, pump.u_min, pump.u_max);
  } else {
    out.state.integral = integral;
    out.u = raw;
  }
  return out;
}

// Fresh rate every step, so K = T.
inline EpisodeRecord run_pid_episode(Env& env, const PidGains& g, const MealScenario& scenario) {
  auto obs = env.reset(scenario, false, nullptr);
  EpisodeRecord rec;
  rec.H = env.episode().horizon;
  rec.y.push_back(obs.y);
  PidState state;
  const double dt = env.episode().step_period_min;
  while (!env.done()) {
    const auto step = pid_output(obs.y, state, g, env.pump(), dt);
    state = step.state;
    const double r = step_reward(obs.y, 0.0, env.reward());
    rec.update_times.push_back(env.step_count());
    const auto res = env.step(step.u);
    rec.u.push_back(res.obs.u_prev);
    rec.events.push_back(1);
    rec.rewards.push_back(r);
    rec.y.push_back(res.obs.y);
    ++rec.T;
    obs = res.obs;
  }
  rec.K = rec.T;
  return rec;
}

struct PidGrid {
  std::vector<double> kp{0.0001, 0.0005, 0.0009, 0.0013, 0.0017};
  std::vector<double> ki{0.0, 1e-5, 1e-4};
  std::vector<double> kd{0.0, 0.001, 0.01};
};

struct PidCandidate {
  PidGains gains;
  double mean_tir = 0.0;
  double mean_ecf = 0.0;
};

struct PidSearchResult {
  PidGains best;
  std::vector<PidCandidate> table;  // in (kp, ki, kd) order
};

inline PidCandidate evaluate_pid(const PatientParams& patient, const EnvSettings& settings, const PidGains& g,
                                 const std::vector<MealScenario>& scenarios) {
  PidCandidate c{g, 0.0, 0.0};
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    auto env = make_env(patient, settings, eval_noise_rng(i));
    const auto rec = run_pid_episode(env, g, scenarios[i]);
    c.mean_tir += tir(rec) / scenarios.size();
    c.mean_ecf += ecf(rec) / scenarios.size();
  }
  return c;
}

// Best mean TIR over the evaluation scenarios; ties go to the
// lexicographically smallest (kp, ki, kd).
inline PidSearchResult grid_search_pid(const PatientParams& patient, const EnvSettings& settings, PidGrid grid,
                                       const std::vector<MealScenario>& scenarios, double target = 112.5) {
  if (grid.kp.empty() || grid.ki.empty() || grid.kd.empty()) throw Error("config", "empty PID grid");
  if (scenarios.empty()) throw Error("config", "PID search needs evaluation scenarios");
  for (auto* axis : {&grid.kp, &grid.ki, &grid.kd}) {
    std::sort(axis->begin(), axis->end());
    if (axis->front() < 0.0) throw Error("config", "PID gains must be non-negative");
  }
  PidSearchResult out;
  const PidCandidate* best = nullptr;
  for (double kp : grid.kp) {
    for (double ki : grid.ki) {
      for (double kd : grid.kd) {
        out.table.push_back(evaluate_pid(patient, settings, PidGains{kp, ki, kd, target}, scenarios));
      }
    }
  }
  for (const auto& c : out.table) {
    if (best == nullptr || c.mean_tir > best->mean_tir) best = &c;
  }
  out.best = best->gains;
  return out;
}

}  // namespace etap
