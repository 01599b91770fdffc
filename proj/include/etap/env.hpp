#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "etap/error.hpp"
#include "etap/meals.hpp"
#include "etap/plant.hpp"
#include "etap/rng.hpp"

namespace etap {

struct EpisodeConfig {
  int horizon = 960;
  double hypo_threshold = 10.0;
  double hyper_threshold = 600.0;
  int step_period_min = 3;
  int ode_dt_min = 1;
};

enum class RewardMode {
  kInRange,          // R1 only
  kInRangePlusHold,  // R1 + R2
};

struct RewardConfig {
  double c = 5.0;
  double C = 10.0;
  double eta_e = 0.0;
  double range_lo = 70.0;
  double range_hi = 180.0;
  RewardMode mode = RewardMode::kInRangePlusHold;
};

// Normalization applied before the networks see an observation.
inline constexpr double kGlucoseScale = 600.0;

struct Observation {
  double y = 0.0;       // latest CGM value, mg/dL
  double u_prev = 0.0;  // previously applied infusion rate, U/min

  std::array<double, 2> normalized(const PumpConfig& pump) const {
    return {y / kGlucoseScale, u_prev / pump.u_max};
  }
};

inline bool in_range(double y, const RewardConfig& cfg) { return cfg.range_lo <= y && y <= cfg.range_hi; }

inline double reward_r1(double y, const RewardConfig& cfg = {}) { return in_range(y, cfg) ? 1.0 : 0.0; }

// ell: steps since the infusion rate was last updated.
inline double reward_r2(double y, double ell, const RewardConfig& cfg = {}) {
  return in_range(y, cfg) ? (ell - cfg.c) / cfg.C : 0.0;
}

inline double reward_het(double y, int e, const RewardConfig& cfg) { return reward_r1(y, cfg) - cfg.eta_e * e; }

inline double step_reward(double y, double ell, const RewardConfig& cfg) {
  double r = reward_r1(y, cfg);
  if (cfg.mode == RewardMode::kInRangePlusHold) r += reward_r2(y, ell, cfg);
  return r;
}

inline bool trigger_fires(double y_start, double y, double eta) { return std::abs(y - y_start) >= eta; }

// Hold length for a known trace: the first i >= 1 with |ys[i-1] - y_start|
// >= eta, or 0 if the trace never triggers.
inline int trigger_step(double y_start, std::span<const double> ys, double eta) {
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (trigger_fires(y_start, ys[i], eta)) return static_cast<int>(i) + 1;
  }
  return 0;
}

struct StepResult {
  Observation obs;
  bool done = false;
};

// Outcome of holding one infusion rate until the CGM trigger fires.
struct HoldResult {
  double reward = 0.0;  // sum_i gamma^i r_i
  int tau = 0;          // held steps, >= 1
  Observation obs;      // observation after the hold
  bool done = false;
  std::vector<double> step_rewards;  // r_0 .. r_{tau-1}
  std::vector<double> ys;            // y after each held step
};

class Env {
 public:
  Env(PatientParams patient, SensorConfig sensor, PumpConfig pump, EpisodeConfig episode,
      RewardConfig reward, Rng noise_rng)
      : patient_(std::move(patient)),
        sensor_(sensor),
        pump_(pump),
        episode_(episode),
        reward_(reward),
        noise_rng_(std::move(noise_rng)) {
    if (episode_.step_period_min % episode_.ode_dt_min != 0) {
      throw Error("config", "step period must be a multiple of the ODE step");
    }
    if (sensor_.sample_period_min != episode_.step_period_min) {
      throw Error("config", "sensor sample period must equal the control step period");
    }
  }

  // Default patient state, or with g_p, g_t, g_sc drawn from N(mu, (0.1 mu)^2)
  // when training. Infusion history and sensor noise start at zero.
  Observation reset(const MealScenario& scenario, bool training, Rng* init_rng) {
    state_ = patient_.basal;
    if (training) {
      if (init_rng == nullptr) throw Error("config", "training reset needs an initial-state stream");
      for (StateIndex i : {kGp, kGt, kGsc}) {
        const double mu = patient_.basal[i];
        double v = -1.0;
        while (v < 0.0) v = init_rng->normal(mu, 0.1 * mu);
        state_[i] = v;
      }
    }
    meals_ = MealSchedule(scenario);
    noise_ = 0.0;
    h_ = 0;
    done_ = false;
    obs_.u_prev = 0.0;
    obs_.y = read_sensor();
    return obs_;
  }

  // Applies u (clamped to the pump range) for one sensor period.
  StepResult step(double u) {
    if (done_) throw Error("episode-finished");
    const double applied = pump_command(u, pump_);
    const int substeps = episode_.step_period_min / episode_.ode_dt_min;
    const double t0 = static_cast<double>(h_ * episode_.step_period_min);
    for (int j = 0; j < substeps; ++j) {
      const double t = t0 + j * episode_.ode_dt_min;
      state_ = rk4_step(state_, applied, meals_.rate_at(t), episode_.ode_dt_min, patient_);
    }
    ++h_;
    obs_.u_prev = applied;
    obs_.y = read_sensor();
    done_ = h_ >= episode_.horizon || terminal(obs_.y);
    return {obs_, done_};
  }

  // Holds u until |y - y_start| >= eta (checked from the first held step on)
  // or the episode ends. Step i earns step_reward(y_{h_k+i}, ell = i).
  HoldResult hold_until_trigger(double u, double eta, double gamma) {
    if (done_) throw Error("episode-finished");
    HoldResult out;
    const double y_start = obs_.y;
    double discount = 1.0;
    for (int i = 0;; ++i) {
      const double r = step_reward(obs_.y, static_cast<double>(i), reward_);
      out.reward += discount * r;
      out.step_rewards.push_back(r);
      discount *= gamma;
      const auto res = step(u);
      out.ys.push_back(res.obs.y);
      out.tau = i + 1;
      if (res.done || trigger_fires(y_start, res.obs.y, eta)) break;
    }
    out.obs = obs_;
    out.done = done_;
    return out;
  }

  bool terminal(double y) const { return y < episode_.hypo_threshold || y > episode_.hyper_threshold; }

  const Observation& observation() const { return obs_; }
  int step_count() const { return h_; }
  bool done() const { return done_; }
  const PatientState& state() const { return state_; }
  void set_state(const PatientState& s) { state_ = s; }
  // Overrides the current reading, e.g. to force a terminal check in tests.
  void set_observation(const Observation& o) { obs_ = o; }

  const PatientParams& patient() const { return patient_; }
  const PumpConfig& pump() const { return pump_; }
  const EpisodeConfig& episode() const { return episode_; }
  const RewardConfig& reward() const { return reward_; }
  const SensorConfig& sensor() const { return sensor_; }

 private:
  double read_sensor() {
    const auto reading = cgm_read(state_, patient_, noise_, sensor_, noise_rng_);
    noise_ = reading.noise;
    return reading.y;
  }

  PatientParams patient_;
  SensorConfig sensor_;
  PumpConfig pump_;
  EpisodeConfig episode_;
  RewardConfig reward_;
  Rng noise_rng_;

  PatientState state_;
  MealSchedule meals_;
  double noise_ = 0.0;
  int h_ = 0;
  bool done_ = true;
  Observation obs_;
};

// Everything but the patient and the noise stream needed to build an Env.
struct EnvSettings {
  SensorConfig sensor;
  PumpConfig pump;
  EpisodeConfig episode;
  RewardConfig reward;
};

inline Env make_env(const PatientParams& patient, const EnvSettings& s, Rng noise_rng) {
  return Env(patient, s.sensor, s.pump, s.episode, s.reward, std::move(noise_rng));
}

// Evaluation scenario i always sees the same sensor noise, whatever the
// method or training seed.
inline constexpr std::uint64_t kEvalNoiseSeedBase = 1000;

inline Rng eval_noise_rng(std::size_t scenario_index) {
  return Rng(kEvalNoiseSeedBase + scenario_index, Stream::kPlantNoise);
}

}  // namespace etap
