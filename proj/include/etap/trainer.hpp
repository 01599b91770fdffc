#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "etap/agent.hpp"
#include "etap/cgm_etppo.hpp"
#include "etap/env.hpp"
#include "etap/hetppo.hpp"
#include "etap/metrics.hpp"
#include "etap/pid.hpp"
#include "etap/scenario.hpp"

namespace etap {

inline EpisodeRecord run_agent_episode(Env& env, Agent& agent, const MealScenario& scenario, Rng* init_rng,
                                       EpisodeOptions opt) {
  switch (agent.method) {
    case Method::kPpo: return run_ppo_episode(env, agent, scenario, init_rng, opt);
    case Method::kHetppo: return run_hetppo_episode(env, agent, scenario, init_rng, opt);
    case Method::kCgmFixed:
    case Method::kCgmVariable: return run_cgmetppo_episode(env, agent, scenario, init_rng, opt);
    case Method::kPid: break;
  }
  throw Error("config", "method has no learning agent");
}

// Days of meals needed to cover the horizon.
inline int scenario_days(const EpisodeConfig& e) {
  return static_cast<int>(std::ceil(static_cast<double>(e.horizon) * e.step_period_min / kMinutesPerDay));
}

struct EpisodeSummary {
  int episode = 0;
  int T = 0;
  int K = 0;
  EpisodeMetrics metrics;
  double reward_sum = 0.0;
};

inline EpisodeSummary summarize(int episode, const EpisodeRecord& r) {
  EpisodeSummary s{episode, r.T, r.K, episode_metrics(r), 0.0};
  for (double x : r.rewards) s.reward_sum += x;
  return s;
}

using EpisodeCallback = std::function<void(const EpisodeSummary&, const Agent&)>;

// Trains for a number of episodes with fresh random meals each episode. The
// plant noise, meal and initial-state streams all derive from agent.seed.
inline std::vector<EpisodeSummary> train_agent(Agent& agent, const PatientParams& patient,
                                               const EnvSettings& settings, int episodes,
                                               const EpisodeCallback& on_episode = {}) {
  auto env = make_env(patient, settings, Rng(agent.seed, Stream::kPlantNoise));
  Rng scenario_rng(agent.seed, Stream::kScenario);
  Rng init_rng(agent.seed, Stream::kInitialState);
  const auto specs = default_meal_specs();
  const int days = scenario_days(settings.episode);
  std::vector<EpisodeSummary> out;
  for (int ep = 0; ep < episodes; ++ep) {
    const auto scenario = generate_episode_scenario(specs, days, scenario_rng);
    const auto rec = run_agent_episode(env, agent, scenario, &init_rng, {true, true});
    out.push_back(summarize(ep, rec));
    if (on_episode) on_episode(out.back(), agent);
  }
  return out;
}

// Greedy rollouts on fixed scenarios; the agent is left untouched.
inline std::vector<EpisodeRecord> evaluate_agent(Agent& agent, const PatientParams& patient,
                                                 const EnvSettings& settings,
                                                 const std::vector<MealScenario>& scenarios) {
  std::vector<EpisodeRecord> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    auto env = make_env(patient, settings, eval_noise_rng(i));
    out.push_back(run_agent_episode(env, agent, scenarios[i], nullptr, {false, false}));
  }
  return out;
}

inline std::vector<EpisodeRecord> evaluate_pid(const PidGains& g, const PatientParams& patient,
                                               const EnvSettings& settings,
                                               const std::vector<MealScenario>& scenarios) {
  std::vector<EpisodeRecord> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    auto env = make_env(patient, settings, eval_noise_rng(i));
    out.push_back(run_pid_episode(env, g, scenarios[i]));
  }
  return out;
}

// Scenarios shipped for evaluation are generated like this (seed 1000 + i).
inline std::vector<MealScenario> make_eval_scenarios(std::size_t count, int days) {
  std::vector<MealScenario> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(kEvalNoiseSeedBase + i, Stream::kScenario);
    out.push_back(generate_episode_scenario(default_meal_specs(), days, rng));
  }
  return out;
}

}  // namespace etap
