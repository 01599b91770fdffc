#pragma once

// CGM-triggered PPO: the infusion rate is held until the sensor reading has
// moved by at least eta since the last decision. Each decision epoch becomes
// one semi-Markov experience with a gamma-aggregated reward and duration tau.

#include <span>
#include <vector>

#include "etap/agent.hpp"
#include "etap/env.hpp"
#include "etap/error.hpp"
#include "etap/metrics.hpp"
#include "etap/ppo.hpp"

namespace etap {

inline double smdp_delta(double reward, int tau, double v_next, double v_cur, int done, double gamma) {
  const double mask = 1.0 - done;
  return reward + discount_pow(gamma, tau) * mask * v_next - v_cur;
}

// Same recursion as compute_gae with gamma replaced by gamma^tau_k per
// epoch; with every tau = 1 the two agree bit for bit.
inline std::vector<double> smdp_gae(std::span<const double> rewards, std::span<const int> taus,
                                    std::span<const double> values, std::span<const int> dones, double gamma,
                                    double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n || taus.size() != n) throw Error("shape", "smdp_gae: length mismatch");
  std::vector<double> adv(n, 0.0);
  double next = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    if (taus[k] < 1) throw Error("shape", "smdp_gae: tau must be >= 1");
    const double g = discount_pow(gamma, taus[k]);
    const double mask = 1.0 - dones[k];
    const double delta = rewards[k] + g * mask * values[k + 1] - values[k];
    next = delta + g * lambda * mask * next;
    adv[k] = next;
  }
  return adv;
}

inline void compute_smdp_advantages(std::vector<Experience>& rows, const Critic& critic, const HyperParams& hp) {
  std::vector<double> r;
  std::vector<int> taus;
  std::vector<int> d;
  for (const auto& e : rows) {
    r.push_back(e.reward);
    taus.push_back(e.tau);
    d.push_back(e.done);
  }
  const auto v = buffer_values(rows, critic);
  finalize_advantages(rows, smdp_gae(r, taus, v, d, hp.gamma, hp.lambda), hp.normalize_advantages);
}

// The surrogate has the same form as standard PPO, indexed by decision epoch.
inline UpdateStats smdp_update(Agent& agent) {
  auto& rows = agent.buffer.entries();
  compute_smdp_advantages(rows, agent.critic, agent.hyper);
  auto st = ppo_update(rows, agent.actor, agent.critic, agent.actor_opt, agent.critic_opt, agent.hyper,
                       agent.shuffle_rng, gaussian_objective);
  log_update(st, "cgm-etppo");
  agent.updates.push_back(st);
  agent.buffer.clear();
  return st;
}

// One episode of decisions. K is the number of holds (every decision,
// including the first, counts as an update).
inline EpisodeRecord run_cgmetppo_episode(Env& env, Agent& agent, const MealScenario& scenario, Rng* init_rng,
                                          EpisodeOptions opt) {
  auto obs = env.reset(scenario, opt.learn, init_rng);
  EpisodeRecord rec;
  record_start(rec, env);
  MlpCache cache;
  const bool variable = agent.trigger.scheme == TriggerScheme::kVariable;
  if (variable != (agent.actor.act_dim() == 2)) throw Error("config", "trigger scheme does not match the actor");
  while (!env.done()) {
    const auto x = obs.normalized(env.pump());
    agent.actor.forward(x, cache);
    const auto s = sample_gaussian(agent.actor, cache.output(), opt.explore, agent.policy_rng);
    const double u = infusion_from_action(s.action[0], env.pump());
    const double eta = variable ? eta_from_action(s.action[1], agent.trigger) : agent.trigger.fixed_eta;
    rec.update_times.push_back(env.step_count());
    rec.etas.push_back(eta);
    const auto hold = env.hold_until_trigger(u, eta, agent.hyper.gamma);
    for (int i = 0; i < hold.tau; ++i) {
      record_step(rec, hold.obs.u_prev, i == 0 ? 1 : 0, hold.step_rewards[i], hold.ys[i]);
    }
    if (opt.learn) {
      Experience e;
      e.obs = x;
      e.action = s.action;
      e.logp_old = s.logp;
      e.value_old = agent.critic.value(x);
      e.reward = hold.reward;
      e.tau = hold.tau;
      e.done = hold.done ? 1 : 0;
      e.next_obs = hold.obs.normalized(env.pump());
      agent.buffer.push(e);
      if (agent.buffer.full()) smdp_update(agent);
    }
    obs = hold.obs;
  }
  rec.K = static_cast<int>(rec.update_times.size());
  return rec;
}

}  // namespace etap
