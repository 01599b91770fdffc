#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "etap/env.hpp"
#include "etap/error.hpp"
#include "etap/metrics.hpp"
#include "etap/ppo.hpp"
#include "etap/rng.hpp"

namespace etap {

enum class Method { kPid, kPpo, kHetppo, kCgmFixed, kCgmVariable };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kPid: return "pid";
    case Method::kPpo: return "ppo";
    case Method::kHetppo: return "hetppo";
    case Method::kCgmFixed: return "cgmetppo-fixed";
    case Method::kCgmVariable: return "cgmetppo-variable";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kPid, Method::kPpo, Method::kHetppo, Method::kCgmFixed, Method::kCgmVariable}) {
    if (method_name(m) == s) return m;
  }
  throw Error("config", "unknown method '" + s + "'");
}

enum class TriggerScheme { kFixed, kVariable };

struct TriggerConfig {
  TriggerScheme scheme = TriggerScheme::kFixed;
  double fixed_eta = 25.0;  // mg/dL
  double eta_lo = 15.0;
  double eta_hi = 25.0;
};

// Normalized Gaussian action -> infusion rate; clamping happens here, the
// log-probabilities always use the raw sample.
inline double infusion_from_action(double a, const PumpConfig& pump) {
  return pump.u_min + std::clamp(a, 0.0, 1.0) * (pump.u_max - pump.u_min);
}

inline double eta_from_action(double a, const TriggerConfig& cfg) {
  return cfg.eta_lo + std::clamp(a, 0.0, 1.0) * (cfg.eta_hi - cfg.eta_lo);
}

struct EpisodeOptions {
  bool explore = true;  // sample from the policy; false = use the mean
  bool learn = true;    // store experience, update when the buffer fills,
                        // and randomize the initial state
};

// Everything a learning controller owns: networks, optimizers, buffer and
// its private random streams.
struct Agent {
  Method method = Method::kCgmFixed;
  HyperParams hyper;
  TriggerConfig trigger;
  bool event_pinned = false;  // H-ETPPO with e fixed at 1 and no event head
  Actor actor;
  Critic critic;
  Adam actor_opt;
  Adam critic_opt;
  RolloutBuffer buffer{512};
  Rng policy_rng{0};
  Rng shuffle_rng{0};
  std::uint64_t seed = 0;
  std::vector<UpdateStats> updates;

  static Agent create(Method method, const HyperParams& hp, std::uint64_t seed, TriggerConfig trigger = {},
                      bool event_pinned = false, std::vector<std::size_t> hidden = {64, 64}) {
    if (method == Method::kPid) throw Error("config", "PID has no learning agent");
    Agent a;
    a.method = method;
    a.hyper = hp;
    a.trigger = trigger;
    if (method == Method::kCgmFixed) a.trigger.scheme = TriggerScheme::kFixed;
    if (method == Method::kCgmVariable) a.trigger.scheme = TriggerScheme::kVariable;
    a.seed = seed;
    a.event_pinned = method == Method::kHetppo && event_pinned;
    Rng actor_init(seed, Stream::kActorInit);
    Rng critic_init(seed, Stream::kCriticInit);
    const std::size_t act_dim = method == Method::kCgmVariable ? 2 : 1;
    a.actor = Actor::create(act_dim, method == Method::kHetppo && !a.event_pinned, actor_init, hidden);
    a.critic = Critic::create(critic_init, hidden);
    AdamConfig ac;
    ac.lr = hp.lr;
    a.actor_opt = Adam(a.actor.params().size(), ac);
    a.critic_opt = Adam(a.critic.params().size(), ac);
    a.buffer = RolloutBuffer(hp.buffer);
    a.policy_rng = Rng(seed, Stream::kPolicy);
    a.shuffle_rng = Rng(seed, Stream::kShuffle);
    return a;
  }
};

struct GaussianSample {
  std::array<double, kMaxActDim> action{};
  double logp = 0.0;
};

// Draws (or takes the mean of) the Gaussian head from a forward pass.
inline GaussianSample sample_gaussian(const Actor& actor, std::span<const double> out, bool explore, Rng& rng) {
  GaussianSample s;
  const auto log_std = actor.log_std();
  for (std::size_t i = 0; i < actor.act_dim(); ++i) {
    s.action[i] = explore ? out[i] + std::exp(log_std[i]) * rng.normal() : out[i];
  }
  s.logp = gaussian_logprob_entropy(out.subspan(0, actor.act_dim()), log_std,
                                    std::span<const double>(s.action.data(), actor.act_dim()))
               .logp;
  return s;
}

inline void log_update(const UpdateStats& st, const char* who) {
  if (st.aborted) std::clog << "etap: " << who << " update aborted: " << st.abort_reason << '\n';
}

// Standard PPO update on a full buffer.
inline UpdateStats update_ppo(Agent& agent) {
  auto& rows = agent.buffer.entries();
  compute_mdp_advantages(rows, agent.critic, agent.hyper);
  auto st = ppo_update(rows, agent.actor, agent.critic, agent.actor_opt, agent.critic_opt, agent.hyper,
                       agent.shuffle_rng, gaussian_objective);
  log_update(st, "ppo");
  agent.updates.push_back(st);
  agent.buffer.clear();
  return st;
}

inline void record_start(EpisodeRecord& rec, const Env& env) {
  rec = EpisodeRecord{};
  rec.H = env.episode().horizon;
  rec.y.push_back(env.observation().y);
}

inline void record_step(EpisodeRecord& rec, double u, int event, double reward, double y_next) {
  rec.u.push_back(u);
  rec.events.push_back(event);
  rec.rewards.push_back(reward);
  rec.y.push_back(y_next);
  ++rec.T;
}

// Periodic PPO: a fresh infusion rate every sensor period.
inline EpisodeRecord run_ppo_episode(Env& env, Agent& agent, const MealScenario& scenario, Rng* init_rng,
                                     EpisodeOptions opt) {
  auto obs = env.reset(scenario, opt.learn, init_rng);
  EpisodeRecord rec;
  record_start(rec, env);
  MlpCache cache;
  while (!env.done()) {
    const auto x = obs.normalized(env.pump());
    agent.actor.forward(x, cache);
    const auto s = sample_gaussian(agent.actor, cache.output(), opt.explore, agent.policy_rng);
    const double u = infusion_from_action(s.action[0], env.pump());
    const double r = step_reward(obs.y, 0.0, env.reward());
    rec.update_times.push_back(env.step_count());
    const auto res = env.step(u);
    record_step(rec, res.obs.u_prev, 1, r, res.obs.y);
    if (opt.learn) {
      Experience e;
      e.obs = x;
      e.action = s.action;
      e.logp_old = s.logp;
      e.value_old = agent.critic.value(x);
      e.reward = r;
      e.done = res.done ? 1 : 0;
      e.next_obs = res.obs.normalized(env.pump());
      agent.buffer.push(e);
      if (agent.buffer.full()) update_ppo(agent);
    }
    obs = res.obs;
  }
  rec.K = static_cast<int>(rec.update_times.size());
  return rec;
}

}  // namespace etap
