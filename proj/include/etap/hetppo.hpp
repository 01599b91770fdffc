#pragma once

// Hybrid event-triggered PPO: at each sensor period a Bernoulli head decides
// whether to update the infusion rate, a Gaussian head proposes the new rate.

#include <cmath>
#include <iostream>
#include <vector>

#include "etap/agent.hpp"
#include "etap/env.hpp"
#include "etap/metrics.hpp"
#include "etap/neural.hpp"
#include "etap/ppo.hpp"

namespace etap {

// J = L_e + L_u + c_ent (H_e + H_u). The event term averages over the whole
// minibatch, the rate term only over rows with e = 1 (zero if there are
// none). Without an event head (pinned mode) L_e and H_e vanish and this
// reduces to gaussian_objective.
inline ObjectiveStats hetppo_objective(const Actor& actor, const std::vector<Experience>& rows, BatchIndex idx,
                                       const HyperParams& hp, std::vector<double>* grad) {
  ObjectiveStats st;
  if (grad) grad->assign(actor.params().size(), 0.0);
  if (idx.empty()) return st;
  const std::size_t A = actor.act_dim();
  const bool has_event = actor.event_head();
  const auto log_std = actor.log_std();
  const double inv_b = 1.0 / idx.size();
  std::size_t n_u = 0;
  for (std::size_t k : idx) n_u += rows[k].event == 1 ? 1 : 0;
  const double inv_u = n_u > 0 ? 1.0 / n_u : 0.0;

  MlpCache cache;
  std::vector<double> gout(actor.shape().output_dim(), 0.0);
  double event_entropy = 0.0;
  for (std::size_t k : idx) {
    const auto& e = rows[k];
    actor.forward(e.obs, cache);
    const auto out = cache.output();
    bool touched = false;
    if (grad) std::fill(gout.begin(), gout.end(), 0.0);

    if (has_event) {
      const double logit = out[actor.logit_index()];
      const auto be = bernoulli_logprob_entropy(logit, e.event);
      const double ratio = std::exp(be.logp - e.logp_event_old);
      st.objective += clipped_term(ratio, e.advantage, hp.clip) * inv_b;
      event_entropy += be.entropy * inv_b;
      if (grad) {
        const double p = sigmoid(logit);
        const double slope = clipped_term_slope(ratio, e.advantage, hp.clip) * ratio;
        const double dlogp = e.event - p;
        const double dent = -logit * p * (1.0 - p);
        gout[actor.logit_index()] = -(slope * dlogp + hp.ent_coef * dent) * inv_b;
        touched = true;
      }
    }

    if (e.event == 1) {
      const auto lp =
          gaussian_logprob_entropy(out.subspan(0, A), log_std, std::span<const double>(e.action.data(), A));
      const double ratio = std::exp(lp.logp - e.logp_old);
      st.objective += clipped_term(ratio, e.advantage, hp.clip) * inv_u;
      st.ratio_mean += ratio * inv_u;
      if (std::abs(ratio - 1.0) > hp.clip) st.clip_fraction += inv_u;
      if (grad) {
        const double slope = clipped_term_slope(ratio, e.advantage, hp.clip) * ratio;
        if (slope != 0.0) {
          for (std::size_t i = 0; i < A; ++i) {
            const double inv_sigma = std::exp(-log_std[i]);
            const double z = (e.action[i] - out[i]) * inv_sigma;
            gout[i] = -slope * z * inv_sigma * inv_u;
            (*grad)[actor.log_std_offset() + i] += -slope * (z * z - 1.0) * inv_u;
          }
          touched = true;
        }
      }
    }
    if (grad && touched) mlp_backward(actor.shape(), actor.params(), cache, gout, *grad);
  }
  double ent = 0.0;
  for (std::size_t i = 0; i < A; ++i) ent += 0.5 + kHalfLog2Pi + log_std[i];
  st.entropy = ent + event_entropy;
  st.objective += hp.ent_coef * (ent + event_entropy);
  if (grad) {
    for (std::size_t i = 0; i < A; ++i) (*grad)[actor.log_std_offset() + i] += -hp.ent_coef;
  }
  return st;
}

struct FactoredSample {
  int event = 1;
  double logp_event = 0.0;
  GaussianSample rate;  // meaningful only when event == 1
};

// Event first, then the rate only if an update was chosen. Greedy mode
// takes e = [p >= 0.5] and the Gaussian mean.
inline FactoredSample factored_sample(const Actor& actor, std::span<const double> out, bool explore, Rng& rng) {
  FactoredSample s;
  if (actor.event_head()) {
    const double logit = out[actor.logit_index()];
    s.event = explore ? (rng.bernoulli(sigmoid(logit)) ? 1 : 0) : (sigmoid(logit) >= 0.5 ? 1 : 0);
    s.logp_event = bernoulli_logprob_entropy(logit, s.event).logp;
  }
  if (s.event == 1) s.rate = sample_gaussian(actor, out, explore, rng);
  return s;
}

inline UpdateStats update_hetppo(Agent& agent) {
  auto& rows = agent.buffer.entries();
  if (agent.buffer.event_indices().empty()) {
    std::clog << "etap: hetppo buffer has no rate updates; rate loss is zero for this update\n";
  }
  compute_mdp_advantages(rows, agent.critic, agent.hyper);
  auto st = ppo_update(rows, agent.actor, agent.critic, agent.actor_opt, agent.critic_opt, agent.hyper,
                       agent.shuffle_rng, hetppo_objective);
  log_update(st, "hetppo");
  agent.updates.push_back(st);
  agent.buffer.clear();
  return st;
}

// One episode; the held rate starts at zero and the step reward is
// R1 - eta_e e. K counts the steps with e = 1.
inline EpisodeRecord run_hetppo_episode(Env& env, Agent& agent, const MealScenario& scenario, Rng* init_rng,
                                        EpisodeOptions opt) {
  auto obs = env.reset(scenario, opt.learn, init_rng);
  EpisodeRecord rec;
  record_start(rec, env);
  MlpCache cache;
  double held = 0.0;
  while (!env.done()) {
    const auto x = obs.normalized(env.pump());
    agent.actor.forward(x, cache);
    const auto s = factored_sample(agent.actor, cache.output(), opt.explore, agent.policy_rng);
    if (s.event == 1) {
      held = infusion_from_action(s.rate.action[0], env.pump());
      rec.update_times.push_back(env.step_count());
    }
    const double r = reward_het(obs.y, s.event, env.reward());
    const auto res = env.step(held);
    record_step(rec, res.obs.u_prev, s.event, r, res.obs.y);
    if (opt.learn) {
      Experience e;
      e.obs = x;
      e.action = s.rate.action;
      if (s.event == 0) e.action[0] = held;  // held rate for the record; no rate log-prob
      e.logp_old = s.rate.logp;
      e.event = s.event;
      e.logp_event_old = s.logp_event;
      e.value_old = agent.critic.value(x);
      e.reward = r;
      e.done = res.done ? 1 : 0;
      e.next_obs = res.obs.normalized(env.pump());
      agent.buffer.push(e);
      if (agent.buffer.full()) update_hetppo(agent);
    }
    obs = res.obs;
  }
  rec.K = static_cast<int>(rec.update_times.size());
  return rec;
}

}  // namespace etap
