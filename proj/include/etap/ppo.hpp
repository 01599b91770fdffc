#pragma once

// Actor-critic machinery shared by the PPO, H-ETPPO and CGM-ETPPO trainers:
// networks, rollout buffer, GAE, clipped surrogate objectives with exact
// gradients, and the epoch/minibatch update loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "etap/error.hpp"
#include "etap/neural.hpp"
#include "etap/rng.hpp"

namespace etap {

inline constexpr std::size_t kObsDim = 2;
inline constexpr std::size_t kMaxActDim = 2;
using ObsVec = std::array<double, kObsDim>;

struct HyperParams {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double ent_coef = 0.01;
  std::size_t buffer = 512;
  double lr = 3e-4;
  int epochs = 10;
  std::size_t minibatch = 128;
  bool normalize_advantages = true;
};

// gamma^tau by repeated multiplication, so tau = 1 yields gamma exactly.
inline double discount_pow(double gamma, int tau) {
  double g = 1.0;
  for (int i = 0; i < tau; ++i) g *= gamma;
  return g;
}

// values has one more entry than rewards: V(s_0) .. V(s_n), the last being
// the bootstrap. dones[h] = 1 masks both the bootstrap and the recursion.
inline std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                       std::span<const int> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) throw Error("shape", "gae: length mismatch");
  std::vector<double> adv(n, 0.0);
  double next = 0.0;
  for (std::size_t h = n; h-- > 0;) {
    const double mask = 1.0 - dones[h];
    const double delta = rewards[h] + gamma * mask * values[h + 1] - values[h];
    next = delta + gamma * lambda * mask * next;
    adv[h] = next;
  }
  return adv;
}

// Per-entry clipped surrogate min(rho A, clip(rho, 1 - eps, 1 + eps) A).
inline double clipped_term(double ratio, double adv, double eps) {
  return std::min(ratio * adv, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv);
}

inline double clipped_surrogate(std::span<const double> logp_new, std::span<const double> logp_old,
                                std::span<const double> adv, double eps) {
  if (logp_new.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < logp_new.size(); ++i) {
    s += clipped_term(std::exp(logp_new[i] - logp_old[i]), adv[i], eps);
  }
  return s / logp_new.size();
}

inline double value_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw Error("shape", "value_loss: length mismatch");
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / pred.size();
}

// d/d(ratio) of the clipped term: A while the unclipped branch is the min.
inline double clipped_term_slope(double ratio, double adv, double eps) {
  return ratio * adv <= std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv ? adv : 0.0;
}

// Gaussian policy network: MLP outputs the action means (plus an event
// logit when event_head is set); state-independent log-std parameters are
// appended to the flat parameter vector.
class Actor {
 public:
  Actor() = default;

  static Actor create(std::size_t act_dim, bool event_head, Rng& init_rng,
                      std::vector<std::size_t> hidden = {64, 64}, double log_std0 = std::log(0.5)) {
    Actor a;
    a.act_dim_ = act_dim;
    a.event_head_ = event_head;
    std::vector<std::size_t> sizes{kObsDim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(act_dim + (event_head ? 1 : 0));
    a.shape_ = MlpShape(sizes);
    a.theta_.assign(a.shape_.num_params() + act_dim, log_std0);
    std::vector<double> gains(a.shape_.num_layers(), std::sqrt(2.0));
    gains.back() = 0.01;
    init_orthogonal(a.shape_, a.theta_, gains, init_rng);
    return a;
  }

  void forward(const ObsVec& obs, MlpCache& cache) const { mlp_forward(shape_, theta_, obs, cache); }

  std::span<const double> log_std() const { return {theta_.data() + shape_.num_params(), act_dim_}; }
  std::size_t log_std_offset() const { return shape_.num_params(); }
  std::size_t act_dim() const { return act_dim_; }
  bool event_head() const { return event_head_; }
  std::size_t logit_index() const { return act_dim_; }
  const MlpShape& shape() const { return shape_; }
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

 private:
  MlpShape shape_;
  std::size_t act_dim_ = 1;
  bool event_head_ = false;
  std::vector<double> theta_;
};

class Critic {
 public:
  Critic() = default;

  static Critic create(Rng& init_rng, std::vector<std::size_t> hidden = {64, 64}) {
    Critic c;
    std::vector<std::size_t> sizes{kObsDim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    c.shape_ = MlpShape(sizes);
    c.theta_.assign(c.shape_.num_params(), 0.0);
    std::vector<double> gains(c.shape_.num_layers(), std::sqrt(2.0));
    gains.back() = 1.0;
    init_orthogonal(c.shape_, c.theta_, gains, init_rng);
    return c;
  }

  double value(const ObsVec& obs) const {
    MlpCache cache;
    mlp_forward(shape_, theta_, obs, cache);
    return cache.act.back()[0];
  }

  void forward(const ObsVec& obs, MlpCache& cache) const { mlp_forward(shape_, theta_, obs, cache); }

  const MlpShape& shape() const { return shape_; }
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

 private:
  MlpShape shape_;
  std::vector<double> theta_;
};

// One buffer row. For the SMDP trainer a row is a decision epoch with
// aggregated reward and duration tau; otherwise tau = 1.
struct Experience {
  ObsVec obs{};
  std::array<double, kMaxActDim> action{};  // raw (unclamped) Gaussian sample
  double logp_old = 0.0;                    // Gaussian log-prob; unused when event == 0
  int event = 1;
  double logp_event_old = 0.0;
  double value_old = 0.0;
  double reward = 0.0;
  int tau = 1;
  int done = 0;  // terminal flag of the successor state
  ObsVec next_obs{};
  double advantage = 0.0;
  double return_target = 0.0;
};

class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity = 512) : capacity_(capacity) { entries_.reserve(capacity); }

  void push(const Experience& e) {
    if (full()) throw Error("buffer", "rollout buffer overflow");
    entries_.push_back(e);
  }
  bool full() const { return entries_.size() >= capacity_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  void clear() { entries_.clear(); }

  // Indices of rows whose infusion rate was freshly sampled.
  std::vector<std::size_t> event_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].event == 1) out.push_back(i);
    }
    return out;
  }

  std::vector<Experience>& entries() { return entries_; }
  const std::vector<Experience>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::vector<Experience> entries_;
};

// Values V(s_0) .. V(s_{n-1}) from the rows plus a bootstrap for the last
// successor (ignored when that row is terminal).
inline std::vector<double> buffer_values(const std::vector<Experience>& rows, const Critic& critic) {
  std::vector<double> v;
  v.reserve(rows.size() + 1);
  for (const auto& e : rows) v.push_back(e.value_old);
  v.push_back(rows.empty() || rows.back().done ? 0.0 : critic.value(rows.back().next_obs));
  return v;
}

// Fills return targets (V_old + A) and, if requested, normalizes the
// advantages in place (batch mean / std, std floored at 1e-8).
inline void finalize_advantages(std::vector<Experience>& rows, std::span<const double> adv, bool normalize) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].advantage = adv[i];
    rows[i].return_target = rows[i].value_old + adv[i];
  }
  if (!normalize || rows.empty()) return;
  double mean = 0.0;
  for (const auto& e : rows) mean += e.advantage;
  mean /= rows.size();
  double var = 0.0;
  for (const auto& e : rows) var += (e.advantage - mean) * (e.advantage - mean);
  const double sd = std::max(std::sqrt(var / rows.size()), 1e-8);
  for (auto& e : rows) e.advantage = (e.advantage - mean) / sd;
}

inline void compute_mdp_advantages(std::vector<Experience>& rows, const Critic& critic, const HyperParams& hp) {
  std::vector<double> r;
  std::vector<int> d;
  for (const auto& e : rows) {
    r.push_back(e.reward);
    d.push_back(e.done);
  }
  const auto v = buffer_values(rows, critic);
  finalize_advantages(rows, compute_gae(r, v, d, hp.gamma, hp.lambda), hp.normalize_advantages);
}

struct ObjectiveStats {
  double objective = 0.0;  // J (to be maximized)
  double ratio_mean = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
};

// Minibatch view: the rows an objective is evaluated on.
using BatchIndex = std::span<const std::size_t>;

// Standard / SMDP objective J = L_clip + c_ent L_ent over a Gaussian head.
// Writes dLoss/dtheta (Loss = -J) into grad when non-null.
inline ObjectiveStats gaussian_objective(const Actor& actor, const std::vector<Experience>& rows, BatchIndex idx,
                                         const HyperParams& hp, std::vector<double>* grad) {
  ObjectiveStats st;
  if (grad) grad->assign(actor.params().size(), 0.0);
  if (idx.empty()) return st;
  const std::size_t A = actor.act_dim();
  const auto log_std = actor.log_std();
  const double inv_b = 1.0 / idx.size();
  MlpCache cache;
  std::vector<double> gout(actor.shape().output_dim(), 0.0);
  for (std::size_t k : idx) {
    const auto& e = rows[k];
    actor.forward(e.obs, cache);
    const auto out = cache.output();
    const auto lp = gaussian_logprob_entropy(out.subspan(0, A), log_std, std::span<const double>(e.action.data(), A));
    const double ratio = std::exp(lp.logp - e.logp_old);
    st.objective += clipped_term(ratio, e.advantage, hp.clip) * inv_b;
    st.ratio_mean += ratio * inv_b;
    if (std::abs(ratio - 1.0) > hp.clip) st.clip_fraction += inv_b;
    if (!grad) continue;
    const double slope = clipped_term_slope(ratio, e.advantage, hp.clip) * ratio;  // d term / d logp
    if (slope == 0.0) continue;
    std::fill(gout.begin(), gout.end(), 0.0);
    for (std::size_t i = 0; i < A; ++i) {
      const double inv_sigma = std::exp(-log_std[i]);
      const double z = (e.action[i] - out[i]) * inv_sigma;
      gout[i] = -slope * z * inv_sigma * inv_b;
      (*grad)[actor.log_std_offset() + i] += -slope * (z * z - 1.0) * inv_b;
    }
    mlp_backward(actor.shape(), actor.params(), cache, gout, *grad);
  }
  double ent = 0.0;
  for (std::size_t i = 0; i < A; ++i) ent += 0.5 + kHalfLog2Pi + log_std[i];
  st.entropy = ent;
  st.objective += hp.ent_coef * ent;
  if (grad) {
    for (std::size_t i = 0; i < A; ++i) (*grad)[actor.log_std_offset() + i] += -hp.ent_coef;
  }
  return st;
}

// Critic loss mean (V(s) - G)^2 with gradient.
inline double critic_objective(const Critic& critic, const std::vector<Experience>& rows, BatchIndex idx,
                               std::vector<double>* grad) {
  if (grad) grad->assign(critic.params().size(), 0.0);
  if (idx.empty()) return 0.0;
  const double inv_b = 1.0 / idx.size();
  MlpCache cache;
  double loss = 0.0;
  double g[1];
  for (std::size_t k : idx) {
    critic.forward(rows[k].obs, cache);
    const double diff = cache.output()[0] - rows[k].return_target;
    loss += diff * diff * inv_b;
    if (!grad) continue;
    g[0] = 2.0 * diff * inv_b;
    mlp_backward(critic.shape(), critic.params(), cache, g, *grad);
  }
  return loss;
}

struct UpdateStats {
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double ratio_mean = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  int minibatches = 0;
  bool aborted = false;
  std::string abort_reason;
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Epochs of shuffled minibatches; ascends the policy objective and
// descends the critic loss. Objective(actor, rows, idx, hp, grad) follows
// the gaussian_objective signature. A non-finite loss or gradient stops
// the update before that minibatch is applied.
template <class Objective>
UpdateStats ppo_update(std::vector<Experience>& rows, Actor& actor, Critic& critic, Adam& actor_opt,
                       Adam& critic_opt, const HyperParams& hp, Rng& shuffle_rng, Objective&& objective) {
  UpdateStats st;
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> g_actor;
  std::vector<double> g_critic;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    for (std::size_t start = 0; start < order.size(); start += hp.minibatch) {
      const std::size_t len = std::min(hp.minibatch, order.size() - start);
      const BatchIndex idx(order.data() + start, len);
      const auto os = objective(actor, rows, idx, hp, &g_actor);
      const double vl = critic_objective(critic, rows, idx, &g_critic);
      if (!std::isfinite(os.objective) || !std::isfinite(vl) || !all_finite(g_actor) || !all_finite(g_critic)) {
        st.aborted = true;
        st.abort_reason = "non-finite loss or gradient";
        return st;
      }
      actor_opt.step(actor.params(), g_actor);
      critic_opt.step(critic.params(), g_critic);
      ++st.minibatches;
      st.policy_objective += os.objective;
      st.value_loss += vl;
      st.ratio_mean += os.ratio_mean;
      st.clip_fraction += os.clip_fraction;
      st.entropy += os.entropy;
    }
  }
  if (st.minibatches > 0) {
    const double n = st.minibatches;
    st.policy_objective /= n;
    st.value_loss /= n;
    st.ratio_mean /= n;
    st.clip_fraction /= n;
    st.entropy /= n;
  }
  return st;
}

}  // namespace etap
