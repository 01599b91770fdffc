#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "etap/cgm_etppo.hpp"
#include "etap/patients.hpp"

using namespace etap;

namespace {

HyperParams small_hyper() {
  HyperParams hp;
  hp.buffer = 64;
  hp.minibatch = 32;
  hp.epochs = 2;
  return hp;
}

EnvSettings short_settings(int horizon = 240) {
  EnvSettings s;
  s.episode.horizon = horizon;
  return s;
}

Env env_for(const EnvSettings& s, std::uint64_t seed = 3) {
  return make_env(nominal_patient(), s, Rng(seed, Stream::kPlantNoise));
}

MealScenario one_meal() { return MealScenario{{{60, 60.0}}}; }

struct SmdpCase {
  std::vector<double> r, v;
  std::vector<int> tau, d;
};

SmdpCase random_case(Rng& rng, int n) {
  SmdpCase c;
  for (int i = 0; i < n; ++i) {
    c.r.push_back(rng.normal(0.0, 3.0));
    c.v.push_back(rng.normal(0.0, 10.0));
    c.tau.push_back(1 + static_cast<int>(rng.uniform() * 12));
    c.d.push_back(rng.bernoulli(0.08) ? 1 : 0);
  }
  c.v.push_back(rng.normal(0.0, 10.0));
  return c;
}

// Forward expansion: each later delta weighted by the product of
// gamma^tau lambda over the epochs in between, up to the episode end.
std::vector<double> brute_smdp_gae(const SmdpCase& c, double gamma, double lambda) {
  const std::size_t n = c.r.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double w = 1.0;
    for (std::size_t j = k; j < n; ++j) {
      const double gt = std::pow(gamma, c.tau[j]);
      out[k] += w * (c.r[j] + gt * (1 - c.d[j]) * c.v[j + 1] - c.v[j]);
      if (c.d[j]) break;
      w *= gt * lambda;
    }
  }
  return out;
}

}  // namespace

TEST(SmdpDelta, Examples) {
  EXPECT_NEAR(smdp_delta(2.9701, 3, 10.0, 5.0, 0, 0.99), 7.67309, 1e-12);
  for (double v_next : {-100.0, 0.0, 7.0}) EXPECT_EQ(smdp_delta(2.9701, 3, v_next, 5.0, 1, 0.99), 2.9701 - 5.0);
  EXPECT_EQ(smdp_delta(1.0, 1, 4.0, 2.0, 0, 0.99), 1.0 + 0.99 * 4.0 - 2.0);
}

TEST(SmdpGae, UnitDurationsMatchStandardGae) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = random_case(rng, 60);
    std::fill(c.tau.begin(), c.tau.end(), 1);
    const auto a = smdp_gae(c.r, c.tau, c.v, c.d, 0.99, 0.95);
    const auto b = compute_gae(c.r, c.v, c.d, 0.99, 0.95);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(SmdpGae, SingleExperienceIsDelta) {
  const std::vector<double> r{2.9701}, v{5.0, 10.0};
  const std::vector<int> tau{3}, d{0};
  EXPECT_EQ(smdp_gae(r, tau, v, d, 0.99, 0.95)[0], smdp_delta(2.9701, 3, 10.0, 5.0, 0, 0.99));
}

TEST(SmdpGae, MatchesBruteForce) {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_case(rng, 50);
    const double gamma = rng.uniform(0.9, 0.999), lambda = rng.uniform(0.5, 1.0);
    const auto fast = smdp_gae(c.r, c.tau, c.v, c.d, gamma, lambda);
    const auto slow = brute_smdp_gae(c, gamma, lambda);
    for (std::size_t k = 0; k < fast.size(); ++k) ASSERT_NEAR(fast[k], slow[k], 1e-10) << trial << " " << k;
  }
}

TEST(SmdpGae, RejectsZeroDuration) {
  const std::vector<double> r{1.0}, v{0.0, 0.0};
  const std::vector<int> tau{0}, d{0};
  EXPECT_THROW(smdp_gae(r, tau, v, d, 0.99, 0.95), Error);
}

TEST(SmdpUpdate, ToyGradientMatchesFiniteDifferences) {
  Rng init(33);
  auto actor = Actor::create(1, false, init, {1});
  ASSERT_EQ(actor.params().size(), 6u);
  for (double& w : actor.params()) w += 0.5 * init.normal();
  const auto critic = Critic::create(init, {1});
  Rng rng(34);
  std::vector<Experience> rows(10);
  MlpCache cache;
  const double offsets[] = {0.05, -0.6, 0.1, 0.6, -0.05};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& e = rows[i];
    e.obs = {rng.uniform(), rng.uniform()};
    actor.forward(e.obs, cache);
    e.action[0] = cache.output()[0] + 0.4 * rng.normal();
    e.logp_old = gaussian_logprob_entropy(cache.output().subspan(0, 1), actor.log_std(),
                                          std::span<const double>(e.action.data(), 1))
                     .logp -
                 offsets[i % 5];
    e.reward = rng.normal(5.0, 2.0);
    e.tau = 1 + static_cast<int>(rng.uniform() * 20);
    e.value_old = critic.value(e.obs);
    e.next_obs = {rng.uniform(), rng.uniform()};
  }
  HyperParams hp;
  compute_smdp_advantages(rows, critic, hp);
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> grad;
  gaussian_objective(actor, rows, idx, hp, &grad);
  auto& p = actor.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i], h = 1e-6;
    p[i] = keep + h;
    const double up = gaussian_objective(actor, rows, idx, hp, nullptr).objective;
    p[i] = keep - h;
    const double dn = gaussian_objective(actor, rows, idx, hp, nullptr).objective;
    p[i] = keep;
    const double fd = -(up - dn) / (2 * h);
    ASSERT_NEAR(grad[i], fd, 1e-4 * std::max(1e-3, std::abs(fd))) << i;
  }
}

TEST(SmdpUpdate, FixedSeedReproducible) {
  auto run = [] {
    Agent agent = Agent::create(Method::kCgmFixed, small_hyper(), 35, {TriggerScheme::kFixed, 5.0});
    auto env = env_for(short_settings(), 35);
    Rng init(35, Stream::kInitialState);
    for (int ep = 0; ep < 6; ++ep) run_cgmetppo_episode(env, agent, one_meal(), &init, {});
    EXPECT_GT(agent.updates.size(), 0u);
    return agent.actor.params();
  };
  EXPECT_EQ(run(), run());
}

TEST(CgmEpisode, ExperiencesAggregateStepRewards) {
  auto hp = small_hyper();
  hp.buffer = 2000;
  Agent agent = Agent::create(Method::kCgmFixed, hp, 36, {TriggerScheme::kFixed, 10.0});
  auto env = env_for(short_settings(960), 36);
  Rng init(36, Stream::kInitialState);
  const auto rec = run_cgmetppo_episode(env, agent, MealScenario{{{100, 70.0}, {600, 40.0}}}, &init, {});
  const auto& rows = agent.buffer.entries();
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(rec.K));
  int steps = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ASSERT_GE(rows[k].tau, 1);
    ASSERT_EQ(rec.update_times[k], steps);
    double r = 0.0, g = 1.0;
    for (int i = 0; i < rows[k].tau; ++i) {
      r += g * rec.rewards[steps + i];
      g *= hp.gamma;
    }
    ASSERT_NEAR(rows[k].reward, r, 1e-12) << k;
    steps += rows[k].tau;
  }
  EXPECT_EQ(steps, rec.T);
  EXPECT_EQ(rows.back().done, 1);
  for (double eta : rec.etas) EXPECT_EQ(eta, 10.0);
}

TEST(CgmEpisode, VariableThresholdStaysInBounds) {
  Agent agent = Agent::create(Method::kCgmVariable, small_hyper(), 37);
  ASSERT_EQ(agent.actor.act_dim(), 2u);
  auto env = env_for(short_settings(960), 37);
  Rng init(37, Stream::kInitialState);
  for (int ep = 0; ep < 3; ++ep) {
    const auto rec = run_cgmetppo_episode(env, agent, one_meal(), &init, {});
    ASSERT_EQ(rec.etas.size(), static_cast<std::size_t>(rec.K));
    for (double eta : rec.etas) {
      ASSERT_GE(eta, 15.0);
      ASSERT_LE(eta, 25.0);
    }
  }
}

TEST(CgmEpisode, FixedModeHasNoThresholdHead) {
  const auto agent = Agent::create(Method::kCgmFixed, small_hyper(), 38);
  EXPECT_EQ(agent.actor.act_dim(), 1u);
  EXPECT_EQ(agent.actor.shape().output_dim(), 1u);
}

// Greedy policy pinned at the basal rate on a quiet patient: the reading
// never moves by 25, so one decision covers the whole horizon.
TEST(CgmEpisode, QuietPatientRarelyUpdates) {
  Agent agent = Agent::create(Method::kCgmFixed, small_hyper(), 39);
  const auto patient = nominal_patient();
  const auto& shape = agent.actor.shape();
  const std::size_t last = shape.num_layers() - 1;
  for (std::size_t k = 0; k < shape.fan_in(last); ++k) agent.actor.params()[shape.weight_offset(last) + k] = 0.0;
  agent.actor.params()[shape.bias_offset(last)] = patient.u_basal / 0.15;
  EnvSettings s;
  s.sensor.noise_sigma = 0.0;
  auto env = make_env(patient, s, Rng(39, Stream::kPlantNoise));
  const auto rec = run_cgmetppo_episode(env, agent, MealScenario{}, nullptr, {false, false});
  EXPECT_EQ(rec.T, 960);
  EXPECT_LE(rec.K, 2);
  EXPECT_GE(aurr(rec), 99.7);
}

// A zero threshold fires every step: each epoch is one sensor period and
// the run must coincide with periodic PPO drawing from the same streams.
TEST(CgmEpisode, ZeroThresholdMatchesPpo) {
  const auto hp = small_hyper();
  Agent cgm = Agent::create(Method::kCgmFixed, hp, 40, {TriggerScheme::kFixed, 0.0});
  Agent ppo = Agent::create(Method::kPpo, hp, 40);
  auto env_a = env_for(short_settings(), 40), env_b = env_for(short_settings(), 40);
  Rng init_a(40, Stream::kInitialState), init_b(40, Stream::kInitialState);
  for (int ep = 0; ep < 4; ++ep) {
    const auto a = run_cgmetppo_episode(env_a, cgm, one_meal(), &init_a, {});
    const auto b = run_ppo_episode(env_b, ppo, one_meal(), &init_b, {});
    ASSERT_EQ(a.y, b.y);
    ASSERT_EQ(a.u, b.u);
    ASSERT_EQ(a.rewards, b.rewards);
    ASSERT_EQ(a.update_times, b.update_times);
    ASSERT_EQ(a.K, a.T);
  }
  ASSERT_GT(cgm.updates.size(), 0u);
  EXPECT_EQ(cgm.actor.params(), ppo.actor.params());
  EXPECT_EQ(cgm.critic.params(), ppo.critic.params());
}

TEST(CgmEpisode, SchemeMismatchRejected) {
  Agent agent = Agent::create(Method::kCgmFixed, small_hyper(), 41);
  agent.trigger.scheme = TriggerScheme::kVariable;
  auto env = env_for(short_settings());
  EXPECT_THROW(run_cgmetppo_episode(env, agent, one_meal(), nullptr, {false, false}), Error);
}
