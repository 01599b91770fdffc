#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "etap/patients.hpp"
#include "etap/pid.hpp"
#include "etap/scenario.hpp"

using namespace etap;

TEST(PidOutput, ZeroAtTarget) {
  EXPECT_EQ(pid_output(112.5, PidState{}, PidGains{}).u, 0.0);
}

TEST(PidOutput, ProportionalExample) {
  const PidGains g{0.0013, 0.0, 0.0};
  EXPECT_NEAR(pid_output(212.5, PidState{}, g).u, 0.13, 1e-15);
}

TEST(PidOutput, LowGlucoseGivesZero) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const PidGains g{rng.uniform(0, 0.01), rng.uniform(0, 1e-3), rng.uniform(0, 0.1)};
    EXPECT_EQ(pid_output(50.0, PidState{}, g).u, 0.0);
  }
}

TEST(PidOutput, NonFiniteRejected) { EXPECT_THROW(pid_output(std::nan(""), PidState{}, PidGains{}), Error); }

TEST(PidOutput, FirstCallHasNoDerivativeKick) {
  const PidGains g{0.0, 0.0, 0.01};
  const auto first = pid_output(200.0, PidState{}, g);
  EXPECT_EQ(first.u, 0.0);
  const auto second = pid_output(230.0, first.state, g);
  EXPECT_NEAR(second.u, 0.01 * 30.0 / 3.0, 1e-15);
}

TEST(PidOutput, AlwaysWithinPumpBounds) {
  Rng rng(2);
  PidState s;
  const PidGains g{0.002, 1e-4, 0.01};
  for (int i = 0; i < 5000; ++i) {
    const auto step = pid_output(rng.uniform(20, 500), s, g);
    ASSERT_GE(step.u, 0.0);
    ASSERT_LE(step.u, 0.15);
    s = step.state;
  }
}

TEST(PidOutput, ProportionalOnlyIsMemoryless) {
  Rng rng(3);
  const PidGains g{0.0009, 0.0, 0.0};
  PidState s;
  for (int i = 0; i < 2000; ++i) {
    const double y = rng.uniform(20, 500);
    const auto step = pid_output(y, s, g);
    ASSERT_EQ(step.u, std::clamp(0.0009 * (y - 112.5), 0.0, 0.15));
    s = step.state;
  }
}

TEST(PidOutput, IntegralFrozenWhileSaturated) {
  const PidGains g{0.01, 1e-4, 0.0};
  PidState s;
  s = pid_output(150.0, s, g).state;  // kp e alone is 0.375, already saturated
  EXPECT_EQ(s.integral, 0.0);
  for (int i = 0; i < 100; ++i) {
    const auto step = pid_output(400.0, s, g);
    EXPECT_EQ(step.u, 0.15);
    EXPECT_EQ(step.state.integral, s.integral);
    s = step.state;
  }
  const PidGains soft{0.0001, 1e-5, 0.0};
  const auto step = pid_output(150.0, PidState{}, soft);
  EXPECT_DOUBLE_EQ(step.state.integral, 37.5 * 3.0);
  EXPECT_DOUBLE_EQ(step.u, 0.0001 * 37.5 + 1e-5 * 112.5);
}

namespace {

std::vector<MealScenario> two_scenarios() {
  std::vector<MealScenario> out;
  for (int i = 0; i < 2; ++i) {
    Rng rng(1000 + i, Stream::kScenario);
    out.push_back(generate_episode_scenario(default_meal_specs(), 1, rng));
  }
  return out;
}

EnvSettings short_settings() {
  EnvSettings s;
  s.episode.horizon = 480;
  return s;
}

}  // namespace

TEST(PidEpisode, UpdatesEveryStep) {
  auto env = make_env(nominal_patient(), short_settings(), eval_noise_rng(0));
  const auto rec = run_pid_episode(env, PidGains{0.0009, 0.0, 0.01}, two_scenarios()[0]);
  EXPECT_EQ(rec.K, rec.T);
  EXPECT_EQ(rec.T, 480);
  EXPECT_EQ(aurr(rec), 0.0);
}

TEST(PidSearch, SingleCandidateReturned) {
  PidGrid grid{{0.0007}, {1e-5}, {0.002}};
  const auto res = grid_search_pid(nominal_patient(), short_settings(), grid, two_scenarios());
  EXPECT_EQ(res.best.kp, 0.0007);
  EXPECT_EQ(res.best.ki, 1e-5);
  EXPECT_EQ(res.best.kd, 0.002);
  EXPECT_EQ(res.table.size(), 1u);
}

TEST(PidSearch, DeterministicAndArgmax) {
  PidGrid grid{{0.0013, 0.0001, 0.0009}, {0.0}, {0.0, 0.01}};
  const auto a = grid_search_pid(nominal_patient(), short_settings(), grid, two_scenarios());
  const auto b = grid_search_pid(nominal_patient(), short_settings(), grid, two_scenarios());
  ASSERT_EQ(a.table.size(), 6u);
  double best = -1.0;
  for (std::size_t i = 0; i < a.table.size(); ++i) {
    EXPECT_EQ(a.table[i].mean_tir, b.table[i].mean_tir);
    best = std::max(best, a.table[i].mean_tir);
  }
  EXPECT_EQ(a.best.key(), b.best.key());
  EXPECT_EQ(a.table.front().gains.kp, 0.0001);  // axes are sorted
  for (const auto& c : a.table) {
    if (c.gains.key() == a.best.key()) {
      EXPECT_EQ(c.mean_tir, best);
    }
  }
}

TEST(PidSearch, TiesGoToSmallestGains) {
  // One quiet hour from the basal state stays in range for every candidate.
  EnvSettings s;
  s.episode.horizon = 20;
  s.sensor.noise_sigma = 0.0;
  PidGrid grid{{0.0013, 0.0005}, {1e-4, 0.0}, {0.01, 0.0}};
  const auto res = grid_search_pid(nominal_patient(), s, grid, {MealScenario{}});
  for (const auto& c : res.table) ASSERT_EQ(c.mean_tir, 100.0);
  EXPECT_EQ(res.best.kp, 0.0005);
  EXPECT_EQ(res.best.ki, 0.0);
  EXPECT_EQ(res.best.kd, 0.0);
}

TEST(PidSearch, RejectsBadGrids) {
  EXPECT_THROW(grid_search_pid(nominal_patient(), short_settings(), PidGrid{{}, {0.0}, {0.0}}, two_scenarios()),
               Error);
  EXPECT_THROW(grid_search_pid(nominal_patient(), short_settings(), PidGrid{{-1.0}, {0.0}, {0.0}}, two_scenarios()),
               Error);
}
