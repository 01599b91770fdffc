#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "etap/metrics.hpp"
#include "etap/rng.hpp"

using namespace etap;

namespace {

EpisodeRecord record(int T, int K, double y_all = 120.0, int H = 960) {
  EpisodeRecord r;
  r.T = T;
  r.H = H;
  r.K = K;
  r.y.assign(T + 1, y_all);
  return r;
}

// A random record satisfying the type invariants.
EpisodeRecord random_record(Rng& rng) {
  EpisodeRecord r;
  r.T = 1 + static_cast<int>(rng.uniform() * r.H);
  r.y.push_back(rng.uniform(40, 300));
  for (int h = 0; h < r.T; ++h) r.y.push_back(rng.uniform(40, 300));
  for (int h = 0; h < r.T; ++h) {
    if (h == 0 || rng.bernoulli(0.05)) {
      r.update_times.push_back(h);
      r.etas.push_back(rng.uniform(15, 25));
    }
  }
  r.K = static_cast<int>(r.update_times.size());
  return r;
}

}  // namespace

TEST(Ecf, Examples) {
  EXPECT_EQ(ecf(record(960, 0)), 100.0);
  EXPECT_EQ(ecf(record(480, 0)), 50.0);
  EXPECT_EQ(ecf(record(912, 0)), 95.0);
}

TEST(Tir, Examples) {
  EXPECT_EQ(tir(record(960, 0)), 100.0);
  EXPECT_EQ(tir(record(480, 0)), 50.0);
  EXPECT_EQ(tir(record(960, 0, 250.0)), 0.0);
  auto r = record(3, 0, 100.0, 4);
  r.y[0] = 500.0;  // the reading before the first action is not counted
  r.y[2] = 69.9;
  EXPECT_EQ(tir(r), 50.0);
  r.y.pop_back();
  EXPECT_THROW(tir(r), Error);
}

TEST(Aurr, Examples) {
  EXPECT_EQ(aurr(record(960, 0)), 100.0);
  EXPECT_NEAR(aurr(record(960, 34)), 96.458333333333, 1e-9);
  EXPECT_NEAR(aurr(record(400, 50)), 36.458333333333, 1e-9);
  EXPECT_EQ(aurr(record(960, 960)), 0.0);
}

TEST(Metrics, OrderingInvariants) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto r = random_record(rng);
    const auto m = episode_metrics(r);
    ASSERT_GE(m.tir, 0.0);
    ASSERT_LE(m.tir, m.ecf);
    ASSERT_LE(m.ecf, 100.0);
    ASSERT_LE(m.aurr, m.ecf);
    ASSERT_EQ(m.aurr == 100.0, r.T == r.H && r.K == 0);
  }
}

TEST(Histogram, SingleInterval) {
  EpisodeRecord r;
  r.T = 3;
  r.y = {100, 110, 120, 999};
  r.update_times = {0};
  r.etas = {20.0};
  r.K = 1;
  EXPECT_EQ(interval_averages(r), std::vector<double>{110.0});
  const HistBins bins;
  const auto h = interval_avg_hist(r, bins);
  EXPECT_EQ(h.total(), 1);
  EXPECT_EQ(h.counts[bins.cgm_bin(110.0)][bins.eta_bin(20.0)], 1);
  EXPECT_EQ(bins.cgm_bin(110.0), 11);
  EXPECT_EQ(bins.eta_bin(20.0), 5);
}

TEST(Histogram, EmptyRecordIsZero) {
  const auto h = interval_avg_hist(EpisodeRecord{}, HistBins{});
  EXPECT_EQ(h.total(), 0);
  EXPECT_EQ(h.counts.size(), 40u);
  EXPECT_EQ(h.counts[0].size(), 10u);
}

TEST(Histogram, MassEqualsIntervals) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_record(rng);
    ASSERT_EQ(interval_avg_hist(r, HistBins{}).total(), r.K);
    ASSERT_EQ(interval_averages(r).size(), static_cast<std::size_t>(r.K));
  }
}

TEST(Histogram, OutOfRangeGoesToEdgeBins) {
  const HistBins bins;
  EXPECT_EQ(bins.cgm_bin(-5.0), 0);
  EXPECT_EQ(bins.cgm_bin(1000.0), bins.cgm_bins() - 1);
  EXPECT_EQ(bins.eta_bin(25.0), bins.eta_bins() - 1);
}

TEST(Aggregate, IdenticalRunsHaveZeroStd) {
  std::vector<RunMetrics> runs;
  for (const char* seed : {"1", "2", "3"}) {
    for (const char* sc : {"a", "b"}) runs.push_back({seed, sc, {100.0, 80.0, 95.0}});
  }
  const auto a = aggregate(runs);
  EXPECT_EQ(a.tir.mean, 80.0);
  EXPECT_EQ(a.tir.std, 0.0);
  EXPECT_EQ(a.n_seeds, 3);
  EXPECT_FALSE(a.single_seed);
}

TEST(Aggregate, ScenariosThenSeeds) {
  // Seed 1 averages 90 over two scenarios, seed 2 averages 100.
  const std::vector<RunMetrics> runs{
      {"1", "a", {80.0, 0, 0}}, {"1", "b", {100.0, 0, 0}}, {"2", "a", {100.0, 0, 0}}, {"2", "b", {100.0, 0, 0}}};
  const auto a = aggregate(runs);
  EXPECT_DOUBLE_EQ(a.ecf.mean, 95.0);
  EXPECT_DOUBLE_EQ(a.ecf.std, 5.0);
}

TEST(Aggregate, SingleSeedFlagged) {
  const auto a = aggregate({{"7", "a", {90.0, 70.0, 93.0}}, {"7", "b", {100.0, 80.0, 95.0}}});
  EXPECT_TRUE(a.single_seed);
  EXPECT_EQ(a.ecf.std, 0.0);
  EXPECT_DOUBLE_EQ(a.aurr.mean, 94.0);
  EXPECT_THROW(aggregate({}), Error);
}
