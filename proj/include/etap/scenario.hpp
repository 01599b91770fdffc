#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "etap/error.hpp"
#include "etap/text.hpp"
#include "etap/meals.hpp"
#include "etap/rng.hpp"

namespace etap {

struct MealSpec {
  double p = 1.0;  // inclusion probability
  double t_lb = 0.0;
  double t_ub = 0.0;
  double t_mu = 0.0;
  double t_sigma = 1.0;
  double m_mu = 0.0;
  double m_sigma = 0.0;
};

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kTruncNormalMaxTries = 10000;

// Breakfast, snack 1, lunch, snack 2, dinner, snack 3.
inline std::array<MealSpec, 6> default_meal_specs() {
  return {{
      {0.95, 300, 540, 420, 60, 45, 10},
      {0.30, 540, 600, 570, 30, 10, 5},
      {0.95, 600, 840, 720, 60, 70, 10},
      {0.30, 840, 960, 900, 30, 10, 5},
      {0.95, 960, 1200, 1080, 60, 80, 10},
      {0.30, 1200, 1380, 1290, 30, 10, 5},
  }};
}

// N(mu, sigma^2) conditioned on [lb, ub] by rejection, rounded to the
// nearest minute. Falls back to the clamped mean after the retry cap.
inline int sample_truncated_normal(double mu, double sigma, double lb, double ub, Rng& rng) {
  for (int i = 0; i < kTruncNormalMaxTries; ++i) {
    const double t = rng.normal(mu, sigma);
    if (t >= lb && t <= ub) return static_cast<int>(std::lround(t));
  }
  std::clog << "etap: truncated normal rejection cap hit, using clamped mean\n";
  return static_cast<int>(std::lround(std::clamp(mu, lb, ub)));
}

inline MealScenario generate_daily_scenario(const std::array<MealSpec, 6>& specs, int day_offset_min,
                                            Rng& rng) {
  MealScenario sc;
  for (const auto& spec : specs) {
    if (!rng.bernoulli(spec.p)) continue;
    const int t = sample_truncated_normal(spec.t_mu, spec.t_sigma, spec.t_lb, spec.t_ub, rng);
    const double m = std::max(rng.normal(spec.m_mu, spec.m_sigma), 0.0);
    sc.events.push_back({t + day_offset_min, m});
  }
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const MealEvent& a, const MealEvent& b) { return a.t_min < b.t_min; });
  return sc;
}

// Days drawn independently, day d shifted by d * 1440 minutes.
inline MealScenario generate_episode_scenario(const std::array<MealSpec, 6>& specs, int n_days, Rng& rng) {
  if (n_days < 1) throw Error("config", "n_days must be >= 1");
  MealScenario sc;
  for (int d = 0; d < n_days; ++d) {
    const auto day = generate_daily_scenario(specs, d * kMinutesPerDay, rng);
    sc.events.insert(sc.events.end(), day.events.begin(), day.events.end());
  }
  return sc;
}

// Scenario files: one "t_min,carb_g" line per meal; '#' comments allowed.
inline void save_scenario(const MealScenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write scenario file " + path);
  out << "# t_min,carb_g\n";
  for (const auto& ev : sc.events) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", ev.t_min, ev.carb_g);
    out << buf;
  }
}

inline MealScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open scenario file " + path);
  MealScenario sc;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_comment(line);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    int t = 0;
    double m = 0.0;
    if (std::sscanf(line.c_str(), " %d , %lf", &t, &m) != 2 || m < 0.0) {
      throw Error("parse", path + ": bad scenario line '" + line + "'");
    }
    sc.events.push_back({t, m});
  }
  if (!std::is_sorted(sc.events.begin(), sc.events.end(),
                      [](const MealEvent& a, const MealEvent& b) { return a.t_min < b.t_min; })) {
    throw Error("parse", path + ": meal events must be sorted by time");
  }
  return sc;
}

}  // namespace etap
