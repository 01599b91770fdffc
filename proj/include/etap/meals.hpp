#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace etap {

struct MealEvent {
  int t_min = 0;        // minutes from episode start
  double carb_g = 0.0;  // grams of carbohydrate
};

// Meal events sorted by time.
struct MealScenario {
  std::vector<MealEvent> events;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }
};

inline constexpr double kMealDeliveryMgPerMin = 5000.0;  // 5 g/min into the stomach

// Precomputed delivery windows. Meals queue FIFO behind each other so the
// total delivery rate never exceeds 5 g/min.
class MealSchedule {
 public:
  MealSchedule() = default;

  explicit MealSchedule(const MealScenario& scenario) {
    double busy_until = 0.0;
    for (const auto& ev : scenario.events) {
      if (ev.carb_g <= 0.0) continue;
      const double start = std::max(static_cast<double>(ev.t_min), busy_until);
      const double end = start + ev.carb_g * 1000.0 / kMealDeliveryMgPerMin;
      if (!windows_.empty() && windows_.back().end >= start) {
        windows_.back().end = end;
      } else {
        windows_.push_back({start, end});
      }
      busy_until = end;
    }
  }

  // Average delivery rate (mg/min) over the minute [t, t+1).
  double rate_at(double t) const {
    double covered = 0.0;
    for (const auto& w : windows_) {
      if (w.start >= t + 1.0) break;
      covered += std::max(0.0, std::min(w.end, t + 1.0) - std::max(w.start, t));
    }
    return kMealDeliveryMgPerMin * covered;
  }

  double total_minutes() const {
    double total = 0.0;
    for (const auto& w : windows_) total += w.end - w.start;
    return total;
  }

 private:
  struct Window {
    double start;
    double end;
  };
  std::vector<Window> windows_;
};

// Meal disturbance d(t) in mg/min, held over the minute starting at t.
inline double meal_rate_at(double t, const MealScenario& scenario) {
  return MealSchedule(scenario).rate_at(t);
}

}  // namespace etap
