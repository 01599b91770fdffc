#pragma once

#include <cstdint>
#include <random>

namespace etap {

// Independent random streams split from one master seed. Each consumer owns
// its stream so that changing how often one is drawn never perturbs another.
enum class Stream : std::uint32_t {
  kPlantNoise = 1,
  kScenario = 2,
  kInitialState = 3,
  kPolicy = 4,
  kShuffle = 5,
  kActorInit = 6,
  kCriticInit = 7,
  kPatientGen = 8,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng(std::uint64_t master, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master & 0xffffffffu),
                      static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(stream), 0x5eedu};
    engine_.seed(seq);
  }

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace etap
