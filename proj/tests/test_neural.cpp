#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "etap/neural.hpp"

using namespace etap;

namespace {

std::vector<double> random_params(const MlpShape& shape, Rng& rng) {
  std::vector<double> p(shape.num_params());
  for (double& v : p) v = rng.normal(0.0, 0.5);
  return p;
}

double dot(const std::vector<double>& a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Mlp, ParameterLayout) {
  MlpShape s({2, 64, 64, 1});
  EXPECT_EQ(s.num_params(), 2u * 64 + 64 + 64 * 64 + 64 + 64 + 1);
  EXPECT_EQ(s.weight_offset(1), 2u * 64 + 64);
  EXPECT_THROW(MlpShape({3}), Error);
}

TEST(Mlp, ZeroParamsGiveZero) {
  Mlp net(MlpShape({2, 64, 64, 3}));
  for (double v : net.forward(std::vector<double>{0.3, -1.2})) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, UnitChain) {
  Mlp net(MlpShape({1, 1, 1, 1}));
  auto& p = net.params();
  p[net.shape().weight_offset(0)] = 1.0;
  p[net.shape().weight_offset(1)] = 1.0;
  p[net.shape().weight_offset(2)] = 1.0;
  EXPECT_EQ(net.forward(std::vector<double>{0.0})[0], 0.0);
  EXPECT_DOUBLE_EQ(net.forward(std::vector<double>{0.5})[0], std::tanh(std::tanh(0.5)));
}

TEST(Mlp, InputShapeMismatchThrows) {
  Mlp net(MlpShape({2, 4, 1}));
  EXPECT_THROW(net.forward(std::vector<double>{1.0}), Error);
}

// Backward pass against central differences of a random linear functional
// of the output.
TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    MlpShape shape({2, 5, 4, 3});
    auto params = random_params(shape, rng);
    const std::vector<double> x{rng.normal(), rng.normal()};
    const std::vector<double> w{rng.normal(), rng.normal(), rng.normal()};
    MlpCache cache;
    mlp_forward(shape, params, x, cache);
    std::vector<double> grad(shape.num_params(), 0.0);
    mlp_backward(shape, params, cache, w, grad);
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params;
      p[i] += h;
      mlp_forward(shape, p, x, cache);
      const double up = dot(w, cache.output());
      p[i] -= 2 * h;
      mlp_forward(shape, p, x, cache);
      const double dn = dot(w, cache.output());
      const double fd = (up - dn) / (2 * h);
      ASSERT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "param " << i;
    }
  }
}

TEST(Mlp, BackwardAccumulates) {
  Rng rng(2);
  MlpShape shape({2, 3, 1});
  const auto params = random_params(shape, rng);
  MlpCache cache;
  mlp_forward(shape, params, std::vector<double>{0.1, 0.2}, cache);
  std::vector<double> once(shape.num_params(), 0.0), twice(shape.num_params(), 0.0);
  const std::vector<double> g{1.0};
  mlp_backward(shape, params, cache, g, once);
  mlp_backward(shape, params, cache, g, twice);
  mlp_backward(shape, params, cache, g, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(twice[i], 2.0 * once[i]);
}

TEST(Init, OrthogonalRowsScaledByGain) {
  MlpShape shape({2, 64, 64, 2});
  std::vector<double> p(shape.num_params(), 1.0);
  Rng rng(4);
  const std::vector<double> gains{std::sqrt(2.0), std::sqrt(2.0), 0.01};
  init_orthogonal(shape, p, gains, rng);
  for (std::size_t l = 0; l < shape.num_layers(); ++l) {
    const std::size_t in = shape.fan_in(l), out = shape.fan_out(l);
    const double* W = p.data() + shape.weight_offset(l);
    const bool rows = out <= in;
    const std::size_t n = rows ? out : in, len = rows ? in : out;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        double d = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          d += rows ? W[a * in + k] * W[b * in + k] : W[k * in + a] * W[k * in + b];
        }
        ASSERT_NEAR(d, a == b ? gains[l] * gains[l] : 0.0, 1e-10);
      }
    }
    for (std::size_t o = 0; o < out; ++o) EXPECT_EQ(p[shape.bias_offset(l) + o], 0.0);
  }
}

TEST(Init, ExtraOutputRowLeavesOthersUnchanged) {
  MlpShape one({2, 8, 8, 1}), two({2, 8, 8, 2});
  std::vector<double> a(one.num_params()), b(two.num_params());
  Rng ra(9), rb(9);
  const std::vector<double> gains{1.0, 1.0, 0.01};
  init_orthogonal(one, a, gains, ra);
  init_orthogonal(two, b, gains, rb);
  for (std::size_t i = 0; i < one.weight_offset(2) + 8; ++i) ASSERT_EQ(a[i], b[i]) << i;
}

TEST(Gaussian, Values) {
  const std::vector<double> zero{0.0}, a{0.0};
  const auto r = gaussian_logprob_entropy(zero, zero, a);
  EXPECT_NEAR(r.logp, -0.91894, 1e-5);
  EXPECT_NEAR(r.entropy, 1.41894, 1e-5);
  const std::vector<double> m{0.3, -0.2}, ls{std::log(0.5), 0.1}, x{0.1, 0.4};
  double expect = 0.0, ent = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double s = std::exp(ls[i]);
    expect += std::log(std::exp(-0.5 * (x[i] - m[i]) * (x[i] - m[i]) / (s * s)) / (s * std::sqrt(2 * M_PI)));
    ent += 0.5 * std::log(2 * M_PI * M_E * s * s);
  }
  const auto q = gaussian_logprob_entropy(m, ls, x);
  EXPECT_NEAR(q.logp, expect, 1e-12);
  EXPECT_NEAR(q.entropy, ent, 1e-12);
}

TEST(Gaussian, MaximizedAtMean) {
  const std::vector<double> m{0.4}, ls{-0.7};
  const double peak = gaussian_logprob_entropy(m, ls, m).logp;
  for (double d : {-0.3, -0.01, 0.01, 0.2}) {
    const std::vector<double> a{0.4 + d};
    EXPECT_LT(gaussian_logprob_entropy(m, ls, a).logp, peak);
  }
}

TEST(Gaussian, EntropyMonotoneInLogStd) {
  const std::vector<double> m{0.0}, a{0.0};
  double prev = -1e9;
  for (double ls = -3; ls <= 2; ls += 0.5) {
    const std::vector<double> l{ls};
    const double e = gaussian_logprob_entropy(m, l, a).entropy;
    EXPECT_GT(e, prev);
    prev = e;
  }
}

TEST(Gaussian, SamplingMoments) {
  Rng rng(31, Stream::kPolicy);
  const double mean = 0.3, sd = 0.5;
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = mean + sd * rng.normal();
    s += a;
    s2 += a * a;
  }
  const double m = s / n, v = s2 / n - m * m;
  EXPECT_LE(std::abs(m - mean), 3 * sd / std::sqrt(n));
  EXPECT_LE(std::abs(std::sqrt(v) - sd), 3 * sd / std::sqrt(2.0 * n));
}

TEST(Bernoulli, Values) {
  EXPECT_NEAR(bernoulli_logprob_entropy(0.0, 1).logp, std::log(0.5), 1e-15);
  EXPECT_NEAR(bernoulli_logprob_entropy(0.0, 0).entropy, std::log(2.0), 1e-15);
  EXPECT_NEAR(bernoulli_logprob_entropy(10.0, 0).logp, -10.0000454, 1e-7);
  EXPECT_NEAR(bernoulli_logprob_entropy(-10.0, 1).logp, -10.0000454, 1e-7);
}

TEST(Bernoulli, StableAtExtremeLogits) {
  for (double logit : {-800.0, -50.0, 50.0, 800.0}) {
    for (int e : {0, 1}) {
      const auto r = bernoulli_logprob_entropy(logit, e);
      EXPECT_TRUE(std::isfinite(r.logp));
      EXPECT_GE(r.entropy, 0.0);
    }
  }
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Bernoulli, EntropyNonNegative) {
  for (double l = -20; l <= 20; l += 0.25) EXPECT_GE(bernoulli_logprob_entropy(l, 1).entropy, 0.0);
}

TEST(Adam, FirstStepSize) {
  Adam opt(1);
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  opt.step(p, g);
  EXPECT_NEAR(p[0], -3e-4 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientNoMove) {
  Adam opt(3);
  std::vector<double> p{1.0, -2.0, 3.0};
  const auto before = p;
  opt.step(p, std::vector<double>(3, 0.0));
  EXPECT_EQ(p, before);
}

TEST(Adam, EqualGradientsEqualUpdates) {
  Adam opt(2);
  std::vector<double> p{0.5, 0.5};
  for (int i = 0; i < 5; ++i) opt.step(p, std::vector<double>{0.3, 0.3});
  EXPECT_EQ(p[0], p[1]);
}

TEST(Adam, NonFiniteGradientThrows) {
  Adam opt(2);
  std::vector<double> p{0.0, 0.0};
  try {
    opt.step(p, std::vector<double>{0.0, std::nan("")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "diverged-update");
  }
  EXPECT_EQ(opt.steps(), 0);
}

TEST(Adam, MinimizesQuadratic) {
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt(2, cfg);
  std::vector<double> p{3.0, -2.0};
  for (int i = 0; i < 2000; ++i) opt.step(p, std::vector<double>{2 * (p[0] - 1.0), 2 * (p[1] + 0.5)});
  EXPECT_NEAR(p[0], 1.0, 1e-3);
  EXPECT_NEAR(p[1], -0.5, 1e-3);
}
