#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "etap/error.hpp"
#include "etap/rng.hpp"

namespace etap {

// Layout of a fully connected tanh network. Parameters live in one flat
// buffer: for each layer, the weight matrix (out x in, row major) followed
// by the bias vector. Hidden layers use tanh, the output layer is linear.
class MlpShape {
 public:
  MlpShape() = default;

  explicit MlpShape(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw Error("shape", "an MLP needs at least input and output sizes");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weight_offset_.push_back(offset);
      offset += sizes_[l] * sizes_[l + 1];
      bias_offset_.push_back(offset);
      offset += sizes_[l + 1];
    }
    num_params_ = offset;
  }

  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t num_params() const { return num_params_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t fan_in(std::size_t l) const { return sizes_[l]; }
  std::size_t fan_out(std::size_t l) const { return sizes_[l + 1]; }
  std::size_t weight_offset(std::size_t l) const { return weight_offset_[l]; }
  std::size_t bias_offset(std::size_t l) const { return bias_offset_[l]; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  friend bool operator==(const MlpShape& a, const MlpShape& b) { return a.sizes_ == b.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::size_t num_params_ = 0;
};

// Activations kept from the forward pass: act[0] is the input, act.back()
// the linear output.
struct MlpCache {
  std::vector<std::vector<double>> act;

  std::span<const double> output() const { return act.back(); }
};

inline void mlp_forward(const MlpShape& shape, std::span<const double> params, std::span<const double> x,
                        MlpCache& cache) {
  if (x.size() != shape.input_dim()) throw Error("shape", "input dimension mismatch");
  if (params.size() < shape.num_params()) throw Error("shape", "parameter buffer too small");
  const std::size_t L = shape.num_layers();
  cache.act.resize(L + 1);
  cache.act[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = shape.fan_in(l);
    const std::size_t out = shape.fan_out(l);
    const double* W = params.data() + shape.weight_offset(l);
    const double* b = params.data() + shape.bias_offset(l);
    const double* a = cache.act[l].data();
    auto& z = cache.act[l + 1];
    z.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = W + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = (l + 1 < L) ? std::tanh(s) : s;
    }
  }
}

// Accumulates dLoss/dparams into grad_params given dLoss/doutput.
inline void mlp_backward(const MlpShape& shape, std::span<const double> params, const MlpCache& cache,
                         std::span<const double> grad_out, std::span<double> grad_params) {
  if (grad_out.size() != shape.output_dim()) throw Error("shape", "output gradient dimension mismatch");
  const std::size_t L = shape.num_layers();
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  std::vector<double> prev;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = shape.fan_in(l);
    const std::size_t out = shape.fan_out(l);
    const double* W = params.data() + shape.weight_offset(l);
    double* gW = grad_params.data() + shape.weight_offset(l);
    double* gb = grad_params.data() + shape.bias_offset(l);
    const double* a = cache.act[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gW + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      const double* row = W + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a[i] * a[i];  // tanh'
    delta.swap(prev);
  }
}

// Orthogonal init per layer: rows (or columns, whichever are fewer) of a
// Gaussian matrix orthonormalized by modified Gram-Schmidt, scaled by gain.
// Biases start at zero. Draws are row major, so an extra output row never
// changes the rows before it.
inline void init_orthogonal(const MlpShape& shape, std::span<double> params, std::span<const double> gains,
                            Rng& rng) {
  if (gains.size() != shape.num_layers()) throw Error("shape", "one gain per layer required");
  for (std::size_t l = 0; l < shape.num_layers(); ++l) {
    const std::size_t in = shape.fan_in(l);
    const std::size_t out = shape.fan_out(l);
    double* W = params.data() + shape.weight_offset(l);
    for (std::size_t k = 0; k < in * out; ++k) W[k] = rng.normal();
    const bool by_rows = out <= in;
    const std::size_t count = by_rows ? out : in;
    const std::size_t len = by_rows ? in : out;
    auto at = [&](std::size_t vec, std::size_t k) -> double& {
      return by_rows ? W[vec * in + k] : W[k * in + vec];
    };
    for (std::size_t v = 0; v < count; ++v) {
      for (std::size_t u = 0; u < v; ++u) {
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += at(v, k) * at(u, k);
        for (std::size_t k = 0; k < len; ++k) at(v, k) -= dot * at(u, k);
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < len; ++k) norm += at(v, k) * at(v, k);
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < len; ++k) at(v, k) /= norm;
    }
    for (std::size_t k = 0; k < in * out; ++k) W[k] *= gains[l];
    double* b = params.data() + shape.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) b[o] = 0.0;
  }
}

// Shape plus owned parameters, for standalone use.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpShape shape) : shape_(std::move(shape)), params_(shape_.num_params(), 0.0) {}

  std::vector<double> forward(std::span<const double> x) const {
    MlpCache cache;
    mlp_forward(shape_, params_, x, cache);
    return cache.act.back();
  }

  const MlpShape& shape() const { return shape_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  MlpShape shape_;
  std::vector<double> params_;
};

struct LogProbEntropy {
  double logp = 0.0;
  double entropy = 0.0;
};

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 log(2 pi)

// Diagonal Gaussian; per-dimension terms summed.
inline LogProbEntropy gaussian_logprob_entropy(std::span<const double> mean, std::span<const double> log_std,
                                               std::span<const double> a) {
  LogProbEntropy out;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    out.logp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    out.entropy += 0.5 + kHalfLog2Pi + log_std[i];
  }
  return out;
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double ex = std::exp(x);
  return ex / (1.0 + ex);
}

// log p = -softplus(-logit), log(1 - p) = -softplus(logit).
inline LogProbEntropy bernoulli_logprob_entropy(double logit, int e) {
  const double log_p = -softplus(-logit);
  const double log_q = -softplus(logit);
  const double p = sigmoid(logit);
  return {e == 1 ? log_p : log_q, -(p * log_p + (1.0 - p) * log_q)};
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw Error("shape", "adam size mismatch");
    for (double g : grads) {
      if (!std::isfinite(g)) throw Error("diverged-update", "non-finite gradient");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / bc1;
      const double v_hat = v_[i] / bc2;
      params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  long long steps() const { return t_; }
  void set_steps(long long t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long long t_ = 0;
};

}  // namespace etap
