#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "etap/error.hpp"

namespace etap {

// One rolled-out episode. y holds y_0 .. y_T (the reading before the first
// action through the reading after the last); per-step vectors have T
// entries. update_times are the steps h_k at which the infusion rate was
// (re)decided, etas the trigger thresholds chosen there.
struct EpisodeRecord {
  int T = 0;
  int H = 960;
  int K = 0;
  std::vector<double> y;
  std::vector<int> update_times;
  std::vector<double> etas;
  std::vector<double> u;
  std::vector<int> events;
  std::vector<double> rewards;
};

inline double ecf(const EpisodeRecord& r) { return 100.0 * r.T / r.H; }

// Sums h = 1..T with denominator H, so early termination lowers TIR.
inline double tir(const EpisodeRecord& r, double lo = 70.0, double hi = 180.0) {
  if (static_cast<int>(r.y.size()) < r.T + 1) throw Error("metrics", "y trace shorter than T + 1");
  int in = 0;
  for (int h = 1; h <= r.T; ++h) in += (lo <= r.y[h] && r.y[h] <= hi) ? 1 : 0;
  return 100.0 * in / r.H;
}

inline double aurr(const EpisodeRecord& r) {
  return 100.0 * (1.0 - static_cast<double>((r.H - r.T) + r.K) / r.H);
}

struct EpisodeMetrics {
  double ecf = 0.0;
  double tir = 0.0;
  double aurr = 0.0;
};

inline EpisodeMetrics episode_metrics(const EpisodeRecord& r) { return {ecf(r), tir(r), aurr(r)}; }

struct HistBins {
  double cgm_lo = 0.0;
  double cgm_hi = 400.0;
  double cgm_width = 10.0;
  double eta_lo = 15.0;
  double eta_hi = 25.0;
  double eta_width = 1.0;

  int cgm_bins() const { return static_cast<int>(std::ceil((cgm_hi - cgm_lo) / cgm_width)); }
  int eta_bins() const { return std::max(1, static_cast<int>(std::ceil((eta_hi - eta_lo) / eta_width))); }
  int cgm_bin(double v) const { return std::clamp(static_cast<int>(std::floor((v - cgm_lo) / cgm_width)), 0, cgm_bins() - 1); }
  int eta_bin(double v) const { return std::clamp(static_cast<int>(std::floor((v - eta_lo) / eta_width)), 0, eta_bins() - 1); }
};

// counts[c][e]; values outside the range land in the edge bins.
struct Histogram2D {
  HistBins bins;
  std::vector<std::vector<long long>> counts;

  long long total() const {
    long long t = 0;
    for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), 0LL);
    return t;
  }
};

inline Histogram2D make_histogram(const HistBins& bins) {
  Histogram2D h{bins, {}};
  h.counts.assign(bins.cgm_bins(), std::vector<long long>(bins.eta_bins(), 0));
  return h;
}

// Mean of y over [h_k, h_{k+1}) for each decision interval; the last
// interval closes at T.
inline std::vector<double> interval_averages(const EpisodeRecord& r) {
  std::vector<double> out;
  for (std::size_t k = 0; k < r.update_times.size(); ++k) {
    const int start = r.update_times[k];
    const int end = k + 1 < r.update_times.size() ? r.update_times[k + 1] : r.T;
    if (end <= start) continue;
    double s = 0.0;
    for (int h = start; h < end; ++h) s += r.y[h];
    out.push_back(s / (end - start));
  }
  return out;
}

inline void accumulate_interval_hist(const EpisodeRecord& r, Histogram2D& hist) {
  for (std::size_t k = 0; k < r.update_times.size(); ++k) {
    const int start = r.update_times[k];
    const int end = k + 1 < r.update_times.size() ? r.update_times[k + 1] : r.T;
    if (end <= start) continue;
    double s = 0.0;
    for (int h = start; h < end; ++h) s += r.y[h];
    const double eta = k < r.etas.size() ? r.etas[k] : hist.bins.eta_lo;
    ++hist.counts[hist.bins.cgm_bin(s / (end - start))][hist.bins.eta_bin(eta)];
  }
}

inline Histogram2D interval_avg_hist(const EpisodeRecord& r, const HistBins& bins) {
  auto hist = make_histogram(bins);
  accumulate_interval_hist(r, hist);
  return hist;
}

struct RunMetrics {
  std::string seed;
  std::string scenario;
  EpisodeMetrics metrics;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct AggregateRow {
  MeanStd ecf;
  MeanStd tir;
  MeanStd aurr;
  int n_seeds = 0;
  bool single_seed = false;  // std is reported as 0
};

// Averages over scenarios within each seed, then mean and population std
// over seeds.
inline AggregateRow aggregate(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw Error("metrics", "nothing to aggregate");
  std::map<std::string, std::pair<EpisodeMetrics, int>> per_seed;
  for (const auto& r : runs) {
    auto& [sum, n] = per_seed[r.seed];
    sum.ecf += r.metrics.ecf;
    sum.tir += r.metrics.tir;
    sum.aurr += r.metrics.aurr;
    ++n;
  }
  auto stats = [&](double EpisodeMetrics::*field) {
    double mean = 0.0;
    for (const auto& [seed, v] : per_seed) mean += v.first.*field / v.second;
    mean /= per_seed.size();
    double var = 0.0;
    for (const auto& [seed, v] : per_seed) {
      const double d = v.first.*field / v.second - mean;
      var += d * d;
    }
    return MeanStd{mean, std::sqrt(var / per_seed.size())};
  };
  AggregateRow out;
  out.ecf = stats(&EpisodeMetrics::ecf);
  out.tir = stats(&EpisodeMetrics::tir);
  out.aurr = stats(&EpisodeMetrics::aurr);
  out.n_seeds = static_cast<int>(per_seed.size());
  out.single_seed = out.n_seeds == 1;
  return out;
}

}  // namespace etap
