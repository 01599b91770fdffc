#pragma once

// Surrogate virtual patient with the 13-compartment state layout of the
// UVA/Padova glucose-insulin model:
//
//   gastric/gut   q_sto1 -> q_sto2 -> q_gut -> Ra (rate of appearance)
//   glucose       g_p <-> g_t, insulin-independent uptake, bilinear
//                 x_remote * g_p insulin-dependent uptake, linear EGP
//   insulin       i_sc1 -> i_sc2 -> i_p <-> i_l, i_p -> x_remote,
//                 i_p -> i_1 -> i_d (delayed EGP suppression)
//   sensor        g_p -> g_sc first-order lag
//
// Every term is linear except x_remote * g_p. Time is in minutes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "etap/error.hpp"
#include "etap/ode.hpp"
#include "etap/rng.hpp"

namespace etap {

enum StateIndex : std::size_t {
  kQSto1 = 0,  // solid glucose in stomach (mg)
  kQSto2,      // liquid glucose in stomach (mg)
  kQGut,       // glucose mass in intestine (mg)
  kGp,         // plasma glucose (mg/kg)
  kGt,         // tissue glucose (mg/kg)
  kIp,         // plasma insulin (pmol/kg)
  kXRemote,    // insulin action on glucose utilization (pmol/kg)
  kI1,         // delayed insulin signal, first stage (pmol/kg)
  kId,         // delayed insulin signal (pmol/kg)
  kIl,         // liver insulin (pmol/kg)
  kIsc1,       // subcutaneous insulin, first compartment (pmol/kg)
  kIsc2,       // subcutaneous insulin, second compartment (pmol/kg)
  kGsc,        // subcutaneous glucose (mg/kg)
  kStateDim
};

inline constexpr std::array<std::string_view, kStateDim> kStateNames = {
    "q_sto1", "q_sto2", "q_gut", "g_p",  "g_t",   "i_p",  "x_remote",
    "i_1",    "i_d",    "i_l",   "i_sc1", "i_sc2", "g_sc"};

inline constexpr double kPmolPerUnit = 6000.0;

struct PatientState {
  std::array<double, kStateDim> x{};

  double& operator[](StateIndex i) { return x[i]; }
  double operator[](StateIndex i) const { return x[i]; }

  bool finite() const {
    for (double v : x) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
  friend bool operator==(const PatientState&, const PatientState&) = default;
};

struct PatientParams {
  std::string name = "nominal";
  double body_weight = 70.0;  // kg
  double v_g = 1.88;          // dL/kg

  // gastric emptying and absorption (1/min), absorbed fraction
  double k_gri = 0.05;
  double k_empt = 0.04;
  double k_abs = 0.03;
  double f_abs = 0.9;

  // glucose kinetics (1/min); s_x in 1/(min pmol/kg)
  double k1 = 0.065;
  double k2 = 0.079;
  double k_t = 0.02;
  double k_u = 0.003;
  double s_x = 0.0062;

  // endogenous production: kp1 - kp2 g_p - kp3 i_d  (mg/kg/min)
  double kp1 = 14.671;
  double kp2 = 0.004;
  double kp3 = 1.24;

  // subcutaneous / plasma / liver insulin kinetics (1/min)
  double kd = 0.0164;
  double ka1 = 0.0018;
  double ka2 = 0.0182;
  double m1 = 0.19;
  double m2 = 0.484;
  double m4 = 0.194;
  double m30 = 0.285;

  double p2u = 0.0331;  // insulin action dynamics
  double ki = 0.0079;   // delayed insulin signal
  double k_sc = 0.1;    // plasma -> subcutaneous glucose

  double basal_glucose = 130.0;  // mg/dL at the basal steady state
  double u_basal = 0.0;          // U/min
  PatientState basal;
};

struct SensorConfig {
  int sample_period_min = 3;
  double noise_phi = 0.7;
  double noise_sigma = 5.0;  // mg/dL, stationary std of the AR(1) noise
};

struct PumpConfig {
  double u_min = 0.0;   // U/min
  double u_max = 0.15;  // U/min
};

// Per-minute derivative of the patient state.
inline PatientState rhs(const PatientState& s, double u, double d, const PatientParams& p) {
  if (!s.finite() || !std::isfinite(u) || !std::isfinite(d)) {
    throw Error("plant-diverged", "non-finite state or input");
  }
  const auto& x = s.x;
  const double ra = p.f_abs * p.k_abs * x[kQGut] / p.body_weight;
  const double egp = p.kp1 - p.kp2 * x[kGp] - p.kp3 * x[kId];
  const double uptake = (p.k_u + p.s_x * x[kXRemote]) * x[kGp];
  const double infusion = u * kPmolPerUnit / p.body_weight;

  PatientState dx;
  dx[kQSto1] = -p.k_gri * x[kQSto1] + d;
  dx[kQSto2] = p.k_gri * x[kQSto1] - p.k_empt * x[kQSto2];
  dx[kQGut] = p.k_empt * x[kQSto2] - p.k_abs * x[kQGut];
  dx[kGp] = egp + ra - uptake - p.k1 * x[kGp] + p.k2 * x[kGt];
  dx[kGt] = p.k1 * x[kGp] - (p.k2 + p.k_t) * x[kGt];
  dx[kIp] = -(p.m2 + p.m4) * x[kIp] + p.m1 * x[kIl] + p.ka1 * x[kIsc1] + p.ka2 * x[kIsc2];
  dx[kXRemote] = -p.p2u * (x[kXRemote] - x[kIp]);
  dx[kI1] = -p.ki * (x[kI1] - x[kIp]);
  dx[kId] = -p.ki * (x[kId] - x[kI1]);
  dx[kIl] = -(p.m1 + p.m30) * x[kIl] + p.m2 * x[kIp];
  dx[kIsc1] = -(p.kd + p.ka1) * x[kIsc1] + infusion;
  dx[kIsc2] = p.kd * x[kIsc1] - p.ka2 * x[kIsc2];
  dx[kGsc] = -p.k_sc * (x[kGsc] - x[kGp]);
  return dx;
}

// One RK4 step with u and d held constant; components clamped at zero.
inline PatientState rk4_step(const PatientState& s, double u, double d, double dt,
                             const PatientParams& p) {
  auto f = [&](const std::array<double, kStateDim>& x) { return rhs(PatientState{x}, u, d, p).x; };
  PatientState next{rk4_advance(f, s.x, dt)};
  if (!next.finite()) throw Error("plant-diverged", "non-finite state after integration");
  for (double& v : next.x) v = std::max(v, 0.0);
  return next;
}

struct CgmReading {
  double y;      // mg/dL
  double noise;  // updated AR(1) noise state
};

// y = g_sc / v_g + eps with eps' = phi eps + w, w ~ N(0, sigma^2 (1 - phi^2)).
inline CgmReading cgm_read(const PatientState& s, const PatientParams& p, double noise_state,
                           const SensorConfig& sensor, Rng& rng) {
  double eps = 0.0;
  if (sensor.noise_sigma > 0.0) {
    const double innovation = sensor.noise_sigma * std::sqrt(1.0 - sensor.noise_phi * sensor.noise_phi);
    eps = sensor.noise_phi * noise_state + innovation * rng.normal();
  }
  return {s[kGsc] / p.v_g + eps, eps};
}

inline double pump_command(double u_raw, const PumpConfig& pump) {
  if (!std::isfinite(u_raw)) throw Error("invalid-command", "non-finite infusion rate");
  return std::clamp(u_raw, pump.u_min, pump.u_max);
}

// Steady state for a constant infusion u with no meals. Insulin compartments
// are linear in u; glucose then solves a linear 2x2 balance.
inline PatientState steady_state(const PatientParams& p, double u) {
  PatientState s;
  const double infusion = u * kPmolPerUnit / p.body_weight;
  s[kIsc1] = infusion / (p.kd + p.ka1);
  s[kIsc2] = p.kd * s[kIsc1] / p.ka2;
  const double appearance = p.ka1 * s[kIsc1] + p.ka2 * s[kIsc2];
  const double liver_share = p.m1 * p.m2 / (p.m1 + p.m30);
  s[kIp] = appearance / (p.m2 + p.m4 - liver_share);
  s[kIl] = p.m2 * s[kIp] / (p.m1 + p.m30);
  s[kXRemote] = s[kIp];
  s[kI1] = s[kIp];
  s[kId] = s[kIp];
  const double tissue_loss = p.k1 * p.k_t / (p.k2 + p.k_t);
  s[kGp] = (p.kp1 - p.kp3 * s[kId]) / (p.kp2 + p.k_u + p.s_x * s[kXRemote] + tissue_loss);
  s[kGt] = p.k1 * s[kGp] / (p.k2 + p.k_t);
  s[kGsc] = s[kGp];
  return s;
}

inline double max_abs_rhs(const PatientState& s, double u, const PatientParams& p) {
  const auto dx = rhs(s, u, 0.0, p);
  double m = 0.0;
  for (double v : dx.x) m = std::max(m, std::abs(v));
  return m;
}

// Finds u_basal such that the no-meal steady-state CGM equals
// p.basal_glucose, then stores the basal state. Bisection: the steady-state
// glucose is strictly decreasing in u.
inline void solve_basal(PatientParams& p, double u_hi = 1.0) {
  auto glucose_at = [&](double u) { return steady_state(p, u)[kGp] / p.v_g; };
  double lo = 0.0;
  double hi = u_hi;
  if (glucose_at(lo) < p.basal_glucose || glucose_at(hi) > p.basal_glucose) {
    throw Error("patient-params", p.name + ": basal glucose not reachable");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (glucose_at(mid) > p.basal_glucose ? lo : hi) = mid;
  }
  p.u_basal = 0.5 * (lo + hi);
  p.basal = steady_state(p, p.u_basal);
}

inline constexpr double kSteadyStateTolerance = 1e-9;

// Rate constants positive and the stored basal state an equilibrium.
inline void validate(const PatientParams& p) {
  const double positive[] = {p.body_weight, p.v_g, p.k_gri, p.k_empt, p.k_abs, p.f_abs, p.k1,
                             p.k2, p.k_t, p.k_u, p.s_x, p.kp1, p.kp2, p.kp3, p.kd, p.ka1,
                             p.ka2, p.m1, p.m2, p.m4, p.m30, p.p2u, p.ki, p.k_sc};
  for (double v : positive) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error("patient-params", p.name + ": rate constants must be positive");
    }
  }
  if (!(p.u_basal >= 0.0)) throw Error("patient-params", p.name + ": negative u_basal");
  if (max_abs_rhs(p.basal, p.u_basal, p) > kSteadyStateTolerance) {
    throw Error("patient-params", p.name + ": basal state is not a steady state");
  }
}

}  // namespace etap
