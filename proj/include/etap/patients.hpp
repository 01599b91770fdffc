#pragma once

// Patient parameter file: one record per line,
//
//   <name> key=value key=value ...
//
// Keys are the PatientParams field names plus u_basal and basal.<state>
// for each of the 13 state components. '#' starts a comment. Every key is
// required; the loader re-checks that the basal state is an equilibrium.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "etap/error.hpp"
#include "etap/text.hpp"
#include "etap/plant.hpp"
#include "etap/rng.hpp"

namespace etap {

namespace detail {

struct ParamField {
  const char* key;
  double PatientParams::*member;
};

inline constexpr ParamField kParamFields[] = {
    {"body_weight", &PatientParams::body_weight},
    {"v_g", &PatientParams::v_g},
    {"k_gri", &PatientParams::k_gri},
    {"k_empt", &PatientParams::k_empt},
    {"k_abs", &PatientParams::k_abs},
    {"f_abs", &PatientParams::f_abs},
    {"k1", &PatientParams::k1},
    {"k2", &PatientParams::k2},
    {"k_t", &PatientParams::k_t},
    {"k_u", &PatientParams::k_u},
    {"s_x", &PatientParams::s_x},
    {"kp1", &PatientParams::kp1},
    {"kp2", &PatientParams::kp2},
    {"kp3", &PatientParams::kp3},
    {"kd", &PatientParams::kd},
    {"ka1", &PatientParams::ka1},
    {"ka2", &PatientParams::ka2},
    {"m1", &PatientParams::m1},
    {"m2", &PatientParams::m2},
    {"m4", &PatientParams::m4},
    {"m30", &PatientParams::m30},
    {"p2u", &PatientParams::p2u},
    {"ki", &PatientParams::ki},
    {"k_sc", &PatientParams::k_sc},
    {"basal_glucose", &PatientParams::basal_glucose},
    {"u_basal", &PatientParams::u_basal},
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error("parse", what + ": bad number '" + text + "'");
  return v;
}

}  // namespace detail

inline std::string format_patient(const PatientParams& p) {
  std::ostringstream os;
  os << p.name;
  for (const auto& f : detail::kParamFields) os << ' ' << f.key << '=' << detail::format_double(p.*f.member);
  for (std::size_t i = 0; i < kStateDim; ++i) {
    os << " basal." << kStateNames[i] << '=' << detail::format_double(p.basal.x[i]);
  }
  return os.str();
}

inline PatientParams parse_patient(const std::string& line) {
  std::istringstream is(line);
  PatientParams p;
  if (!(is >> p.name)) throw Error("parse", "empty patient record");
  std::map<std::string, std::string> kv;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw Error("parse", p.name + ": expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("parse", p.name + ": missing key '" + key + "'");
    const double v = detail::parse_double(it->second, p.name + "." + key);
    kv.erase(it);
    return v;
  };
  for (const auto& f : detail::kParamFields) p.*f.member = take(f.key);
  for (std::size_t i = 0; i < kStateDim; ++i) p.basal.x[i] = take("basal." + std::string(kStateNames[i]));
  if (!kv.empty()) throw Error("parse", p.name + ": unknown key '" + kv.begin()->first + "'");
  validate(p);
  return p;
}

inline std::vector<PatientParams> load_patients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open patient file " + path);
  std::vector<PatientParams> out;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_comment(line);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_patient(line));
  }
  return out;
}

inline const PatientParams& find_patient(const std::vector<PatientParams>& patients, const std::string& name) {
  for (const auto& p : patients) {
    if (p.name == name) return p;
  }
  throw Error("config", "unknown patient '" + name + "'");
}

// Synthetic cohort: every coefficient of the nominal set (and the basal
// glucose target) scaled by an independent factor in [1 - spread, 1 + spread],
// then u_basal re-solved. Draws with an implausible basal rate are redrawn.
inline std::vector<PatientParams> generate_patients(const PatientParams& nominal, int count,
                                                    std::uint64_t seed, double spread = 0.15,
                                                    double u_basal_lo = 0.008, double u_basal_hi = 0.04) {
  Rng rng(seed, Stream::kPatientGen);
  std::vector<PatientParams> out;
  while (static_cast<int>(out.size()) < count) {
    PatientParams p = nominal;
    char name[32];
    std::snprintf(name, sizeof name, "adult#%03d", static_cast<int>(out.size()) + 1);
    p.name = name;
    for (const auto& f : detail::kParamFields) {
      if (std::string_view(f.key) == "u_basal") continue;
      p.*f.member *= rng.uniform(1.0 - spread, 1.0 + spread);
    }
    p.f_abs = std::min(p.f_abs, 1.0);
    try {
      solve_basal(p);
    } catch (const Error&) {
      continue;
    }
    if (p.u_basal < u_basal_lo || p.u_basal > u_basal_hi) continue;
    validate(p);
    out.push_back(p);
  }
  return out;
}

inline PatientParams nominal_patient() {
  PatientParams p;
  solve_basal(p);
  return p;
}

}  // namespace etap
