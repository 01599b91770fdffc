#pragma once

// Experiment configuration: a plain "key = value" text file, one setting per
// line, " #" starts a comment, list values are comma separated. Relative
// paths resolve against the directory holding the file. Unknown keys are
// rejected.
//
//   method              pid | ppo | hetppo | cgmetppo-fixed | cgmetppo-variable
//   patient             patient name in patients_file
//   patients_file       path
//   episodes            training episodes (default 2000)
//   seeds               e.g. 1,2,3,4
//   eval_scenarios      comma separated scenario files
//   log_every           progress line to stderr every n episodes (0 = off)
//   checkpoint_every    extra checkpoint every n episodes (0 = final only)
//   trigger.scheme      fixed | variable
//   trigger.fixed_eta, trigger.eta_lo, trigger.eta_hi
//   reward.mode         auto | r1 | r1+r2   (auto: r1+r2 for cgmetppo, r1 otherwise)
//   reward.c, reward.C, reward.eta_e, reward.range_lo, reward.range_hi
//   hetppo.event_pinned true | false
//   ppo.gamma, ppo.lambda, ppo.clip, ppo.ent_coef, ppo.buffer, ppo.lr,
//   ppo.epochs, ppo.minibatch, ppo.normalize_advantages
//   net.hidden          e.g. 64,64
//   sensor.noise_phi, sensor.noise_sigma
//   pump.u_max
//   episode.horizon
//   pid.target, pid.kp, pid.ki, pid.kd (grid axes, comma separated)
//   matrix.patients     names, or "all"
//   matrix.methods      entries like pid, ppo, hetppo:0.1, cgmetppo-fixed:25,
//                       cgmetppo-variable (the number sets eta_e or fixed_eta)

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "etap/agent.hpp"
#include "etap/env.hpp"
#include "etap/error.hpp"
#include "etap/text.hpp"
#include "etap/pid.hpp"
#include "etap/ppo.hpp"

namespace etap {

struct MatrixMethod {
  Method method = Method::kCgmFixed;
  bool has_param = false;
  double param = 0.0;  // eta_e for hetppo, fixed_eta for cgmetppo-fixed
  std::string label;
};

struct ExperimentConfig {
  Method method = Method::kCgmFixed;
  std::string patient = "adult#001";
  std::string patients_file;
  int episodes = 2000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  std::vector<std::string> eval_scenarios;
  int log_every = 0;
  int checkpoint_every = 0;
  TriggerConfig trigger;
  std::string reward_mode = "auto";
  bool event_pinned = false;
  HyperParams hyper;
  std::vector<std::size_t> hidden{64, 64};
  EnvSettings env;
  PidGrid pid_grid;
  double pid_target = 112.5;
  std::vector<std::string> matrix_patients;  // empty = all
  std::vector<MatrixMethod> matrix_methods;
  std::string source_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config", key + ": expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw Error("config", key + ": expected an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config", key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) throw Error("config", key + ": empty list");
  return out;
}

}  // namespace detail

inline MatrixMethod parse_matrix_method(const std::string& entry) {
  MatrixMethod m;
  m.label = entry;
  const auto colon = entry.find(':');
  m.method = parse_method(entry.substr(0, colon));
  if (colon != std::string::npos) {
    if (m.method != Method::kHetppo && m.method != Method::kCgmFixed) {
      throw Error("config", "matrix method '" + entry + "' takes no parameter");
    }
    m.has_param = true;
    m.param = detail::to_double("matrix.methods", entry.substr(colon + 1));
  }
  return m;
}

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  using Setter = std::function<void(const std::string&)>;
  auto dbl = [&](double& field) { return Setter([&field, key](const std::string& s) { field = to_double(key, s); }); };
  const std::map<std::string, Setter> table{
      {"method", [&](const std::string& s) { c.method = parse_method(s); }},
      {"patient", [&](const std::string& s) { c.patient = s; }},
      {"patients_file", [&](const std::string& s) { c.patients_file = resolve_path(c.source_dir, s); }},
      {"episodes", [&](const std::string& s) { c.episodes = static_cast<int>(to_int(key, s)); }},
      {"seeds",
       [&](const std::string& s) {
         c.seeds.clear();
         for (const auto& item : split_list(s)) c.seeds.push_back(static_cast<std::uint64_t>(to_int(key, item)));
       }},
      {"eval_scenarios",
       [&](const std::string& s) {
         c.eval_scenarios.clear();
         for (const auto& item : split_list(s)) c.eval_scenarios.push_back(resolve_path(c.source_dir, item));
       }},
      {"log_every", [&](const std::string& s) { c.log_every = static_cast<int>(to_int(key, s)); }},
      {"checkpoint_every", [&](const std::string& s) { c.checkpoint_every = static_cast<int>(to_int(key, s)); }},
      {"trigger.scheme",
       [&](const std::string& s) {
         if (s == "fixed") c.trigger.scheme = TriggerScheme::kFixed;
         else if (s == "variable") c.trigger.scheme = TriggerScheme::kVariable;
         else throw Error("config", "trigger.scheme: expected fixed or variable");
       }},
      {"trigger.fixed_eta", dbl(c.trigger.fixed_eta)},
      {"trigger.eta_lo", dbl(c.trigger.eta_lo)},
      {"trigger.eta_hi", dbl(c.trigger.eta_hi)},
      {"reward.mode",
       [&](const std::string& s) {
         if (s != "auto" && s != "r1" && s != "r1+r2") throw Error("config", "reward.mode: expected auto, r1 or r1+r2");
         c.reward_mode = s;
       }},
      {"reward.c", dbl(c.env.reward.c)},
      {"reward.C", dbl(c.env.reward.C)},
      {"reward.eta_e", dbl(c.env.reward.eta_e)},
      {"reward.range_lo", dbl(c.env.reward.range_lo)},
      {"reward.range_hi", dbl(c.env.reward.range_hi)},
      {"hetppo.event_pinned", [&](const std::string& s) { c.event_pinned = to_bool(key, s); }},
      {"ppo.gamma", dbl(c.hyper.gamma)},
      {"ppo.lambda", dbl(c.hyper.lambda)},
      {"ppo.clip", dbl(c.hyper.clip)},
      {"ppo.ent_coef", dbl(c.hyper.ent_coef)},
      {"ppo.lr", dbl(c.hyper.lr)},
      {"ppo.buffer", [&](const std::string& s) { c.hyper.buffer = static_cast<std::size_t>(to_int(key, s)); }},
      {"ppo.epochs", [&](const std::string& s) { c.hyper.epochs = static_cast<int>(to_int(key, s)); }},
      {"ppo.minibatch", [&](const std::string& s) { c.hyper.minibatch = static_cast<std::size_t>(to_int(key, s)); }},
      {"ppo.normalize_advantages", [&](const std::string& s) { c.hyper.normalize_advantages = to_bool(key, s); }},
      {"net.hidden",
       [&](const std::string& s) {
         c.hidden.clear();
         for (const auto& item : split_list(s)) c.hidden.push_back(static_cast<std::size_t>(to_int(key, item)));
       }},
      {"sensor.noise_phi", dbl(c.env.sensor.noise_phi)},
      {"sensor.noise_sigma", dbl(c.env.sensor.noise_sigma)},
      {"pump.u_max", dbl(c.env.pump.u_max)},
      {"episode.horizon", [&](const std::string& s) { c.env.episode.horizon = static_cast<int>(to_int(key, s)); }},
      {"pid.target", dbl(c.pid_target)},
      {"pid.kp", [&](const std::string& s) { c.pid_grid.kp = to_doubles(key, s); }},
      {"pid.ki", [&](const std::string& s) { c.pid_grid.ki = to_doubles(key, s); }},
      {"pid.kd", [&](const std::string& s) { c.pid_grid.kd = to_doubles(key, s); }},
      {"matrix.patients",
       [&](const std::string& s) {
         c.matrix_patients.clear();
         if (s != "all") c.matrix_patients = split_list(s);
       }},
      {"matrix.methods",
       [&](const std::string& s) {
         c.matrix_methods.clear();
         for (const auto& item : split_list(s)) c.matrix_methods.push_back(parse_matrix_method(item));
       }},
  };
  const auto it = table.find(key);
  if (it == table.end()) throw Error("config", "unknown key '" + key + "'");
  it->second(v);
}

inline void check_config(const ExperimentConfig& c) {
  if (c.episodes < 0) throw Error("config", "episodes must be >= 0");
  if (c.seeds.empty()) throw Error("config", "seed list is empty");
  if (c.trigger.fixed_eta < 0.0) throw Error("config", "trigger.fixed_eta must be >= 0");
  if (!(c.trigger.eta_lo < c.trigger.eta_hi)) throw Error("config", "trigger.eta_lo must be < trigger.eta_hi");
  if (c.env.sensor.noise_phi < 0.0 || c.env.sensor.noise_phi >= 1.0) throw Error("config", "sensor.noise_phi in [0, 1)");
  if (c.env.sensor.noise_sigma < 0.0) throw Error("config", "sensor.noise_sigma must be >= 0");
  if (c.env.episode.horizon <= 0) throw Error("config", "episode.horizon must be > 0");
  if (c.hyper.buffer == 0 || c.hyper.minibatch == 0) throw Error("config", "ppo.buffer and ppo.minibatch must be > 0");
  if (c.hidden.empty()) throw Error("config", "net.hidden is empty");
  for (const auto& path : c.eval_scenarios) {
    if (!std::filesystem::exists(path)) throw Error("config", "eval scenario not found: " + path);
  }
  if (!c.patients_file.empty() && !std::filesystem::exists(c.patients_file)) {
    throw Error("config", "patients file not found: " + c.patients_file);
  }
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& source_dir = ".") {
  ExperimentConfig c;
  c.source_dir = source_dir;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_comment(line);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config", "line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  check_config(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open config file " + path);
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(in, dir.empty() ? "." : dir);
}

// Reward mode actually used by a method under this config.
inline RewardConfig effective_reward(const ExperimentConfig& c, Method m) {
  RewardConfig r = c.env.reward;
  if (c.reward_mode == "r1") r.mode = RewardMode::kInRange;
  else if (c.reward_mode == "r1+r2") r.mode = RewardMode::kInRangePlusHold;
  else r.mode = (m == Method::kCgmFixed || m == Method::kCgmVariable) ? RewardMode::kInRangePlusHold : RewardMode::kInRange;
  return r;
}

// A copy of the config specialized to one matrix entry.
inline ExperimentConfig with_matrix_method(ExperimentConfig c, const MatrixMethod& m) {
  c.method = m.method;
  if (m.method == Method::kCgmFixed) c.trigger.scheme = TriggerScheme::kFixed;
  if (m.method == Method::kCgmVariable) c.trigger.scheme = TriggerScheme::kVariable;
  if (m.has_param && m.method == Method::kHetppo) c.env.reward.eta_e = m.param;
  if (m.has_param && m.method == Method::kCgmFixed) c.trigger.fixed_eta = m.param;
  return c;
}

}  // namespace etap
