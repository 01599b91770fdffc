#pragma once

// Versioned plain-text snapshot of a trained controller. Each line is a key
// followed by space separated values; vectors are written as their length
// and then the elements, all doubles at full precision.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "etap/agent.hpp"
#include "etap/error.hpp"
#include "etap/patients.hpp"
#include "etap/pid.hpp"

namespace etap {

inline constexpr const char* kCheckpointHeader = "etap-checkpoint v1";

struct AdamState {
  long long steps = 0;
  std::vector<double> m;
  std::vector<double> v;
};

struct Checkpoint {
  Method method = Method::kCgmFixed;
  std::uint64_t seed = 0;
  int episodes = 0;
  TriggerConfig trigger;
  bool event_pinned = false;
  std::vector<std::size_t> hidden{64, 64};
  std::vector<double> actor;
  std::vector<double> critic;
  AdamState actor_opt;
  AdamState critic_opt;
  PidGains pid;
};

inline Checkpoint make_checkpoint(const Agent& a, int episodes, const std::vector<std::size_t>& hidden) {
  Checkpoint c;
  c.method = a.method;
  c.seed = a.seed;
  c.episodes = episodes;
  c.trigger = a.trigger;
  c.event_pinned = a.event_pinned;
  c.hidden = hidden;
  c.actor = a.actor.params();
  c.critic = a.critic.params();
  c.actor_opt = {a.actor_opt.steps(), a.actor_opt.first_moment(), a.actor_opt.second_moment()};
  c.critic_opt = {a.critic_opt.steps(), a.critic_opt.first_moment(), a.critic_opt.second_moment()};
  return c;
}

inline Checkpoint make_pid_checkpoint(const PidGains& g, std::uint64_t seed) {
  Checkpoint c;
  c.method = Method::kPid;
  c.seed = seed;
  c.pid = g;
  return c;
}

namespace detail {

inline void write_vec(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key << ' ' << v.size();
  for (double x : v) os << ' ' << format_double(x);
  os << '\n';
}

inline std::vector<double> read_vec(std::istringstream& is, const std::string& key) {
  std::size_t n = 0;
  if (!(is >> n)) throw Error("parse", "checkpoint: " + key + " has no length");
  std::vector<double> v(n);
  std::string tok;
  for (auto& x : v) {
    if (!(is >> tok)) throw Error("parse", "checkpoint: " + key + " is truncated");
    x = parse_double(tok, key);
  }
  return v;
}

}  // namespace detail

inline std::string format_checkpoint(const Checkpoint& c) {
  using detail::format_double;
  std::ostringstream os;
  os << kCheckpointHeader << '\n';
  os << "method " << method_name(c.method) << '\n';
  os << "seed " << c.seed << '\n';
  if (c.method == Method::kPid) {
    os << "pid " << format_double(c.pid.kp) << ' ' << format_double(c.pid.ki) << ' ' << format_double(c.pid.kd)
       << ' ' << format_double(c.pid.target) << '\n';
    return os.str();
  }
  os << "episodes " << c.episodes << '\n';
  os << "trigger " << (c.trigger.scheme == TriggerScheme::kFixed ? "fixed" : "variable") << ' '
     << format_double(c.trigger.fixed_eta) << ' ' << format_double(c.trigger.eta_lo) << ' '
     << format_double(c.trigger.eta_hi) << '\n';
  os << "event_pinned " << (c.event_pinned ? 1 : 0) << '\n';
  os << "hidden " << c.hidden.size();
  for (auto h : c.hidden) os << ' ' << h;
  os << '\n';
  detail::write_vec(os, "actor", c.actor);
  detail::write_vec(os, "critic", c.critic);
  os << "actor_opt.steps " << c.actor_opt.steps << '\n';
  detail::write_vec(os, "actor_opt.m", c.actor_opt.m);
  detail::write_vec(os, "actor_opt.v", c.actor_opt.v);
  os << "critic_opt.steps " << c.critic_opt.steps << '\n';
  detail::write_vec(os, "critic_opt.m", c.critic_opt.m);
  detail::write_vec(os, "critic_opt.v", c.critic_opt.v);
  return os.str();
}

inline Checkpoint parse_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointHeader) {
    throw Error("checkpoint-version", "expected '" + std::string(kCheckpointHeader) + "', got '" + line + "'");
  }
  Checkpoint c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    std::string tok;
    if (key == "method") {
      is >> tok;
      c.method = parse_method(tok);
    } else if (key == "seed") {
      is >> c.seed;
    } else if (key == "episodes") {
      is >> c.episodes;
    } else if (key == "pid") {
      std::string a, b, d, t;
      if (!(is >> a >> b >> d >> t)) throw Error("parse", "checkpoint: bad pid line");
      c.pid = {detail::parse_double(a, "kp"), detail::parse_double(b, "ki"), detail::parse_double(d, "kd"),
               detail::parse_double(t, "target")};
    } else if (key == "trigger") {
      std::string a, b, d;
      if (!(is >> tok >> a >> b >> d)) throw Error("parse", "checkpoint: bad trigger line");
      c.trigger.scheme = tok == "variable" ? TriggerScheme::kVariable : TriggerScheme::kFixed;
      c.trigger.fixed_eta = detail::parse_double(a, "fixed_eta");
      c.trigger.eta_lo = detail::parse_double(b, "eta_lo");
      c.trigger.eta_hi = detail::parse_double(d, "eta_hi");
    } else if (key == "event_pinned") {
      int v = 0;
      is >> v;
      c.event_pinned = v != 0;
    } else if (key == "hidden") {
      std::size_t n = 0;
      is >> n;
      c.hidden.assign(n, 0);
      for (auto& h : c.hidden) is >> h;
    } else if (key == "actor") {
      c.actor = detail::read_vec(is, key);
    } else if (key == "critic") {
      c.critic = detail::read_vec(is, key);
    } else if (key == "actor_opt.steps") {
      is >> c.actor_opt.steps;
    } else if (key == "actor_opt.m") {
      c.actor_opt.m = detail::read_vec(is, key);
    } else if (key == "actor_opt.v") {
      c.actor_opt.v = detail::read_vec(is, key);
    } else if (key == "critic_opt.steps") {
      is >> c.critic_opt.steps;
    } else if (key == "critic_opt.m") {
      c.critic_opt.m = detail::read_vec(is, key);
    } else if (key == "critic_opt.v") {
      c.critic_opt.v = detail::read_vec(is, key);
    } else {
      throw Error("parse", "checkpoint: unknown key '" + key + "'");
    }
    if (is.fail()) throw Error("parse", "checkpoint: bad value for '" + key + "'");
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write checkpoint " + path);
  out << format_checkpoint(c);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open checkpoint " + path);
  return parse_checkpoint(in);
}

// Rebuilds a learning agent; network sizes must match the stored vectors.
inline Agent restore_agent(const Checkpoint& c, const HyperParams& hp) {
  if (c.method == Method::kPid) throw Error("config", "PID checkpoint has no networks");
  Agent a = Agent::create(c.method, hp, c.seed, c.trigger, c.event_pinned, c.hidden);
  auto load = [](std::vector<double>& dst, const std::vector<double>& src, const char* what) {
    if (dst.size() != src.size()) throw Error("shape", std::string("checkpoint ") + what + " size mismatch");
    dst = src;
  };
  load(a.actor.params(), c.actor, "actor");
  load(a.critic.params(), c.critic, "critic");
  load(a.actor_opt.first_moment(), c.actor_opt.m, "actor_opt.m");
  load(a.actor_opt.second_moment(), c.actor_opt.v, "actor_opt.v");
  load(a.critic_opt.first_moment(), c.critic_opt.m, "critic_opt.m");
  load(a.critic_opt.second_moment(), c.critic_opt.v, "critic_opt.v");
  a.actor_opt.set_steps(c.actor_opt.steps);
  a.critic_opt.set_steps(c.critic_opt.steps);
  return a;
}

}  // namespace etap
