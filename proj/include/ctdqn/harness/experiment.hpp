#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ctdqn/agent/config.hpp"
#include "ctdqn/envs/types.hpp"
#include "ctdqn/harness/csv.hpp"
#include "ctdqn/tutors/car.hpp"

namespace ctdqn::harness {

enum class Algo { kDqn, kCtDqn };

inline const char* to_string(Algo a) { return a == Algo::kDqn ? "dqn" : "ctdqn"; }

inline Algo algo_from_string(const std::string& s) {
  if (s == "dqn") return Algo::kDqn;
  if (s == "ctdqn") return Algo::kCtDqn;
  throw std::invalid_argument("unknown algorithm: " + s);
}

// Fully resolved experiment description. Defaults are the per-environment
// hyperparameters (learning rate, discount, exploration rate, buffer size,
// network architecture); preset() fills the session/episode/step scales.
struct ExperimentConfig {
  envs::EnvKind env = envs::EnvKind::kPendulum;
  Algo algo = Algo::kDqn;
  double omega = 0.05;  // tutor switching probability (ctdqn only)
  int sessions = 1;
  int episodes = 1;
  int max_steps = 1;
  std::uint64_t master_seed = 0;
  std::string out_dir = "run";

  double alpha = 0.001;
  double gamma = 0.99;
  double eps_rl = 0.02;
  std::size_t buffer_capacity = 1'000'000;
  int batch_size = 64;

  tutors::CarTutorParams car_tutor;
  int checkpoint_every = 0;  // extra checkpoints every n episodes (0 = off)
  int jobs = 1;              // sessions run concurrently when > 1

  void apply_env_defaults() {
    switch (env) {
      case envs::EnvKind::kPendulum:
        alpha = 0.001;
        gamma = 0.99;
        eps_rl = 0.02;
        buffer_capacity = 1'000'000;
        break;
      case envs::EnvKind::kLander:
        alpha = 0.0001;
        gamma = 0.99;
        eps_rl = 0.1;
        buffer_capacity = 1'000'000;
        break;
      case envs::EnvKind::kCar:
        alpha = 0.001;
        gamma = 0.9999;
        eps_rl = 0.1;
        buffer_capacity = 5'000;
        break;
    }
  }

  // "paper" matches the published scales; "desk" is sized for a workstation.
  static ExperimentConfig preset(envs::EnvKind env, Algo algo, const std::string& scale) {
    if (scale != "desk" && scale != "paper")
      throw std::invalid_argument("unknown preset: " + scale);
    ExperimentConfig cfg;
    cfg.env = env;
    cfg.algo = algo;
    cfg.apply_env_defaults();
    const bool paper = scale == "paper";
    switch (env) {
      case envs::EnvKind::kPendulum:
        cfg.sessions = 3;
        cfg.episodes = 100;
        cfg.max_steps = 400;
        break;
      case envs::EnvKind::kLander:
        cfg.sessions = paper ? 3 : 2;
        cfg.episodes = paper ? 1000 : 400;
        cfg.max_steps = 1000;
        break;
      case envs::EnvKind::kCar:
        cfg.sessions = paper ? 2 : 1;
        cfg.episodes = paper ? 500 : 60;
        cfg.max_steps = paper ? 1000 : 300;
        break;
    }
    return cfg;
  }

  agent::CtDqnConfig agent_config() const {
    agent::CtDqnConfig cfg =
        algo == Algo::kDqn
            ? agent::CtDqnConfig::dqn(eps_rl, gamma, alpha, buffer_capacity)
            : agent::CtDqnConfig::ctdqn(omega, eps_rl, gamma, alpha, buffer_capacity);
    cfg.batch_size = batch_size;
    return cfg;
  }

  void validate() const {
    if (sessions < 1 || episodes < 1 || max_steps < 1)
      throw std::invalid_argument("config: sessions, episodes and steps must be >= 1");
    if (algo == Algo::kCtDqn && !(omega > 0.0))
      throw std::invalid_argument("config: ctdqn requires omega > 0");
    if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    agent_config().validate();
  }
};

// ------------------------------------------------------------ config echo

// Plain-text key-value format, one "key = value" per line with [section]
// headers. The echo written into every run directory is fully resolved, so
// re-running from it reproduces the run bit-exactly.

inline std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "# ctdqn experiment config\n";
  out << "env = " << envs::to_string(cfg.env) << "\n";
  out << "algo = " << to_string(cfg.algo) << "\n";
  if (cfg.algo == Algo::kCtDqn) out << "omega = " << format_double(cfg.omega) << "\n";
  out << "sessions = " << cfg.sessions << "\n";
  out << "episodes = " << cfg.episodes << "\n";
  out << "steps = " << cfg.max_steps << "\n";
  out << "seed = " << cfg.master_seed << "\n";
  out << "jobs = " << cfg.jobs << "\n";
  out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  out << "\n[agent]\n";
  out << "alpha = " << format_double(cfg.alpha) << "\n";
  out << "gamma = " << format_double(cfg.gamma) << "\n";
  out << "eps_rl = " << format_double(cfg.eps_rl) << "\n";
  out << "buffer_capacity = " << cfg.buffer_capacity << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  if (cfg.env == envs::EnvKind::kCar) {
    out << "\n[tutor]\n";
    out << "look_ahead_px = " << format_double(cfg.car_tutor.look_ahead_px) << "\n";
    out << "scan_offset_px = " << format_double(cfg.car_tutor.scan_offset_px) << "\n";
    out << "accel_angle_deg = " << format_double(cfg.car_tutor.accel_angle_deg) << "\n";
    out << "brake_angle_deg = " << format_double(cfg.car_tutor.brake_angle_deg) << "\n";
    out << "accel_speed_frac = " << format_double(cfg.car_tutor.accel_speed_frac) << "\n";
    out << "steer_deadband_deg = " << format_double(cfg.car_tutor.steer_deadband_deg) << "\n";
    out << "edge_threshold = " << format_double(cfg.car_tutor.edge_threshold) << "\n";
  }
  return out.str();
}

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line, section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2) + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected 'key = value', got: " + line);
    kv[section + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline ExperimentConfig config_from_text(std::istream& in) {
  const auto kv = parse_key_values(in);
  auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("config: missing key " + key);
    return it->second;
  };
  auto get = [&](const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  ExperimentConfig cfg;
  cfg.env = envs::env_kind_from_string(need("env"));
  cfg.algo = algo_from_string(need("algo"));
  cfg.apply_env_defaults();
  if (cfg.algo == Algo::kCtDqn) cfg.omega = std::stod(need("omega"));
  cfg.sessions = std::stoi(need("sessions"));
  cfg.episodes = std::stoi(need("episodes"));
  cfg.max_steps = std::stoi(need("steps"));
  cfg.master_seed = std::stoull(need("seed"));
  cfg.jobs = std::stoi(get("jobs", "1"));
  cfg.checkpoint_every = std::stoi(get("checkpoint_every", "0"));
  cfg.alpha = std::stod(get("agent.alpha", format_double(cfg.alpha)));
  cfg.gamma = std::stod(get("agent.gamma", format_double(cfg.gamma)));
  cfg.eps_rl = std::stod(get("agent.eps_rl", format_double(cfg.eps_rl)));
  cfg.buffer_capacity = std::stoull(get("agent.buffer_capacity", std::to_string(cfg.buffer_capacity)));
  cfg.batch_size = std::stoi(get("agent.batch_size", "64"));
  cfg.car_tutor.look_ahead_px = std::stod(get("tutor.look_ahead_px", "10"));
  cfg.car_tutor.scan_offset_px = std::stod(get("tutor.scan_offset_px", "2"));
  cfg.car_tutor.accel_angle_deg = std::stod(get("tutor.accel_angle_deg", "15"));
  cfg.car_tutor.brake_angle_deg = std::stod(get("tutor.brake_angle_deg", "50"));
  cfg.car_tutor.accel_speed_frac = std::stod(get("tutor.accel_speed_frac", "0.4"));
  cfg.car_tutor.steer_deadband_deg = std::stod(get("tutor.steer_deadband_deg", "3"));
  cfg.car_tutor.edge_threshold = std::stod(get("tutor.edge_threshold", "25.5"));
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  return config_from_text(in);
}

// Compact JSON echo embedded into checkpoints.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["env"] = envs::to_string(cfg.env);
  j["algo"] = to_string(cfg.algo);
  if (cfg.algo == Algo::kCtDqn) j["omega"] = cfg.omega;
  j["sessions"] = cfg.sessions;
  j["episodes"] = cfg.episodes;
  j["steps"] = cfg.max_steps;
  j["seed"] = cfg.master_seed;
  j["alpha"] = cfg.alpha;
  j["gamma"] = cfg.gamma;
  j["eps_rl"] = cfg.eps_rl;
  j["buffer_capacity"] = cfg.buffer_capacity;
  j["batch_size"] = cfg.batch_size;
  return j;
}

}  // namespace ctdqn::harness
