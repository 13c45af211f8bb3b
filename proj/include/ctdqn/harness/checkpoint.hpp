#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ctdqn/neural/serialize.hpp"

// Checkpoint files: a self-describing JSON document with a format-version
// field, the network (per layer: kind, shape tuple, parameters flattened
// row-major as decimal text), the optimizer state, and an echo of the
// configuration that produced it.

namespace ctdqn::harness {

using json = nlohmann::ordered_json;

constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  neural::Network network;
  neural::AdamState optimizer;
  json config_echo;
};

inline void save_checkpoint(const std::string& path, const neural::Network& net,
                            const neural::AdamState& opt, const json& config_echo) {
  json doc;
  doc["format"] = "ctdqn-checkpoint";
  doc["format_version"] = kCheckpointVersion;
  doc["config"] = config_echo;
  doc["network"] = neural::network_to_json(net);
  doc["optimizer"] = neural::adam_to_json(opt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << doc.dump(1, '\t') << '\n';
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed checkpoint " + path + ": " + e.what());
  }
  if (doc.value("format", "") != "ctdqn-checkpoint")
    throw std::runtime_error("not a checkpoint file: " + path);
  const int version = doc.value("format_version", -1);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint " + path + " has format_version " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kCheckpointVersion));
  Checkpoint cp;
  cp.network = neural::network_from_json(doc.at("network"));
  cp.optimizer = neural::adam_from_json(doc.at("optimizer"), cp.network);
  cp.config_echo = doc.value("config", json::object());
  return cp;
}

}  // namespace ctdqn::harness
