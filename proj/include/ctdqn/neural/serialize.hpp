#pragma once

#include <stdexcept>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ctdqn/neural/adam.hpp"
#include "ctdqn/neural/network.hpp"

// JSON payloads for networks and optimizer state. Parameter arrays are emitted
// flattened row-major; nlohmann prints doubles with a shortest round-trip
// representation, so save/load is bit-exact and repeated saves are
// byte-identical.

namespace ctdqn::neural {

using json = nlohmann::ordered_json;

inline json network_to_json(const Network& net) {
  json j;
  const Shape3& in = net.input_shape();
  j["input_shape"] = {in.h, in.w, in.c};
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    json jl;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      jl["kind"] = "dense";
      jl["activation"] = to_string(d->activation);
      jl["shape"] = {d->out, d->in};
      jl["weights"] = d->weights;
      jl["bias"] = d->bias;
    } else {
      const auto& c = std::get<ConvLayer>(layer);
      jl["kind"] = "conv";
      jl["activation"] = to_string(c.activation);
      jl["shape"] = {c.count, c.kh, c.kw, c.in_channels};
      jl["stride"] = c.stride;
      jl["weights"] = c.filters;
      jl["bias"] = c.bias;
    }
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline Network network_from_json(const json& j) {
  const auto& shape = j.at("input_shape");
  if (!shape.is_array() || shape.size() != 3)
    throw std::invalid_argument("network json: bad input_shape");
  Network net(Shape3{shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()});
  for (const auto& jl : j.at("layers")) {
    const std::string kind = jl.at("kind").get<std::string>();
    const Activation act = activation_from_string(jl.at("activation").get<std::string>());
    const auto& dims = jl.at("shape");
    if (kind == "dense") {
      if (dims.size() != 2) throw std::invalid_argument("network json: bad dense shape");
      net.add_dense(dims[0].get<int>(), act);
      auto& d = std::get<DenseLayer>(net.layers().back());
      if (d.in != dims[1].get<int>())
        throw std::invalid_argument("network json: dense fan-in mismatch");
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (w.size() != d.weights.size() || b.size() != d.bias.size())
        throw std::invalid_argument("network json: dense parameter count mismatch");
      d.weights = w;
      d.bias = b;
    } else if (kind == "conv") {
      if (dims.size() != 4) throw std::invalid_argument("network json: bad conv shape");
      if (dims[1].get<int>() != dims[2].get<int>())
        throw std::invalid_argument("network json: non-square conv kernel");
      net.add_conv(dims[0].get<int>(), dims[1].get<int>(), jl.at("stride").get<int>(), act);
      auto& c = std::get<ConvLayer>(net.layers().back());
      if (c.in_channels != dims[3].get<int>())
        throw std::invalid_argument("network json: conv channel mismatch");
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (w.size() != c.filters.size() || b.size() != c.bias.size())
        throw std::invalid_argument("network json: conv parameter count mismatch");
      c.filters = w;
      c.bias = b;
    } else {
      throw std::invalid_argument("network json: unknown layer kind '" + kind + "'");
    }
  }
  return net;
}

inline json adam_to_json(const AdamState& s) {
  json j;
  j["beta1"] = s.beta1;
  j["beta2"] = s.beta2;
  j["epsilon"] = s.epsilon;
  j["step"] = s.step;
  j["m_weights"] = s.m_weights;
  j["v_weights"] = s.v_weights;
  j["m_bias"] = s.m_bias;
  j["v_bias"] = s.v_bias;
  return j;
}

inline AdamState adam_from_json(const json& j, const Network& net) {
  AdamState s = AdamState::for_network(net);
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.step = j.at("step").get<std::uint64_t>();
  const auto mw = j.at("m_weights").get<std::vector<std::vector<double>>>();
  const auto vw = j.at("v_weights").get<std::vector<std::vector<double>>>();
  const auto mb = j.at("m_bias").get<std::vector<std::vector<double>>>();
  const auto vb = j.at("v_bias").get<std::vector<std::vector<double>>>();
  auto check = [](const auto& got, const auto& want, const char* what) {
    if (got.size() != want.size())
      throw std::invalid_argument(std::string("adam json: layer count mismatch in ") + what);
    for (size_t i = 0; i < got.size(); ++i)
      if (got[i].size() != want[i].size())
        throw std::invalid_argument(std::string("adam json: array size mismatch in ") + what);
  };
  check(mw, s.m_weights, "m_weights");
  check(vw, s.v_weights, "v_weights");
  check(mb, s.m_bias, "m_bias");
  check(vb, s.v_bias, "v_bias");
  s.m_weights = mw;
  s.v_weights = vw;
  s.m_bias = mb;
  s.v_bias = vb;
  return s;
}

}  // namespace ctdqn::neural
