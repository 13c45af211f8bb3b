#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "ctdqn/neural/network.hpp"

namespace ctdqn::neural {

// Adam with bias-corrected moments. Moment accumulators mirror the network's
// parameter arrays; the step counter is shared and strictly increasing.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_bias, v_bias;

  static AdamState for_network(const Network& net) {
    AdamState s;
    Gradients shape = net.make_gradients();
    s.m_weights = shape.weights;
    s.v_weights = shape.weights;
    s.m_bias = shape.bias;
    s.v_bias = shape.bias;
    return s;
  }
};

namespace detail {

inline void adam_update_array(std::vector<double>& params,
                              const std::vector<double>& grads,
                              std::vector<double>& m, std::vector<double>& v,
                              const AdamState& s, double alpha,
                              double bias1, double bias2) {
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    params[i] -= alpha * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

// One optimizer step over every parameter array of `net`. Rejects non-finite
// gradients before touching any state.
inline void adam_step(Network& net, const Gradients& grads, AdamState& state,
                      double alpha) {
  if (grads.weights.size() != net.layer_count() ||
      grads.bias.size() != net.layer_count())
    throw std::invalid_argument("adam_step: gradient layout mismatch");
  if (state.m_weights.size() != net.layer_count())
    throw std::invalid_argument("adam_step: optimizer state layout mismatch");
  for (size_t li = 0; li < net.layer_count(); ++li) {
    if (!detail::all_finite(grads.weights[li]) || !detail::all_finite(grads.bias[li]))
      throw std::runtime_error("adam_step: non-finite gradient in layer " +
                               std::to_string(li));
  }

  state.step += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t li = 0; li < net.layer_count(); ++li) {
    auto& layer = net.layers()[li];
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      detail::adam_update_array(d->weights, grads.weights[li], state.m_weights[li],
                                state.v_weights[li], state, alpha, bias1, bias2);
      detail::adam_update_array(d->bias, grads.bias[li], state.m_bias[li],
                                state.v_bias[li], state, alpha, bias1, bias2);
    } else {
      auto& c = std::get<ConvLayer>(layer);
      detail::adam_update_array(c.filters, grads.weights[li], state.m_weights[li],
                                state.v_weights[li], state, alpha, bias1, bias2);
      detail::adam_update_array(c.bias, grads.bias[li], state.m_bias[li],
                                state.v_bias[li], state, alpha, bias1, bias2);
    }
  }
}

}  // namespace ctdqn::neural
