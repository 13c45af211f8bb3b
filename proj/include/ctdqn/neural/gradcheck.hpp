#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "ctdqn/neural/network.hpp"

namespace ctdqn::neural {

namespace detail {

// Squared-error loss against a fixed target, the probe used by the checker.
inline double probe_loss(const Network& net, std::span<const double> input,
                         const std::vector<double>& target) {
  const std::vector<double> out = net.forward(input);
  double loss = 0.0;
  for (size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - target[i];
    loss += d * d;
  }
  return loss;
}

inline std::vector<double>& param_array(Network& net, size_t li, bool bias) {
  auto& layer = net.layers()[li];
  if (auto* d = std::get_if<DenseLayer>(&layer)) return bias ? d->bias : d->weights;
  auto& c = std::get<ConvLayer>(layer);
  return bias ? c.bias : c.filters;
}

}  // namespace detail

// Central finite differences against the analytic backward pass over every
// parameter of `net`. Returns max over parameters of
// |analytic - numeric| / max(1, |numeric|).
inline double finite_difference_check(const Network& net,
                                      std::span<const double> input,
                                      double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_difference_check: eps must be > 0");

  // Fixed non-trivial target so the loss gradient at the output is non-zero.
  std::vector<double> target(static_cast<size_t>(net.output_size()));
  for (size_t i = 0; i < target.size(); ++i)
    target[i] = 0.5 + 0.25 * static_cast<double>(i);

  ForwardCache cache;
  const std::vector<double> out = net.forward(input, cache);
  std::vector<double> dloss(out.size());
  for (size_t i = 0; i < out.size(); ++i) dloss[i] = 2.0 * (out[i] - target[i]);
  Gradients analytic = net.make_gradients();
  net.backward(cache, dloss, analytic);

  Network probe = net;
  double worst = 0.0;
  for (size_t li = 0; li < net.layer_count(); ++li) {
    for (int pass = 0; pass < 2; ++pass) {
      const bool bias = pass == 1;
      std::vector<double>& params = detail::param_array(probe, li, bias);
      const std::vector<double>& grad = bias ? analytic.bias[li] : analytic.weights[li];
      for (size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + eps;
        const double lp = detail::probe_loss(probe, input, target);
        params[i] = saved - eps;
        const double lm = detail::probe_loss(probe, input, target);
        params[i] = saved;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double err = std::abs(grad[i] - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, err);
      }
    }
  }
  return worst;
}

}  // namespace ctdqn::neural
