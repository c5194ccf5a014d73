#pragma once

#include <span>

#include "uivi/tensor.hpp"

namespace uivi {

// RMSProp variant with step rho = eta_t / (1 + sqrt(G)) and
// G <- 0.9 G + 0.1 grad^2. The first `n_net` coordinates use eta_net, the
// rest eta_scale; both decay by decay_factor every decay_every iterations.
struct RmsPropState {
  Vec G;
  std::size_t n_net = 0;
  double eta_net = 0.01;
  double eta_scale = 0.002;
  long decay_every = 3000;
  double decay_factor = 0.9;
  long t = 0;

  double effective_eta(double eta) const;
};

RmsPropState make_rmsprop(std::size_t n_params, std::size_t n_net, double eta_net, double eta_scale,
                          long decay_every = 3000, double decay_factor = 0.9);

// Ascent step: params += rho * grad. Advances t.
void rmsprop_step(RmsPropState& state, std::span<double> params, std::span<const double> grad);

}  // namespace uivi
