#include "uivi/optimizer.hpp"

#include <cmath>

#include "uivi/error.hpp"

namespace uivi {

double RmsPropState::effective_eta(double eta) const {
  if (decay_every <= 0) return eta;
  return eta * std::pow(decay_factor, static_cast<double>(t / decay_every));
}

RmsPropState make_rmsprop(std::size_t n_params, std::size_t n_net, double eta_net, double eta_scale,
                          long decay_every, double decay_factor) {
  require(n_net <= n_params, ErrorKind::kInvalidArgument, "rmsprop: n_net exceeds parameter count");
  require(eta_net > 0.0 && eta_scale > 0.0, ErrorKind::kInvalidArgument, "rmsprop: learning rates must be positive");
  RmsPropState s;
  s.G.assign(n_params, 0.0);
  s.n_net = n_net;
  s.eta_net = eta_net;
  s.eta_scale = eta_scale;
  s.decay_every = decay_every;
  s.decay_factor = decay_factor;
  return s;
}

void rmsprop_step(RmsPropState& state, std::span<double> params, std::span<const double> grad) {
  if (params.size() != state.G.size() || grad.size() != state.G.size()) {
    fail(ErrorKind::kDimensionMismatch, "rmsprop: parameter, gradient and state shapes differ");
  }
  const double eta_net = state.effective_eta(state.eta_net);
  const double eta_scale = state.effective_eta(state.eta_scale);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.G[i] = 0.9 * state.G[i] + 0.1 * g * g;
    const double eta = i < state.n_net ? eta_net : eta_scale;
    params[i] += eta / (1.0 + std::sqrt(state.G[i])) * g;
  }
  ++state.t;
}

}  // namespace uivi
