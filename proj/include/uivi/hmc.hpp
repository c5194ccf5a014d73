#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "uivi/family.hpp"

namespace uivi {

struct HmcConfig {
  int n_burn = 5;
  int n_keep = 5;
  int leapfrog_steps = 5;
  // Unset means 0.1 / sqrt(dim) of the chain.
  std::optional<double> step_size;
  bool adapt_during_burn = true;
  // Each iteration scales the step by a uniform factor in
  // [1 - step_jitter, 1 + step_jitter].
  double step_jitter = 0.5;
  double target_accept = 0.9;

  void validate() const;
  double initial_step_size(std::size_t dim) const;
};

// Cached log target and gradient at `position`.
struct ChainState {
  Vec position;
  double log_target = 0.0;
  Vec grad;
};

// Log density (up to a constant) and its gradient at a point.
using LogTargetFn = std::function<double(std::span<const double> x, Vec& grad_out)>;

// log q(z|eps) + log N(eps|0,I) up to a constant, and its eps-gradient.
struct ReverseTarget {
  double value = 0.0;
  Vec grad_eps;
};

ReverseTarget reverse_log_target(const SemiImplicitQ& q, std::span<const double> z,
                                 std::span<const double> eps);

struct PhasePoint {
  Vec position;
  Vec momentum;
};

// Leapfrog with identity mass; grad_log_target returns the gradient of the log
// target (the negative potential gradient).
PhasePoint leapfrog(PhasePoint state, const std::function<Vec(std::span<const double>)>& grad_log_target,
                    int steps, double step_size);

struct HmcResult {
  std::vector<Vec> samples;      // positions after each kept iteration
  double acceptance_rate = 0.0;  // over the kept iterations
  double burn_acceptance_rate = 0.0;
  double step_size = 0.0;        // adapted step size for the next chain
  double mean_abs_delta_h = 0.0;
};

// Metropolis-corrected HMC started from `init`. Runs n_burn + n_keep
// iterations and returns the last n_keep positions.
HmcResult hmc_run(const LogTargetFn& log_target, std::span<const double> init, const HmcConfig& cfg,
                  Rng& rng);

// HMC on the reverse conditional q(eps | z), started at the eps that produced z.
HmcResult hmc_sample(const SemiImplicitQ& q, std::span<const double> z, std::span<const double> eps_init,
                     const HmcConfig& cfg, Rng& rng);

}  // namespace uivi
