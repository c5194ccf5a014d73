#pragma once

#include "uivi/family.hpp"
#include "uivi/targets.hpp"

namespace uivi {

struct SiviConfig {
  int L_final = 200;
};

// Linear ramp from 1 at t = 0 to L_final at t = t_max (floor interpolation).
int l_schedule_linear(long t, long t_max, int L_final);

struct SiviEstimate {
  double value = 0.0;
  Vec grad;  // flat layout of SemiImplicitQ::flatten(), ascent direction
};

// Single-sample estimate of the SIVI bound
//   log p(x, z) - log (1/(L+1)) [q(z|eps) + Σ_l q(z|eps_l)],  z = h(u; eps),
// and its reparameterization gradient with all eps draws held fixed.
SiviEstimate sivi_surrogate_gradient(const TargetModel& target, const SemiImplicitQ& q, int L, Rng& rng);

}  // namespace uivi
