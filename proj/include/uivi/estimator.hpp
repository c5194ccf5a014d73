#pragma once

#include <span>
#include <vector>

#include "uivi/family.hpp"
#include "uivi/hmc.hpp"
#include "uivi/targets.hpp"

namespace uivi {

// ELBO gradient in the flat parameter layout of SemiImplicitQ::flatten().
// It is an ascent direction.
struct GradEstimate {
  Vec grad;
  double model_norm = 0.0;
  double entropy_norm = 0.0;
  double hmc_acceptance = 1.0;
  double hmc_step_size = 0.0;  // adapted step size after the last chain
  double hmc_mean_abs_delta_h = 0.0;
};

// Pulls a z-space vector back through z = mu(eps) + softplus(scale_raw) * u
// and adds the parameter gradient into grad_accum.
void backprop_through_sample(const SemiImplicitQ& q, const DrawRecord& rec, std::span<const double> v,
                             std::span<double> grad_accum);

// grad_z log p(x, z) at rec.z pulled back through the reparameterization.
Vec model_term(const TargetModel& target, const SemiImplicitQ& q, const DrawRecord& rec);

// -(1/|eps'|) Σ grad_z log q(z | eps') at rec.z, pulled back the same way.
// The eps'-dependent factor is held constant with respect to the parameters.
Vec entropy_term(const SemiImplicitQ& q, const DrawRecord& rec, const std::vector<Vec>& eps_primes);

enum class OracleMode { kConjugate, kQuadrature };

// Exact grad_z log q(z). Conjugate mode needs a single identity layer
// (linear-Gaussian family); quadrature mode needs eps_dim <= 2.
Vec grad_z_log_marginal_oracle(const SemiImplicitQ& q, std::span<const double> z, OracleMode mode);

// log q(z) by quadrature over eps (eps_dim <= 2).
double log_marginal_quadrature(const SemiImplicitQ& q, std::span<const double> z);

// Where the reverse-conditional samples for the entropy term come from.
// kReuseGeneratingEps sets eps' = eps and is biased; it exists so the
// test harness can show it detects the dependence.
enum class ReverseSampling { kHmc, kReuseGeneratingEps };

// Average of model_term + entropy_term over S draws, with eps' from HMC
// started at each draw's eps.
GradEstimate elbo_gradient(const TargetModel& target, const SemiImplicitQ& q, int S, const HmcConfig& hmc_cfg,
                           Rng& rng, ReverseSampling sampling = ReverseSampling::kHmc);

}  // namespace uivi
