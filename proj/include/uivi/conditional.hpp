#pragma once

#include <functional>
#include <span>

#include "uivi/tensor.hpp"

namespace uivi {

// Diagonal Gaussian conditional N(z | mean, diag(scale^2)).
struct GaussianCondParams {
  Vec mean;
  Vec scale;

  std::size_t dim() const { return mean.size(); }
  // Throws on mismatched dims or non-positive scale.
  void validate() const;
};

// z = mean + scale * u.
Vec reparameterize(const GaussianCondParams& params, std::span<const double> u);

double log_density(const GaussianCondParams& params, std::span<const double> z);

// -(z - mean) / scale^2
Vec grad_logdensity_z(const GaussianCondParams& params, std::span<const double> z);

// Exponential-family conditional q(z|eps) ∝ exp(t(z)^T eta). The sufficient
// statistic is described by its Jacobian; `in_support` rejects points outside
// the family's support.
struct ExpFamCondParams {
  Vec natural_param;
  std::size_t stat_dim = 0;
  // Row-major stat_dim x z_dim Jacobian of t at z.
  std::function<Vec(std::span<const double> z)> stat_jacobian;
  std::function<bool(std::span<const double> z)> in_support;
  std::function<bool(std::span<const double> eta)> admissible;
};

// grad_z t(z)^T eta
Vec expfam_grad_logdensity_z(const ExpFamCondParams& params, std::span<const double> z);

// A diagonal Gaussian written with t(z) = (z, z^2) and
// eta = (mean / scale^2, -1 / (2 scale^2)).
ExpFamCondParams gaussian_as_expfam(const GaussianCondParams& params);

Vec sample_noise(std::size_t dim, Rng& rng);

}  // namespace uivi
