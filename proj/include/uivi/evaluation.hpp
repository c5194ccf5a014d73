#pragma once

#include "uivi/family.hpp"
#include "uivi/math.hpp"
#include "uivi/targets.hpp"

namespace uivi {

// (1/n_outer) Σ_s [log p(x, z_s) - log q_hat(z_s)], with log q_hat the
// M-sample marginal estimate (fresh eps per outer sample). Biased upward for
// finite M.
Estimate elbo_estimate(const TargetModel& target, const SemiImplicitQ& q, std::size_t n_outer, std::size_t M,
                       Rng& rng);

// log (1/S) Σ_s p(x, z_s) / q_hat(z_s), z_s ~ q, in log space. The standard
// error is the delta-method error of the log of the weight mean.
Estimate is_log_marginal(const TargetModel& target, const SemiImplicitQ& q, std::size_t S, std::size_t M,
                         Rng& rng);

// Tabulated q(z) = ∫ N(z | mu(eps), diag(scale^2)) N(eps | 0, I) d eps by
// composite Gauss-Legendre over eps in [-10, 10]^eps_dim. The panel count is
// doubled until log q agrees between resolutions to `tol` at probe points.
class MarginalDensityTable {
 public:
  explicit MarginalDensityTable(const SemiImplicitQ& q, double tol = 1e-10);

  double log_q(std::span<const double> z) const;
  // Per-coordinate range holding all but a negligible fraction of q's mass.
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  int panels() const { return panels_; }

 private:
  void build(int panels);

  const SemiImplicitQ* q_;
  Vec scale_;
  Vec log_weights_;  // log(node weight * N(eps_j))
  Tensor means_;     // mu(eps_j) per row
  Vec lower_, upper_;
  int panels_ = 0;
};

// E_q[log p(x, z) - log q(z)] by quadrature (z_dim <= 2, eps_dim <= 2).
// Throws ErrorKind::kNumerical when the quadrature does not converge.
double exact_elbo_quadrature(const TargetModel& target, const SemiImplicitQ& q);

}  // namespace uivi
