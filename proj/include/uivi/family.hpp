#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uivi/conditional.hpp"
#include "uivi/tensor.hpp"

namespace uivi {

// q(z) = ∫ N(z | mu(eps), diag(softplus(scale_raw))^2) N(eps | 0, I) d eps.
//
// The conditional mean is an MLP of eps; the scale is a global parameter
// stored unconstrained. eps_dim == 0 gives an explicit diagonal Gaussian
// (the network degenerates to its bias).
struct SemiImplicitQ {
  std::size_t eps_dim = 0;
  std::size_t z_dim = 0;
  MlpParams cond_net;
  Vec scale_raw;

  void validate() const;
  Vec scale() const;

  std::size_t num_net_params() const { return cond_net.num_params(); }
  std::size_t num_params() const { return cond_net.num_params() + scale_raw.size(); }

  // Network parameters (flat MLP layout) followed by scale_raw.
  Vec flatten() const;
  void assign_from(std::span<const double> flat);

  bool operator==(const SemiImplicitQ&) const = default;
};

struct FamilySpec {
  std::size_t eps_dim = 3;
  std::size_t z_dim = 2;
  std::vector<std::size_t> hidden{50, 50};
  Activation hidden_activation = Activation::kRelu;
  double init_scale = 0.5;
};

SemiImplicitQ make_family(const FamilySpec& spec, Rng& rng);

// Single linear layer: mu(eps) = weight * eps + bias.
SemiImplicitQ make_linear_gaussian_family(const Tensor& weight, const Vec& bias, const Vec& scale);
// Conditional that ignores eps: zero weights, mu = mean.
SemiImplicitQ make_constant_family(std::size_t eps_dim, const Vec& mean, const Vec& scale);

GaussianCondParams cond_params(const SemiImplicitQ& q, std::span<const double> eps);

struct DrawRecord {
  Vec eps;
  Vec u;
  Vec z;
};

DrawRecord sample(const SemiImplicitQ& q, Rng& rng);

// Conditional means for a batch of eps (one per row).
Tensor conditional_means(const SemiImplicitQ& q, const Tensor& eps_batch);

// log (1/M) Σ_m N(z | means_m, diag(scale^2)), computed with log-sum-exp.
double log_mixture_density(std::span<const double> z, const Tensor& means, std::span<const double> scale);

// Finite-sample estimate of log q(z) with M fresh eps draws.
double marginal_logdensity_estimate(const SemiImplicitQ& q, std::span<const double> z, std::size_t M,
                                    Rng& rng);

// Versioned text checkpoint with hex-float values; round trips exactly.
void save_checkpoint(const SemiImplicitQ& q, std::ostream& os);
SemiImplicitQ load_checkpoint(std::istream& is);
void save_checkpoint_file(const SemiImplicitQ& q, const std::string& path);
SemiImplicitQ load_checkpoint_file(const std::string& path);

}  // namespace uivi
