#include "uivi/conditional.hpp"

#include <cmath>

#include "uivi/error.hpp"
#include "uivi/math.hpp"

namespace uivi {

void GaussianCondParams::validate() const {
  require(mean.size() == scale.size(), ErrorKind::kDimensionMismatch,
          "gaussian conditional: mean and scale dims differ");
  for (double s : scale) {
    if (!(s > 0.0)) fail(ErrorKind::kInvalidArgument, "gaussian conditional: scale must be positive");
  }
}

Vec reparameterize(const GaussianCondParams& params, std::span<const double> u) {
  require(params.mean.size() == params.scale.size() && u.size() == params.dim(),
          ErrorKind::kDimensionMismatch, "reparameterize: dimension mismatch");
  Vec z(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) z[i] = params.mean[i] + params.scale[i] * u[i];
  return z;
}

double log_density(const GaussianCondParams& params, std::span<const double> z) {
  params.validate();
  require(z.size() == params.dim(), ErrorKind::kDimensionMismatch, "log_density: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double r = (z[i] - params.mean[i]) / params.scale[i];
    acc += r * r + kLog2Pi + 2.0 * std::log(params.scale[i]);
  }
  return -0.5 * acc;
}

Vec grad_logdensity_z(const GaussianCondParams& params, std::span<const double> z) {
  params.validate();
  require(z.size() == params.dim(), ErrorKind::kDimensionMismatch, "grad_logdensity_z: dimension mismatch");
  Vec g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    g[i] = -(z[i] - params.mean[i]) / (params.scale[i] * params.scale[i]);
  }
  return g;
}

Vec expfam_grad_logdensity_z(const ExpFamCondParams& params, std::span<const double> z) {
  require(params.natural_param.size() == params.stat_dim, ErrorKind::kDimensionMismatch,
          "expfam: natural parameter length differs from statistic dimension");
  if (params.admissible && !params.admissible(params.natural_param)) {
    fail(ErrorKind::kInvalidArgument, "expfam: natural parameter outside admissible domain");
  }
  if (params.in_support && !params.in_support(z)) {
    fail(ErrorKind::kInvalidArgument, "expfam: z outside support");
  }
  const Vec jac = params.stat_jacobian(z);
  require(jac.size() == params.stat_dim * z.size(), ErrorKind::kDimensionMismatch,
          "expfam: Jacobian has wrong size");
  Vec g(z.size(), 0.0);
  for (std::size_t k = 0; k < params.stat_dim; ++k) {
    const double eta = params.natural_param[k];
    for (std::size_t j = 0; j < z.size(); ++j) g[j] += jac[k * z.size() + j] * eta;
  }
  return g;
}

ExpFamCondParams gaussian_as_expfam(const GaussianCondParams& params) {
  params.validate();
  const std::size_t d = params.dim();
  ExpFamCondParams e;
  e.stat_dim = 2 * d;
  e.natural_param.resize(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    const double var = params.scale[i] * params.scale[i];
    e.natural_param[i] = params.mean[i] / var;
    e.natural_param[d + i] = -0.5 / var;
  }
  // t(z) = (z_1..z_d, z_1^2..z_d^2)
  e.stat_jacobian = [d](std::span<const double> z) {
    Vec jac(2 * d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      jac[i * d + i] = 1.0;
      jac[(d + i) * d + i] = 2.0 * z[i];
    }
    return jac;
  };
  e.admissible = [d](std::span<const double> eta) {
    for (std::size_t i = 0; i < d; ++i) {
      if (!(eta[d + i] < 0.0)) return false;
    }
    return true;
  };
  return e;
}

Vec sample_noise(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Vec u(dim);
  for (double& x : u) x = normal(rng);
  return u;
}

}  // namespace uivi
