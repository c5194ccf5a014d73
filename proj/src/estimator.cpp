#include "uivi/estimator.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "uivi/error.hpp"
#include "uivi/math.hpp"
#include "uivi/quadrature.hpp"

namespace uivi {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_record(const SemiImplicitQ& q, const DrawRecord& rec) {
  if (rec.eps.size() != q.eps_dim || rec.u.size() != q.z_dim || rec.z.size() != q.z_dim) {
    fail(ErrorKind::kDimensionMismatch, "draw record does not match the family dimensions");
  }
}

constexpr double kEpsBound = 10.0;

struct EpsIntegral {
  double log_q = 0.0;
  Vec grad;  // grad_z log q(z)
};

// log q(z) and grad_z log q(z) by composite Gauss-Legendre over
// eps in [-kEpsBound, kEpsBound]^eps_dim with `panels` per axis.
EpsIntegral integrate_eps(const SemiImplicitQ& q, std::span<const double> z, const Vec& scale, int panels) {
  Vec nodes, weights;
  composite_gauss_legendre(-kEpsBound, kEpsBound, panels, nodes, weights);
  const std::size_t n1 = nodes.size();
  const std::size_t count = q.eps_dim == 1 ? n1 : n1 * n1;
  Tensor eps({count, q.eps_dim});
  Vec log_w(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    const std::size_t i = idx % n1;
    const std::size_t j = idx / n1;
    auto row = eps.row(idx);
    row[0] = nodes[i];
    log_w[idx] = std::log(weights[i]) - 0.5 * (nodes[i] * nodes[i] + kLog2Pi);
    if (q.eps_dim == 2) {
      row[1] = nodes[j];
      log_w[idx] += std::log(weights[j]) - 0.5 * (nodes[j] * nodes[j] + kLog2Pi);
    }
  }
  const Tensor means = conditional_means(q, eps);
  double norm = 0.0;
  for (std::size_t d = 0; d < q.z_dim; ++d) norm += 0.5 * kLog2Pi + std::log(scale[d]);
  Vec terms(count);
  for (std::size_t r = 0; r < count; ++r) {
    const auto mu = means.row(r);
    double quad = 0.0;
    for (std::size_t d = 0; d < q.z_dim; ++d) {
      const double t = (z[d] - mu[d]) / scale[d];
      quad += t * t;
    }
    terms[r] = log_w[r] - 0.5 * quad - norm;
  }
  Vec w(count);
  EpsIntegral out;
  out.log_q = softmax_weights(terms, w);
  out.grad.assign(q.z_dim, 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    const auto mu = means.row(r);
    for (std::size_t d = 0; d < q.z_dim; ++d) out.grad[d] -= w[r] * (z[d] - mu[d]) / (scale[d] * scale[d]);
  }
  return out;
}

// Doubles the panel count until log q and its gradient settle.
EpsIntegral converged_eps_integral(const SemiImplicitQ& q, std::span<const double> z) {
  require(q.eps_dim >= 1 && q.eps_dim <= 2, ErrorKind::kUnsupported, "quadrature needs 1 <= eps_dim <= 2");
  require(z.size() == q.z_dim, ErrorKind::kDimensionMismatch, "quadrature: z has wrong dimension");
  const Vec scale = q.scale();
  int panels = q.eps_dim == 1 ? 40 : 16;
  const int max_panels = q.eps_dim == 1 ? 5120 : 128;
  EpsIntegral prev = integrate_eps(q, z, scale, panels);
  while (panels * 2 <= max_panels) {
    panels *= 2;
    EpsIntegral cur = integrate_eps(q, z, scale, panels);
    double diff = std::abs(cur.log_q - prev.log_q);
    for (std::size_t d = 0; d < q.z_dim; ++d) {
      diff = std::max(diff, std::abs(cur.grad[d] - prev.grad[d]) / std::max(1.0, std::abs(cur.grad[d])));
    }
    if (diff <= 1e-12) return cur;
    prev = std::move(cur);
  }
  fail(ErrorKind::kNumerical, "reverse-conditional quadrature did not converge");
}

}  // namespace

void backprop_through_sample(const SemiImplicitQ& q, const DrawRecord& rec, std::span<const double> v,
                             std::span<double> grad_accum) {
  check_record(q, rec);
  require(v.size() == q.z_dim && grad_accum.size() == q.num_params(), ErrorKind::kDimensionMismatch,
          "backprop_through_sample: dimension mismatch");
  MlpTape tape(q.cond_net, rec.eps);
  tape.backward(v, grad_accum.first(q.num_net_params()));
  auto scale_grad = grad_accum.subspan(q.num_net_params());
  for (std::size_t i = 0; i < q.z_dim; ++i) scale_grad[i] += v[i] * rec.u[i] * sigmoid(q.scale_raw[i]);
}

Vec model_term(const TargetModel& target, const SemiImplicitQ& q, const DrawRecord& rec) {
  const Vec v = target.grad_z_log_joint(rec.z);
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::kNonFinite, "model_term: non-finite target gradient");
  }
  Vec grad(q.num_params(), 0.0);
  backprop_through_sample(q, rec, v, grad);
  return grad;
}

Vec entropy_term(const SemiImplicitQ& q, const DrawRecord& rec, const std::vector<Vec>& eps_primes) {
  require(!eps_primes.empty(), ErrorKind::kInvalidArgument, "entropy_term: no reverse-conditional samples");
  check_record(q, rec);
  Vec w(q.z_dim, 0.0);
  for (const auto& ep : eps_primes) {
    require(ep.size() == q.eps_dim, ErrorKind::kDimensionMismatch, "entropy_term: eps' has wrong dimension");
    const Vec g = grad_logdensity_z(cond_params(q, ep), rec.z);
    for (std::size_t i = 0; i < q.z_dim; ++i) w[i] -= g[i];
  }
  for (double& x : w) x /= static_cast<double>(eps_primes.size());
  Vec grad(q.num_params(), 0.0);
  backprop_through_sample(q, rec, w, grad);
  return grad;
}

double log_marginal_quadrature(const SemiImplicitQ& q, std::span<const double> z) {
  q.validate();
  return converged_eps_integral(q, z).log_q;
}

Vec grad_z_log_marginal_oracle(const SemiImplicitQ& q, std::span<const double> z, OracleMode mode) {
  q.validate();
  require(z.size() == q.z_dim, ErrorKind::kDimensionMismatch, "oracle: z has wrong dimension");
  const Vec scale = q.scale();
  if (mode == OracleMode::kConjugate) {
    const auto& layers = q.cond_net.layers;
    if (layers.size() != 1 || layers[0].activation != Activation::kIdentity) {
      fail(ErrorKind::kUnsupported, "conjugate oracle requires a linear-Gaussian family");
    }
    // z ~ N(b, W W^T + diag(scale^2))
    const auto& l = layers[0];
    Eigen::MatrixXd w(q.z_dim, q.eps_dim);
    for (std::size_t r = 0; r < q.z_dim; ++r) {
      for (std::size_t c = 0; c < q.eps_dim; ++c) w(r, c) = l.weight(r, c);
    }
    Eigen::MatrixXd cov = w * w.transpose();
    Eigen::VectorXd resid(q.z_dim);
    for (std::size_t i = 0; i < q.z_dim; ++i) {
      cov(i, i) += scale[i] * scale[i];
      resid(i) = z[i] - l.bias[i];
    }
    const Eigen::VectorXd g = -cov.ldlt().solve(resid);
    return Vec(g.data(), g.data() + g.size());
  }

  return converged_eps_integral(q, z).grad;
}

GradEstimate elbo_gradient(const TargetModel& target, const SemiImplicitQ& q, int S, const HmcConfig& hmc_cfg,
                           Rng& rng, ReverseSampling sampling) {
  require(S >= 1, ErrorKind::kInvalidArgument, "elbo_gradient: S must be >= 1");
  require(target.z_dim() == q.z_dim, ErrorKind::kDimensionMismatch, "elbo_gradient: target and family dims differ");
  GradEstimate est;
  est.grad.assign(q.num_params(), 0.0);
  Vec model_sum(q.num_params(), 0.0);
  Vec entropy_sum(q.num_params(), 0.0);
  HmcConfig cfg = hmc_cfg;
  double accept = 0.0;
  double dh = 0.0;
  for (int s = 0; s < S; ++s) {
    const DrawRecord rec = sample(q, rng);
    const Vec gm = model_term(target, q, rec);
    std::vector<Vec> eps_primes;
    if (sampling == ReverseSampling::kHmc) {
      HmcResult chain = hmc_sample(q, rec.z, rec.eps, cfg, rng);
      accept += chain.acceptance_rate;
      dh += chain.mean_abs_delta_h;
      cfg.step_size = chain.step_size;
      est.hmc_step_size = chain.step_size;
      eps_primes = std::move(chain.samples);
    } else {
      accept += 1.0;
      eps_primes.push_back(rec.eps);
    }
    const Vec ge = entropy_term(q, rec, eps_primes);
    for (std::size_t i = 0; i < gm.size(); ++i) {
      model_sum[i] += gm[i];
      entropy_sum[i] += ge[i];
    }
  }
  const double inv_s = 1.0 / S;
  for (std::size_t i = 0; i < est.grad.size(); ++i) {
    model_sum[i] *= inv_s;
    entropy_sum[i] *= inv_s;
    est.grad[i] = model_sum[i] + entropy_sum[i];
    if (!std::isfinite(est.grad[i])) fail(ErrorKind::kNonFinite, "elbo_gradient: non-finite gradient");
  }
  est.model_norm = norm2(model_sum);
  est.entropy_norm = norm2(entropy_sum);
  est.hmc_acceptance = accept * inv_s;
  est.hmc_mean_abs_delta_h = dh * inv_s;
  if (sampling != ReverseSampling::kHmc) est.hmc_step_size = cfg.initial_step_size(q.eps_dim);
  return est;
}

}  // namespace uivi
