#include "uivi/sivi.hpp"

#include <cmath>

#include "uivi/error.hpp"
#include "uivi/math.hpp"

namespace uivi {

int l_schedule_linear(long t, long t_max, int L_final) {
  require(L_final >= 1, ErrorKind::kInvalidArgument, "L_final must be >= 1");
  if (t_max <= 0 || t >= t_max) return L_final;
  if (t <= 0) return 1;
  return 1 + static_cast<int>((static_cast<long long>(L_final - 1) * t) / t_max);
}

SiviEstimate sivi_surrogate_gradient(const TargetModel& target, const SemiImplicitQ& q, int L, Rng& rng) {
  require(L >= 0, ErrorKind::kInvalidArgument, "sivi: L must be >= 0");
  require(target.z_dim() == q.z_dim, ErrorKind::kDimensionMismatch, "sivi: target and family dims differ");
  const std::size_t d = q.z_dim;
  const std::size_t terms = static_cast<std::size_t>(L) + 1;
  const Vec scale = q.scale();

  const Vec eps0 = sample_noise(q.eps_dim, rng);
  const Vec u = sample_noise(d, rng);

  // Term 0 uses the eps that generated z.
  std::vector<MlpTape> tapes;
  tapes.reserve(terms);
  tapes.emplace_back(q.cond_net, eps0);
  Vec z(d);
  {
    const auto mu0 = tapes[0].output();
    for (std::size_t i = 0; i < d; ++i) z[i] = mu0[i] + scale[i] * u[i];
  }
  for (std::size_t l = 1; l < terms; ++l) tapes.emplace_back(q.cond_net, sample_noise(q.eps_dim, rng));

  Vec log_terms(terms);
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) norm += kLog2Pi + 2.0 * std::log(scale[i]);
  for (std::size_t l = 0; l < terms; ++l) {
    const auto mu = tapes[l].output();
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = (z[i] - mu[i]) / scale[i];
      quad += r * r;
    }
    log_terms[l] = -0.5 * (quad + norm);
  }
  Vec weights(terms);
  const double lse = softmax_weights(log_terms, weights);
  const double log_q_hat = lse - std::log(static_cast<double>(terms));

  SiviEstimate out;
  out.value = target.log_joint(z) - log_q_hat;
  out.grad.assign(q.num_params(), 0.0);
  const std::span<double> net_grad(out.grad.data(), q.num_net_params());
  const std::span<double> scale_grad(out.grad.data() + q.num_net_params(), d);

  // Derivative of the value with respect to z.
  Vec v = target.grad_z_log_joint(z);
  Vec dscale(d, 0.0);  // direct derivative with respect to scale
  std::vector<Vec> mean_upstream(terms, Vec(d));
  for (std::size_t l = 0; l < terms; ++l) {
    const auto mu = tapes[l].output();
    for (std::size_t i = 0; i < d; ++i) {
      const double var = scale[i] * scale[i];
      const double r = z[i] - mu[i];
      v[i] += weights[l] * r / var;
      mean_upstream[l][i] = -weights[l] * r / var;
      dscale[i] -= weights[l] * (r * r / (var * scale[i]) - 1.0 / scale[i]);
    }
  }
  for (double g : v) {
    if (!std::isfinite(g)) fail(ErrorKind::kNonFinite, "sivi: non-finite gradient");
  }
  // z = mu(eps0) + scale * u: the z-path enters through tape 0 as well.
  for (std::size_t i = 0; i < d; ++i) mean_upstream[0][i] += v[i];
  for (std::size_t l = 0; l < terms; ++l) tapes[l].backward(mean_upstream[l], net_grad);
  for (std::size_t i = 0; i < d; ++i) {
    scale_grad[i] += (v[i] * u[i] + dscale[i]) * sigmoid(q.scale_raw[i]);
  }
  return out;
}

}  // namespace uivi
