#include "uivi/hmc.hpp"

#include <cmath>

#include "uivi/error.hpp"
#include "uivi/math.hpp"

namespace uivi {

namespace {

// Multiplicative step-size update during burn-in. The log step moves by
// kappa * (1 - target) on accept and by -kappa * target on reject, so its
// fixed point is an acceptance frequency equal to target_accept.
constexpr double kAdaptRate = 0.2;

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double kinetic(std::span<const double> p) {
  double k = 0.0;
  for (double x : p) k += x * x;
  return 0.5 * k;
}

}  // namespace

void HmcConfig::validate() const {
  require(n_burn >= 0, ErrorKind::kInvalidArgument, "hmc: n_burn must be >= 0");
  require(n_keep >= 1, ErrorKind::kInvalidArgument, "hmc: n_keep must be >= 1");
  require(leapfrog_steps >= 1, ErrorKind::kInvalidArgument, "hmc: leapfrog_steps must be >= 1");
  require(!step_size || *step_size > 0.0, ErrorKind::kInvalidArgument, "hmc: step_size must be positive");
  require(step_jitter >= 0.0 && step_jitter < 1.0, ErrorKind::kInvalidArgument, "hmc: step_jitter must be in [0, 1)");
  require(target_accept > 0.0 && target_accept < 1.0, ErrorKind::kInvalidArgument,
          "hmc: target_accept must lie in (0, 1)");
}

double HmcConfig::initial_step_size(std::size_t dim) const {
  if (step_size) return *step_size;
  return 0.1 / std::sqrt(static_cast<double>(std::max<std::size_t>(dim, 1)));
}

ReverseTarget reverse_log_target(const SemiImplicitQ& q, std::span<const double> z,
                                 std::span<const double> eps) {
  require(z.size() == q.z_dim && eps.size() == q.eps_dim, ErrorKind::kDimensionMismatch,
          "reverse_log_target: dimension mismatch");
  MlpTape tape(q.cond_net, eps);
  const auto mu = tape.output();
  const Vec scale = q.scale();
  double value = 0.0;
  Vec upstream(q.z_dim);
  for (std::size_t i = 0; i < q.z_dim; ++i) {
    const double var = scale[i] * scale[i];
    const double r = z[i] - mu[i];
    value -= 0.5 * (r * r / var + kLog2Pi + std::log(var));
    upstream[i] = r / var;
  }
  ReverseTarget out;
  out.grad_eps = tape.backward(upstream);
  for (std::size_t j = 0; j < eps.size(); ++j) {
    value -= 0.5 * (eps[j] * eps[j] + kLog2Pi);
    out.grad_eps[j] -= eps[j];
  }
  out.value = value;
  return out;
}

PhasePoint leapfrog(PhasePoint state, const std::function<Vec(std::span<const double>)>& grad_log_target,
                    int steps, double step_size) {
  require(steps >= 1, ErrorKind::kInvalidArgument, "leapfrog: steps must be >= 1");
  require(state.position.size() == state.momentum.size(), ErrorKind::kDimensionMismatch,
          "leapfrog: position and momentum dims differ");
  auto& x = state.position;
  auto& p = state.momentum;
  Vec g = grad_log_target(x);
  if (!all_finite(g)) fail(ErrorKind::kNonFinite, "leapfrog: non-finite gradient");
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) p[i] += 0.5 * step_size * g[i];
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += step_size * p[i];
    g = grad_log_target(x);
    if (!all_finite(g)) fail(ErrorKind::kNonFinite, "leapfrog: non-finite gradient");
    for (std::size_t i = 0; i < x.size(); ++i) p[i] += 0.5 * step_size * g[i];
  }
  return state;
}

HmcResult hmc_run(const LogTargetFn& log_target, std::span<const double> init, const HmcConfig& cfg,
                  Rng& rng) {
  cfg.validate();
  const std::size_t dim = init.size();
  HmcResult result;
  result.step_size = cfg.initial_step_size(dim);
  result.samples.reserve(static_cast<std::size_t>(cfg.n_keep));
  if (dim == 0) {
    result.samples.assign(static_cast<std::size_t>(cfg.n_keep), Vec{});
    result.acceptance_rate = result.burn_acceptance_rate = 1.0;
    return result;
  }

  ChainState state;
  state.position.assign(init.begin(), init.end());
  state.log_target = log_target(state.position, state.grad);
  if (!std::isfinite(state.log_target) || !all_finite(state.grad)) {
    fail(ErrorKind::kNonFinite, "hmc: non-finite target at initializer");
  }

  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  // The chain runs at a fixed step size so each chain leaves q(eps|z)
  // invariant; burn-in outcomes only adapt the step handed to the next chain.
  const double step = result.step_size;
  double next_step = step;
  int burn_accepts = 0;
  int keep_accepts = 0;
  double sum_abs_dh = 0.0;
  int finite_dh = 0;
  Vec p(dim), x(dim), g(dim);

  const int total = cfg.n_burn + cfg.n_keep;
  for (int it = 0; it < total; ++it) {
    const bool burning = it < cfg.n_burn;
    for (double& pi : p) pi = normal(rng);
    const double h_start = -state.log_target + kinetic(p);
    // Drawn independently of the state, so each iteration still satisfies
    // detailed balance; breaks trajectories that return to their start.
    const double h = cfg.step_jitter > 0.0 ? step * (1.0 + cfg.step_jitter * (2.0 * uniform(rng) - 1.0)) : step;

    x = state.position;
    g = state.grad;
    double lt = state.log_target;
    bool finite = true;
    for (int s = 0; s < cfg.leapfrog_steps && finite; ++s) {
      for (std::size_t i = 0; i < dim; ++i) p[i] += 0.5 * h * g[i];
      for (std::size_t i = 0; i < dim; ++i) x[i] += h * p[i];
      lt = log_target(x, g);
      finite = std::isfinite(lt) && all_finite(g);
      if (finite) {
        for (std::size_t i = 0; i < dim; ++i) p[i] += 0.5 * h * g[i];
      }
    }

    bool accepted = false;
    if (finite) {
      const double h_end = -lt + kinetic(p);
      const double delta_h = h_end - h_start;
      if (std::isfinite(delta_h)) {
        sum_abs_dh += std::abs(delta_h);
        ++finite_dh;
        accepted = delta_h <= 0.0 || uniform(rng) < std::exp(-delta_h);
      }
    }
    if (accepted) {
      state.position = x;
      state.log_target = lt;
      state.grad = g;
    }

    if (burning) {
      burn_accepts += accepted ? 1 : 0;
      if (cfg.adapt_during_burn) {
        next_step *= accepted ? std::exp(kAdaptRate * (1.0 - cfg.target_accept))
                         : std::exp(-kAdaptRate * cfg.target_accept);
      }
    } else {
      keep_accepts += accepted ? 1 : 0;
      result.samples.push_back(state.position);
    }
  }

  result.step_size = next_step;
  result.acceptance_rate = static_cast<double>(keep_accepts) / cfg.n_keep;
  result.burn_acceptance_rate = cfg.n_burn > 0 ? static_cast<double>(burn_accepts) / cfg.n_burn : 1.0;
  result.mean_abs_delta_h = finite_dh > 0 ? sum_abs_dh / finite_dh : 0.0;
  return result;
}

HmcResult hmc_sample(const SemiImplicitQ& q, std::span<const double> z, std::span<const double> eps_init,
                     const HmcConfig& cfg, Rng& rng) {
  require(eps_init.size() == q.eps_dim && z.size() == q.z_dim, ErrorKind::kDimensionMismatch,
          "hmc_sample: dimension mismatch");
  if (q.eps_dim == 0) return hmc_run(LogTargetFn{}, eps_init, cfg, rng);
  const Vec zc(z.begin(), z.end());
  LogTargetFn target = [&q, &zc](std::span<const double> eps, Vec& grad_out) {
    ReverseTarget rt = reverse_log_target(q, zc, eps);
    grad_out = std::move(rt.grad_eps);
    return rt.value;
  };
  return hmc_run(target, eps_init, cfg, rng);
}

}  // namespace uivi
