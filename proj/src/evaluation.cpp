#include "uivi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uivi/error.hpp"
#include "uivi/quadrature.hpp"

namespace uivi {

Estimate elbo_estimate(const TargetModel& target, const SemiImplicitQ& q, std::size_t n_outer, std::size_t M,
                       Rng& rng) {
  require(n_outer >= 1 && M >= 1, ErrorKind::kInvalidArgument, "elbo_estimate: n_outer and M must be >= 1");
  require(target.z_dim() == q.z_dim, ErrorKind::kDimensionMismatch, "elbo_estimate: target and family dims differ");
  Vec terms(n_outer);
  for (std::size_t s = 0; s < n_outer; ++s) {
    const DrawRecord rec = sample(q, rng);
    terms[s] = target.log_joint(rec.z) - marginal_logdensity_estimate(q, rec.z, M, rng);
  }
  const MeanStd ms = mean_and_error(terms);
  if (!std::isfinite(ms.mean)) fail(ErrorKind::kNonFinite, "elbo_estimate: non-finite estimate");
  return {ms.mean, ms.std_error};
}

Estimate is_log_marginal(const TargetModel& target, const SemiImplicitQ& q, std::size_t S, std::size_t M,
                         Rng& rng) {
  require(S >= 1 && M >= 1, ErrorKind::kInvalidArgument, "is_log_marginal: S and M must be >= 1");
  require(target.z_dim() == q.z_dim, ErrorKind::kDimensionMismatch, "is_log_marginal: target and family dims differ");
  Vec log_w(S);
  for (std::size_t s = 0; s < S; ++s) {
    const DrawRecord rec = sample(q, rng);
    log_w[s] = target.log_joint(rec.z) - marginal_logdensity_estimate(q, rec.z, M, rng);
  }
  const double lme = log_mean_exp(log_w);
  Vec ratio(S);
  for (std::size_t s = 0; s < S; ++s) ratio[s] = std::exp(log_w[s] - lme);
  const MeanStd ms = mean_and_error(ratio);
  if (!std::isfinite(lme)) fail(ErrorKind::kNonFinite, "is_log_marginal: non-finite estimate");
  // ratio has mean 1 by construction.
  return {lme, ms.std_error};
}

namespace {

constexpr double kEpsBound = 10.0;
// Nodes whose prior log density is below this do not set the z range.
constexpr double kRangeLogPrior = -40.0;
constexpr double kRangeScales = 10.0;

}  // namespace

MarginalDensityTable::MarginalDensityTable(const SemiImplicitQ& q, double tol) : q_(&q), scale_(q.scale()) {
  q.validate();
  require(q.eps_dim <= 2, ErrorKind::kUnsupported, "marginal density table needs eps_dim <= 2");
  if (q.eps_dim == 0) {
    build(1);
    return;
  }
  // Probe points spread over the bulk of q.
  std::vector<Vec> probes;
  {
    Vec e(q.eps_dim, 0.0);
    for (double a : {-2.0, -0.7, 0.0, 0.9, 2.1}) {
      std::fill(e.begin(), e.end(), a);
      if (q.eps_dim == 2) e[1] = -0.5 * a;
      const auto cp = cond_params(q, e);
      for (double off : {-1.0, 0.0, 1.5}) {
        Vec z = cp.mean;
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += off * cp.scale[i];
        probes.push_back(std::move(z));
      }
    }
  }
  int panels = q.eps_dim == 1 ? 40 : 8;
  const int max_panels = q.eps_dim == 1 ? 1280 : 64;
  build(panels);
  Vec prev(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) prev[i] = log_q(probes[i]);
  while (true) {
    if (panels * 2 > max_panels) {
      fail(ErrorKind::kNumerical, "marginal density quadrature did not converge");
    }
    panels *= 2;
    build(panels);
    double worst = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double cur = log_q(probes[i]);
      worst = std::max(worst, std::abs(cur - prev[i]));
      prev[i] = cur;
    }
    if (worst <= tol) break;
  }
}

void MarginalDensityTable::build(int panels) {
  const SemiImplicitQ& q = *q_;
  panels_ = panels;
  Vec nodes, weights;
  if (q.eps_dim == 0) {
    means_ = conditional_means(q, Tensor({1, 0}));
    log_weights_ = {0.0};
  } else {
    composite_gauss_legendre(-kEpsBound, kEpsBound, panels, nodes, weights);
    const std::size_t n1 = nodes.size();
    const std::size_t count = q.eps_dim == 1 ? n1 : n1 * n1;
    Tensor eps({count, q.eps_dim});
    log_weights_.resize(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
      const std::size_t i = idx % n1;
      const std::size_t j = idx / n1;
      auto row = eps.row(idx);
      row[0] = nodes[i];
      double lw = std::log(weights[i]) - 0.5 * (nodes[i] * nodes[i] + kLog2Pi);
      if (q.eps_dim == 2) {
        row[1] = nodes[j];
        lw += std::log(weights[j]) - 0.5 * (nodes[j] * nodes[j] + kLog2Pi);
      }
      log_weights_[idx] = lw;
    }
    means_ = conditional_means(q, eps);
  }

  lower_.assign(q.z_dim, std::numeric_limits<double>::infinity());
  upper_.assign(q.z_dim, -std::numeric_limits<double>::infinity());
  const double log_prior_floor = kRangeLogPrior * static_cast<double>(std::max<std::size_t>(q.eps_dim, 1));
  for (std::size_t r = 0; r < means_.rows(); ++r) {
    if (q.eps_dim > 0 && log_weights_[r] < log_prior_floor) continue;
    const auto mu = means_.row(r);
    for (std::size_t i = 0; i < q.z_dim; ++i) {
      lower_[i] = std::min(lower_[i], mu[i]);
      upper_[i] = std::max(upper_[i], mu[i]);
    }
  }
  for (std::size_t i = 0; i < q.z_dim; ++i) {
    lower_[i] -= kRangeScales * scale_[i];
    upper_[i] += kRangeScales * scale_[i];
  }
}

double MarginalDensityTable::log_q(std::span<const double> z) const {
  const std::size_t d = z.size();
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) norm += kLog2Pi + 2.0 * std::log(scale_[i]);
  const std::size_t n = means_.rows();
  thread_local Vec terms;
  terms.resize(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) {
    const auto mu = means_.row(r);
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double t = (z[i] - mu[i]) / scale_[i];
      quad += t * t;
    }
    terms[r] = log_weights_[r] - 0.5 * (quad + norm);
    mx = std::max(mx, terms[r]);
  }
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) acc += std::exp(terms[r] - mx);
  return mx + std::log(acc);
}

double exact_elbo_quadrature(const TargetModel& target, const SemiImplicitQ& q) {
  require(q.z_dim >= 1 && q.z_dim <= 2 && q.eps_dim <= 2, ErrorKind::kUnsupported,
          "exact_elbo_quadrature needs z_dim <= 2 and eps_dim <= 2");
  require(target.z_dim() == q.z_dim, ErrorKind::kDimensionMismatch, "exact_elbo_quadrature: dims differ");
  const MarginalDensityTable table(q);
  const Vec scale = q.scale();

  auto integrand = [&](std::span<const double> z) {
    const double lq = table.log_q(z);
    if (lq < -745.0) return 0.0;
    return std::exp(lq) * (target.log_joint(z) - lq);
  };
  // Composite Gauss-Legendre with panels at most one conditional scale wide,
  // doubled until two successive results agree.
  auto integrate = [&](int level) {
    Vec x0, w0, x1, w1;
    const int n0 = std::max(8, static_cast<int>(std::ceil((table.upper()[0] - table.lower()[0]) / scale[0]))) << level;
    composite_gauss_legendre(table.lower()[0], table.upper()[0], n0, x0, w0);
    if (q.z_dim == 1) {
      double total = 0.0;
      for (std::size_t i = 0; i < x0.size(); ++i) total += w0[i] * integrand(std::span<const double>(&x0[i], 1));
      return total;
    }
    const int n1 = std::max(8, static_cast<int>(std::ceil((table.upper()[1] - table.lower()[1]) / scale[1]))) << level;
    composite_gauss_legendre(table.lower()[1], table.upper()[1], n1, x1, w1);
    double total = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < x1.size(); ++j) {
        const double z[2] = {x0[i], x1[j]};
        inner += w1[j] * integrand(std::span<const double>(z, 2));
      }
      total += w0[i] * inner;
    }
    return total;
  };
  double prev = integrate(0);
  const int max_level = q.z_dim == 1 ? 5 : 2;
  for (int level = 1; level <= max_level; ++level) {
    const double cur = integrate(level);
    if (std::abs(cur - prev) <= 1e-9 * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  fail(ErrorKind::kNumerical, "exact ELBO quadrature did not converge");
}

}  // namespace uivi
