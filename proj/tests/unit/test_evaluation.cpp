#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "uivi/error.hpp"
#include "uivi/evaluation.hpp"
#include "uivi/math.hpp"

namespace {

using uivi::SemiImplicitQ;
using uivi::Tensor;
using uivi::Vec;

SemiImplicitQ linear_family(double a, double s, double b = 0.0) {
  return uivi::make_linear_gaussian_family(Tensor::matrix(1, 1, {a}), {b}, {s});
}

SemiImplicitQ nonlinear_1d(std::uint64_t seed) {
  uivi::Rng rng(seed);
  uivi::FamilySpec spec;
  spec.eps_dim = 1;
  spec.z_dim = 1;
  spec.hidden = {4};
  spec.hidden_activation = uivi::Activation::kTanh;
  spec.init_scale = 0.5;
  auto q = uivi::make_family(spec, rng);
  Vec flat = q.flatten();
  for (std::size_t i = 0; i < q.num_net_params(); ++i) flat[i] *= 2.5;
  q.assign_from(flat);
  return q;
}

const double kMismatch = -(std::log(2.0) - 0.375);

TEST(ElboEstimate, MatchedExplicitGaussianIsZero) {
  const auto q = uivi::make_constant_family(2, {0.4, -1.0}, {0.7, 2.0});
  uivi::DiagGaussianTarget target({0.4, -1.0}, {0.7, 2.0});
  uivi::Rng rng(1);
  const auto e = uivi::elbo_estimate(target, q, 2000, 10, rng);
  EXPECT_NEAR(e.value, 0.0, 1e-10);
}

TEST(ElboEstimate, MatchedLinearGaussian) {
  const auto q = linear_family(2.0, 1.0);
  uivi::DiagGaussianTarget target({0.0}, {std::sqrt(5.0)});
  uivi::Rng rng(2);
  const auto e = uivi::elbo_estimate(target, q, 2000, 10000, rng);
  EXPECT_LT(std::abs(e.value), 4.0 * e.std_error + 1e-12);
}

TEST(ElboEstimate, MismatchedScale) {
  EXPECT_NEAR(oracle::gaussian_kl(0, 1, 0, 2), -kMismatch, 1e-15);
  EXPECT_NEAR(kMismatch, -0.318147, 1e-6);
  const auto q = linear_family(0.0, 1.0);
  uivi::DiagGaussianTarget target({0.0}, {2.0});
  uivi::Rng rng(3);
  const auto e = uivi::elbo_estimate(target, q, 20000, 10000, rng);
  EXPECT_LT(std::abs(e.value - kMismatch), 4.0 * e.std_error);
}

TEST(ElboEstimate, JensenOrderingInM) {
  // Same z draws for every M through a shared seed; differences shrink
  // toward the exact value.
  const auto q = linear_family(2.0, 1.0);
  uivi::DiagGaussianTarget target({0.0}, {std::sqrt(5.0)});
  const double truth = 0.0;
  Vec means;
  for (std::size_t M : {1u, 100u, 10000u}) {
    uivi::Rng rng(4);
    const auto e = uivi::elbo_estimate(target, q, 4000, M, rng);
    means.push_back(e.value);
    EXPECT_GT(e.value, truth - 4.0 * e.std_error) << M;
  }
  EXPECT_GT(means[0], means[1]);
  EXPECT_GT(means[1], means[2]);
}

TEST(IsLogMarginal, ExactPosteriorRecoversEvidence) {
  uivi::ConjugateGaussianModel model(0.0);
  // Posterior N(0, 1/2) written as a linear-Gaussian family.
  const auto q = linear_family(0.5, 0.5);
  uivi::Rng rng(5);
  for (std::size_t S : {1u, 10u, 1000u}) {
    const auto e = uivi::is_log_marginal(model, q, S, 20000, rng);
    EXPECT_NEAR(e.value, model.log_evidence(), 0.02) << S;
  }
}

TEST(IsLogMarginal, WrongProposalStaysBelowTruth) {
  uivi::ConjugateGaussianModel model(1.0);
  const auto q = uivi::make_constant_family(1, {0.0}, {1.2});
  uivi::Rng rng(6);
  const auto e = uivi::is_log_marginal(model, q, 100000, 1, rng);
  EXPECT_LE(e.value, model.log_evidence() + 4.0 * e.std_error);
  EXPECT_NEAR(e.value, model.log_evidence(), 0.05);
}

TEST(IsLogMarginal, ExplicitDensityEqualsTextbook) {
  uivi::ConjugateGaussianModel model(0.5);
  const auto q = uivi::make_constant_family(1, {0.2}, {0.9});
  uivi::Rng a(7), b(7);
  const auto e = uivi::is_log_marginal(model, q, 500, 1, a);
  Vec log_w;
  for (int s = 0; s < 500; ++s) {
    const auto rec = uivi::sample(q, b);
    uivi::sample_noise(1, b);  // the single mixing draw
    log_w.push_back(model.log_joint(rec.z) - oracle::normal_logpdf(rec.z[0], 0.2, 0.9));
  }
  EXPECT_NEAR(e.value, uivi::log_mean_exp(log_w), 1e-12);
}

TEST(IsLogMarginal, ScaledTargetShiftsByLogC) {
  auto base = std::make_shared<uivi::ConjugateGaussianModel>(0.3);
  uivi::ScaledTarget scaled(base, std::log(7.0));
  const auto q = nonlinear_1d(8);
  uivi::Rng a(9), b(9);
  const auto e1 = uivi::is_log_marginal(*base, q, 300, 50, a);
  const auto e2 = uivi::is_log_marginal(scaled, q, 300, 50, b);
  EXPECT_NEAR(e2.value - e1.value, std::log(7.0), 1e-10);
  EXPECT_NEAR(e2.std_error, e1.std_error, 1e-12);
}

TEST(ExactElbo, ClosedForms) {
  const auto matched = linear_family(2.0, 1.0);
  uivi::DiagGaussianTarget five({0.0}, {std::sqrt(5.0)});
  EXPECT_NEAR(uivi::exact_elbo_quadrature(five, matched), 0.0, 1e-6);
  uivi::DiagGaussianTarget two({0.0}, {2.0});
  EXPECT_NEAR(uivi::exact_elbo_quadrature(two, linear_family(0.0, 1.0)), kMismatch, 1e-6);
  // Two-dimensional explicit Gaussian against a shifted target.
  const auto q2 = uivi::make_constant_family(1, {0.5, -0.5}, {1.0, 0.5});
  uivi::DiagGaussianTarget t2({0.0, 0.0}, {2.0, 1.0});
  const double expect =
      -(oracle::gaussian_kl(0.5, 1.0, 0.0, 2.0) + oracle::gaussian_kl(-0.5, 0.5, 0.0, 1.0));
  EXPECT_NEAR(uivi::exact_elbo_quadrature(t2, q2), expect, 1e-6);
}

TEST(ExactElbo, AgreesWithMonteCarloOnNonlinearFamily) {
  const auto q = nonlinear_1d(10);
  uivi::ConjugateGaussianModel model(0.8);
  const double exact = uivi::exact_elbo_quadrature(model, q);
  uivi::Rng rng(11);
  const auto mc = uivi::elbo_estimate(model, q, 20000, 4000, rng);
  EXPECT_LT(std::abs(mc.value - exact), 4.0 * mc.std_error) << mc.value << " vs " << exact;
}

TEST(ExactElbo, RejectsUnsupportedShapes) {
  uivi::Rng rng(1);
  uivi::FamilySpec spec;
  spec.eps_dim = 3;
  spec.z_dim = 2;
  spec.hidden = {3};
  const auto q = uivi::make_family(spec, rng);
  uivi::BananaTarget banana;
  EXPECT_THROW(uivi::exact_elbo_quadrature(banana, q), uivi::Error);
}

TEST(MarginalTable, MatchesClosedForm) {
  const auto q = linear_family(2.0, 1.0, 0.5);
  uivi::MarginalDensityTable table(q);
  for (double z : {-3.0, 0.0, 0.5, 4.0}) {
    EXPECT_NEAR(table.log_q(Vec{z}), oracle::normal_logpdf(z, 0.5, std::sqrt(5.0)), 1e-9);
  }
}

}  // namespace
