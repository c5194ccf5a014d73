#include <cmath>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "uivi/error.hpp"
#include "uivi/sivi.hpp"

namespace {

using uivi::Vec;

uivi::SemiImplicitQ tanh_family(std::uint64_t seed) {
  uivi::Rng rng(seed);
  uivi::FamilySpec spec;
  spec.eps_dim = 2;
  spec.z_dim = 2;
  spec.hidden = {4};
  spec.hidden_activation = uivi::Activation::kTanh;
  return uivi::make_family(spec, rng);
}

TEST(Schedule, EndpointsAndMonotone) {
  EXPECT_EQ(uivi::l_schedule_linear(0, 1000, 200), 1);
  EXPECT_EQ(uivi::l_schedule_linear(1000, 1000, 200), 200);
  EXPECT_EQ(uivi::l_schedule_linear(5, 0, 200), 200);
  int prev = 0;
  for (long t = 0; t <= 1000; ++t) {
    const int l = uivi::l_schedule_linear(t, 1000, 200);
    EXPECT_GE(l, prev);
    EXPECT_GE(l, 1);
    EXPECT_LE(l, 200);
    prev = l;
  }
  EXPECT_THROW(uivi::l_schedule_linear(0, 10, 0), uivi::Error);
}

TEST(Surrogate, ZeroAuxiliaryIsSingleConditionalBound) {
  const auto q = tanh_family(1);
  uivi::BananaTarget target;
  uivi::Rng a(5), b(5);
  const auto est = uivi::sivi_surrogate_gradient(target, q, 0, a);
  const auto rec = uivi::sample(q, b);
  const double expect = target.log_joint(rec.z) - uivi::log_density(uivi::cond_params(q, rec.eps), rec.z);
  EXPECT_NEAR(est.value, expect, 1e-12);
}

TEST(Surrogate, ConstantNetworkIsExplicitElboForAnyL) {
  const auto q = uivi::make_constant_family(2, {0.3, -0.4}, {0.9, 1.2});
  uivi::MultimodalTarget target;
  for (int L : {0, 1, 10, 200}) {
    uivi::Rng a(6), b(6);
    const auto est = uivi::sivi_surrogate_gradient(target, q, L, a);
    const auto rec = uivi::sample(q, b);
    const double expect = target.log_joint(rec.z) - oracle::normal_logpdf(rec.z[0], 0.3, 0.9) -
                          oracle::normal_logpdf(rec.z[1], -0.4, 1.2);
    EXPECT_NEAR(est.value, expect, 1e-12) << L;
  }
}

TEST(Surrogate, GradientMatchesFiniteDifferences) {
  const auto q = tanh_family(2);
  uivi::BananaTarget target;
  for (int L : {0, 3, 20}) {
    uivi::Rng rng(7);
    const auto est = uivi::sivi_surrogate_gradient(target, q, L, rng);
    uivi::SemiImplicitQ work = q;
    const Vec fd = oracle::central_gradient(
        [&](const Vec& theta) {
          work.assign_from(theta);
          uivi::Rng r(7);  // same eps and u draws
          return uivi::sivi_surrogate_gradient(target, work, L, r).value;
        },
        q.flatten(), 1e-6);
    EXPECT_LT(oracle::max_rel_error(est.grad, fd), 1e-5) << L;
  }
}

TEST(Surrogate, BoundTightensWithL) {
  // Linear-Gaussian q equal to the target: true ELBO is 0 and the surrogate
  // approaches it from below as L grows.
  const auto q = uivi::make_linear_gaussian_family(uivi::Tensor::matrix(1, 1, {2.0}), {0.0}, {1.0});
  uivi::DiagGaussianTarget target({0.0}, {std::sqrt(5.0)});
  double prev = -1e9;
  for (int L : {0, 5, 100}) {
    uivi::Rng rng(8);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += uivi::sivi_surrogate_gradient(target, q, L, rng).value;
    const double mean = sum / n;
    EXPECT_LT(mean, 0.01);
    EXPECT_GT(mean, prev);
    prev = mean;
  }
}

TEST(Surrogate, RejectsBadInput) {
  const auto q = tanh_family(1);
  uivi::BananaTarget target;
  uivi::Rng rng(1);
  EXPECT_THROW(uivi::sivi_surrogate_gradient(target, q, -1, rng), uivi::Error);
  uivi::DiagGaussianTarget one({0.0}, {1.0});
  EXPECT_THROW(uivi::sivi_surrogate_gradient(one, q, 2, rng), uivi::Error);
}

}  // namespace
