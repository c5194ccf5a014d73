#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "uivi/error.hpp"
#include "uivi/family.hpp"
#include "uivi/math.hpp"

namespace {

using uivi::ErrorKind;
using uivi::SemiImplicitQ;
using uivi::Tensor;
using uivi::Vec;

SemiImplicitQ linear_family(double a, double s) {
  return uivi::make_linear_gaussian_family(Tensor::matrix(1, 1, {a}), {0.0}, {s});
}

TEST(Family, ConstantNetworkMeanIsBias) {
  const auto q = uivi::make_constant_family(3, {1.5, -2.0}, {1.0, 1.0});
  uivi::Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const auto p = uivi::cond_params(q, uivi::sample_noise(3, rng));
    EXPECT_EQ(p.mean, (Vec{1.5, -2.0}));
  }
}

TEST(Family, IdentityNetworkMeanIsEps) {
  const auto q = uivi::make_linear_gaussian_family(Tensor::matrix(2, 2, {1, 0, 0, 1}), {0, 0}, {1, 1});
  const auto p = uivi::cond_params(q, Vec{0.3, -0.8});
  EXPECT_EQ(p.mean, (Vec{0.3, -0.8}));
}

TEST(Family, ZeroRawScaleIsLogTwo) {
  auto q = uivi::make_constant_family(1, {0.0, 0.0}, {1.0, 1.0});
  q.scale_raw = {0.0, 0.0};
  for (double s : q.scale()) EXPECT_NEAR(s, std::log(2.0), 1e-15);
}

TEST(Family, MakeFamilyShapesAndInitScale) {
  uivi::Rng rng(4);
  uivi::FamilySpec spec;
  spec.eps_dim = 3;
  spec.z_dim = 2;
  spec.hidden = {6, 5};
  spec.init_scale = 0.7;
  const auto q = uivi::make_family(spec, rng);
  EXPECT_EQ(q.cond_net.in_dim(), 3u);
  EXPECT_EQ(q.cond_net.out_dim(), 2u);
  for (double s : q.scale()) EXPECT_NEAR(s, 0.7, 1e-12);
  EXPECT_EQ(q.num_params(), 3u * 6 + 6 + 6 * 5 + 5 + 5 * 2 + 2 + 2);
  spec.init_scale = -1.0;
  EXPECT_THROW(uivi::make_family(spec, rng), uivi::Error);
}

TEST(Family, FlattenAssignRoundTrip) {
  uivi::Rng rng(5);
  uivi::FamilySpec spec;
  spec.hidden = {4};
  const auto q = uivi::make_family(spec, rng);
  const Vec flat = q.flatten();
  SemiImplicitQ r = q;
  Vec zeros(flat.size(), 0.0);
  r.assign_from(zeros);
  r.assign_from(flat);
  EXPECT_EQ(q, r);
  EXPECT_THROW(r.assign_from(Vec(3)), uivi::Error);
}

TEST(Sample, DegenerateScaleReturnsMean) {
  const auto q = uivi::make_constant_family(2, {0.25, 4.0}, {1e-6, 1e-6});
  uivi::Rng rng(6);
  const auto rec = uivi::sample(q, rng);
  EXPECT_NEAR(rec.z[0], 0.25, 1e-4);
  EXPECT_NEAR(rec.z[1], 4.0, 1e-4);
}

TEST(Sample, Deterministic) {
  const auto q = linear_family(2.0, 1.0);
  uivi::Rng a(77), b(77);
  const auto ra = uivi::sample(q, a);
  const auto rb = uivi::sample(q, b);
  EXPECT_EQ(ra.eps, rb.eps);
  EXPECT_EQ(ra.u, rb.u);
  EXPECT_EQ(ra.z, rb.z);
}

TEST(Sample, ConstantMeanMonteCarlo) {
  const Vec b{1.0, -3.0};
  const Vec s{0.5, 2.0};
  const auto q = uivi::make_constant_family(3, b, s);
  uivi::Rng rng(8);
  const int n = 100000;
  Vec sum(2, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto rec = uivi::sample(q, rng);
    sum[0] += rec.z[0];
    sum[1] += rec.z[1];
  }
  for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(sum[k] / n - b[k]), 4.0 * s[k] / std::sqrt(n));
}

TEST(MarginalEstimate, ConstantNetworkExactForAnyM) {
  const auto q = uivi::make_constant_family(2, {0.3}, {1.4});
  uivi::Rng rng(9);
  const double exact = oracle::normal_logpdf(1.1, 0.3, 1.4);
  for (std::size_t M : {1u, 7u, 1000u}) {
    EXPECT_NEAR(uivi::marginal_logdensity_estimate(q, Vec{1.1}, M, rng), exact, 1e-12);
  }
}

TEST(MarginalEstimate, LinearGaussianConverges) {
  const auto q = linear_family(2.0, 1.0);
  uivi::Rng rng(10);
  const double truth = -0.5 * std::log(10.0 * std::numbers::pi) - 0.1;
  EXPECT_NEAR(truth, -1.8237, 1e-4);
  EXPECT_NEAR(uivi::marginal_logdensity_estimate(q, Vec{1.0}, 100000, rng), truth, 0.01);
}

TEST(MarginalEstimate, SingleSampleIsConditional) {
  const auto q = linear_family(2.0, 1.0);
  uivi::Rng a(12), b(12);
  const double est = uivi::marginal_logdensity_estimate(q, Vec{0.7}, 1, a);
  const Vec eps = uivi::sample_noise(1, b);
  EXPECT_NEAR(est, oracle::normal_logpdf(0.7, 2.0 * eps[0], 1.0), 1e-12);
}

TEST(MarginalEstimate, RejectsBadArguments) {
  const auto q = linear_family(2.0, 1.0);
  uivi::Rng rng(1);
  EXPECT_THROW(uivi::marginal_logdensity_estimate(q, Vec{0.0}, 0, rng), uivi::Error);
  EXPECT_THROW(uivi::marginal_logdensity_estimate(q, Vec{0.0, 1.0}, 5, rng), uivi::Error);
}

TEST(MixtureDensity, LogSumExpStable) {
  const Tensor means = Tensor::matrix(2, 1, {0.0, 1000.0});
  const Vec scale{1.0};
  const double v = uivi::log_mixture_density(Vec{1000.0}, means, scale);
  EXPECT_NEAR(v, std::log(0.5) + oracle::normal_logpdf(0.0, 0.0, 1.0), 1e-12);
}

TEST(Checkpoint, RoundTripIsExact) {
  uivi::Rng rng(13);
  uivi::FamilySpec spec;
  spec.hidden = {5, 3};
  spec.hidden_activation = uivi::Activation::kTanh;
  auto q = uivi::make_family(spec, rng);
  q.scale_raw = {-1.0 / 3.0, 1e-300};
  std::stringstream ss;
  uivi::save_checkpoint(q, ss);
  const auto r = uivi::load_checkpoint(ss);
  EXPECT_EQ(q, r);
}

TEST(Checkpoint, ExplicitFamilyRoundTrip) {
  const auto q = uivi::make_constant_family(0, {0.1, 0.2}, {1.0, 2.0});
  std::stringstream ss;
  uivi::save_checkpoint(q, ss);
  EXPECT_EQ(uivi::load_checkpoint(ss), q);
}

ErrorKind load_kind(const std::string& text) {
  std::stringstream ss(text);
  try {
    uivi::load_checkpoint(ss);
  } catch (const uivi::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "checkpoint accepted: " << text;
  return ErrorKind::kNumerical;
}

TEST(Checkpoint, RejectsMalformedInput) {
  const auto q = linear_family(2.0, 1.0);
  std::stringstream ss;
  uivi::save_checkpoint(q, ss);
  const std::string good = ss.str();
  EXPECT_EQ(load_kind(""), ErrorKind::kParse);
  EXPECT_EQ(load_kind("not-a-checkpoint 1"), ErrorKind::kParse);
  std::string wrong_version = good;
  wrong_version.replace(good.find(' ') + 1, 1, "9");
  EXPECT_EQ(load_kind(wrong_version), ErrorKind::kUnsupported);
  EXPECT_EQ(load_kind(good.substr(0, good.size() / 2)), ErrorKind::kParse);
  std::string bad_number = good;
  bad_number.replace(bad_number.find("scale_raw ") + 10, 1, "x");
  EXPECT_EQ(load_kind(bad_number), ErrorKind::kParse);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    uivi::load_checkpoint_file("/nonexistent/dir/ckpt.txt");
    FAIL();
  } catch (const uivi::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
