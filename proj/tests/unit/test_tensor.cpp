#include <cmath>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "uivi/error.hpp"
#include "uivi/targets.hpp"
#include "uivi/tensor.hpp"

namespace {

using uivi::Activation;
using uivi::DenseLayer;
using uivi::ErrorKind;
using uivi::MlpParams;
using uivi::Tensor;
using uivi::Vec;

MlpParams single_layer(Vec w, std::size_t out, std::size_t in, Vec b, Activation act) {
  MlpParams p;
  DenseLayer l;
  l.weight = Tensor::matrix(out, in, std::move(w));
  l.bias = Tensor::vector(std::move(b));
  l.activation = act;
  p.layers.push_back(l);
  return p;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const uivi::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no uivi::Error thrown";
  return ErrorKind::kNumerical;
}

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_EQ(kind_of([] { Tensor({2, 3}, Vec(5)); }), ErrorKind::kDimensionMismatch);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
}

TEST(Tensor, CheckFiniteNamesTheSite) {
  Tensor t = Tensor::vector({1.0, NAN});
  EXPECT_FALSE(t.all_finite());
  try {
    t.check_finite("here");
    FAIL();
  } catch (const uivi::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFinite);
    EXPECT_NE(std::string(e.what()).find("here"), std::string::npos);
  }
}

TEST(Mlp, IdentityReluClipsNegative) {
  const auto p = single_layer({1, 0, 0, 1}, 2, 2, {0, 0}, Activation::kRelu);
  const Tensor y = uivi::mlp_forward(p, Tensor::vector({1, -1}));
  EXPECT_EQ(y.data(), (Vec{1, 0}));
}

TEST(Mlp, BiasOnly) {
  const auto p = single_layer({1, 0, 0, 1}, 2, 2, {1, 1}, Activation::kRelu);
  EXPECT_EQ(uivi::mlp_forward(p, Tensor::vector({0, 0})).data(), (Vec{1, 1}));
}

TEST(Mlp, InputDimensionMismatchThrows) {
  const auto p = single_layer({1, 0, 0, 1}, 2, 2, {0, 0}, Activation::kRelu);
  EXPECT_EQ(kind_of([&] { uivi::mlp_forward(p, Tensor::vector({1, 2, 3})); }), ErrorKind::kDimensionMismatch);
  EXPECT_EQ(kind_of([&] { uivi::mlp_forward(p, Tensor::matrix(2, 3, Vec(6))); }), ErrorKind::kDimensionMismatch);
}

// Plain-loop forward pass.
Vec loop_forward(const MlpParams& p, Vec x) {
  for (const auto& l : p.layers) {
    Vec y = oracle::affine(l.weight.data(), l.bias.data(), x);
    for (double& v : y) v = uivi::activate(l.activation, v);
    x = y;
  }
  return x;
}

TEST(Mlp, MatchesLoopOracleSingleAndBatched) {
  uivi::Rng rng(11);
  const auto p = uivi::make_mlp(3, {5, 4}, 2, Activation::kTanh, Activation::kIdentity, rng);
  Tensor batch = Tensor::matrix(4, 3, {0.1, -0.2, 0.3, 1, 2, -1, -0.5, 0.5, 0, 3, -3, 0.7});
  const Tensor out = uivi::mlp_forward(p, batch);
  for (std::size_t r = 0; r < 4; ++r) {
    const Vec x(batch.row(r).begin(), batch.row(r).end());
    const Vec ref = loop_forward(p, x);
    const Tensor single = uivi::mlp_forward(p, Tensor::vector(x));
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(out(r, k), ref[k], 1e-12);
      EXPECT_NEAR(single[k], ref[k], 1e-12);
    }
  }
}

TEST(Mlp, ZeroInputIsConstantNetwork) {
  uivi::Rng rng(2);
  const auto p = uivi::make_mlp(0, {7}, 3, Activation::kRelu, Activation::kIdentity, rng);
  EXPECT_EQ(p.out_dim(), 3u);
  EXPECT_EQ(p.in_dim(), 0u);
}

TEST(Mlp, FlattenRoundTrip) {
  uivi::Rng rng(3);
  const auto p = uivi::make_mlp(2, {3}, 2, Activation::kSoftplus, Activation::kIdentity, rng);
  Vec flat(p.num_params());
  p.flatten_into(flat);
  EXPECT_EQ(p.num_params(), 2u * 3 + 3 + 3 * 2 + 2);
  MlpParams q = p.zeros_like();
  q.assign_from(flat);
  EXPECT_EQ(p, q);
  EXPECT_EQ(kind_of([&] { q.assign_from(Vec(3)); }), ErrorKind::kDimensionMismatch);
}

TEST(Activation, NamesRoundTripAndUnknownThrows) {
  for (auto a : {Activation::kIdentity, Activation::kRelu, Activation::kSoftplus, Activation::kTanh}) {
    EXPECT_EQ(uivi::activation_from_string(uivi::to_string(a)), a);
  }
  EXPECT_EQ(kind_of([] { uivi::activation_from_string("gelu"); }), ErrorKind::kParse);
  EXPECT_EQ(uivi::activate_deriv(Activation::kRelu, 0.0), 0.0);
}

TEST(Vjp, ReluSubgradient) {
  const auto p = single_layer({1, 0, 0, 1}, 2, 2, {0, 0}, Activation::kRelu);
  const auto g = uivi::mlp_vjp(p, Tensor::vector({1, -1}), Tensor::vector({1, 1}));
  EXPECT_EQ(g.input_grad.data(), (Vec{1, 0}));
}

TEST(Vjp, ScalarChainRule) {
  const auto p = single_layer({2}, 1, 1, {0}, Activation::kIdentity);
  const auto g = uivi::mlp_vjp(p, Tensor::vector({3}), Tensor::vector({1}));
  EXPECT_EQ(g.param_grads.layers[0].weight[0], 3.0);
  EXPECT_EQ(g.param_grads.layers[0].bias[0], 1.0);
  EXPECT_EQ(g.input_grad[0], 2.0);
}

TEST(Vjp, MatchesFiniteDifferences) {
  uivi::Rng rng(5);
  for (auto act : {Activation::kTanh, Activation::kSoftplus}) {
    const auto p = uivi::make_mlp(3, {4, 4}, 2, act, Activation::kIdentity, rng);
    const Vec x{0.3, -0.7, 1.1};
    const Vec up{0.6, -1.3};
    const auto g = uivi::mlp_vjp(p, Tensor::vector(x), Tensor::vector(up));
    auto dot_out = [&](const MlpParams& pp, const Vec& xx) {
      const Vec y = loop_forward(pp, xx);
      return y[0] * up[0] + y[1] * up[1];
    };
    const Vec gx = oracle::central_gradient([&](const Vec& xx) { return dot_out(p, xx); }, x, 1e-5);
    EXPECT_LT(oracle::max_rel_error(g.input_grad.data(), gx), 1e-5);

    Vec theta(p.num_params());
    p.flatten_into(theta);
    MlpParams work = p;
    const Vec gt = oracle::central_gradient(
        [&](const Vec& t) {
          work.assign_from(t);
          return dot_out(work, x);
        },
        theta, 1e-5);
    Vec analytic(p.num_params());
    g.param_grads.flatten_into(analytic);
    EXPECT_LT(oracle::max_rel_error(analytic, gt), 1e-5);
  }
}

TEST(Vjp, TapeAccumulatesIntoFlatLayout) {
  uivi::Rng rng(8);
  const auto p = uivi::make_mlp(2, {3}, 2, Activation::kTanh, Activation::kIdentity, rng);
  const Vec x{0.5, -0.25};
  const Vec up{1.0, 2.0};
  uivi::MlpTape tape(p, x);
  Vec acc(p.num_params(), 1.0);
  tape.backward(up, acc);
  const auto g = uivi::mlp_vjp(p, Tensor::vector(x), Tensor::vector(up));
  Vec ref(p.num_params());
  g.param_grads.flatten_into(ref);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(acc[i], ref[i] + 1.0, 1e-14);
}

TEST(FiniteDifference, QuadraticAndLinear) {
  EXPECT_LT(uivi::finite_difference_check([](const Vec& x) { return x[0] * x[0]; }, {3.0}, {6.0}, 1e-4), 1e-8);
  auto sum = [](const Vec& x) { return x[0] + x[1] + x[2]; };
  EXPECT_LT(uivi::finite_difference_check(sum, {1.5, -2.0, 9.0}, {1, 1, 1}, 1e-3), 1e-10);
}

TEST(FiniteDifference, BananaGradient) {
  uivi::BananaTarget banana;
  const Vec z{0.0, -1.0};
  auto f = [&](const Vec& x) { return banana.log_joint(x); };
  EXPECT_LT(uivi::finite_difference_check(f, z, banana.grad_z_log_joint(z), 1e-5), 1e-6);
}

TEST(FiniteDifference, NonFiniteEvaluationThrows) {
  auto bad = [](const Vec& x) { return std::log(x[0]); };
  EXPECT_EQ(kind_of([&] { uivi::numeric_gradient(bad, {0.0}, 1e-3); }), ErrorKind::kNonFinite);
  EXPECT_EQ(kind_of([&] { uivi::numeric_gradient(bad, {1.0}, 0.0); }), ErrorKind::kInvalidArgument);
}

}  // namespace
