#include <cmath>

#include <gtest/gtest.h>

#include "uivi/error.hpp"
#include "uivi/optimizer.hpp"

namespace {

using uivi::Vec;

TEST(RmsProp, FirstStepByHand) {
  auto st = uivi::make_rmsprop(1, 1, 0.01, 0.002);
  Vec p{0.0};
  uivi::rmsprop_step(st, p, Vec{1.0});
  EXPECT_NEAR(st.G[0], 0.1, 1e-15);
  EXPECT_NEAR(p[0], 0.01 / (1.0 + std::sqrt(0.1)), 1e-15);
  EXPECT_NEAR(p[0], 0.0075974, 1e-7);
  EXPECT_EQ(st.t, 1);
}

TEST(RmsProp, ZeroGradientOnlyDecaysG) {
  auto st = uivi::make_rmsprop(2, 1, 0.01, 0.002);
  st.G = {1.0, 4.0};
  Vec p{3.0, -2.0};
  uivi::rmsprop_step(st, p, Vec{0.0, 0.0});
  EXPECT_EQ(p, (Vec{3.0, -2.0}));
  EXPECT_NEAR(st.G[0], 0.9, 1e-15);
  EXPECT_NEAR(st.G[1], 3.6, 1e-15);
}

TEST(RmsProp, SeparateRatesForNetAndScale) {
  auto st = uivi::make_rmsprop(2, 1, 0.01, 0.002);
  Vec p{0.0, 0.0};
  uivi::rmsprop_step(st, p, Vec{1.0, 1.0});
  EXPECT_NEAR(p[1] / p[0], 0.2, 1e-14);
}

TEST(RmsProp, DecaySchedule) {
  auto st = uivi::make_rmsprop(1, 1, 0.01, 0.002, 3000, 0.9);
  st.t = 2999;
  EXPECT_NEAR(st.effective_eta(0.01), 0.01, 1e-18);
  st.t = 3000;
  EXPECT_NEAR(st.effective_eta(0.01), 0.009, 1e-15);
  EXPECT_NEAR(st.effective_eta(0.002), 0.0018, 1e-15);
  st.t = 9000;
  EXPECT_NEAR(st.effective_eta(0.01), 0.01 * 0.729, 1e-15);
}

TEST(RmsProp, AscendsAQuadratic) {
  auto st = uivi::make_rmsprop(1, 1, 0.1, 0.1, 0, 1.0);
  Vec p{5.0};
  for (int i = 0; i < 2000; ++i) uivi::rmsprop_step(st, p, Vec{-(p[0] - 1.0)});
  EXPECT_NEAR(p[0], 1.0, 1e-2);
}

TEST(RmsProp, RejectsBadInput) {
  EXPECT_THROW(uivi::make_rmsprop(1, 2, 0.01, 0.01), uivi::Error);
  EXPECT_THROW(uivi::make_rmsprop(1, 1, 0.0, 0.01), uivi::Error);
  auto st = uivi::make_rmsprop(2, 1, 0.01, 0.01);
  Vec p{0.0, 0.0};
  EXPECT_THROW(uivi::rmsprop_step(st, p, Vec{1.0}), uivi::Error);
}

}  // namespace
