#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace uivi {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) {
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

double log_sum_exp(std::span<const double> xs);
double log_mean_exp(std::span<const double> xs);

// Normalized weights exp(x_i - lse(x)); returns lse(x).
double softmax_weights(std::span<const double> xs, std::span<double> weights_out);

struct MeanStd {
  double mean = 0.0;
  double std_error = 0.0;
  double stddev = 0.0;
};

MeanStd mean_and_error(std::span<const double> xs);

// A Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (!std::isfinite(b)) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace uivi
