#include "uivi/math.hpp"

#include <algorithm>
#include <limits>

namespace uivi {

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

double log_mean_exp(std::span<const double> xs) {
  return log_sum_exp(xs) - std::log(static_cast<double>(xs.size()));
}

double softmax_weights(std::span<const double> xs, std::span<double> weights_out) {
  const double lse = log_sum_exp(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) weights_out[i] = std::exp(xs[i] - lse);
  return lse;
}

MeanStd mean_and_error(std::span<const double> xs) {
  MeanStd out;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  out.mean = mean;
  out.stddev = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  out.std_error = out.stddev / std::sqrt(n);
  return out;
}

}  // namespace uivi
