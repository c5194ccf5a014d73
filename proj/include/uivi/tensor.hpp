#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace uivi {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

// Dense row-major tensor of rank 1 or 2.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, Vec data);

  static Tensor vector(Vec values);
  static Tensor matrix(std::size_t rows, std::size_t cols, Vec values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  const Vec& data() const { return data_; }
  Vec& data() { return data_; }
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  bool all_finite() const;
  // Throws ErrorKind::kNonFinite naming `where` when any entry is NaN/Inf.
  void check_finite(const char* where) const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  Vec data_;
};

enum class Activation { kIdentity, kRelu, kSoftplus, kTanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t num_params() const;
  // Throws kDimensionMismatch if consecutive layers do not chain.
  void validate() const;

  // Flat layout: for each layer, weight (row-major) then bias.
  void flatten_into(std::span<double> out) const;
  void assign_from(std::span<const double> flat);
  MlpParams zeros_like() const;

  bool operator==(const MlpParams&) const = default;
};

// Builds an MLP with the given hidden widths. Weights are Xavier-uniform,
// biases zero. A zero input dimension yields a bias-only (constant) network.
MlpParams make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                   std::size_t out_dim, Activation hidden_act, Activation out_act,
                   Rng& rng);

double activate(Activation a, double x);
// Derivative with respect to the pre-activation; ReLU'(0) is 0.
double activate_deriv(Activation a, double pre);

// Input is rank 1 (a single point) or rank 2 (one point per row). The output
// has the matching rank.
Tensor mlp_forward(const MlpParams& params, const Tensor& input);

// Forward pass for a single input that keeps the activations so the backward
// pass can be run (possibly several times) without recomputation.
class MlpTape {
 public:
  MlpTape(const MlpParams& params, std::span<const double> input);

  std::span<const double> output() const { return acts_.back(); }

  // Returns the input gradient; when param_grad_accum is non-empty the
  // parameter gradients are added into it using the flat layout.
  Vec backward(std::span<const double> upstream,
               std::span<double> param_grad_accum = {}) const;

 private:
  const MlpParams* params_;
  std::vector<Vec> pre_;   // pre-activations per layer
  std::vector<Vec> acts_;  // acts_[0] is the input
};

struct MlpGradients {
  MlpParams param_grads;
  Tensor input_grad;
};

// Vector-Jacobian products of the network output with respect to all
// parameters and the (rank-1) input.
MlpGradients mlp_vjp(const MlpParams& params, const Tensor& input, const Tensor& upstream);

// Max over coordinates of |analytic - central difference| / max(1, |central|).
double finite_difference_check(const std::function<double(const Vec&)>& f, const Vec& x,
                               const Vec& analytic_grad, double step);

// Central-difference gradient; throws kNonFinite on non-finite evaluations.
Vec numeric_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double step);

}  // namespace uivi
