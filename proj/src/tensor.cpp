#include "uivi/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "uivi/error.hpp"
#include "uivi/math.hpp"

namespace uivi {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_message(const char* what, std::size_t got, std::size_t expected) {
  std::ostringstream os;
  os << what << ": got dimension " << got << ", expected " << expected;
  return os.str();
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, Vec data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    fail(ErrorKind::kDimensionMismatch,
         dims_message("tensor data length", data_.size(), shape_product(shape_)));
  }
}

Tensor Tensor::vector(Vec values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, Vec values) {
  return Tensor({rows, cols}, std::move(values));
}

std::span<const double> Tensor::row(std::size_t r) const {
  return {data_.data() + r * cols(), cols()};
}

std::span<double> Tensor::row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const char* where) const {
  if (!all_finite()) fail(ErrorKind::kNonFinite, std::string(where) + ": non-finite entry");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSoftplus: return "softplus";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "tanh") return Activation::kTanh;
  fail(ErrorKind::kParse, "unknown activation '" + name + "'");
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kSoftplus: return softplus(x);
    case Activation::kTanh: return std::tanh(x);
  }
  return x;
}

double activate_deriv(Activation a, double pre) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::kSoftplus: return sigmoid(pre);
    case Activation::kTanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

std::size_t MlpParams::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }

std::size_t MlpParams::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::validate() const {
  require(!layers.empty(), ErrorKind::kInvalidArgument, "mlp has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.weight.rank() != 2 || l.bias.rank() != 1 || l.bias.size() != l.out_dim()) {
      fail(ErrorKind::kDimensionMismatch, "mlp layer " + std::to_string(k) + " malformed");
    }
    if (k > 0 && layers[k - 1].out_dim() != l.in_dim()) {
      fail(ErrorKind::kDimensionMismatch,
           dims_message(("mlp layer " + std::to_string(k) + " input").c_str(), l.in_dim(),
                        layers[k - 1].out_dim()));
    }
  }
}

void MlpParams::flatten_into(std::span<double> out) const {
  require(out.size() >= num_params(), ErrorKind::kDimensionMismatch, "flatten target too small");
  std::size_t pos = 0;
  for (const auto& l : layers) {
    for (double w : l.weight.data()) out[pos++] = w;
    for (double b : l.bias.data()) out[pos++] = b;
  }
}

void MlpParams::assign_from(std::span<const double> flat) {
  require(flat.size() >= num_params(), ErrorKind::kDimensionMismatch, "flat parameters too short");
  std::size_t pos = 0;
  for (auto& l : layers) {
    for (double& w : l.weight.data()) w = flat[pos++];
    for (double& b : l.bias.data()) b = flat[pos++];
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  for (auto& l : z.layers) {
    std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
    std::fill(l.bias.data().begin(), l.bias.data().end(), 0.0);
  }
  return z;
}

MlpParams make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                   std::size_t out_dim, Activation hidden_act, Activation out_act, Rng& rng) {
  MlpParams p;
  std::vector<std::size_t> dims{in_dim};
  // A constant network has no use for hidden layers.
  if (in_dim > 0) dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t fan_in = dims[k];
    const std::size_t fan_out = dims[k + 1];
    DenseLayer layer;
    layer.weight = Tensor({fan_out, fan_in});
    layer.bias = Tensor({fan_out});
    layer.activation = (k + 2 == dims.size()) ? out_act : hidden_act;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weight.data()) w = dist(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Tensor mlp_forward(const MlpParams& params, const Tensor& input) {
  params.validate();
  const bool batched = input.rank() == 2;
  require(input.rank() == 1 || batched, ErrorKind::kDimensionMismatch, "mlp input must be rank 1 or 2");
  const std::size_t in = batched ? input.cols() : input.size();
  if (in != params.in_dim()) {
    fail(ErrorKind::kDimensionMismatch, dims_message("mlp input", in, params.in_dim()));
  }
  const std::size_t batch = batched ? input.rows() : 1;

  Vec cur = input.data();
  std::size_t width = in;
  for (const auto& l : params.layers) {
    const std::size_t out = l.out_dim();
    Vec next(batch * out);
    const double* w = l.weight.data().data();
    const double* b = l.bias.data().data();
    for (std::size_t r = 0; r < batch; ++r) {
      const double* x = cur.data() + r * width;
      double* y = next.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = w + o * width;
        double acc = b[o];
        for (std::size_t i = 0; i < width; ++i) acc += wrow[i] * x[i];
        y[o] = activate(l.activation, acc);
      }
    }
    cur = std::move(next);
    width = out;
  }
  Tensor result = batched ? Tensor::matrix(batch, width, std::move(cur)) : Tensor::vector(std::move(cur));
  result.check_finite("mlp_forward");
  return result;
}

MlpTape::MlpTape(const MlpParams& params, std::span<const double> input) : params_(&params) {
  if (input.size() != params.in_dim()) {
    fail(ErrorKind::kDimensionMismatch, dims_message("mlp input", input.size(), params.in_dim()));
  }
  acts_.reserve(params.layers.size() + 1);
  pre_.reserve(params.layers.size());
  acts_.emplace_back(input.begin(), input.end());
  for (const auto& l : params.layers) {
    const std::size_t in = l.in_dim();
    const std::size_t out = l.out_dim();
    const Vec& x = acts_.back();
    Vec z(out), a(out);
    const double* w = l.weight.data().data();
    for (std::size_t o = 0; o < out; ++o) {
      const double* wrow = w + o * in;
      double acc = l.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
      z[o] = acc;
      a[o] = activate(l.activation, acc);
    }
    pre_.push_back(std::move(z));
    acts_.push_back(std::move(a));
  }
  for (double v : acts_.back()) {
    if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, "mlp forward produced a non-finite output");
  }
}

Vec MlpTape::backward(std::span<const double> upstream, std::span<double> param_grad_accum) const {
  const auto& layers = params_->layers;
  if (upstream.size() != params_->out_dim()) {
    fail(ErrorKind::kDimensionMismatch, dims_message("mlp upstream", upstream.size(), params_->out_dim()));
  }
  const bool want_params = !param_grad_accum.empty();
  if (want_params) {
    require(param_grad_accum.size() >= params_->num_params(), ErrorKind::kDimensionMismatch,
            "parameter gradient buffer too small");
  }
  // Offsets of each layer's block in the flat layout.
  std::vector<std::size_t> offsets(layers.size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    offsets[k] = pos;
    pos += layers[k].weight.size() + layers[k].bias.size();
  }

  Vec grad(upstream.begin(), upstream.end());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    const std::size_t in = l.in_dim();
    const std::size_t out = l.out_dim();
    const Vec& x = acts_[k];
    Vec delta(out);
    for (std::size_t o = 0; o < out; ++o) delta[o] = grad[o] * activate_deriv(l.activation, pre_[k][o]);
    if (want_params) {
      double* gw = param_grad_accum.data() + offsets[k];
      double* gb = gw + out * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += d * x[i];
      }
    }
    Vec below(in, 0.0);
    const double* w = l.weight.data().data();
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* wrow = w + o * in;
      for (std::size_t i = 0; i < in; ++i) below[i] += d * wrow[i];
    }
    grad = std::move(below);
  }
  return grad;
}

MlpGradients mlp_vjp(const MlpParams& params, const Tensor& input, const Tensor& upstream) {
  params.validate();
  require(input.rank() == 1 && upstream.rank() == 1, ErrorKind::kDimensionMismatch,
          "mlp_vjp expects rank-1 input and upstream");
  MlpTape tape(params, input.data());
  Vec flat(params.num_params(), 0.0);
  Vec input_grad = tape.backward(upstream.data(), flat);
  MlpGradients out{params.zeros_like(), Tensor::vector(std::move(input_grad))};
  out.param_grads.assign_from(flat);
  out.input_grad.check_finite("mlp_vjp");
  for (double g : flat) {
    if (!std::isfinite(g)) fail(ErrorKind::kNonFinite, "mlp_vjp: non-finite parameter gradient");
  }
  return out;
}

Vec numeric_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double step) {
  require(step > 0.0, ErrorKind::kInvalidArgument, "finite-difference step must be positive");
  Vec g(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      fail(ErrorKind::kNonFinite, "finite difference: non-finite function value");
    }
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double finite_difference_check(const std::function<double(const Vec&)>& f, const Vec& x,
                               const Vec& analytic_grad, double step) {
  if (analytic_grad.size() != x.size()) {
    fail(ErrorKind::kDimensionMismatch, dims_message("analytic gradient", analytic_grad.size(), x.size()));
  }
  const Vec numeric = numeric_gradient(f, x, step);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double err = std::abs(analytic_grad[i] - numeric[i]) / std::max(1.0, std::abs(numeric[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace uivi
