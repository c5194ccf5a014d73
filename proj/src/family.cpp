#include "uivi/family.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "uivi/error.hpp"
#include "uivi/math.hpp"

namespace uivi {

void SemiImplicitQ::validate() const {
  cond_net.validate();
  if (cond_net.in_dim() != eps_dim || cond_net.out_dim() != z_dim) {
    fail(ErrorKind::kDimensionMismatch, "semi-implicit family: network dims do not match eps_dim/z_dim");
  }
  require(scale_raw.size() == z_dim, ErrorKind::kDimensionMismatch,
          "semi-implicit family: scale_raw length differs from z_dim");
}

Vec SemiImplicitQ::scale() const {
  Vec s(scale_raw.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = softplus(scale_raw[i]);
  return s;
}

Vec SemiImplicitQ::flatten() const {
  Vec flat(num_params());
  cond_net.flatten_into(flat);
  std::copy(scale_raw.begin(), scale_raw.end(), flat.begin() + static_cast<std::ptrdiff_t>(num_net_params()));
  return flat;
}

void SemiImplicitQ::assign_from(std::span<const double> flat) {
  require(flat.size() == num_params(), ErrorKind::kDimensionMismatch, "parameter vector has wrong length");
  cond_net.assign_from(flat.first(num_net_params()));
  auto tail = flat.subspan(num_net_params());
  std::copy(tail.begin(), tail.end(), scale_raw.begin());
}

SemiImplicitQ make_family(const FamilySpec& spec, Rng& rng) {
  require(spec.z_dim >= 1, ErrorKind::kInvalidArgument, "z_dim must be at least 1");
  require(spec.init_scale > 0.0, ErrorKind::kInvalidArgument, "init_scale must be positive");
  SemiImplicitQ q;
  q.eps_dim = spec.eps_dim;
  q.z_dim = spec.z_dim;
  q.cond_net = make_mlp(spec.eps_dim, spec.hidden, spec.z_dim, spec.hidden_activation,
                        Activation::kIdentity, rng);
  q.scale_raw.assign(spec.z_dim, softplus_inverse(spec.init_scale));
  return q;
}

SemiImplicitQ make_linear_gaussian_family(const Tensor& weight, const Vec& bias, const Vec& scale) {
  require(weight.rank() == 2 && bias.size() == weight.rows() && scale.size() == weight.rows(),
          ErrorKind::kDimensionMismatch, "linear gaussian family: inconsistent dims");
  SemiImplicitQ q;
  q.eps_dim = weight.cols();
  q.z_dim = weight.rows();
  DenseLayer layer{weight, Tensor::vector(bias), Activation::kIdentity};
  q.cond_net.layers.push_back(std::move(layer));
  for (double s : scale) {
    require(s > 0.0, ErrorKind::kInvalidArgument, "scale must be positive");
    q.scale_raw.push_back(softplus_inverse(s));
  }
  return q;
}

SemiImplicitQ make_constant_family(std::size_t eps_dim, const Vec& mean, const Vec& scale) {
  return make_linear_gaussian_family(Tensor({mean.size(), eps_dim}), mean, scale);
}

GaussianCondParams cond_params(const SemiImplicitQ& q, std::span<const double> eps) {
  require(eps.size() == q.eps_dim, ErrorKind::kDimensionMismatch, "cond_params: eps has wrong dimension");
  MlpTape tape(q.cond_net, eps);
  const auto out = tape.output();
  return {Vec(out.begin(), out.end()), q.scale()};
}

DrawRecord sample(const SemiImplicitQ& q, Rng& rng) {
  DrawRecord rec;
  rec.eps = sample_noise(q.eps_dim, rng);
  rec.u = sample_noise(q.z_dim, rng);
  rec.z = reparameterize(cond_params(q, rec.eps), rec.u);
  return rec;
}

Tensor conditional_means(const SemiImplicitQ& q, const Tensor& eps_batch) {
  if (q.eps_dim == 0) {
    // Constant network: every row equals the output bias.
    const std::size_t rows = eps_batch.rows();
    Tensor means({rows, q.z_dim});
    const auto& bias = q.cond_net.layers.back().bias.data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bias.begin(), bias.end(), means.row(r).begin());
    return means;
  }
  return mlp_forward(q.cond_net, eps_batch);
}

double log_mixture_density(std::span<const double> z, const Tensor& means, std::span<const double> scale) {
  const std::size_t m_count = means.rows();
  const std::size_t d = z.size();
  require(means.cols() == d && scale.size() == d, ErrorKind::kDimensionMismatch,
          "log_mixture_density: dimension mismatch");
  require(m_count >= 1, ErrorKind::kInvalidArgument, "log_mixture_density: no mixture components");
  Vec inv_var(d);
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    inv_var[i] = 1.0 / (scale[i] * scale[i]);
    norm += kLog2Pi + 2.0 * std::log(scale[i]);
  }
  Vec logs(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto mu = means.row(m);
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = z[i] - mu[i];
      q += r * r * inv_var[i];
    }
    logs[m] = -0.5 * (q + norm);
  }
  return log_mean_exp(logs);
}

double marginal_logdensity_estimate(const SemiImplicitQ& q, std::span<const double> z, std::size_t M,
                                    Rng& rng) {
  require(M >= 1, ErrorKind::kInvalidArgument, "marginal_logdensity_estimate: M must be at least 1");
  require(z.size() == q.z_dim, ErrorKind::kDimensionMismatch, "marginal_logdensity_estimate: z has wrong dimension");
  Tensor eps({M, q.eps_dim});
  std::normal_distribution<double> normal;
  for (double& e : eps.data()) e = normal(rng);
  const Tensor means = conditional_means(q, eps);
  const Vec s = q.scale();
  return log_mixture_density(z, means, s);
}

namespace {

constexpr const char* kCheckpointMagic = "uivi-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_values(std::ostream& os, std::span<const double> values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", values[i]);
    os << (i ? " " : "") << buf;
  }
  os << '\n';
}

std::string expect_token(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) fail(ErrorKind::kParse, std::string("checkpoint: missing ") + what);
  return tok;
}

void expect_keyword(std::istream& is, const char* keyword) {
  const std::string tok = expect_token(is, keyword);
  if (tok != keyword) fail(ErrorKind::kParse, "checkpoint: expected '" + std::string(keyword) + "', got '" + tok + "'");
}

std::size_t read_size(std::istream& is, const char* what) {
  const std::string tok = expect_token(is, what);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0') fail(ErrorKind::kParse, std::string("checkpoint: bad integer for ") + what);
  return static_cast<std::size_t>(v);
}

void read_values(std::istream& is, std::span<double> out, const char* what) {
  for (double& v : out) {
    const std::string tok = expect_token(is, what);
    char* end = nullptr;
    v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail(ErrorKind::kParse, std::string("checkpoint: bad number in ") + what);
  }
}

}  // namespace

void save_checkpoint(const SemiImplicitQ& q, std::ostream& os) {
  q.validate();
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "eps_dim " << q.eps_dim << '\n' << "z_dim " << q.z_dim << '\n';
  os << "layers " << q.cond_net.layers.size() << '\n';
  for (const auto& l : q.cond_net.layers) {
    os << "layer " << l.in_dim() << ' ' << l.out_dim() << ' ' << to_string(l.activation) << '\n';
    write_values(os, l.weight.data());
    write_values(os, l.bias.data());
  }
  os << "scale_raw ";
  write_values(os, q.scale_raw);
  os << "end\n";
  if (!os) fail(ErrorKind::kIo, "checkpoint: write failed");
}

SemiImplicitQ load_checkpoint(std::istream& is) {
  expect_keyword(is, kCheckpointMagic);
  const std::size_t version = read_size(is, "version");
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kUnsupported, "checkpoint: unsupported version " + std::to_string(version));
  }
  SemiImplicitQ q;
  expect_keyword(is, "eps_dim");
  q.eps_dim = read_size(is, "eps_dim");
  expect_keyword(is, "z_dim");
  q.z_dim = read_size(is, "z_dim");
  expect_keyword(is, "layers");
  const std::size_t n_layers = read_size(is, "layer count");
  for (std::size_t k = 0; k < n_layers; ++k) {
    expect_keyword(is, "layer");
    const std::size_t in = read_size(is, "layer in");
    const std::size_t out = read_size(is, "layer out");
    DenseLayer l;
    l.activation = activation_from_string(expect_token(is, "activation"));
    l.weight = Tensor({out, in});
    l.bias = Tensor({out});
    read_values(is, l.weight.data(), "weights");
    read_values(is, l.bias.data(), "bias");
    q.cond_net.layers.push_back(std::move(l));
  }
  expect_keyword(is, "scale_raw");
  q.scale_raw.resize(q.z_dim);
  read_values(is, q.scale_raw, "scale_raw");
  expect_keyword(is, "end");
  q.validate();
  return q;
}

void save_checkpoint_file(const SemiImplicitQ& q, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  save_checkpoint(q, os);
}

SemiImplicitQ load_checkpoint_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace uivi
