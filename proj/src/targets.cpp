#include "uivi/targets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "uivi/error.hpp"

namespace uivi {

namespace {

void require_2d(std::span<const double> z) {
  require(z.size() == 2, ErrorKind::kDimensionMismatch, "toy targets are two-dimensional");
}

// Bivariate normal with zero mean, unit-diagonal-scaled covariance
// [[v, c], [c, v]]: log density and gradient.
struct Bivariate {
  double v;
  double c;

  double det() const { return v * v - c * c; }
  double log_pdf(double a, double b) const {
    const double q = (v * a * a - 2.0 * c * a * b + v * b * b) / det();
    return -kLog2Pi - 0.5 * std::log(det()) - 0.5 * q;
  }
  std::array<double, 2> grad(double a, double b) const {
    return {-(v * a - c * b) / det(), -(v * b - c * a) / det()};
  }
};

constexpr Bivariate kBananaCov{1.0, 0.9};
constexpr Bivariate kXPlus{2.0, 1.8};
constexpr Bivariate kXMinus{2.0, -1.8};
constexpr double kLogHalf = -0.69314718055994530942;

}  // namespace

double banana_log_density(std::span<const double> z) {
  require_2d(z);
  return kBananaCov.log_pdf(z[0], z[1] + z[0] * z[0] + 1.0);
}

double BananaTarget::log_joint(std::span<const double> z) const { return banana_log_density(z); }

Vec BananaTarget::grad_z_log_joint(std::span<const double> z) const {
  require_2d(z);
  const auto gy = kBananaCov.grad(z[0], z[1] + z[0] * z[0] + 1.0);
  return {gy[0] + 2.0 * z[0] * gy[1], gy[1]};
}

double multimodal_log_density(std::span<const double> z) {
  require_2d(z);
  const double common = -kLog2Pi - 0.5 * z[1] * z[1];
  const double a = kLogHalf + common - 0.5 * (z[0] + 2.0) * (z[0] + 2.0);
  const double b = kLogHalf + common - 0.5 * (z[0] - 2.0) * (z[0] - 2.0);
  return log_add_exp(a, b);
}

double MultimodalTarget::log_joint(std::span<const double> z) const { return multimodal_log_density(z); }

Vec MultimodalTarget::grad_z_log_joint(std::span<const double> z) const {
  require_2d(z);
  // Responsibility of the right-hand mode is sigmoid(4 z1).
  const double w_right = sigmoid(4.0 * z[0]);
  const double w_left = 1.0 - w_right;
  return {w_left * (-(z[0] + 2.0)) + w_right * (-(z[0] - 2.0)), -z[1]};
}

double xshaped_log_density(std::span<const double> z) {
  require_2d(z);
  return log_add_exp(kLogHalf + kXPlus.log_pdf(z[0], z[1]), kLogHalf + kXMinus.log_pdf(z[0], z[1]));
}

double XShapedTarget::log_joint(std::span<const double> z) const { return xshaped_log_density(z); }

Vec XShapedTarget::grad_z_log_joint(std::span<const double> z) const {
  require_2d(z);
  const double la = kXPlus.log_pdf(z[0], z[1]);
  const double lb = kXMinus.log_pdf(z[0], z[1]);
  const double wa = sigmoid(la - lb);
  const double wb = 1.0 - wa;
  const auto ga = kXPlus.grad(z[0], z[1]);
  const auto gb = kXMinus.grad(z[0], z[1]);
  return {wa * ga[0] + wb * gb[0], wa * ga[1] + wb * gb[1]};
}

std::unique_ptr<TargetModel> make_toy_target(const std::string& name) {
  if (name == "banana") return std::make_unique<BananaTarget>();
  if (name == "multimodal") return std::make_unique<MultimodalTarget>();
  if (name == "xshaped" || name == "x-shaped") return std::make_unique<XShapedTarget>();
  fail(ErrorKind::kConfig, "unknown toy target '" + name + "'");
}

DiagGaussianTarget::DiagGaussianTarget(Vec mean, Vec stddev, double log_offset)
    : mean_(std::move(mean)), stddev_(std::move(stddev)), log_offset_(log_offset) {
  require(mean_.size() == stddev_.size() && !mean_.empty(), ErrorKind::kDimensionMismatch,
          "gaussian target: mean and stddev dims differ");
  for (double s : stddev_) require(s > 0.0, ErrorKind::kInvalidArgument, "gaussian target: stddev must be positive");
}

double DiagGaussianTarget::log_joint(std::span<const double> z) const {
  require(z.size() == mean_.size(), ErrorKind::kDimensionMismatch, "gaussian target: z has wrong dimension");
  double acc = log_offset_;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double r = (z[i] - mean_[i]) / stddev_[i];
    acc -= 0.5 * (r * r + kLog2Pi) + std::log(stddev_[i]);
  }
  return acc;
}

Vec DiagGaussianTarget::grad_z_log_joint(std::span<const double> z) const {
  require(z.size() == mean_.size(), ErrorKind::kDimensionMismatch, "gaussian target: z has wrong dimension");
  Vec g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) g[i] = -(z[i] - mean_[i]) / (stddev_[i] * stddev_[i]);
  return g;
}

double ConjugateGaussianModel::log_joint(std::span<const double> z) const {
  require(z.size() == 1, ErrorKind::kDimensionMismatch, "conjugate model: z must be scalar");
  const double r = x_ - z[0];
  return -kLog2Pi - 0.5 * z[0] * z[0] - 0.5 * r * r;
}

Vec ConjugateGaussianModel::grad_z_log_joint(std::span<const double> z) const {
  require(z.size() == 1, ErrorKind::kDimensionMismatch, "conjugate model: z must be scalar");
  return {-z[0] + (x_ - z[0])};
}

double ConjugateGaussianModel::log_evidence() const {
  return -0.5 * (kLog2Pi + std::log(2.0)) - 0.25 * x_ * x_;
}

void LabeledDataset::validate() const {
  require(num_classes >= 1, ErrorKind::kInvalidArgument, "dataset: need at least one class");
  require(features.rank() == 2 && features.rows() == labels.size(), ErrorKind::kDimensionMismatch,
          "dataset: feature rows differ from label count");
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || labels[n] >= num_classes) {
      fail(ErrorKind::kInvalidArgument, "dataset: label out of range at row " + std::to_string(n));
    }
  }
  features.check_finite("dataset features");
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.preprocessing = preprocessing;
  out.features = Tensor({rows.size(), dim()});
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

LabeledDataset make_blobs(std::size_t n, int num_classes, std::size_t dim, double separation, Rng& rng) {
  require(num_classes >= 1 && dim >= 1, ErrorKind::kInvalidArgument, "blobs: need classes and dims");
  std::normal_distribution<double> normal;
  Tensor centers({static_cast<std::size_t>(num_classes), dim});
  for (double& c : centers.data()) c = separation * normal(rng);
  LabeledDataset data;
  data.num_classes = num_classes;
  data.features = Tensor({n, dim});
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    data.labels[i] = k;
    auto row = data.features.row(i);
    const auto c = centers.row(static_cast<std::size_t>(k));
    for (std::size_t d = 0; d < dim; ++d) row[d] = c[d] + normal(rng);
  }
  return data;
}

std::size_t mlr_z_dim(std::size_t dim, int num_classes) {
  return static_cast<std::size_t>(num_classes) * (dim + 1);
}

namespace {

// Class scores x_n^T z_k + z_0k.
void mlr_scores(std::span<const double> z, const LabeledDataset& data, std::size_t row, Vec& scores) {
  const std::size_t d = data.dim();
  const std::size_t k_count = static_cast<std::size_t>(data.num_classes);
  const auto x = data.features.row(row);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double* w = z.data() + k * d;
    double s = z[k_count * d + k];
    for (std::size_t j = 0; j < d; ++j) s += w[j] * x[j];
    scores[k] = s;
  }
}

}  // namespace

double mlr_log_likelihood_row(std::span<const double> z, const LabeledDataset& data, std::size_t row) {
  Vec scores(static_cast<std::size_t>(data.num_classes));
  mlr_scores(z, data, row, scores);
  return scores[static_cast<std::size_t>(data.labels[row])] - log_sum_exp(scores);
}

double mlr_log_joint(std::span<const double> z, const LabeledDataset& data, std::span<const std::size_t> rows,
                     std::size_t n_total, Vec* grad_out) {
  const std::size_t d = data.dim();
  const std::size_t k_count = static_cast<std::size_t>(data.num_classes);
  require(z.size() == mlr_z_dim(d, data.num_classes), ErrorKind::kDimensionMismatch,
          "mlr_log_joint: z has wrong dimension");
  const std::size_t batch = rows.empty() ? data.size() : rows.size();
  require(batch >= 1, ErrorKind::kInvalidArgument, "mlr_log_joint: empty batch");
  const double scale = static_cast<double>(n_total) / static_cast<double>(batch);

  double prior = 0.0;
  for (double v : z) prior -= 0.5 * (v * v + kLog2Pi);

  if (grad_out) {
    grad_out->assign(z.size(), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) (*grad_out)[i] = -z[i];
  }
  Vec scores(k_count), probs(k_count);
  double lik = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t n = rows.empty() ? b : rows[b];
    const int y = data.labels[n];
    if (y < 0 || y >= data.num_classes) {
      fail(ErrorKind::kInvalidArgument, "mlr_log_joint: label out of range at row " + std::to_string(n));
    }
    mlr_scores(z, data, n, scores);
    const double lse = softmax_weights(scores, probs);
    lik += scores[static_cast<std::size_t>(y)] - lse;
    if (grad_out) {
      const auto x = data.features.row(n);
      for (std::size_t k = 0; k < k_count; ++k) {
        const double resid = scale * ((static_cast<int>(k) == y ? 1.0 : 0.0) - probs[k]);
        double* gw = grad_out->data() + k * d;
        for (std::size_t j = 0; j < d; ++j) gw[j] += resid * x[j];
        (*grad_out)[k_count * d + k] += resid;
      }
    }
  }
  return prior + scale * lik;
}

MultinomialLogisticTarget::MultinomialLogisticTarget(std::shared_ptr<const LabeledDataset> data,
                                                     std::size_t batch_size)
    : MultinomialLogisticTarget(std::move(data), batch_size, {}) {}

MultinomialLogisticTarget::MultinomialLogisticTarget(std::shared_ptr<const LabeledDataset> data,
                                                     std::size_t batch_size, std::vector<std::size_t> rows)
    : data_(std::move(data)), batch_size_(batch_size), rows_(std::move(rows)) {
  require(data_ != nullptr && data_->size() > 0, ErrorKind::kInvalidArgument, "mlr target: empty dataset");
  data_->validate();
}

double MultinomialLogisticTarget::log_joint(std::span<const double> z) const {
  return mlr_log_joint(z, *data_, rows_, data_->size());
}

Vec MultinomialLogisticTarget::grad_z_log_joint(std::span<const double> z) const {
  Vec g;
  mlr_log_joint(z, *data_, rows_, data_->size(), &g);
  return g;
}

std::shared_ptr<const TargetModel> MultinomialLogisticTarget::draw_minibatch(Rng& rng) const {
  const std::size_t n = data_->size();
  if (batch_size_ == 0 || batch_size_ >= n) return nullptr;
  // Partial Fisher-Yates: a uniform batch without replacement.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_size_; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch_size_);
  return std::shared_ptr<const TargetModel>(new MultinomialLogisticTarget(data_, batch_size_, std::move(idx)));
}

Estimate mlr_predictive_loglik_from_samples(const std::vector<Vec>& samples, const LabeledDataset& test) {
  require(test.size() > 0, ErrorKind::kInvalidArgument, "predictive log-likelihood: empty test set");
  require(!samples.empty(), ErrorKind::kInvalidArgument, "predictive log-likelihood: no samples");
  const std::size_t n = test.size();
  Vec acc(n, -std::numeric_limits<double>::infinity());
  for (const auto& z : samples) {
    for (std::size_t i = 0; i < n; ++i) acc[i] = log_add_exp(acc[i], mlr_log_likelihood_row(z, test, i));
  }
  const double log_s = std::log(static_cast<double>(samples.size()));
  for (double& a : acc) a -= log_s;
  const MeanStd ms = mean_and_error(acc);
  return {ms.mean, ms.std_error};
}

Estimate mlr_predictive_loglik(const SemiImplicitQ& q, const LabeledDataset& test, std::size_t n_samples,
                               Rng& rng) {
  require(n_samples >= 1, ErrorKind::kInvalidArgument, "predictive log-likelihood: n_samples must be >= 1");
  require(test.size() > 0, ErrorKind::kInvalidArgument, "predictive log-likelihood: empty test set");
  require(q.z_dim == mlr_z_dim(test.dim(), test.num_classes), ErrorKind::kDimensionMismatch,
          "predictive log-likelihood: family dimension does not match the model");
  std::vector<Vec> samples;
  samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) samples.push_back(sample(q, rng).z);
  return mlr_predictive_loglik_from_samples(samples, test);
}

}  // namespace uivi
