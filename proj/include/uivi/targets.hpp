#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uivi/family.hpp"
#include "uivi/math.hpp"
#include "uivi/tensor.hpp"

namespace uivi {

// An inference target: log p(x, z) and its z-gradient with the data held
// inside the model.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::size_t z_dim() const = 0;
  virtual std::string name() const = 0;
  virtual double log_joint(std::span<const double> z) const = 0;
  virtual Vec grad_z_log_joint(std::span<const double> z) const = 0;

  // Number of data points the likelihood is scaled to; 0 without data.
  virtual std::size_t n_total() const { return 0; }

  // A view on a random minibatch whose likelihood is scaled by
  // n_total / batch_size. Null when the target has no data to subsample.
  virtual std::shared_ptr<const TargetModel> draw_minibatch(Rng& /*rng*/) const { return nullptr; }
};

// N(z1, z2 + z1^2 + 1 | 0, [[1, 0.9], [0.9, 1]])
class BananaTarget final : public TargetModel {
 public:
  std::size_t z_dim() const override { return 2; }
  std::string name() const override { return "banana"; }
  double log_joint(std::span<const double> z) const override;
  Vec grad_z_log_joint(std::span<const double> z) const override;
};

// 0.5 N(z | (-2, 0), I) + 0.5 N(z | (2, 0), I)
class MultimodalTarget final : public TargetModel {
 public:
  std::size_t z_dim() const override { return 2; }
  std::string name() const override { return "multimodal"; }
  double log_joint(std::span<const double> z) const override;
  Vec grad_z_log_joint(std::span<const double> z) const override;
};

// 0.5 N(z | 0, [[2, 1.8], [1.8, 2]]) + 0.5 N(z | 0, [[2, -1.8], [-1.8, 2]])
class XShapedTarget final : public TargetModel {
 public:
  std::size_t z_dim() const override { return 2; }
  std::string name() const override { return "xshaped"; }
  double log_joint(std::span<const double> z) const override;
  Vec grad_z_log_joint(std::span<const double> z) const override;
};

double banana_log_density(std::span<const double> z);
double multimodal_log_density(std::span<const double> z);
double xshaped_log_density(std::span<const double> z);

// "banana", "multimodal" or "xshaped".
std::unique_ptr<TargetModel> make_toy_target(const std::string& name);

// Diagonal Gaussian density plus a constant log offset.
class DiagGaussianTarget final : public TargetModel {
 public:
  DiagGaussianTarget(Vec mean, Vec stddev, double log_offset = 0.0);
  std::size_t z_dim() const override { return mean_.size(); }
  std::string name() const override { return "gaussian"; }
  double log_joint(std::span<const double> z) const override;
  Vec grad_z_log_joint(std::span<const double> z) const override;

 private:
  Vec mean_;
  Vec stddev_;
  double log_offset_;
};

// p(x, z) = N(z | 0, 1) N(x | z, 1) for a single scalar observation x.
class ConjugateGaussianModel final : public TargetModel {
 public:
  explicit ConjugateGaussianModel(double x) : x_(x) {}
  std::size_t z_dim() const override { return 1; }
  std::string name() const override { return "conjugate_gaussian"; }
  double log_joint(std::span<const double> z) const override;
  Vec grad_z_log_joint(std::span<const double> z) const override;
  // log p(x) = log N(x | 0, 2)
  double log_evidence() const;

 private:
  double x_;
};

// c * p(x, z) for a base target p.
class ScaledTarget final : public TargetModel {
 public:
  ScaledTarget(std::shared_ptr<const TargetModel> base, double log_c)
      : base_(std::move(base)), log_c_(log_c) {}
  std::size_t z_dim() const override { return base_->z_dim(); }
  std::string name() const override { return base_->name() + "_scaled"; }
  double log_joint(std::span<const double> z) const override { return base_->log_joint(z) + log_c_; }
  Vec grad_z_log_joint(std::span<const double> z) const override { return base_->grad_z_log_joint(z); }

 private:
  std::shared_ptr<const TargetModel> base_;
  double log_c_;
};

struct LabeledDataset {
  Tensor features;          // N x D
  std::vector<int> labels;  // values in [0, K)
  int num_classes = 0;
  std::string preprocessing = "none";

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> rows) const;
};

// K Gaussian blobs in D dimensions: centers ~ N(0, separation^2 I), points
// ~ N(center, I), labels balanced round-robin.
LabeledDataset make_blobs(std::size_t n, int num_classes, std::size_t dim, double separation, Rng& rng);

// Weights are packed as K blocks of D followed by K intercepts.
std::size_t mlr_z_dim(std::size_t dim, int num_classes);

// log N(z | 0, I) + (n_total / |rows|) Σ_rows log softmax_{y_n}(x_n^T z_k + z_0k).
// Empty `rows` means every row.
double mlr_log_joint(std::span<const double> z, const LabeledDataset& data, std::span<const std::size_t> rows,
                     std::size_t n_total, Vec* grad_out = nullptr);

// Bayesian multinomial logistic regression with a standard normal prior.
class MultinomialLogisticTarget final : public TargetModel {
 public:
  MultinomialLogisticTarget(std::shared_ptr<const LabeledDataset> data, std::size_t batch_size);

  std::size_t z_dim() const override { return mlr_z_dim(data_->dim(), data_->num_classes); }
  std::string name() const override { return "mlr"; }
  double log_joint(std::span<const double> z) const override;
  Vec grad_z_log_joint(std::span<const double> z) const override;
  std::size_t n_total() const override { return data_->size(); }
  std::shared_ptr<const TargetModel> draw_minibatch(Rng& rng) const override;

  const LabeledDataset& data() const { return *data_; }
  const std::vector<std::size_t>& rows() const { return rows_; }

 private:
  MultinomialLogisticTarget(std::shared_ptr<const LabeledDataset> data, std::size_t batch_size,
                            std::vector<std::size_t> rows);

  std::shared_ptr<const LabeledDataset> data_;
  std::size_t batch_size_;
  std::vector<std::size_t> rows_;  // empty: full data
};

// log p(y | x, z) for one row.
double mlr_log_likelihood_row(std::span<const double> z, const LabeledDataset& data, std::size_t row);

// Mean over test rows of log (1/S) Σ_s p(y_n | x_n, z_s), z_s ~ q. The
// standard error is across test rows.
Estimate mlr_predictive_loglik(const SemiImplicitQ& q, const LabeledDataset& test, std::size_t n_samples,
                               Rng& rng);

// Same estimate from fixed samples.
Estimate mlr_predictive_loglik_from_samples(const std::vector<Vec>& samples, const LabeledDataset& test);

}  // namespace uivi
