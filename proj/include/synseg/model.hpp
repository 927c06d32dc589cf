#pragma once

// Point-wise classifiers: features in, class scores out, with exact
// gradients. MlpClassifier is 8 -> hidden (tanh) -> classes.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "synseg/features.hpp"
#include "synseg/pcdcore.hpp"
#include "synseg/sampler.hpp"

namespace synseg {

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

class PointClassifier {
 public:
  virtual ~PointClassifier() = default;

  virtual int classes() const = 0;
  virtual const std::string& taxonomy() const = 0;
  // N x classes.
  virtual Eigen::MatrixXd Scores(const FeatureMatrix& features) const = 0;
  // Weighted softmax cross-entropy, sum(w_y * ce) / sum(w_y), over points
  // with a nonzero label. Empty `class_weights` means all ones. Throws
  // DataError when every label is unlabelled.
  virtual LossGrad LossAndGrad(const FeatureMatrix& features, std::span<const LabelId> labels,
                               std::span<const double> class_weights = {}) const = 0;
  virtual Eigen::VectorXd& parameters() = 0;
  virtual const Eigen::VectorXd& parameters() const = 0;
};

class MlpClassifier : public PointClassifier {
 public:
  MlpClassifier() = default;
  // Zero parameters, identity normalization.
  MlpClassifier(int hidden, int classes, std::string taxonomy);
  // Xavier-uniform weights, zero biases.
  static MlpClassifier Random(int hidden, int classes, std::string taxonomy, std::uint64_t seed);

  int input_dim() const { return kFeatureDim; }
  int hidden() const { return hidden_; }
  int classes() const override { return classes_; }
  const std::string& taxonomy() const override { return taxonomy_; }

  // Flat layout: W1 (hidden x 8, row-major), b1, W2 (classes x hidden,
  // row-major), b2.
  Eigen::VectorXd& parameters() override { return params_; }
  const Eigen::VectorXd& parameters() const override { return params_; }
  std::size_t b2_offset() const;

  // Inputs are standardized as (x - mean) * scale before the first layer.
  const Eigen::Matrix<double, 1, kFeatureDim>& feature_mean() const { return mean_; }
  const Eigen::Matrix<double, 1, kFeatureDim>& feature_scale() const { return scale_; }
  void SetNormalization(const Eigen::Matrix<double, 1, kFeatureDim>& mean,
                        const Eigen::Matrix<double, 1, kFeatureDim>& scale);
  // Mean and inverse standard deviation of the given rows.
  void FitNormalization(const FeatureMatrix& features);

  // Settings used at prediction time so features match training.
  Modality modality = Modality::kRgbd;
  std::size_t sample_size = kDefaultSampleSize;
  FeatureOptions feature_options;

  Eigen::MatrixXd Scores(const FeatureMatrix& features) const override;
  LossGrad LossAndGrad(const FeatureMatrix& features, std::span<const LabelId> labels,
                       std::span<const double> class_weights = {}) const override;

  friend bool operator==(const MlpClassifier& a, const MlpClassifier& b);

 private:
  Eigen::MatrixXd Normalize(const FeatureMatrix& features) const;

  int hidden_ = 0;
  int classes_ = 0;
  std::string taxonomy_;
  Eigen::VectorXd params_;
  Eigen::Matrix<double, 1, kFeatureDim> mean_ = Eigen::Matrix<double, 1, kFeatureDim>::Zero();
  Eigen::Matrix<double, 1, kFeatureDim> scale_ = Eigen::Matrix<double, 1, kFeatureDim>::Ones();
};

// Row-wise softmax.
Eigen::MatrixXd Softmax(const Eigen::MatrixXd& scores);

// Row-wise argmax, ties to the lowest class id.
std::vector<LabelId> ArgmaxLabels(const Eigen::MatrixXd& scores);

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_decay = 0.7;
  int decay_interval = 10;  // epochs
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;

  // learning_rate * lr_decay^floor(epoch / decay_interval).
  double LearningRateAt(int epoch) const;
};

// One bias-corrected Adam update at the given epoch's learning rate.
void AdamStep(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, int epoch = 0);

// Labels every point by argmax. Features are computed on a seeded random
// partition of the cloud into chunks of at most model.sample_size points so
// neighborhood densities match the training batches. Positions and colors
// are kept; output labels use the model's taxonomy.
std::vector<LabelId> PredictLabels(const MlpClassifier& model, const PointCloud& cloud);
PointCloud PredictCloud(const MlpClassifier& model, const PointCloud& cloud);

// Binary checkpoint: magic "SSEGMLP1", version, dims, settings,
// normalization and row-major float64 weights, little endian.
std::string EncodeModel(const MlpClassifier& model);
MlpClassifier DecodeModel(std::string_view bytes);
void SaveModel(const MlpClassifier& model, const std::filesystem::path& path);
MlpClassifier LoadModel(const std::filesystem::path& path);

}  // namespace synseg
