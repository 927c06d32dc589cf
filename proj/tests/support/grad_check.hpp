#pragma once

// Central finite-difference oracle for PointClassifier gradients.

#include <algorithm>
#include <cmath>

#include "synseg/model.hpp"
#include "synseg/rng.hpp"

namespace synseg::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor) per parameter, maximized.
// The floor keeps near-zero components from amplifying finite-difference
// round-off.
inline GradCheckResult CheckGradient(MlpClassifier model, const FeatureMatrix& features,
                                     std::span<const LabelId> labels, std::span<const double> weights,
                                     double h = 1e-5, double floor = 1e-7) {
  const Eigen::VectorXd analytic = model.LossAndGrad(features, labels, weights).grad;
  GradCheckResult result;
  Eigen::VectorXd& p = model.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = model.LossAndGrad(features, labels, weights).loss;
    p[i] = saved - h;
    const double down = model.LossAndGrad(features, labels, weights).loss;
    p[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = static_cast<std::size_t>(i);
    }
  }
  return result;
}

struct GradCheckDraw {
  MlpClassifier model;
  FeatureMatrix features;
  std::vector<LabelId> labels;
  std::vector<double> weights;
};

// Small random model with random normalization, a random batch with at
// least one labelled point, and (half the time) random class weights.
inline GradCheckDraw RandomGradCheckDraw(Rng& rng) {
  GradCheckDraw d;
  const int hidden = static_cast<int>(rng.UniformInt(2, 16));
  const int classes = static_cast<int>(rng.UniformInt(2, 13));
  d.model = MlpClassifier::Random(hidden, classes, "carla12", rng.Next());
  Eigen::VectorXd& p = d.model.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += rng.Normal(0.0, 0.3);
  Eigen::Matrix<double, 1, kFeatureDim> mean, scale;
  for (int j = 0; j < kFeatureDim; ++j) {
    mean(j) = rng.Normal(0.0, 0.5);
    scale(j) = rng.Uniform(0.5, 2.0);
  }
  d.model.SetNormalization(mean, scale);
  const Eigen::Index n = rng.UniformInt(1, 40);
  d.features.resize(n, kFeatureDim);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int j = 0; j < kFeatureDim; ++j) d.features(r, j) = rng.Normal(0.0, 1.0);
  }
  d.labels.resize(static_cast<std::size_t>(n));
  for (auto& l : d.labels) l = static_cast<LabelId>(rng.UniformInt(0, classes - 1));
  d.labels[rng.Index(d.labels.size())] = static_cast<LabelId>(rng.UniformInt(1, classes - 1));
  if (rng.Bernoulli(0.5)) {
    d.weights.resize(static_cast<std::size_t>(classes));
    for (auto& w : d.weights) w = rng.Uniform(0.1, 10.0);
  }
  return d;
}

}  // namespace synseg::testing
