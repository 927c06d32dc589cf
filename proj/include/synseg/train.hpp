#pragma once

// Training loop over a BatchPipe, and evaluation over manifests.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synseg/batchpipe.hpp"
#include "synseg/features.hpp"
#include "synseg/manifest.hpp"
#include "synseg/metrics.hpp"
#include "synseg/model.hpp"
#include "synseg/taxonomy.hpp"

namespace synseg {

struct TrainConfig {
  int max_epochs = 50;
  // Batches per epoch; 0 means one per training frame.
  std::size_t steps_per_epoch = 0;
  // Optimizer steps are taken on consecutive slices of this many points of
  // each batch; 0 means one step per batch.
  std::size_t points_per_step = 0;
  int hidden = 64;
  std::uint64_t seed = 0;
  PipeConfig pipe;  // also fixes modality and sample_size
  FeatureOptions features;
  double learning_rate = 0.001;
  double lr_decay = 0.7;
  int decay_interval = 10;
  bool class_weighting = true;
  double max_class_weight = 10.0;
  // Classes averaged into the validation mIoU; empty means all but 0.
  std::vector<LabelId> scored_classes;
  // Stop once the best validation mIoU gained less than min_improvement
  // over the last patience_window epochs.
  int patience_window = 5;
  double min_improvement = 1e-3;
  double batch_timeout_s = 120.0;
  // Overrides the taxonomy named in the manifest.
  std::optional<Taxonomy> taxonomy;

  void Validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double val_miou = std::nan("");  // NaN without validation data
};

struct TrainResult {
  MlpClassifier model;  // the epoch with the best validation mIoU
  std::vector<EpochLog> log;
  int best_epoch = -1;
};

// Inverse-frequency weights, mean count / count_c, capped at `max_weight`;
// classes absent from the histogram and class 0 get weight 0.
std::vector<double> ClassWeights(const ClassHistogram& histogram, double max_weight);

// Resolves the single taxonomy shared by all manifest entries.
Taxonomy ManifestTaxonomy(const DatasetManifest& manifest);

TrainResult Train(const DatasetManifest& train, const DatasetManifest& validation, const TrainConfig& config);

// Predicts every frame of the manifest and accumulates against its labels.
ConfusionMatrix Evaluate(const MlpClassifier& model, const DatasetManifest& manifest, const Taxonomy& taxonomy);

// "epoch,loss,val_miou" header plus one line per epoch.
std::string FormatTrainLog(const std::vector<EpochLog>& log);

}  // namespace synseg
