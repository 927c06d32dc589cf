#include "synseg/train.hpp"

#include <algorithm>
#include <cstdio>

#include "synseg/errors.hpp"
#include "synseg/io.hpp"
#include "synseg/rng.hpp"

namespace synseg {

void TrainConfig::Validate() const {
  if (max_epochs < 0) throw InvalidArgument("max_epochs must be >= 0");
  if (hidden < 1) throw InvalidArgument("hidden must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("lr_decay must be in (0,1]");
  if (decay_interval < 1) throw InvalidArgument("decay_interval must be >= 1");
  if (!(max_class_weight >= 1.0)) throw InvalidArgument("max_class_weight must be >= 1");
  if (patience_window < 1) throw InvalidArgument("patience_window must be >= 1");
  if (!(batch_timeout_s > 0.0)) throw InvalidArgument("batch_timeout must be > 0");
  if (!(features.radius > 0.0) || features.max_neighbors < 1) throw InvalidArgument("bad feature options");
  pipe.Validate();
}

std::vector<double> ClassWeights(const ClassHistogram& histogram, double max_weight) {
  const auto& counts = histogram.counts;
  std::vector<double> w(counts.size(), 0.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    sum += static_cast<double>(counts[c]);
    ++present;
  }
  if (present == 0) return w;
  const double mean = sum / static_cast<double>(present);
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > 0) w[c] = std::min(max_weight, mean / static_cast<double>(counts[c]));
  }
  return w;
}

Taxonomy ManifestTaxonomy(const DatasetManifest& manifest) {
  if (manifest.empty()) throw InvalidArgument("empty manifest");
  const std::string& name = manifest.entries.front().taxonomy;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.taxonomy != name) {
      throw DataError("manifest mixes taxonomies '" + name + "' and '" + e.taxonomy + "'");
    }
  }
  if (auto t = FindBuiltinTaxonomy(name)) return *t;
  throw DataError("manifest taxonomy '" + name + "' is not built in; pass a taxonomy file");
}

ConfusionMatrix Evaluate(const MlpClassifier& model, const DatasetManifest& manifest, const Taxonomy& taxonomy) {
  if (static_cast<std::size_t>(model.classes()) != taxonomy.size()) {
    throw DataError("model has " + std::to_string(model.classes()) + " classes but taxonomy '" + taxonomy.name() +
                    "' has " + std::to_string(taxonomy.size()));
  }
  ConfusionMatrix cm(taxonomy);
  for (const ManifestEntry& e : manifest.entries) {
    const PointCloud cloud = io::ReadPly(e.ply_path);
    if (!cloud.has_labels()) throw DataError("frame '" + e.frame_id + "' has no labels to evaluate against");
    cm.Accumulate(PredictLabels(model, cloud), cloud.labels());
  }
  return cm;
}

TrainResult Train(const DatasetManifest& train, const DatasetManifest& validation, const TrainConfig& config) {
  config.Validate();
  if (train.empty()) throw InvalidArgument("training manifest is empty");
  const Taxonomy taxonomy = config.taxonomy ? *config.taxonomy : ManifestTaxonomy(train);
  std::vector<LabelId> scored = config.scored_classes;
  if (scored.empty()) {
    for (LabelId c = 1; c < taxonomy.size(); ++c) scored.push_back(c);
  }

  TrainResult result;
  result.model = MlpClassifier::Random(config.hidden, static_cast<int>(taxonomy.size()), taxonomy.name(), config.seed);
  result.model.modality = config.pipe.modality;
  result.model.sample_size = config.pipe.sample_size;
  result.model.feature_options = config.features;
  if (config.max_epochs == 0) return result;

  std::vector<double> weights;
  if (config.class_weighting) {
    ClassHistogram hist{taxonomy, std::vector<std::size_t>(taxonomy.size(), 0)};
    for (const ManifestEntry& e : train.entries) {
      PointCloud cloud = io::ReadPly(e.ply_path);
      if (cloud.has_labels() && cloud.taxonomy() != taxonomy.name()) cloud = cloud.WithLabels(cloud.labels(), taxonomy.name());
      AddToHistogram(hist, cloud);
    }
    weights = ClassWeights(hist, config.max_class_weight);
  }

  PipeConfig pipe_config = config.pipe;
  pipe_config.rng_seed = MixSeed(config.seed, pipe_config.rng_seed);
  auto pipe = BatchPipe::Start(train, pipe_config);
  const std::size_t steps = config.steps_per_epoch ? config.steps_per_epoch : train.size();

  MlpClassifier& model = result.model;
  MlpClassifier best = model;
  double best_miou = -1.0;
  std::vector<double> best_history;
  AdamState adam;
  adam.learning_rate = config.learning_rate;
  adam.lr_decay = config.lr_decay;
  adam.decay_interval = config.decay_interval;
  bool normalized = false;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const Batch batch = pipe->GetBatch(config.batch_timeout_s);
      const FeatureMatrix f = ExtractFeatures(batch, config.pipe.modality, config.features);
      if (!normalized) {
        model.FitNormalization(f);
        normalized = true;
      }
      const std::size_t n = batch.size();
      const std::size_t slice = config.points_per_step ? std::min(config.points_per_step, n) : n;
      for (std::size_t begin = 0; begin < n; begin += slice) {
        const std::size_t len = std::min(slice, n - begin);
        const std::span<const LabelId> labels(batch.labels.data() + begin, len);
        if (std::all_of(labels.begin(), labels.end(), [&](LabelId l) {
              return l == kUnlabelled || (!weights.empty() && weights[l] == 0.0);
            })) {
          continue;
        }
        const FeatureMatrix part = f.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len));
        const LossGrad lg = model.LossAndGrad(part, labels, weights);
        AdamStep(model.parameters(), lg.grad, adam, epoch);
        loss_sum += lg.loss;
        ++loss_count;
      }
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::nan("");
    if (!validation.empty()) {
      try {
        entry.val_miou = MeanIou(Evaluate(model, validation, taxonomy), scored).miou;
      } catch (const DataError&) {
        entry.val_miou = std::nan("");
      }
    }
    result.log.push_back(entry);

    const bool has_val = !std::isnan(entry.val_miou);
    if (!has_val || entry.val_miou > best_miou) {
      if (has_val) best_miou = entry.val_miou;
      best = model;
      result.best_epoch = epoch;
    }
    if (has_val) {
      best_history.push_back(best_miou);
      const auto w = static_cast<std::size_t>(config.patience_window);
      if (best_history.size() > w &&
          best_history.back() - best_history[best_history.size() - 1 - w] < config.min_improvement) {
        break;
      }
    }
  }
  pipe->Shutdown();
  result.model = best;
  return result;
}

std::string FormatTrainLog(const std::vector<EpochLog>& log) {
  std::string out = "epoch,loss,val_miou\n";
  char buf[96];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.loss, e.val_miou);
    out += buf;
  }
  return out;
}

}  // namespace synseg
