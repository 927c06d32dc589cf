#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "synseg/batchpipe.hpp"
#include "synseg/dataset.hpp"
#include "synseg/errors.hpp"
#include "synseg/io.hpp"
#include "synseg/metrics.hpp"
#include "synseg/model.hpp"
#include "synseg/pipeline.hpp"
#include "synseg/sampler.hpp"
#include "synseg/scenario.hpp"
#include "synseg/taxonomy.hpp"
#include "synseg/train.hpp"

namespace synseg::cli {
namespace {

namespace fs = std::filesystem;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Registers --key and, when it differs, the hyphenated spelling.
template <typename T>
CLI::Option* Opt(CLI::App* app, const std::string& key, T& var, const std::string& desc) {
  std::string names = "--" + key;
  std::string hyphen = key;
  std::replace(hyphen.begin(), hyphen.end(), '_', '-');
  if (hyphen != key) names += ",--" + hyphen;
  return app->add_option(names, var, desc)->capture_default_str();
}

CLI::Option* Flag(CLI::App* app, const std::string& key, bool& var, const std::string& desc) {
  std::string names = "--" + key;
  std::string hyphen = key;
  std::replace(hyphen.begin(), hyphen.end(), '_', '-');
  if (hyphen != key) names += ",--" + hyphen;
  return app->add_flag(names, var, desc);
}

// Built-in taxonomy name or a taxonomy file.
Taxonomy ResolveTaxonomy(const std::string& name_or_path) {
  if (auto t = FindBuiltinTaxonomy(name_or_path)) return *t;
  if (fs::exists(name_or_path)) return ReadTaxonomyFile(name_or_path);
  throw InvalidArgument("unknown taxonomy '" + name_or_path + "' (not built in and no such file)");
}

const CLI::Validator kModality = CLI::Validator(
    [](std::string& s) -> std::string {
      try {
        ParseModality(s);
        return {};
      } catch (const InvalidArgument& e) {
        return e.what();
      }
    },
    "rgbd|d", "modality");

struct PipeOptions {
  std::size_t queue_limit = 4;
  std::size_t buffer_limit = 2;
  double poll_interval_s = 0.01;
  std::size_t sample_size = kDefaultSampleSize;
  std::string modality = "rgbd";
  int producers = 1;
  std::uint64_t pipe_seed = 0;

  void Register(CLI::App* app) {
    Opt(app, "queue_limit", queue_limit, "Maximum batches in the queue")->check(CLI::PositiveNumber);
    Opt(app, "buffer_limit", buffer_limit, "Maximum batches in the staging buffer")->check(CLI::PositiveNumber);
    Opt(app, "poll_interval_s", poll_interval_s, "Producer poll interval in seconds")->check(CLI::PositiveNumber);
    Opt(app, "sample_size", sample_size, "Points per batch")->check(CLI::PositiveNumber);
    Opt(app, "modality", modality, "rgbd or d")->check(kModality);
    Opt(app, "producers", producers, "Producer threads")->check(CLI::PositiveNumber);
    Opt(app, "pipe_seed", pipe_seed, "Frame order and sampling seed");
  }

  PipeConfig Build() const {
    PipeConfig c;
    c.queue_limit = queue_limit;
    c.buffer_limit = buffer_limit;
    c.poll_interval_s = poll_interval_s;
    c.sample_size = sample_size;
    c.modality = ParseModality(modality);
    c.producer_count = producers;
    c.rng_seed = pipe_seed;
    c.Validate();
    return c;
  }
};

struct GenerateCmd {
  std::string out_dir;
  std::size_t scenes = 1;
  std::uint64_t seed = 1;
  SceneRanges ranges;
  std::string scenario;
  int width = 800, height = 600;
  double hfov = 90.0;
  int lidar_channels = 32, lidar_points = 1024;
  double lidar_range = 50.0, lidar_lower = -30.0, lidar_upper = 10.0;

  void Register(CLI::App* app) {
    Opt(app, "out", out_dir, "Output directory")->required();
    Opt(app, "scenes", scenes, "Number of scenes")->check(CLI::PositiveNumber);
    Opt(app, "seed", seed, "Dataset seed");
    Opt(app, "vehicles_min", ranges.vehicle_min, "Minimum vehicles per scene")->check(CLI::NonNegativeNumber);
    Opt(app, "vehicles_max", ranges.vehicle_max, "Maximum vehicles per scene")->check(CLI::NonNegativeNumber);
    Opt(app, "pedestrians_min", ranges.pedestrian_min, "Minimum pedestrians per scene")->check(CLI::NonNegativeNumber);
    Opt(app, "pedestrians_max", ranges.pedestrian_max, "Maximum pedestrians per scene")->check(CLI::NonNegativeNumber);
    Opt(app, "town_extent", ranges.town_extent, "Town side length in meters")->check(CLI::PositiveNumber);
    Opt(app, "building_density", ranges.building_density, "Building density")->check(CLI::Range(0.0, 1.0));
    Opt(app, "vegetation_density", ranges.vegetation_density, "Vegetation density")->check(CLI::Range(0.0, 1.0));
    Opt(app, "scenario", scenario, "Scenario script played in every scene")->check(CLI::ExistingFile);
    Opt(app, "width", width, "Camera width in pixels")->check(CLI::PositiveNumber);
    Opt(app, "height", height, "Camera height in pixels")->check(CLI::PositiveNumber);
    Opt(app, "hfov", hfov, "Camera horizontal field of view in degrees")->check(CLI::Range(1.0, 179.0));
    Opt(app, "lidar_channels", lidar_channels, "LiDAR channels")->check(CLI::PositiveNumber);
    Opt(app, "lidar_points", lidar_points, "LiDAR azimuth steps per channel")->check(CLI::PositiveNumber);
    Opt(app, "lidar_range", lidar_range, "LiDAR range in meters")->check(CLI::PositiveNumber);
    Opt(app, "lidar_lower", lidar_lower, "LiDAR lower elevation in degrees");
    Opt(app, "lidar_upper", lidar_upper, "LiDAR upper elevation in degrees");
  }

  int Run(std::ostream& out) const {
    DatasetOptions o;
    o.scene_count = scenes;
    o.seed = seed;
    o.ranges = ranges;
    o.rig.intrinsics = CameraIntrinsics::FromHorizontalFov(width, height, hfov);
    o.rig.lidar.channels = lidar_channels;
    o.rig.lidar.points_per_channel = lidar_points;
    o.rig.lidar.max_range = lidar_range;
    o.rig.lidar.lower_fov_deg = lidar_lower;
    o.rig.lidar.upper_fov_deg = lidar_upper;
    if (!scenario.empty()) o.scenario = world::ReadScenarioFile(scenario);
    const DatasetManifest m = GenerateDataset(o, out_dir);
    out << "wrote " << m.size() << " frames to " << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
    return kOk;
  }
};

struct FuseCmd {
  std::string manifest, out_dir, source = "lidar";
  bool crop = false, depth_check = false;
  double depth_threshold = 0.2;

  void Register(CLI::App* app) {
    Opt(app, "manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    Opt(app, "out", out_dir, "Output directory")->required();
    Opt(app, "source", source, "Cloud to label: lidar or depth")->check(CLI::IsMember({"lidar", "depth"}));
    Flag(app, "crop", crop, "Drop points outside the camera frustum");
    Flag(app, "depth_check", depth_check, "Reject points whose depth disagrees with the depth image");
    Opt(app, "depth_threshold", depth_threshold, "Depth check threshold in meters")->check(CLI::PositiveNumber);
  }

  int Run(std::ostream& out) const {
    FuseDatasetOptions o;
    o.source = source == "depth" ? FuseSource::kDepth : FuseSource::kLidar;
    o.crop = crop;
    o.depth_check = depth_check;
    o.depth_threshold = depth_threshold;
    const DatasetManifest m = FuseDataset(ReadManifest(manifest), out_dir, o);
    out << "fused " << m.size() << " frames into " << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
    return kOk;
  }
};

struct RemapCmd {
  std::string manifest, out_dir, from, to, table;

  void Register(CLI::App* app) {
    Opt(app, "manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    Opt(app, "out", out_dir, "Output directory")->required();
    Opt(app, "from", from, "Source taxonomy (name or file); defaults to the manifest's");
    Opt(app, "to", to, "Target taxonomy (name or file)")->required();
    Opt(app, "table", table, "Remap table file (src<TAB>tgt lines)")->check(CLI::ExistingFile);
  }

  int Run(std::ostream& out) const {
    const DatasetManifest m = ReadManifest(manifest);
    const Taxonomy source = from.empty() ? ManifestTaxonomy(m) : ResolveTaxonomy(from);
    const Taxonomy target = ResolveTaxonomy(to);
    std::optional<RemapTable> t;
    if (!table.empty()) {
      t = ParseRemap(io::ReadFile(table), source, target);
    } else {
      t = FindBuiltinRemap(source.name(), target.name());
      if (!t) throw InvalidArgument("no built-in remap from '" + source.name() + "' to '" + target.name() + "'; pass --table");
    }
    const DatasetManifest r = RemapDataset(m, *t, out_dir);
    out << "remapped " << r.size() << " frames " << source.name() << " -> " << target.name() << " into "
        << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
    return kOk;
  }
};

struct StatsCmd {
  std::string manifest, taxonomy;

  void Register(CLI::App* app) {
    Opt(app, "manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    Opt(app, "taxonomy", taxonomy, "Taxonomy (name or file); defaults to the manifest's");
  }

  int Run(std::ostream& out) const {
    const DatasetManifest m = ReadManifest(manifest);
    const Taxonomy t = taxonomy.empty() ? ManifestTaxonomy(m) : ResolveTaxonomy(taxonomy);
    out << FormatHistogram(DatasetHistogram(m, t));
    return kOk;
  }
};

struct TrainCmd {
  std::string train, val, model_out, log_path, classes, taxonomy;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  PipeOptions pipe;
  TrainConfig config;
  bool no_class_weights = false;

  void Register(CLI::App* app) {
    Opt(app, "train", train, "Training manifest")->required()->check(CLI::ExistingFile);
    Opt(app, "val", val, "Validation manifest; without it --train is split")->check(CLI::ExistingFile);
    Opt(app, "train_fraction", train_fraction, "Split fraction when --val is absent")->check(CLI::Range(0.0, 1.0));
    Opt(app, "split_seed", split_seed, "Split seed when --val is absent");
    Opt(app, "model", model_out, "Checkpoint output path")->required();
    Opt(app, "log", log_path, "Training log CSV output path");
    Opt(app, "taxonomy", taxonomy, "Taxonomy (name or file); defaults to the manifest's");
    Opt(app, "classes", classes, "Comma-separated classes scored for validation (default: all)");
    pipe.Register(app);
    Opt(app, "epochs", config.max_epochs, "Maximum epochs")->check(CLI::NonNegativeNumber);
    Opt(app, "steps_per_epoch", config.steps_per_epoch, "Batches per epoch (0: one per frame)");
    Opt(app, "points_per_step", config.points_per_step, "Points per optimizer step (0: whole batch)");
    Opt(app, "hidden", config.hidden, "Hidden units")->check(CLI::PositiveNumber);
    Opt(app, "seed", config.seed, "Initialization seed");
    Opt(app, "lr", config.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
    Opt(app, "lr_decay", config.lr_decay, "Learning-rate decay factor")->check(CLI::Range(0.0, 1.0));
    Opt(app, "decay_interval", config.decay_interval, "Epochs between decays")->check(CLI::PositiveNumber);
    Opt(app, "radius", config.features.radius, "Feature neighborhood radius in meters")->check(CLI::PositiveNumber);
    Opt(app, "patience", config.patience_window, "Early-stopping window in epochs")->check(CLI::PositiveNumber);
    Opt(app, "min_improvement", config.min_improvement, "Early-stopping mIoU gain threshold");
    Flag(app, "no_class_weights", no_class_weights, "Disable inverse-frequency class weights");
  }

  int Run(std::ostream& out) {
    DatasetManifest tr = ReadManifest(train), va;
    if (!val.empty()) {
      va = ReadManifest(val);
    } else {
      std::tie(tr, va) = SplitManifest(tr, {train_fraction, split_seed});
    }
    config.pipe = pipe.Build();
    config.class_weighting = !no_class_weights;
    const Taxonomy t = taxonomy.empty() ? ManifestTaxonomy(tr) : ResolveTaxonomy(taxonomy);
    config.taxonomy = t;
    if (!classes.empty()) config.scored_classes = ParseClassList(classes, t);
    const TrainResult r = Train(tr, va, config);
    SaveModel(r.model, model_out);
    const std::string log = FormatTrainLog(r.log);
    if (!log_path.empty()) io::WriteFileAtomic(log_path, log);
    out << log;
    out << "best epoch " << r.best_epoch << "; model written to " << model_out << "\n";
    return kOk;
  }
};

struct EvalCmd {
  std::string model, manifest, classes, taxonomy;
  bool csv = false;

  void Register(CLI::App* app) {
    Opt(app, "model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
    Opt(app, "manifest", manifest, "Labelled manifest to score")->required()->check(CLI::ExistingFile);
    Opt(app, "classes", classes, "Comma-separated scored classes (default: all)");
    Opt(app, "taxonomy", taxonomy, "Taxonomy (name or file); defaults to the model's");
    Flag(app, "csv", csv, "Print class,iou lines instead of a table");
  }

  int Run(std::ostream& out) const {
    const MlpClassifier m = LoadModel(model);
    const Taxonomy t = ResolveTaxonomy(taxonomy.empty() ? m.taxonomy() : taxonomy);
    const ConfusionMatrix cm = Evaluate(m, ReadManifest(manifest), t);
    const IouReport report = classes.empty() ? MeanIou(cm) : MeanIou(cm, ParseClassList(classes, t));
    out << (csv ? FormatReportCsv(report, t) : FormatReport(report, t));
    return kOk;
  }
};

struct PredictCmd {
  std::string model, in, out_path, taxonomy;

  void Register(CLI::App* app) {
    Opt(app, "model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
    Opt(app, "in", in, "Input PLY")->required()->check(CLI::ExistingFile);
    Opt(app, "out", out_path, "Output PLY")->required();
    Opt(app, "taxonomy", taxonomy, "Taxonomy (name or file); defaults to the model's");
  }

  int Run(std::ostream& out) const {
    const MlpClassifier m = LoadModel(model);
    const Taxonomy t = ResolveTaxonomy(taxonomy.empty() ? m.taxonomy() : taxonomy);
    const PointCloud predicted = ColorizeByLabel(PredictCloud(m, io::ReadPly(in)), t);
    io::WritePly(predicted, out_path);
    out << "labelled " << predicted.size() << " points into " << out_path << "\n";
    return kOk;
  }
};

struct BenchCmd {
  std::string manifest;
  PipeOptions pipe;
  double latency_ms = 5.0, step_ms = 5.0;
  std::size_t batches = 200;

  void Register(CLI::App* app) {
    Opt(app, "manifest", manifest, "Manifest to load from")->required()->check(CLI::ExistingFile);
    pipe.Register(app);
    Opt(app, "latency_ms", latency_ms, "Injected per-frame disk latency")->check(CLI::NonNegativeNumber);
    Opt(app, "step_ms", step_ms, "Simulated training step per batch")->check(CLI::NonNegativeNumber);
    Opt(app, "batches", batches, "Batches per run")->check(CLI::PositiveNumber);
  }

  int Run(std::ostream& out) const {
    PipeConfig c = pipe.Build();
    c.load_latency_s = latency_ms / 1000.0;
    const PipeBenchmark b = RunPipeBenchmark(ReadManifest(manifest), c, batches, step_ms / 1000.0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "synchronous  %10.2f batches/s\nprefetched   %10.2f batches/s\nspeedup      %10.3f\n",
                  b.synchronous_bps(), b.prefetched_bps(), b.speedup());
    out << buf;
    return kOk;
  }
};

}  // namespace

std::vector<std::string> ExpandConfig(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw InvalidArgument("--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;

  std::vector<std::string> injected;
  std::istringstream in(io::ReadFile(config_path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(config_path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = Trim(line.substr(0, eq));
    std::string value = Trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw InvalidArgument(config_path + ":" + std::to_string(line_no) + ": empty key");
    // An empty value means "unset", as in the config echo.
    if (value.empty()) continue;
    injected.push_back("--" + key + "=" + value);
  }
  // Insert after the subcommand name (first non-option argument).
  std::size_t pos = 1;
  while (pos < rest.size() && rest[pos].rfind("-", 0) == 0) ++pos;
  pos = std::min(pos + 1, rest.size());
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(pos), injected.begin(), injected.end());
  return rest;
}

int Run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic LiDAR/camera dataset generation and point-cloud segmentation"};
  app.name(raw_args.empty() ? "synseg" : fs::path(raw_args[0]).filename().string());
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.add_option("--config", "key=value file applied before explicit flags");

  GenerateCmd generate;
  FuseCmd fuse;
  RemapCmd remap;
  StatsCmd stats;
  TrainCmd train;
  EvalCmd eval;
  PredictCmd predict;
  BenchCmd bench;
  auto* s_generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  auto* s_fuse = app.add_subcommand("fuse", "Label clouds from the aligned camera images");
  auto* s_remap = app.add_subcommand("remap", "Translate labels to another taxonomy");
  auto* s_stats = app.add_subcommand("stats", "Print the class histogram of a dataset");
  auto* s_train = app.add_subcommand("train", "Train a point classifier");
  auto* s_eval = app.add_subcommand("eval", "Score a model with per-class IoU and mIoU");
  auto* s_predict = app.add_subcommand("predict", "Label a PLY with a model");
  auto* s_bench = app.add_subcommand("bench-pipe", "Compare prefetched and synchronous loading");
  generate.Register(s_generate);
  fuse.Register(s_fuse);
  remap.Register(s_remap);
  stats.Register(s_stats);
  train.Register(s_train);
  eval.Register(s_eval);
  predict.Register(s_predict);
  bench.Register(s_bench);

  try {
    const std::vector<std::string> args = ExpandConfig(raw_args);
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    err << "# " << sub->get_name() << " effective config\n" << sub->config_to_str(true, false);

    if (sub == s_generate) return generate.Run(out);
    if (sub == s_fuse) return fuse.Run(out);
    if (sub == s_remap) return remap.Run(out);
    if (sub == s_stats) return stats.Run(out);
    if (sub == s_train) return train.Run(out);
    if (sub == s_eval) return eval.Run(out);
    if (sub == s_predict) return predict.Run(out);
    if (sub == s_bench) return bench.Run(out);
    err << "error: unhandled subcommand\n";
    return kInternal;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace synseg::cli
