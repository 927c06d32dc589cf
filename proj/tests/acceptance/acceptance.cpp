// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>

#include "grad_check.hpp"
#include "synseg/batchpipe.hpp"
#include "synseg/dataset.hpp"
#include "synseg/errors.hpp"
#include "synseg/fusion.hpp"
#include "synseg/io.hpp"
#include "synseg/metrics.hpp"
#include "synseg/pipeline.hpp"
#include "synseg/sampler.hpp"
#include "synseg/train.hpp"
#include "test_util.hpp"

namespace {

using namespace synseg;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string Fmt(const char* format, double a = 0, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

// |A ∩ B| / |A ∪ B| over index sets.
std::optional<double> SetIou(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::vector<std::size_t> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  if (uni.empty()) return std::nullopt;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

Outcome MetricsOracle() {
  const auto t0 = Clock::now();
  const Taxonomy& t = builtin_taxonomies().carla12;
  Rng rng(101);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.UniformInt(1, 10000));
    const auto k = static_cast<LabelId>(rng.UniformInt(1, 12));
    std::vector<LabelId> pred(n), gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<LabelId>(rng.UniformInt(0, k));
      gt[i] = static_cast<LabelId>(rng.UniformInt(0, k));
    }
    std::vector<std::set<std::size_t>> pa(t.size()), ga(t.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (gt[i] == kUnlabelled) continue;
      pa[pred[i]].insert(i);
      ga[gt[i]].insert(i);
    }
    ConfusionMatrix cm(t);
    cm.Accumulate(pred, gt);
    double sum = 0;
    int defined = 0;
    for (LabelId c = 1; c < t.size(); ++c) {
      const auto want = SetIou(pa[c], ga[c]);
      if (Iou(cm, c) != want) ++mismatches;
      if (want) sum += *want, ++defined;
    }
    if (defined > 0 && MeanIou(cm).miou != sum / defined) ++mismatches;
  }
  const double s = Since(t0);
  return {mismatches == 0 && s < 30.0, Fmt("%.0f mismatches over 1000 arrays, %.1f s (limit 30 s)", mismatches, s)};
}

Outcome MetricsExamples() {
  const Taxonomy& t = builtin_taxonomies().carla12;
  ConfusionMatrix a(t);
  a.at(1, 1) = 1;  // TP
  a.at(2, 1) = 1;  // FP
  a.at(1, 2) = 2;  // FN
  const double iou = *Iou(a, 1);
  ConfusionMatrix b(t);
  b.at(1, 1) = 1;
  b.at(1, 2) = 1;
  b.at(3, 3) = 4;
  const double miou = MeanIou(b, std::vector<LabelId>{1, 3}).miou;
  return {iou == 0.25 && miou == 0.75, Fmt("IoU(TP=1,FP=1,FN=2) = %.17g, mean(0.5, 1.0) = %.17g", iou, miou)};
}

Outcome ProjectionRoundTrip() {
  Rng rng(103);
  std::size_t pixels = 0;
  double max_px = 0, max_depth = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = static_cast<int>(rng.UniformInt(4, 24)), h = static_cast<int>(rng.UniformInt(4, 18));
    const auto intr = CameraIntrinsics::Checked(w, h, rng.Uniform(5, 500), rng.Uniform(5, 500), rng.Uniform(0, w),
                                                rng.Uniform(0, h));
    Eigen::Quaterniond q(rng.Normal(), rng.Normal(), rng.Normal(), rng.Normal());
    q.normalize();
    const Pose pose(q.toRotationMatrix(),
                    Eigen::Vector3d(rng.Uniform(-100, 100), rng.Uniform(-100, 100), rng.Uniform(-5, 5)));
    DepthImage d(w, h);
    for (double& v : d.data()) v = rng.Uniform(0.05, 80);
    const PointCloud c = Backproject(d, intr, pose);
    std::size_t k = 0;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u, ++k) {
        const ProjectionResult r = ProjectPoint(c.positions()[k], intr, pose);
        max_px = std::max({max_px, std::abs(r.u - (u + 0.5)), std::abs(r.v - (v + 0.5))});
        max_depth = std::max(max_depth, std::abs(r.depth - d.at(u, v)));
      }
    }
    pixels += k;
  }
  const bool ok = pixels >= 10000 && max_px < 1e-6 && max_depth < 1e-9;
  return {ok, Fmt("%.0f pixels, max pixel error %.3g, max depth error %.3g m", static_cast<double>(pixels), max_px,
                  max_depth)};
}

Outcome FusionReproducesSemantic() {
  testing::TempDir dir;
  DatasetOptions o;
  o.scene_count = 10;
  o.seed = 104;
  o.rig.intrinsics = CameraIntrinsics::FromHorizontalFov(160, 120, 90);
  o.rig.lidar.channels = 4;
  o.rig.lidar.points_per_channel = 64;
  const DatasetManifest m = GenerateDataset(o, dir.path());
  FuseDatasetOptions fo;
  fo.source = FuseSource::kDepth;
  std::size_t total = 0, agree = 0;
  for (const ManifestEntry& e : m.entries) {
    const PointCloud fused = FuseFrame(e, fo);
    const SemanticImage sem = io::ReadPgm8(e.semantic_path);
    const DepthImage depth = io::ReadPgm16(e.depth_path);
    std::size_t k = 0;
    for (int v = 0; v < depth.height(); ++v) {
      for (int u = 0; u < depth.width(); ++u) {
        if (depth.at(u, v) <= 0.0) continue;
        ++total;
        if (k < fused.size() && fused.labels()[k] == sem.at(u, v)) ++agree;
        ++k;
      }
    }
    if (k != fused.size()) return {false, "fused point count differs from valid depth pixels in " + e.frame_id};
  }
  return {total > 0 && agree == total,
          Fmt("%.0f of %.0f back-projected points carry their pixel's label across 10 frames",
              static_cast<double>(agree), static_cast<double>(total))};
}

std::vector<std::size_t> GreedyFps(const std::vector<Point3>& pts, std::size_t k, std::size_t start) {
  const auto sq = [](const Point3& a, const Point3& b) {
    return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
  };
  std::vector<std::size_t> chosen{start};
  while (chosen.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) d = std::min(d, sq(pts[i], pts[c]));
      if (d > best_d) best_d = d, best = i;
    }
    chosen.push_back(best);
  }
  return chosen;
}

Outcome FpsOracle() {
  Rng rng(105);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(rng.UniformInt(1, 200));
    std::vector<Point3> pts(n);
    const bool grid = trial % 4 == 0;
    for (auto& p : pts) {
      p = grid ? Point3{static_cast<double>(rng.UniformInt(0, 4)), static_cast<double>(rng.UniformInt(0, 4)), 0.0}
               : Point3{rng.Uniform(-5, 5), rng.Uniform(-5, 5), rng.Uniform(-5, 5)};
    }
    const auto k = static_cast<std::size_t>(rng.UniformInt(1, static_cast<std::int64_t>(std::min<std::size_t>(n, 48))));
    const std::size_t start = rng.Index(n);
    if (FarthestPointSample(pts, k, start) != GreedyFps(pts, k, start)) ++mismatches;
  }
  return {mismatches == 0, Fmt("%.0f of 500 trials differ from the greedy oracle", mismatches)};
}

Batch Indexed(std::uint64_t index) {
  Batch b;
  b.source_frame = std::to_string(index);
  b.positions.resize(256);
  b.colors.resize(256);
  b.labels.assign(256, 1);
  b.taxonomy = "carla12";
  return b;
}

Outcome PipeBoundedness() {
  PipeConfig c;
  c.queue_limit = 4;
  c.buffer_limit = 2;
  c.poll_interval_s = 0.01;
  const std::size_t bound = c.queue_limit + c.buffer_limit + 1;
  auto pipe = BatchPipe::Start(Indexed, c);
  std::size_t worst = 0;
  const auto t0 = Clock::now();
  while (Since(t0) < 30.0) {
    const PipeStats s = pipe->Stats();
    worst = std::max(worst, s.queue_depth + s.buffer_depth + s.in_flight);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const PipeStats stalled = pipe->Stats();
  if (stalled.peak_resident_batches > bound || worst > bound) {
    return {false, Fmt("stalled peak %.0f, sampled %.0f, bound %.0f", static_cast<double>(stalled.peak_resident_batches),
                       static_cast<double>(worst), static_cast<double>(bound))};
  }

  std::unordered_set<std::uint64_t> seen;
  bool duplicate = false;
  for (int i = 0; i < 10000; ++i) {
    if (!seen.insert(std::stoull(pipe->GetBatch(10.0).source_frame)).second) duplicate = true;
  }
  pipe->Pause();
  while (pipe->Stats().in_flight != 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  const PipeStats q = pipe->Stats();
  const bool quiescent_ok = q.batches_produced - q.batches_consumed - q.batches_discarded == q.queue_depth + q.buffer_depth;
  pipe->Shutdown();
  const PipeStats f = pipe->Stats();
  const bool final_ok = f.batches_produced == f.batches_consumed + f.batches_discarded && f.batches_consumed == 10000;
  const bool ok = !duplicate && quiescent_ok && final_ok && f.peak_resident_batches <= bound;
  return {ok, Fmt("30 s stall peak %.0f (bound 7); 10000 batches, produced %.0f = consumed + discarded %.0f",
                  static_cast<double>(std::max(stalled.peak_resident_batches, f.peak_resident_batches)),
                  static_cast<double>(f.batches_produced),
                  static_cast<double>(f.batches_consumed + f.batches_discarded)) +
                  (duplicate ? ", duplicate batch seen" : ", no duplicates")};
}

Outcome PrefetchSpeedup() {
  const auto t0 = Clock::now();
  testing::TempDir dir;
  Rng rng(107);
  std::vector<PointCloud> clouds;
  for (int i = 0; i < 20; ++i) clouds.push_back(testing::RandomCloud(rng, 20000, true, true));
  const DatasetManifest m = testing::WriteCloudDataset(dir.path(), clouds);
  PipeConfig c;
  c.load_latency_s = 0.005;
  const PipeBenchmark b = RunPipeBenchmark(m, c, 200, 0.005);
  const double s = Since(t0);
  return {b.speedup() >= 1.5 && s < 60.0,
          Fmt("speedup %.3f (synchronous %.1f b/s, prefetched %.1f b/s)", b.speedup(), b.synchronous_bps(),
              b.prefetched_bps()) +
              Fmt(", %.1f s", s)};
}

Outcome GradientCheck() {
  Rng rng(108);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const testing::GradCheckDraw d = testing::RandomGradCheckDraw(rng);
    worst = std::max(worst, testing::CheckGradient(d.model, d.features, d.labels, d.weights).max_relative_error);
  }
  return {worst < 1e-4, Fmt("max relative error %.3g over 100 draws (limit 1e-4)", worst)};
}

Outcome EndToEnd() {
  const auto t0 = Clock::now();
  testing::TempDir dir;
  DatasetOptions o;
  o.scene_count = 20;
  o.seed = 1;
  const DatasetManifest raw = GenerateDataset(o, dir / "raw");
  FuseDatasetOptions fo;
  fo.crop = true;
  const DatasetManifest fused = FuseDataset(raw, dir / "fused", fo);
  const auto [train, val] = SplitManifest(fused, {0.8, 0});
  const Taxonomy& t = builtin_taxonomies().carla12;
  TrainConfig c;
  c.max_epochs = 50;
  c.pipe.modality = Modality::kRgbd;
  c.scored_classes = ParseClassList("Building,Road,Sidewalk,Vegetation,Car", t);
  const TrainResult r = Train(train, val, c);
  const IouReport report = MeanIou(Evaluate(r.model, val, t), c.scored_classes);
  const double s = Since(t0);
  std::string per_class;
  for (std::size_t i = 0; i < c.scored_classes.size(); ++i) {
    per_class += " " + t.at(c.scored_classes[i]).name + "=" +
                 (report.per_class[i] ? Fmt("%.3f", *report.per_class[i]) : std::string("undef"));
  }
  return {report.miou >= 0.6 && s < 600.0,
          Fmt("validation mIoU %.4f (>= 0.6) after %.0f epochs, %.0f s;", report.miou,
              static_cast<double>(r.log.size()), s) +
              per_class};
}

// Trains both modalities on `make` frames and returns validation mIoU for
// {Building, Road} under RGB-D and under D.
std::pair<double, double> ModalityPair(PointCloud (*make)(std::uint64_t, std::size_t), std::uint64_t seed) {
  testing::TempDir dir;
  std::vector<PointCloud> train_clouds, val_clouds;
  for (int i = 0; i < 6; ++i) train_clouds.push_back(make(seed + i, 3000));
  for (int i = 0; i < 2; ++i) val_clouds.push_back(make(seed + 100 + i, 3000));
  const DatasetManifest train = testing::WriteCloudDataset(dir / "train", train_clouds);
  const DatasetManifest val = testing::WriteCloudDataset(dir / "val", val_clouds);
  const Taxonomy& t = builtin_taxonomies().common4;
  const std::vector<LabelId> scored = ParseClassList("Building,Road", t);
  double miou[2];
  for (int i = 0; i < 2; ++i) {
    TrainConfig c;
    c.max_epochs = 20;
    c.steps_per_epoch = 12;
    c.hidden = 16;
    c.learning_rate = 0.01;
    c.points_per_step = 256;
    c.pipe.sample_size = 2048;
    c.pipe.modality = i == 0 ? Modality::kRgbd : Modality::kDepth;
    c.scored_classes = scored;
    c.seed = seed;
    const TrainResult r = Train(train, val, c);
    miou[i] = MeanIou(Evaluate(r.model, val, t), scored).miou;
  }
  return {miou[0], miou[1]};
}

Outcome ModalityAblation() {
  const auto [color_rgbd, color_d] = ModalityPair(testing::ColorOnlyFrame, 1000);
  const auto [geo_rgbd, geo_d] = ModalityPair(testing::GeometryOnlyFrame, 2000);
  const bool ok = color_rgbd > color_d && geo_d >= 0.9 * geo_rgbd;
  return {ok, Fmt("color-only: RGB-D %.3f > D %.3f; ", color_rgbd, color_d) +
                  Fmt("geometry-only: D %.3f >= 0.9 * RGB-D %.3f", geo_d, geo_rgbd)};
}

Outcome RemapTotality() {
  std::size_t checked = 0;
  int failures = 0;
  for (const RemapTable* table : builtin_remaps().all()) {
    const std::size_t src = table->source().size(), dst = table->target().size();
    for (std::size_t id = 0; id < 256; ++id) {
      const auto l = static_cast<LabelId>(id);
      if (id < src) {
        try {
          const LabelId out = (*table)(l);
          if (out >= dst || (id == 0 && out != 0)) ++failures;
        } catch (const std::exception&) {
          ++failures;
        }
      } else {
        try {
          (*table)(l);
          ++failures;
        } catch (const DataError&) {
        }
      }
      ++checked;
    }
  }
  return {failures == 0 && checked > 0,
          Fmt("%.0f ids over %.0f built-in tables, %.0f violations", static_cast<double>(checked),
              static_cast<double>(builtin_remaps().all().size()), failures)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"metrics match set oracle", MetricsOracle},
      {"IoU and mIoU worked examples", MetricsExamples},
      {"projection round trip", ProjectionRoundTrip},
      {"depth fusion reproduces semantic images", FusionReproducesSemantic},
      {"farthest point sampling oracle", FpsOracle},
      {"batch pipe boundedness and reconciliation", PipeBoundedness},
      {"prefetch speedup", PrefetchSpeedup},
      {"gradient check", GradientCheck},
      {"end-to-end RGB-D segmentation", EndToEnd},
      {"modality ablation", ModalityAblation},
      {"remap totality", RemapTotality},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2zu  %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
