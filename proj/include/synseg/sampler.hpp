#pragma once

// Fixed-size training samples, PointNet++-style sampling/grouping
// primitives, and train/validation splits.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synseg/manifest.hpp"
#include "synseg/pcdcore.hpp"

namespace synseg {

enum class Modality { kRgbd, kDepth };

// "rgbd" or "d" (case-insensitive, "rgb-d" accepted).
Modality ParseModality(std::string_view text);
std::string ModalityName(Modality modality);

inline constexpr std::size_t kDefaultSampleSize = 8192;

struct Batch {
  std::vector<Point3> positions;  // recentered on their centroid
  std::vector<Rgb> colors;        // zero for Modality::kDepth
  std::vector<LabelId> labels;
  std::string source_frame;
  std::string taxonomy;

  std::size_t size() const { return positions.size(); }
  friend bool operator==(const Batch&, const Batch&) = default;
};

// Greedy farthest point sampling on squared distances. Ties go to the
// lowest index. Throws InvalidArgument unless 1 <= k <= |points| and
// start_index < |points|.
std::vector<std::size_t> FarthestPointSample(std::span<const Point3> points, std::size_t k, std::size_t start_index = 0);

// Indices with distance <= radius, ascending, at most max_neighbors.
std::vector<std::size_t> BallQuery(std::span<const Point3> points, const Point3& center, double radius,
                                   std::size_t max_neighbors);

// Without replacement when the cloud is large enough, with replacement
// otherwise. Unlabelled clouds and empty clouds are errors.
Batch SampleBatch(const PointCloud& cloud, std::size_t sample_size, std::uint64_t rng_seed, Modality modality,
                  std::string source_frame = {});

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// Seeded shuffle; the first ceil(fraction * N) frames go to train.
std::pair<DatasetManifest, DatasetManifest> SplitManifest(const DatasetManifest& manifest, const SplitSpec& spec);

}  // namespace synseg
