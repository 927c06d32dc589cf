#include "synseg/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "synseg/errors.hpp"
#include "synseg/rng.hpp"

namespace synseg {
namespace {

double SquaredDistance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

Modality ParseModality(std::string_view text) {
  std::string t;
  for (char c : text) {
    if (c != '-' && c != '_') t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (t == "rgbd") return Modality::kRgbd;
  if (t == "d" || t == "depth") return Modality::kDepth;
  throw InvalidArgument("unknown modality '" + std::string(text) + "' (expected rgbd or d)");
}

std::string ModalityName(Modality modality) { return modality == Modality::kRgbd ? "rgbd" : "d"; }

std::vector<std::size_t> FarthestPointSample(std::span<const Point3> points, std::size_t k, std::size_t start_index) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) {
    throw InvalidArgument("farthest point sample needs 1 <= k <= " + std::to_string(n) + ", got " + std::to_string(k));
  }
  if (start_index >= n) throw InvalidArgument("farthest point sample start index out of range");
  std::vector<std::size_t> chosen{start_index};
  chosen.reserve(k);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t last = start_index;
  while (chosen.size() < k) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], SquaredDistance(points[i], points[last]));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    chosen.push_back(best);
    last = best;
  }
  return chosen;
}

std::vector<std::size_t> BallQuery(std::span<const Point3> points, const Point3& center, double radius,
                                   std::size_t max_neighbors) {
  if (!(radius > 0.0)) throw InvalidArgument("ball query radius must be > 0");
  if (max_neighbors < 1) throw InvalidArgument("ball query max_neighbors must be >= 1");
  const double r2 = radius * radius;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size() && out.size() < max_neighbors; ++i) {
    if (SquaredDistance(points[i], center) <= r2) out.push_back(i);
  }
  return out;
}

Batch SampleBatch(const PointCloud& cloud, std::size_t sample_size, std::uint64_t rng_seed, Modality modality,
                  std::string source_frame) {
  if (cloud.empty()) throw DataError("cannot sample a batch from an empty cloud");
  if (!cloud.has_labels()) throw DataError("cannot sample a batch from an unlabelled cloud");
  if (sample_size < 1) throw InvalidArgument("sample_size must be >= 1");
  const std::size_t n = cloud.size();
  Rng rng(rng_seed);
  std::vector<std::size_t> picks(sample_size);
  if (n >= sample_size) {
    // Partial Fisher-Yates.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::swap(perm[i], perm[i + rng.Index(n - i)]);
      picks[i] = perm[i];
    }
  } else {
    for (auto& p : picks) p = rng.Index(n);
  }

  Batch b;
  b.source_frame = std::move(source_frame);
  b.taxonomy = cloud.taxonomy();
  b.positions.reserve(sample_size);
  b.colors.assign(sample_size, Rgb{});
  b.labels.reserve(sample_size);
  for (std::size_t i = 0; i < sample_size; ++i) {
    b.positions.push_back(cloud.positions()[picks[i]]);
    b.labels.push_back(cloud.labels()[picks[i]]);
    if (modality == Modality::kRgbd && cloud.has_colors()) b.colors[i] = cloud.colors()[picks[i]];
  }
  const Point3 c = Centroid(b.positions);
  for (Point3& p : b.positions) p = {p.x - c.x, p.y - c.y, p.z - c.z};
  return b;
}

std::pair<DatasetManifest, DatasetManifest> SplitManifest(const DatasetManifest& manifest, const SplitSpec& spec) {
  if (manifest.empty()) throw InvalidArgument("cannot split an empty manifest");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must be in (0,1)");
  }
  const std::size_t n = manifest.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Index(i)]);
  // Guard against 0.8 * 10 = 8.000000000000002 rounding up to 9.
  const std::size_t n_train =
      std::min(n, static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n) - 1e-9)));
  std::pair<DatasetManifest, DatasetManifest> out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.first : out.second).entries.push_back(manifest.entries[order[i]]);
  }
  return out;
}

}  // namespace synseg
