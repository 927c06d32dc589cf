#pragma once

// Per-point features for the point-wise classifier:
//
//   0  height above the cloud's 5th-percentile z
//   1  |normal z| of the neighborhood
//   2  planarity  (l2 - l3) / l2
//   3  linearity  (l1 - l2) / l1
//   4  neighbor count / max_neighbors
//   5-7  r, g, b in [0, 1] (zero for depth-only)
//
// l1 >= l2 >= l3 are the eigenvalues of the neighborhood covariance.
// Neighborhoods with fewer than 3 points get zero normal, planarity and
// linearity.

#include <Eigen/Core>

#include <span>
#include <vector>

#include "synseg/pcdcore.hpp"
#include "synseg/sampler.hpp"

namespace synseg {

inline constexpr int kFeatureDim = 8;

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureDim>;

struct FeatureOptions {
  double radius = 0.8;
  std::size_t max_neighbors = 64;
};

// Uniform hash grid answering the same queries as BallQuery (same points,
// same ascending order, same cap) without a linear scan.
class NeighborGrid {
 public:
  NeighborGrid(std::span<const Point3> points, double cell_size);

  void Query(const Point3& center, double radius, std::size_t max_neighbors, std::vector<std::size_t>& out) const;

 private:
  std::uint64_t Key(std::int64_t ix, std::int64_t iy, std::int64_t iz) const;
  std::int64_t Cell(double v) const;

  std::span<const Point3> points_;
  double cell_size_;
  std::vector<std::uint64_t> keys_;      // sorted cell keys
  std::vector<std::size_t> starts_;      // offsets into members_, one past keys_
  std::vector<std::uint32_t> members_;   // point indices grouped by cell, ascending
};

// `colors` may be empty (treated as black).
FeatureMatrix ExtractFeatures(std::span<const Point3> positions, std::span<const Rgb> colors, Modality modality,
                              const FeatureOptions& options = {});
FeatureMatrix ExtractFeatures(const PointCloud& cloud, Modality modality, const FeatureOptions& options = {});
FeatureMatrix ExtractFeatures(const Batch& batch, Modality modality, const FeatureOptions& options = {});

}  // namespace synseg
