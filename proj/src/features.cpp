#include "synseg/features.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synseg/errors.hpp"

namespace synseg {
namespace {

constexpr std::int64_t kCellBias = std::int64_t{1} << 20;
constexpr std::uint64_t kCellMask = (std::uint64_t{1} << 21) - 1;

}  // namespace

NeighborGrid::NeighborGrid(std::span<const Point3> points, double cell_size) : points_(points), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw InvalidArgument("grid cell size must be > 0");
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point3& p = points[i];
    keyed[i] = {Key(Cell(p.x), Cell(p.y), Cell(p.z)), static_cast<std::uint32_t>(i)};
  }
  std::sort(keyed.begin(), keyed.end());
  members_.reserve(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i == 0 || keyed[i].first != keyed[i - 1].first) {
      keys_.push_back(keyed[i].first);
      starts_.push_back(i);
    }
    members_.push_back(keyed[i].second);
  }
  starts_.push_back(keyed.size());
}

std::int64_t NeighborGrid::Cell(double v) const {
  return static_cast<std::int64_t>(std::floor(v / cell_size_));
}

std::uint64_t NeighborGrid::Key(std::int64_t ix, std::int64_t iy, std::int64_t iz) const {
  auto pack = [](std::int64_t c) { return static_cast<std::uint64_t>(c + kCellBias) & kCellMask; };
  return (pack(ix) << 42) | (pack(iy) << 21) | pack(iz);
}

void NeighborGrid::Query(const Point3& center, double radius, std::size_t max_neighbors,
                         std::vector<std::size_t>& out) const {
  out.clear();
  const double r2 = radius * radius;
  // Widened slightly so rounding in the division never drops a boundary cell.
  auto lo = [&](double c) { return static_cast<std::int64_t>(std::floor((c - radius) / cell_size_ - 1e-7)); };
  auto hi = [&](double c) { return static_cast<std::int64_t>(std::floor((c + radius) / cell_size_ + 1e-7)); };
  for (std::int64_t ix = lo(center.x); ix <= hi(center.x); ++ix) {
    for (std::int64_t iy = lo(center.y); iy <= hi(center.y); ++iy) {
      for (std::int64_t iz = lo(center.z); iz <= hi(center.z); ++iz) {
        const std::uint64_t key = Key(ix, iy, iz);
        const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
        if (it == keys_.end() || *it != key) continue;
        const std::size_t k = static_cast<std::size_t>(it - keys_.begin());
        for (std::size_t m = starts_[k]; m < starts_[k + 1]; ++m) {
          const Point3& p = points_[members_[m]];
          const double dx = p.x - center.x, dy = p.y - center.y, dz = p.z - center.z;
          if (dx * dx + dy * dy + dz * dz <= r2) out.push_back(members_[m]);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  if (out.size() > max_neighbors) out.resize(max_neighbors);
}

FeatureMatrix ExtractFeatures(std::span<const Point3> positions, std::span<const Rgb> colors, Modality modality,
                              const FeatureOptions& options) {
  if (positions.empty()) throw InvalidArgument("cannot extract features from an empty cloud");
  if (!colors.empty() && colors.size() != positions.size()) throw InvalidArgument("colors/positions length mismatch");
  if (!(options.radius > 0.0) || options.max_neighbors < 1) throw InvalidArgument("bad feature options");
  const std::size_t n = positions.size();

  std::vector<double> zs(n);
  for (std::size_t i = 0; i < n; ++i) zs[i] = positions[i].z;
  const std::size_t q = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(n - 1)));
  std::nth_element(zs.begin(), zs.begin() + static_cast<std::ptrdiff_t>(q), zs.end());
  const double ground = zs[q];

  const NeighborGrid grid(positions, options.radius);
  FeatureMatrix f = FeatureMatrix::Zero(static_cast<Eigen::Index>(n), kFeatureDim);
  std::vector<std::size_t> nbrs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    f(row, 0) = positions[i].z - ground;
    grid.Query(positions[i], options.radius, options.max_neighbors, nbrs);
    f(row, 4) = static_cast<double>(nbrs.size()) / static_cast<double>(options.max_neighbors);
    if (nbrs.size() >= 3) {
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (std::size_t j : nbrs) mean += positions[j].vec();
      mean /= static_cast<double>(nbrs.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (std::size_t j : nbrs) {
        const Eigen::Vector3d d = positions[j].vec() - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(nbrs.size());
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      // Ascending eigenvalues.
      const double l3 = std::max(0.0, es.eigenvalues()(0));
      const double l2 = std::max(0.0, es.eigenvalues()(1));
      const double l1 = std::max(0.0, es.eigenvalues()(2));
      if (l1 > 1e-12) {
        f(row, 1) = std::abs(es.eigenvectors()(2, 0));
        f(row, 2) = l2 > 1e-9 * l1 ? (l2 - l3) / l2 : 0.0;
        f(row, 3) = (l1 - l2) / l1;
      }
    }
    if (modality == Modality::kRgbd && !colors.empty()) {
      f(row, 5) = colors[i].r / 255.0;
      f(row, 6) = colors[i].g / 255.0;
      f(row, 7) = colors[i].b / 255.0;
    }
  }
  return f;
}

FeatureMatrix ExtractFeatures(const PointCloud& cloud, Modality modality, const FeatureOptions& options) {
  static const std::vector<Rgb> kNone;
  return ExtractFeatures(cloud.positions(), cloud.has_colors() ? cloud.colors() : kNone, modality, options);
}

FeatureMatrix ExtractFeatures(const Batch& batch, Modality modality, const FeatureOptions& options) {
  return ExtractFeatures(batch.positions, batch.colors, modality, options);
}

}  // namespace synseg
