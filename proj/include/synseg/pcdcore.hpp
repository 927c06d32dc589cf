#pragma once

// Core geometry and container types shared across the pipeline.
//
// Frames: world and ego frames are right-handed with x forward, y left and
// z up. Camera frames follow the pinhole convention: z forward, x right,
// y down. A Pose maps points from its sensor frame into the parent frame.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synseg {

using LabelId = std::uint16_t;

inline constexpr LabelId kUnlabelled = 0;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  // Throws InvalidArgument for NaN/Inf components.
  static Point3 Checked(double x, double y, double z);

  bool IsFinite() const;
  Eigen::Vector3d vec() const { return {x, y, z}; }
  static Point3 FromVec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Columnar point store. Colors and labels are optional but, when present,
// always have one entry per position. `taxonomy` names the label space the
// label ids belong to (empty for unlabelled clouds).
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> positions,
                      std::optional<std::vector<Rgb>> colors = std::nullopt,
                      std::optional<std::vector<LabelId>> labels = std::nullopt,
                      std::string taxonomy = {});

  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }

  const std::vector<Point3>& positions() const { return positions_; }
  bool has_colors() const { return colors_.has_value(); }
  bool has_labels() const { return labels_.has_value(); }
  const std::vector<Rgb>& colors() const;
  const std::vector<LabelId>& labels() const;
  const std::string& taxonomy() const { return taxonomy_; }

  PointCloud WithPositions(std::vector<Point3> positions) const;
  PointCloud WithColors(std::vector<Rgb> colors) const;
  PointCloud WithLabels(std::vector<LabelId> labels, std::string taxonomy) const;
  PointCloud WithoutColors() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point3> positions_;
  std::optional<std::vector<Rgb>> colors_;
  std::optional<std::vector<LabelId>> labels_;
  std::string taxonomy_;
};

struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  // Validates the invariants and returns the intrinsics unchanged.
  static CameraIntrinsics Checked(int width, int height, double fx, double fy, double cx, double cy);

  // Square pixels, principal point at the image center.
  static CameraIntrinsics FromHorizontalFov(int width, int height, double hfov_deg);

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

// Rigid transform sensor -> parent. Rotation is validated to be proper
// orthonormal (R^T R = I and det R = +1 within 1e-9).
class Pose {
 public:
  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose Identity() { return {}; }
  static Pose FromTranslation(double x, double y, double z);
  // Z-Y-X intrinsic Euler angles in radians.
  static Pose FromYawPitchRoll(double yaw, double pitch, double roll, const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 Apply(const Point3& p) const { return Point3::FromVec(rotation_ * p.vec() + translation_); }
  Eigen::Vector3d Apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }
  Pose Inverse() const;
  // (*this) * other maps other's sensor frame through other into this frame.
  Pose operator*(const Pose& other) const;

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// Rotation taking camera-frame axes (z forward, x right, y down) into a
// vehicle frame (x forward, y left, z up).
Eigen::Matrix3d CameraToVehicleRotation();

template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{});
  Image(int width, int height, std::vector<T> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  const T& at(int u, int v) const { return data_[static_cast<std::size_t>(v) * width_ + u]; }
  T& at(int u, int v) { return data_[static_cast<std::size_t>(v) * width_ + u]; }
  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Depth in meters along the camera z axis; 0 encodes "no return".
using DepthImage = Image<double>;
using SemanticImage = Image<LabelId>;
using ColorImage = Image<Rgb>;

// Throws InvalidArgument if any depth is negative or non-finite.
void ValidateDepth(const DepthImage& depth);

PointCloud TransformCloud(const PointCloud& cloud, const Pose& pose);

Point3 Centroid(std::span<const Point3> points);

}  // namespace synseg
