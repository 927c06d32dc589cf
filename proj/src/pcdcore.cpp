#include "synseg/pcdcore.hpp"

#include <Eigen/Geometry>

#include <cmath>

#include "synseg/errors.hpp"

namespace synseg {

Point3 Point3::Checked(double x, double y, double z) {
  Point3 p{x, y, z};
  if (!p.IsFinite()) {
    throw InvalidArgument("point has non-finite component");
  }
  return p;
}

bool Point3::IsFinite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

PointCloud::PointCloud(std::vector<Point3> positions, std::optional<std::vector<Rgb>> colors,
                       std::optional<std::vector<LabelId>> labels, std::string taxonomy)
    : positions_(std::move(positions)),
      colors_(std::move(colors)),
      labels_(std::move(labels)),
      taxonomy_(std::move(taxonomy)) {
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (!positions_[i].IsFinite()) {
      throw InvalidArgument("point " + std::to_string(i) + " has non-finite component");
    }
  }
  if (colors_ && colors_->size() != positions_.size()) {
    throw InvalidArgument("color count " + std::to_string(colors_->size()) + " != point count " +
                          std::to_string(positions_.size()));
  }
  if (labels_ && labels_->size() != positions_.size()) {
    throw InvalidArgument("label count " + std::to_string(labels_->size()) + " != point count " +
                          std::to_string(positions_.size()));
  }
  if (labels_ && taxonomy_.empty()) {
    throw InvalidArgument("labelled cloud must declare its taxonomy");
  }
}

const std::vector<Rgb>& PointCloud::colors() const {
  if (!colors_) throw DataError("point cloud has no colors");
  return *colors_;
}

const std::vector<LabelId>& PointCloud::labels() const {
  if (!labels_) throw DataError("point cloud has no labels");
  return *labels_;
}

PointCloud PointCloud::WithPositions(std::vector<Point3> positions) const {
  return PointCloud(std::move(positions), colors_, labels_, taxonomy_);
}

PointCloud PointCloud::WithColors(std::vector<Rgb> colors) const {
  return PointCloud(positions_, std::move(colors), labels_, taxonomy_);
}

PointCloud PointCloud::WithLabels(std::vector<LabelId> labels, std::string taxonomy) const {
  return PointCloud(positions_, colors_, std::move(labels), std::move(taxonomy));
}

PointCloud PointCloud::WithoutColors() const { return PointCloud(positions_, std::nullopt, labels_, taxonomy_); }

CameraIntrinsics CameraIntrinsics::Checked(int width, int height, double fx, double fy, double cx, double cy) {
  if (width < 1 || height < 1) throw InvalidArgument("camera width/height must be >= 1");
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw InvalidArgument("camera focal lengths must be positive and finite");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("principal point outside the image");
  }
  return {width, height, fx, fy, cx, cy};
}

CameraIntrinsics CameraIntrinsics::FromHorizontalFov(int width, int height, double hfov_deg) {
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw InvalidArgument("horizontal fov must be in (0, 180)");
  const double f = (width / 2.0) / std::tan(hfov_deg * M_PI / 360.0);
  return Checked(width, height, f, f, width / 2.0, height / 2.0);
}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.allFinite() || !translation_.allFinite()) {
    throw InvalidArgument("pose has non-finite entries");
  }
  const double ortho_err = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-9) throw InvalidArgument("pose rotation is not orthonormal");
  if (std::abs(rotation_.determinant() - 1.0) > 1e-9) throw InvalidArgument("pose rotation has det != +1");
}

Pose Pose::FromTranslation(double x, double y, double z) {
  return Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(x, y, z));
}

Pose Pose::FromYawPitchRoll(double yaw, double pitch, double roll, const Eigen::Vector3d& translation) {
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  return Pose(r, translation);
}

Pose Pose::Inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return Pose(rt, -(rt * translation_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

Eigen::Matrix3d CameraToVehicleRotation() {
  Eigen::Matrix3d r;
  // Columns: camera x (right), y (down), z (forward) in vehicle coordinates.
  r.col(0) = Eigen::Vector3d(0, -1, 0);
  r.col(1) = Eigen::Vector3d(0, 0, -1);
  r.col(2) = Eigen::Vector3d(1, 0, 0);
  return r;
}

template <typename T>
Image<T>::Image(int width, int height, T fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image dimension");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

template <typename T>
Image<T>::Image(int width, int height, std::vector<T> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image dimension");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("image data length does not match width*height");
  }
}

template class Image<double>;
template class Image<LabelId>;
template class Image<Rgb>;

void ValidateDepth(const DepthImage& depth) {
  for (double d : depth.data()) {
    if (!std::isfinite(d) || d < 0.0) throw InvalidArgument("depth must be finite and >= 0");
  }
}

PointCloud TransformCloud(const PointCloud& cloud, const Pose& pose) {
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud.positions()) out.push_back(pose.Apply(p));
  return cloud.WithPositions(std::move(out));
}

Point3 Centroid(std::span<const Point3> points) {
  if (points.empty()) return {};
  double sx = 0, sy = 0, sz = 0;
  for (const Point3& p : points) {
    sx += p.x;
    sy += p.y;
    sz += p.z;
  }
  const double n = static_cast<double>(points.size());
  return {sx / n, sy / n, sz / n};
}

}  // namespace synseg
