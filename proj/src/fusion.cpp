#include "synseg/fusion.hpp"

#include <cmath>

#include "synseg/errors.hpp"

namespace synseg {
namespace {

void CheckDims(int width, int height, const CameraIntrinsics& intr, const char* what) {
  if (width != intr.width || height != intr.height) {
    throw InvalidArgument(std::string(what) + " is " + std::to_string(width) + "x" + std::to_string(height) +
                          " but intrinsics are " + std::to_string(intr.width) + "x" + std::to_string(intr.height));
  }
}

ProjectionResult ProjectCamera(const Eigen::Vector3d& pc, const CameraIntrinsics& intr) {
  ProjectionResult r;
  r.depth = pc.z();
  if (!(pc.z() > 0.0)) return r;
  r.u = intr.fx * pc.x() / pc.z() + intr.cx;
  r.v = intr.fy * pc.y() / pc.z() + intr.cy;
  r.in_frustum = r.u >= 0.0 && r.u < intr.width && r.v >= 0.0 && r.v < intr.height;
  return r;
}

// Pixel lookup shared by Fuse and InFrustumIndices; nullopt when the point
// does not receive image data.
std::optional<std::pair<int, int>> LookupPixel(const Eigen::Vector3d& pc, const CameraIntrinsics& intr,
                                               const FuseOptions& options) {
  const ProjectionResult r = ProjectCamera(pc, intr);
  if (!r.in_frustum) return std::nullopt;
  const int u = std::min(static_cast<int>(std::floor(r.u)), intr.width - 1);
  const int v = std::min(static_cast<int>(std::floor(r.v)), intr.height - 1);
  if (options.depth_check && std::abs(options.depth_check->at(u, v) - r.depth) > options.depth_threshold) {
    return std::nullopt;
  }
  return std::make_pair(u, v);
}

}  // namespace

Point3 PixelToCamera(double u, double v, double d, const CameraIntrinsics& intr) {
  return {(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d};
}

PointCloud Backproject(const DepthImage& depth, const CameraIntrinsics& intr, const Pose& cam_pose) {
  CheckDims(depth.width(), depth.height(), intr, "depth image");
  ValidateDepth(depth);
  std::vector<Point3> points;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(u, v);
      if (d <= 0.0) continue;
      points.push_back(cam_pose.Apply(PixelToCamera(u + 0.5, v + 0.5, d, intr)));
    }
  }
  return PointCloud(std::move(points));
}

ProjectionResult ProjectPoint(const Point3& p_world, const CameraIntrinsics& intr, const Pose& cam_pose) {
  return ProjectCamera(cam_pose.Inverse().Apply(p_world.vec()), intr);
}

PointCloud Fuse(const PointCloud& cloud, const SemanticImage& semantic, const ColorImage& color,
                const CameraIntrinsics& intr, const Pose& cam_pose, const std::string& taxonomy,
                const FuseOptions& options) {
  CheckDims(semantic.width(), semantic.height(), intr, "semantic image");
  CheckDims(color.width(), color.height(), intr, "color image");
  if (options.depth_check) CheckDims(options.depth_check->width(), options.depth_check->height(), intr, "depth image");
  const Pose world_to_cam = cam_pose.Inverse();
  std::vector<Rgb> colors(cloud.size());
  std::vector<LabelId> labels(cloud.size(), kUnlabelled);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto px = LookupPixel(world_to_cam.Apply(cloud.positions()[i].vec()), intr, options);
    if (!px) continue;
    labels[i] = semantic.at(px->first, px->second);
    colors[i] = color.at(px->first, px->second);
  }
  return PointCloud(cloud.positions(), std::move(colors), std::move(labels), taxonomy);
}

std::vector<std::size_t> InFrustumIndices(const PointCloud& cloud, const CameraIntrinsics& intr, const Pose& cam_pose,
                                          const FuseOptions& options) {
  const Pose world_to_cam = cam_pose.Inverse();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (LookupPixel(world_to_cam.Apply(cloud.positions()[i].vec()), intr, options)) out.push_back(i);
  }
  return out;
}

}  // namespace synseg
