#pragma once

// Pinhole projection between depth images and point clouds, and label/color
// transfer from aligned camera images onto clouds.
//
// Pixel (u, v) covers the continuous square [u, u+1) x [v, v+1); its center
// (u + 0.5, v + 0.5) is the point back-projected for that pixel.

#include <optional>

#include "synseg/pcdcore.hpp"

namespace synseg {

struct ProjectionResult {
  double u = 0.0;  // continuous pixel coordinates
  double v = 0.0;
  double depth = 0.0;  // camera-frame z
  bool in_frustum = false;
};

// Camera-frame point for continuous pixel coordinates (u, v) at depth d.
Point3 PixelToCamera(double u, double v, double d, const CameraIntrinsics& intr);

// One world-frame point per pixel with d > 0, row-major. `cam_pose` maps
// camera frame to world.
PointCloud Backproject(const DepthImage& depth, const CameraIntrinsics& intr, const Pose& cam_pose);

ProjectionResult ProjectPoint(const Point3& p_world, const CameraIntrinsics& intr, const Pose& cam_pose);

struct FuseOptions {
  // When set, points whose camera depth differs from the depth image at the
  // looked-up pixel by more than the threshold are treated as out of frustum.
  const DepthImage* depth_check = nullptr;
  double depth_threshold = 0.2;
};

// Positions are copied unchanged. Points in the frustum take the label and
// color at pixel (floor(u), floor(v)); others get label 0 and black. No
// occlusion test is done unless a depth check is supplied.
PointCloud Fuse(const PointCloud& cloud, const SemanticImage& semantic, const ColorImage& color,
                const CameraIntrinsics& intr, const Pose& cam_pose, const std::string& taxonomy,
                const FuseOptions& options = {});

// Indices of points that land inside the frustum (and pass the depth check).
std::vector<std::size_t> InFrustumIndices(const PointCloud& cloud, const CameraIntrinsics& intr, const Pose& cam_pose,
                                          const FuseOptions& options = {});

}  // namespace synseg
