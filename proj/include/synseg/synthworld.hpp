#pragma once

// Procedural urban scenes built from labelled primitives, plus ray-cast
// LiDAR and pinhole camera simulation over them.
//
// All labels are carla12 ids. Scene and render outputs are pure functions
// of their inputs.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

#include "synseg/pcdcore.hpp"

namespace synseg::world {

inline constexpr double kCurbHeight = 0.15;
inline constexpr double kRoadElevation = 0.0;
// Ground patches are slabs this thick below their top surface, so curbs
// have a visible vertical face.
inline constexpr double kGroundThickness = 0.3;
inline constexpr int kWeatherCount = 14;
// Camera hits beyond this depth are reported as misses; keeps rendered
// depth inside the 16-bit millimeter file encoding.
inline constexpr double kCameraFarClip = 60.0;

// carla12 ids used by the generator.
namespace label {
inline constexpr LabelId kBuilding = 1;
inline constexpr LabelId kFence = 2;
inline constexpr LabelId kOther = 3;
inline constexpr LabelId kPedestrian = 4;
inline constexpr LabelId kPole = 5;
inline constexpr LabelId kRoadLine = 6;
inline constexpr LabelId kRoad = 7;
inline constexpr LabelId kSidewalk = 8;
inline constexpr LabelId kVegetation = 9;
inline constexpr LabelId kCar = 10;
inline constexpr LabelId kWall = 11;
inline constexpr LabelId kTrafficSign = 12;
}  // namespace label

struct SceneConfig {
  std::uint64_t seed = 1;
  int vehicle_count = 60;
  int pedestrian_count = 20;
  int weather_id = 0;
  double town_extent = 160.0;
  double building_density = 0.7;
  double vegetation_density = 0.5;

  void Validate() const;
};

// Axis-aligned ground rectangle; a slab with its top surface at `top`.
struct GroundPatch {
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  double top = 0;
  LabelId label = 0;
};

enum class ShapeKind { kBox, kCylinder, kEllipsoidCluster };

struct Ellipsoid {
  Eigen::Vector3d center;  // in the solid's local frame
  Eigen::Vector3d radii;
};

// A labelled primitive standing on the plane z = base_z at (x, y), rotated
// by yaw about +z. Local frame: origin at the footprint center on the base.
//   box:      half_extents (x, y, z) with z spanning [0, 2*hz]
//   cylinder: radius, height, vertical axis
//   cluster:  union of ellipsoids
struct Solid {
  ShapeKind kind = ShapeKind::kBox;
  LabelId label = 0;
  double x = 0, y = 0, base_z = 0, yaw = 0;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  double radius = 0, height = 0;
  std::vector<Ellipsoid> lobes;
  // Seeds the per-primitive brightness jitter.
  std::uint32_t appearance = 0;

  static Solid Box(LabelId label, double x, double y, double base_z, double yaw, double length, double width,
                   double height);
  static Solid Cylinder(LabelId label, double x, double y, double base_z, double radius, double height);
  static Solid Cluster(LabelId label, double x, double y, double base_z, std::vector<Ellipsoid> lobes);
};

struct Scene {
  std::uint64_t seed = 0;
  std::vector<GroundPatch> ground;
  std::vector<Solid> solids;
  // Free lane position reserved for the ego vehicle (vehicle frame, z up).
  Pose ego_start;

  std::size_t CountLabel(LabelId label) const;
};

Scene GenerateScene(const SceneConfig& config);

// Footprint overlap test between two solids (2D shape plus z interval).
bool SolidsOverlap(const Solid& a, const Solid& b, double margin = 0.0);

struct RayHit {
  double t = 0;  // along the (unnormalized) direction
  LabelId label = 0;
  // Index into Scene::ground when is_ground, else into Scene::solids.
  std::size_t entity = 0;
  bool is_ground = false;
};

// Nearest-hit ray queries against a fixed scene.
class RayCaster {
 public:
  explicit RayCaster(const Scene& scene);

  std::optional<RayHit> Cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction, double t_max) const;

 private:
  struct Bounds {
    Eigen::Vector3d lo, hi;
  };
  const Scene& scene_;
  std::vector<Bounds> solid_bounds_;
};

struct LidarSpec {
  int channels = 32;
  int points_per_channel = 1024;
  double lower_fov_deg = -30.0;
  double upper_fov_deg = 10.0;
  double max_range = 50.0;
  // Gaussian range jitter, off by default.
  double range_noise_stddev = 0.0;
  std::uint64_t noise_seed = 0;

  void Validate() const;
};

// Labelled, uncolored cloud in the sensor frame. One ray per (channel,
// azimuth step), channel-major; misses emit no point.
PointCloud SimulateLidar(const Scene& scene, const Pose& sensor_pose, const LidarSpec& spec);

struct CameraFrame {
  DepthImage depth;
  SemanticImage semantic;
  ColorImage color;
};

struct WeatherPreset {
  double tint[3];
  Rgb sky;
};

const WeatherPreset& Weather(int weather_id);

// Pixel (u, v) casts a ray through its center (u + 0.5, v + 0.5). The three
// images come from the same rays and are pixel-aligned.
CameraFrame RenderCamera(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr, int weather_id);
DepthImage RenderDepth(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr, int weather_id);
SemanticImage RenderSemantic(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr,
                             int weather_id);
ColorImage RenderColor(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr, int weather_id);

}  // namespace synseg::world
