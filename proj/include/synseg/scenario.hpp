#pragma once

// Scripted scenarios: actors with behaviours, an ego vehicle driving a
// waypoint path with mounted sensors, and proximity triggers that start
// actor behaviours. Colliding actors stop on contact.

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

#include "synseg/errors.hpp"
#include "synseg/synthworld.hpp"

namespace synseg::world {

class SpawnCollisionError : public DataError {
 public:
  using DataError::DataError;
};

struct Behaviour {
  enum class Kind { kStationary, kStraight, kWaypoints };
  Kind kind = Kind::kStationary;
  double speed = 0.0;  // m/s
  std::vector<Eigen::Vector2d> waypoints;
};

struct ActorSpec {
  std::string name;
  // Geometry and label; position and yaw are the spawn pose.
  Solid shape;
  Behaviour behaviour;
};

struct SensorRig {
  Pose lidar_mount = Pose::FromTranslation(0.0, 0.0, 1.8);
  LidarSpec lidar;
  Pose camera_mount = Pose(CameraToVehicleRotation(), Eigen::Vector3d(1.0, 0.0, 1.5));
  CameraIntrinsics intrinsics = CameraIntrinsics::FromHorizontalFov(800, 600, 90.0);
};

struct EgoSpec {
  double x = 0, y = 0, yaw = 0;
  double speed = 0.0;
  std::vector<Eigen::Vector2d> waypoints;
  SensorRig rig;
};

// Starts `actor`'s behaviour once the ego comes within `radius` of `point`.
struct Trigger {
  std::string actor;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  double radius = 1.0;
};

struct ScenarioScript {
  std::vector<ActorSpec> actors;
  EgoSpec ego;
  std::vector<Trigger> triggers;
  int duration = 1;  // frames
  double frame_rate = 10.0;
  int weather_id = 0;

  void Validate() const;
};

struct SensorFrame {
  int index = 0;
  int weather_id = 0;
  Pose ego_pose;
  Pose lidar_pose;
  Pose camera_pose;
  CameraIntrinsics intrinsics;
  PointCloud lidar;  // sensor frame, carla12 labels
  CameraFrame camera;
  // Actor positions at capture time, in script order.
  std::vector<Solid> actors;
};

// Renders all sensors of `rig` mounted on a vehicle at `ego_pose`.
SensorFrame CaptureFrame(const Scene& scene, const Pose& ego_pose, const SensorRig& rig, int weather_id);

std::vector<SensorFrame> RunScenario(const ScenarioScript& script, const Scene& base);

// Line-oriented "key = value" script format; see README.
ScenarioScript ParseScenario(std::string_view text);
ScenarioScript ReadScenarioFile(const std::string& path);

}  // namespace synseg::world
