#pragma once

// On-disk synthetic datasets. Each frame is stored as
//
//   <id>.ply        LiDAR cloud, sensor frame, carla12 labels
//   <id>.depth.pgm  16-bit depth in millimetres
//   <id>.sem.pgm    8-bit semantic ids
//   <id>.color.ppm  RGB
//   <id>.meta       poses and intrinsics (key=value)
//
// plus a manifest.tsv index in the output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "synseg/manifest.hpp"
#include "synseg/pcdcore.hpp"
#include "synseg/scenario.hpp"
#include "synseg/synthworld.hpp"

namespace synseg {

// Per-scene parameters are drawn uniformly from these inclusive ranges.
struct SceneRanges {
  int vehicle_min = 40, vehicle_max = 80;
  int pedestrian_min = 10, pedestrian_max = 30;
  double town_extent = 160.0;
  double building_density = 0.7;
  double vegetation_density = 0.5;

  void Validate() const;
};

struct DatasetOptions {
  SceneRanges ranges;
  std::size_t scene_count = 1;
  std::uint64_t seed = 1;
  world::SensorRig rig;
  // When set, every scene plays this script (with its own rig) instead of a
  // single capture.
  std::optional<world::ScenarioScript> scenario;
};

struct FrameMeta {
  std::string frame_id;
  int weather_id = 0;
  Pose ego_pose;
  Pose lidar_pose;
  Pose camera_pose;
  CameraIntrinsics intrinsics;
};

std::string SerializeFrameMeta(const FrameMeta& meta);
FrameMeta ParseFrameMeta(std::string_view text);
void WriteFrameMeta(const FrameMeta& meta, const std::filesystem::path& path);
FrameMeta ReadFrameMeta(const std::filesystem::path& path);
// Sidecar next to the entry's PLY.
std::filesystem::path MetaPathFor(const ManifestEntry& entry);

// Scene i uses seed MixSeed(options.seed, i) and weather i mod 14.
world::SceneConfig SceneConfigFor(const DatasetOptions& options, std::size_t scene_index);

// Writes the frame files and returns the manifest entry (paths absolute).
ManifestEntry WriteFrame(const world::SensorFrame& frame, const std::string& frame_id,
                         const std::filesystem::path& out_dir);

// Generates, writes and indexes the dataset; manifest.tsv is written last.
DatasetManifest GenerateDataset(const DatasetOptions& options, const std::filesystem::path& out_dir);

}  // namespace synseg
