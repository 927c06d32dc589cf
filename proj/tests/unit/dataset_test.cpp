#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "synseg/dataset.hpp"
#include "synseg/errors.hpp"
#include "synseg/io.hpp"
#include "synseg/pipeline.hpp"
#include "test_util.hpp"

namespace synseg {
namespace {

namespace fs = std::filesystem;

DatasetOptions SmallOptions(std::size_t scenes) {
  DatasetOptions o;
  o.scene_count = scenes;
  o.seed = 7;
  o.rig.intrinsics = CameraIntrinsics::FromHorizontalFov(48, 36, 90);
  o.rig.lidar.channels = 8;
  o.rig.lidar.points_per_channel = 256;
  return o;
}

std::map<std::string, std::string> ReadTree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::ReadFile(e.path());
  }
  return files;
}

TEST(DatasetTest, TwoScenesAreDeterministic) {
  testing::TempDir a, b;
  const DatasetManifest ma = GenerateDataset(SmallOptions(2), a.path());
  GenerateDataset(SmallOptions(2), b.path());
  EXPECT_EQ(ma.size(), 2u);
  const auto ta = ReadTree(a.path());
  const auto tb = ReadTree(b.path());
  EXPECT_EQ(ta.size(), 11u);  // 5 files per frame plus the manifest
  EXPECT_EQ(ta, tb);
}

TEST(DatasetTest, ZeroScenesIsPreconditionError) {
  testing::TempDir dir;
  EXPECT_THROW(GenerateDataset(SmallOptions(0), dir.path()), InvalidArgument);
}

TEST(DatasetTest, UnwritableDirectoryIsIoError) {
  EXPECT_THROW(GenerateDataset(SmallOptions(1), "/proc/synseg-not-writable/out"), IoError);
}

TEST(DatasetTest, ManifestMatchesFiles) {
  testing::TempDir dir;
  const DatasetManifest m = GenerateDataset(SmallOptions(2), dir.path());
  EXPECT_EQ(ReadManifest(dir / "manifest.tsv"), m);
  for (const ManifestEntry& e : m.entries) {
    EXPECT_EQ(e.taxonomy, "carla12");
    EXPECT_EQ(io::ReadPlyVertexCount(e.ply_path), e.point_count);
    EXPECT_EQ(io::ReadPly(e.ply_path).size(), e.point_count);
    const FrameMeta meta = ReadFrameMeta(MetaPathFor(e));
    EXPECT_EQ(meta.frame_id, e.frame_id);
    const DepthImage depth = io::ReadPgm16(e.depth_path);
    EXPECT_EQ(depth.width(), meta.intrinsics.width);
    EXPECT_EQ(io::ReadPgm8(e.semantic_path).height(), meta.intrinsics.height);
    EXPECT_EQ(io::ReadPpm(e.color_path).width(), meta.intrinsics.width);
  }
  EXPECT_TRUE(MissingFiles(m, false).empty());
}

TEST(DatasetTest, WeatherCyclesAndSeedsDiffer) {
  DatasetOptions o = SmallOptions(16);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(SceneConfigFor(o, i).weather_id, static_cast<int>(i % 14));
  EXPECT_NE(SceneConfigFor(o, 0).seed, SceneConfigFor(o, 1).seed);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto c = SceneConfigFor(o, i);
    EXPECT_GE(c.vehicle_count, o.ranges.vehicle_min);
    EXPECT_LE(c.vehicle_count, o.ranges.vehicle_max);
    EXPECT_GE(c.pedestrian_count, o.ranges.pedestrian_min);
    EXPECT_LE(c.pedestrian_count, o.ranges.pedestrian_max);
  }
}

TEST(DatasetTest, RangesValidated) {
  DatasetOptions o = SmallOptions(1);
  o.ranges.vehicle_min = 10;
  o.ranges.vehicle_max = 5;
  testing::TempDir dir;
  EXPECT_THROW(GenerateDataset(o, dir.path()), InvalidArgument);
}

TEST(DatasetTest, DominantClassesCovered) {
  testing::TempDir dir;
  DatasetOptions o = SmallOptions(2);
  o.rig.lidar = world::LidarSpec{};
  const DatasetManifest m = GenerateDataset(o, dir.path());
  const Taxonomy& t = builtin_taxonomies().carla12;
  const ClassHistogram h = DatasetHistogram(m, t);
  for (const char* name : {"Building", "Road", "Sidewalk", "Vegetation", "Car"}) {
    EXPECT_GT(h.counts[t.IdOf(name)], 0u) << name;
  }
}

TEST(DatasetTest, ScenarioProducesOneFramePerStep) {
  testing::TempDir dir;
  DatasetOptions o = SmallOptions(1);
  world::ScenarioScript script;
  script.duration = 3;
  script.ego.rig = o.rig;
  o.scenario = script;
  const DatasetManifest m = GenerateDataset(o, dir.path());
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.entries[0].frame_id, "s0000_f0000");
  EXPECT_EQ(m.entries[2].frame_id, "s0000_f0002");
}

TEST(FrameMetaTest, RoundTripIsExact) {
  FrameMeta m;
  m.frame_id = "frame_00003";
  m.weather_id = 11;
  m.ego_pose = Pose::FromYawPitchRoll(0.3, 0.01, -0.02, {1.0 / 3.0, 2, 3});
  m.lidar_pose = m.ego_pose * Pose::FromTranslation(0, 0, 1.8);
  m.camera_pose = m.ego_pose * Pose(CameraToVehicleRotation(), Eigen::Vector3d(1, 0, 1.5));
  m.intrinsics = CameraIntrinsics::FromHorizontalFov(800, 600, 90);
  const FrameMeta back = ParseFrameMeta(SerializeFrameMeta(m));
  EXPECT_EQ(back.frame_id, m.frame_id);
  EXPECT_EQ(back.weather_id, m.weather_id);
  EXPECT_EQ(back.ego_pose, m.ego_pose);
  EXPECT_EQ(back.lidar_pose, m.lidar_pose);
  EXPECT_EQ(back.camera_pose, m.camera_pose);
  EXPECT_EQ(back.intrinsics, m.intrinsics);
  EXPECT_THROW(ParseFrameMeta("frame_id=x\n"), DataError);
}

}  // namespace
}  // namespace synseg
