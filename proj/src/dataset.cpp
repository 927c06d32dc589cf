#include "synseg/dataset.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <system_error>

#include "synseg/errors.hpp"
#include "synseg/io.hpp"
#include "synseg/rng.hpp"

namespace synseg {
namespace {

namespace fs = std::filesystem;

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string FormatPose(const Pose& p) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out += FormatDouble(p.rotation()(r, c)) + " ";
  }
  out += FormatDouble(p.translation().x()) + " " + FormatDouble(p.translation().y()) + " " +
         FormatDouble(p.translation().z());
  return out;
}

std::vector<double> ParseNumbers(const std::string& s, std::size_t expected, const std::string& key) {
  std::istringstream in(s);
  std::vector<double> out;
  std::string w;
  while (in >> w) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(w, &used));
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw DataError("frame meta: bad number '" + w + "' for key '" + key + "'");
    }
  }
  if (out.size() != expected) {
    throw DataError("frame meta: key '" + key + "' expects " + std::to_string(expected) + " numbers");
  }
  return out;
}

Pose ParsePose(const std::string& s, const std::string& key) {
  const auto v = ParseNumbers(s, 12, key);
  Eigen::Matrix3d r;
  for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = v[i];
  try {
    return Pose(r, Eigen::Vector3d(v[9], v[10], v[11]));
  } catch (const InvalidArgument& e) {
    throw DataError("frame meta: key '" + key + "': " + e.what());
  }
}

}  // namespace

void SceneRanges::Validate() const {
  if (vehicle_min < 0 || vehicle_max < vehicle_min) throw InvalidArgument("vehicle range must satisfy 0 <= min <= max");
  if (pedestrian_min < 0 || pedestrian_max < pedestrian_min) {
    throw InvalidArgument("pedestrian range must satisfy 0 <= min <= max");
  }
  if (!(town_extent > 0.0)) throw InvalidArgument("town_extent must be > 0");
  if (!(building_density >= 0.0 && building_density <= 1.0)) throw InvalidArgument("building_density must be in [0,1]");
  if (!(vegetation_density >= 0.0 && vegetation_density <= 1.0)) {
    throw InvalidArgument("vegetation_density must be in [0,1]");
  }
}

std::string SerializeFrameMeta(const FrameMeta& meta) {
  std::string out;
  out += "frame_id=" + meta.frame_id + "\n";
  out += "weather=" + std::to_string(meta.weather_id) + "\n";
  out += "ego_pose=" + FormatPose(meta.ego_pose) + "\n";
  out += "lidar_pose=" + FormatPose(meta.lidar_pose) + "\n";
  out += "camera_pose=" + FormatPose(meta.camera_pose) + "\n";
  const CameraIntrinsics& k = meta.intrinsics;
  out += "intrinsics=" + std::to_string(k.width) + " " + std::to_string(k.height) + " " + FormatDouble(k.fx) + " " +
         FormatDouble(k.fy) + " " + FormatDouble(k.cx) + " " + FormatDouble(k.cy) + "\n";
  return out;
}

FrameMeta ParseFrameMeta(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("frame meta: line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("frame meta: missing key '" + key + "'");
    return it->second;
  };
  FrameMeta meta;
  meta.frame_id = get("frame_id");
  meta.weather_id = static_cast<int>(ParseNumbers(get("weather"), 1, "weather")[0]);
  meta.ego_pose = ParsePose(get("ego_pose"), "ego_pose");
  meta.lidar_pose = ParsePose(get("lidar_pose"), "lidar_pose");
  meta.camera_pose = ParsePose(get("camera_pose"), "camera_pose");
  const auto k = ParseNumbers(get("intrinsics"), 6, "intrinsics");
  try {
    meta.intrinsics =
        CameraIntrinsics::Checked(static_cast<int>(k[0]), static_cast<int>(k[1]), k[2], k[3], k[4], k[5]);
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("frame meta: ") + e.what());
  }
  return meta;
}

void WriteFrameMeta(const FrameMeta& meta, const fs::path& path) { io::WriteFileAtomic(path, SerializeFrameMeta(meta)); }

FrameMeta ReadFrameMeta(const fs::path& path) { return ParseFrameMeta(io::ReadFile(path)); }

fs::path MetaPathFor(const ManifestEntry& entry) {
  fs::path p = entry.ply_path;
  p.replace_extension(".meta");
  return p;
}

world::SceneConfig SceneConfigFor(const DatasetOptions& options, std::size_t scene_index) {
  const SceneRanges& r = options.ranges;
  world::SceneConfig c;
  c.seed = MixSeed(options.seed, scene_index);
  Rng rng(MixSeed(c.seed, 0x5ce7e));
  c.vehicle_count = static_cast<int>(rng.UniformInt(r.vehicle_min, r.vehicle_max));
  c.pedestrian_count = static_cast<int>(rng.UniformInt(r.pedestrian_min, r.pedestrian_max));
  c.weather_id = static_cast<int>(scene_index % world::kWeatherCount);
  c.town_extent = r.town_extent;
  c.building_density = r.building_density;
  c.vegetation_density = r.vegetation_density;
  return c;
}

ManifestEntry WriteFrame(const world::SensorFrame& frame, const std::string& frame_id, const fs::path& out_dir) {
  ManifestEntry e;
  e.frame_id = frame_id;
  e.ply_path = fs::absolute(out_dir / (frame_id + ".ply"));
  e.depth_path = fs::absolute(out_dir / (frame_id + ".depth.pgm"));
  e.semantic_path = fs::absolute(out_dir / (frame_id + ".sem.pgm"));
  e.color_path = fs::absolute(out_dir / (frame_id + ".color.ppm"));
  e.point_count = frame.lidar.size();
  e.taxonomy = frame.lidar.taxonomy();
  io::WritePly(frame.lidar, e.ply_path);
  io::WritePgm16(frame.camera.depth, e.depth_path);
  io::WritePgm8(frame.camera.semantic, e.semantic_path);
  io::WritePpm(frame.camera.color, e.color_path);
  WriteFrameMeta({frame_id, frame.weather_id, frame.ego_pose, frame.lidar_pose, frame.camera_pose, frame.intrinsics},
                 MetaPathFor(e));
  return e;
}

DatasetManifest GenerateDataset(const DatasetOptions& options, const fs::path& out_dir) {
  if (options.scene_count < 1) throw InvalidArgument("scene_count must be >= 1");
  options.ranges.Validate();
  options.rig.lidar.Validate();
  if (options.scenario) options.scenario->Validate();

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir.string() + "'");
  }

  DatasetManifest manifest;
  for (std::size_t i = 0; i < options.scene_count; ++i) {
    const world::SceneConfig config = SceneConfigFor(options, i);
    const world::Scene scene = world::GenerateScene(config);
    char id[32];
    if (!options.scenario) {
      std::snprintf(id, sizeof id, "frame_%05zu", i);
      world::SensorFrame frame = world::CaptureFrame(scene, scene.ego_start, options.rig, config.weather_id);
      manifest.entries.push_back(WriteFrame(frame, id, out_dir));
      continue;
    }
    // Scenario frames use the script's own sensor rig.
    for (const world::SensorFrame& frame : world::RunScenario(*options.scenario, scene)) {
      std::snprintf(id, sizeof id, "s%04zu_f%04d", i, frame.index);
      manifest.entries.push_back(WriteFrame(frame, id, out_dir));
    }
  }
  WriteManifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace synseg
