#include "synseg/pipeline.hpp"

#include <system_error>

#include "synseg/dataset.hpp"
#include "synseg/errors.hpp"
#include "synseg/io.hpp"

namespace synseg {
namespace {

namespace fs = std::filesystem;

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

// Copies the entry to out_dir with a new cloud, keeping image paths.
ManifestEntry WriteDerived(const ManifestEntry& entry, const PointCloud& cloud, const fs::path& out_dir) {
  ManifestEntry e = entry;
  e.ply_path = fs::absolute(out_dir / (entry.frame_id + ".ply"));
  e.point_count = cloud.size();
  e.taxonomy = cloud.taxonomy();
  io::WritePly(cloud, e.ply_path);
  const fs::path meta = MetaPathFor(entry);
  if (fs::exists(meta)) io::WriteFileAtomic(MetaPathFor(e), io::ReadFile(meta));
  return e;
}

}  // namespace

PointCloud FuseFrame(const ManifestEntry& entry, const FuseDatasetOptions& options) {
  if (entry.semantic_path.empty() || entry.color_path.empty()) {
    throw DataError("frame '" + entry.frame_id + "' has no semantic/color images to fuse");
  }
  const FrameMeta meta = ReadFrameMeta(MetaPathFor(entry));
  const SemanticImage semantic = io::ReadPgm8(entry.semantic_path);
  const ColorImage color = io::ReadPpm(entry.color_path);
  std::optional<DepthImage> depth;
  if (options.source == FuseSource::kDepth || options.depth_check) {
    if (entry.depth_path.empty()) throw DataError("frame '" + entry.frame_id + "' has no depth image");
    depth = io::ReadPgm16(entry.depth_path);
  }

  PointCloud world;
  if (options.source == FuseSource::kLidar) {
    world = TransformCloud(io::ReadPly(entry.ply_path), meta.lidar_pose);
  } else {
    world = Backproject(*depth, meta.intrinsics, meta.camera_pose);
  }
  FuseOptions fo;
  if (options.depth_check) {
    fo.depth_check = &*depth;
    fo.depth_threshold = options.depth_threshold;
  }
  const std::string taxonomy = entry.taxonomy.empty() ? "carla12" : entry.taxonomy;
  PointCloud fused = Fuse(world.WithoutColors(), semantic, color, meta.intrinsics, meta.camera_pose, taxonomy, fo);
  if (!options.crop) return fused;

  std::vector<Point3> pos;
  std::vector<Rgb> col;
  std::vector<LabelId> lab;
  for (std::size_t i : InFrustumIndices(fused, meta.intrinsics, meta.camera_pose, fo)) {
    pos.push_back(fused.positions()[i]);
    col.push_back(fused.colors()[i]);
    lab.push_back(fused.labels()[i]);
  }
  return PointCloud(std::move(pos), std::move(col), std::move(lab), taxonomy);
}

DatasetManifest FuseDataset(const DatasetManifest& manifest, const fs::path& out_dir, const FuseDatasetOptions& options) {
  if (manifest.empty()) throw InvalidArgument("empty manifest");
  EnsureDir(out_dir);
  DatasetManifest out;
  for (const ManifestEntry& e : manifest.entries) out.entries.push_back(WriteDerived(e, FuseFrame(e, options), out_dir));
  WriteManifest(out, out_dir / "manifest.tsv");
  return out;
}

DatasetManifest RemapDataset(const DatasetManifest& manifest, const RemapTable& table, const fs::path& out_dir) {
  if (manifest.empty()) throw InvalidArgument("empty manifest");
  EnsureDir(out_dir);
  DatasetManifest out;
  for (const ManifestEntry& e : manifest.entries) {
    out.entries.push_back(WriteDerived(e, RemapCloud(io::ReadPly(e.ply_path), table), out_dir));
  }
  WriteManifest(out, out_dir / "manifest.tsv");
  return out;
}

ClassHistogram DatasetHistogram(const DatasetManifest& manifest, const Taxonomy& taxonomy) {
  ClassHistogram h{taxonomy, std::vector<std::size_t>(taxonomy.size(), 0)};
  for (const ManifestEntry& e : manifest.entries) AddToHistogram(h, io::ReadPly(e.ply_path));
  return h;
}

}  // namespace synseg
