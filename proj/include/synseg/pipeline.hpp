#pragma once

// Dataset-level operations composed from the per-frame modules.

#include <filesystem>

#include "synseg/fusion.hpp"
#include "synseg/manifest.hpp"
#include "synseg/taxonomy.hpp"

namespace synseg {

enum class FuseSource { kLidar, kDepth };

struct FuseDatasetOptions {
  FuseSource source = FuseSource::kLidar;
  // Drop points outside the camera frustum instead of labelling them 0.
  bool crop = false;
  bool depth_check = false;
  double depth_threshold = 0.2;
};

// Fuses one frame: the LiDAR cloud (moved to the world frame) or the
// back-projected depth image takes labels and colors from the frame's
// semantic and color images. Output is in the world frame.
PointCloud FuseFrame(const ManifestEntry& entry, const FuseDatasetOptions& options);

// Writes <out_dir>/<frame_id>.ply (+ .meta) for every frame and
// <out_dir>/manifest.tsv. Image paths in the new manifest point at the
// original images.
DatasetManifest FuseDataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                            const FuseDatasetOptions& options);

// Remaps every frame's labels and writes a new dataset.
DatasetManifest RemapDataset(const DatasetManifest& manifest, const RemapTable& table,
                             const std::filesystem::path& out_dir);

ClassHistogram DatasetHistogram(const DatasetManifest& manifest, const Taxonomy& taxonomy);

}  // namespace synseg
