#pragma once

// Dataset manifest: the RAM-resident index of a dataset on disk. One frame
// per line:
//
//   frame_id <TAB> ply <TAB> depth <TAB> semantic <TAB> color <TAB> point_count <TAB> taxonomy
//
// Relative paths are resolved against the manifest's directory. A "-" marks
// an absent image.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace synseg {

struct ManifestEntry {
  std::string frame_id;
  std::filesystem::path ply_path;
  std::filesystem::path depth_path;
  std::filesystem::path semantic_path;
  std::filesystem::path color_path;
  std::size_t point_count = 0;
  std::string taxonomy;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Paths in the returned manifest are absolute (or relative to the cwd when
// the manifest path was).
DatasetManifest ReadManifest(const std::filesystem::path& path);
// Paths under the manifest's directory are written relative to it.
void WriteManifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Files referenced by the manifest that do not exist.
std::vector<std::filesystem::path> MissingFiles(const DatasetManifest& manifest, bool ply_only = true);

}  // namespace synseg
