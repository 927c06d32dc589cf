#pragma once

// Label taxonomies (CARLA-12, KITTI-19, Semantic-3D-8, common-4), remap
// tables between them, and class histograms.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synseg/pcdcore.hpp"

namespace synseg {

struct ClassInfo {
  LabelId id = 0;
  std::string name;
  Rgb color;

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

// Ordered class list. Ids are contiguous from 0, id 0 is "unlabelled",
// colors are unique.
class Taxonomy {
 public:
  Taxonomy() = default;
  Taxonomy(std::string name, std::vector<ClassInfo> classes);

  const std::string& name() const { return name_; }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }

  bool Contains(LabelId id) const { return id < classes_.size(); }
  const ClassInfo& at(LabelId id) const;
  const Rgb& ColorOf(LabelId id) const { return at(id).color; }
  // Case-insensitive and ignores '-', '_' and spaces ("Side-walk" == "sidewalk").
  std::optional<LabelId> Find(std::string_view class_name) const;
  LabelId IdOf(std::string_view class_name) const;

  friend bool operator==(const Taxonomy&, const Taxonomy&) = default;

 private:
  std::string name_;
  std::vector<ClassInfo> classes_;
};

// Total map from source ids to target ids. Any source id not in the
// explicit pair list maps to unlabelled.
class RemapTable {
 public:
  RemapTable(Taxonomy source, Taxonomy target, const std::vector<std::pair<LabelId, LabelId>>& pairs);
  // Pairs given by class name.
  static RemapTable FromNames(Taxonomy source, Taxonomy target,
                              const std::vector<std::pair<std::string, std::string>>& pairs);
  static RemapTable Identity(const Taxonomy& taxonomy);

  const Taxonomy& source() const { return source_; }
  const Taxonomy& target() const { return target_; }
  const std::vector<LabelId>& mapping() const { return mapping_; }
  LabelId operator()(LabelId source_id) const;

 private:
  Taxonomy source_;
  Taxonomy target_;
  std::vector<LabelId> mapping_;
};

struct BuiltinTaxonomies {
  Taxonomy carla12;
  Taxonomy kitti19;
  Taxonomy semantic3d8;
  Taxonomy common4;
};

const BuiltinTaxonomies& builtin_taxonomies();

struct BuiltinRemaps {
  RemapTable semantic3d8_to_common4;
  RemapTable carla12_to_common4;
  RemapTable kitti19_to_common4;
  RemapTable kitti19_to_carla12;

  std::vector<const RemapTable*> all() const {
    return {&semantic3d8_to_common4, &carla12_to_common4, &kitti19_to_common4, &kitti19_to_carla12};
  }
};

const BuiltinRemaps& builtin_remaps();

// Built-in taxonomy by name ("carla12", "kitti19", "semantic3d8", "common4").
std::optional<Taxonomy> FindBuiltinTaxonomy(std::string_view name);
// Built-in remap table between two built-in taxonomies, if one exists.
std::optional<RemapTable> FindBuiltinRemap(std::string_view source, std::string_view target);

// Throws DataError if the cloud is unlabelled, declares a different
// taxonomy, or carries ids outside it.
void ValidateLabels(const PointCloud& cloud, const Taxonomy& taxonomy);

PointCloud RemapCloud(const PointCloud& cloud, const RemapTable& table);

// Replaces colors by the palette color of each point's label.
PointCloud ColorizeByLabel(const PointCloud& cloud, const Taxonomy& taxonomy);

struct ClassHistogram {
  Taxonomy taxonomy;
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

// All clouds must be labelled in `taxonomy`.
ClassHistogram Histogram(std::span<const PointCloud> clouds, const Taxonomy& taxonomy);
// Accumulates one more cloud into an existing histogram.
void AddToHistogram(ClassHistogram& histogram, const PointCloud& cloud);
std::string FormatHistogram(const ClassHistogram& histogram);

// Text formats: taxonomy lines are "id<TAB>name<TAB>r,g,b", remap lines
// are "source_id<TAB>target_id". '#' starts a comment line.
std::string SerializeTaxonomy(const Taxonomy& taxonomy);
Taxonomy ParseTaxonomy(std::string_view text, std::string name);
Taxonomy ReadTaxonomyFile(const std::filesystem::path& path);
std::string SerializeRemap(const RemapTable& table);
RemapTable ParseRemap(std::string_view text, const Taxonomy& source, const Taxonomy& target);

}  // namespace synseg
