#include "synseg/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <set>
#include <sstream>

#include "synseg/errors.hpp"
#include "synseg/io.hpp"

namespace synseg {
namespace {

std::string NormalizeName(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

Taxonomy Make(std::string name, std::initializer_list<std::pair<const char*, Rgb>> entries) {
  std::vector<ClassInfo> classes;
  LabelId id = 0;
  for (const auto& [n, c] : entries) classes.push_back({id++, n, c});
  return Taxonomy(std::move(name), std::move(classes));
}

std::string Trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

long ParseInt(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": expected integer, got '" + s + "'");
  }
}

}  // namespace

Taxonomy::Taxonomy(std::string name, std::vector<ClassInfo> classes)
    : name_(std::move(name)), classes_(std::move(classes)) {
  if (name_.empty()) throw InvalidArgument("taxonomy name must not be empty");
  if (classes_.empty()) throw InvalidArgument("taxonomy '" + name_ + "' has no classes");
  if (classes_.size() > 65536) throw InvalidArgument("taxonomy '" + name_ + "' exceeds 16-bit ids");
  std::set<std::tuple<int, int, int>> colors;
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const ClassInfo& c = classes_[i];
    if (c.id != i) throw InvalidArgument("taxonomy '" + name_ + "' ids must be contiguous from 0");
    if (!colors.insert({c.color.r, c.color.g, c.color.b}).second) {
      throw InvalidArgument("taxonomy '" + name_ + "' has duplicate color for class '" + c.name + "'");
    }
    if (!names.insert(NormalizeName(c.name)).second) {
      throw InvalidArgument("taxonomy '" + name_ + "' has duplicate class name '" + c.name + "'");
    }
  }
  if (NormalizeName(classes_[0].name) != "unlabelled") {
    throw InvalidArgument("taxonomy '" + name_ + "' id 0 must be 'unlabelled'");
  }
}

const ClassInfo& Taxonomy::at(LabelId id) const {
  if (!Contains(id)) {
    throw DataError("label id " + std::to_string(id) + " not in taxonomy '" + name_ + "'");
  }
  return classes_[id];
}

std::optional<LabelId> Taxonomy::Find(std::string_view class_name) const {
  const std::string key = NormalizeName(class_name);
  for (const ClassInfo& c : classes_) {
    if (NormalizeName(c.name) == key) return c.id;
  }
  // "unlabeled" is accepted for "unlabelled".
  if (key == "unlabeled") return kUnlabelled;
  return std::nullopt;
}

LabelId Taxonomy::IdOf(std::string_view class_name) const {
  if (auto id = Find(class_name)) return *id;
  throw DataError("class '" + std::string(class_name) + "' not in taxonomy '" + name_ + "'");
}

RemapTable::RemapTable(Taxonomy source, Taxonomy target, const std::vector<std::pair<LabelId, LabelId>>& pairs)
    : source_(std::move(source)), target_(std::move(target)), mapping_(source_.size(), kUnlabelled) {
  std::vector<bool> seen(source_.size(), false);
  for (const auto& [s, t] : pairs) {
    if (!source_.Contains(s)) throw InvalidArgument("remap source id " + std::to_string(s) + " out of range");
    if (!target_.Contains(t)) throw InvalidArgument("remap target id " + std::to_string(t) + " out of range");
    if (s == kUnlabelled && t != kUnlabelled) throw InvalidArgument("unlabelled must map to unlabelled");
    if (seen[s] && mapping_[s] != t) {
      throw InvalidArgument("remap source id " + std::to_string(s) + " mapped twice");
    }
    seen[s] = true;
    mapping_[s] = t;
  }
}

RemapTable RemapTable::FromNames(Taxonomy source, Taxonomy target,
                                 const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<std::pair<LabelId, LabelId>> ids;
  for (const auto& [s, t] : pairs) ids.emplace_back(source.IdOf(s), target.IdOf(t));
  return RemapTable(std::move(source), std::move(target), ids);
}

RemapTable RemapTable::Identity(const Taxonomy& taxonomy) {
  std::vector<std::pair<LabelId, LabelId>> ids;
  for (const ClassInfo& c : taxonomy.classes()) ids.emplace_back(c.id, c.id);
  return RemapTable(taxonomy, taxonomy, ids);
}

LabelId RemapTable::operator()(LabelId source_id) const {
  if (source_id >= mapping_.size()) {
    throw DataError("label id " + std::to_string(source_id) + " not in taxonomy '" + source_.name() + "'");
  }
  return mapping_[source_id];
}

const BuiltinTaxonomies& builtin_taxonomies() {
  static const BuiltinTaxonomies kTaxonomies = [] {
    BuiltinTaxonomies t;
    t.carla12 = Make("carla12", {{"unlabelled", {0, 0, 0}},
                                 {"Building", {70, 70, 70}},
                                 {"Fence", {190, 153, 153}},
                                 {"Other", {72, 0, 90}},
                                 {"Pedestrian", {220, 20, 60}},
                                 {"Pole", {153, 153, 153}},
                                 {"Road-line", {157, 234, 50}},
                                 {"Road", {128, 64, 128}},
                                 {"Sidewalk", {244, 35, 232}},
                                 {"Vegetation", {107, 142, 35}},
                                 {"Car", {0, 0, 255}},
                                 {"Wall", {102, 102, 156}},
                                 {"Traffic-sign", {220, 220, 0}}});
    t.kitti19 = Make("kitti19", {{"unlabelled", {0, 0, 0}},
                                 {"Road", {128, 64, 128}},
                                 {"Sidewalk", {244, 35, 232}},
                                 {"Building", {70, 70, 70}},
                                 {"Wall", {102, 102, 156}},
                                 {"Fence", {190, 153, 153}},
                                 {"Pole", {153, 153, 153}},
                                 {"Traffic Light", {250, 170, 30}},
                                 {"Traffic Sign", {220, 220, 0}},
                                 {"Vegetation", {107, 142, 35}},
                                 {"Terrain", {152, 251, 152}},
                                 {"Sky", {70, 130, 180}},
                                 {"Person", {220, 20, 60}},
                                 {"Rider", {255, 0, 0}},
                                 {"Car", {0, 0, 142}},
                                 {"Truck", {0, 0, 70}},
                                 {"Bus", {0, 60, 100}},
                                 {"Train", {0, 80, 100}},
                                 {"Motorcycle", {0, 0, 230}},
                                 {"Bicycle", {119, 11, 32}}});
    t.semantic3d8 = Make("semantic3d8", {{"unlabelled", {0, 0, 0}},
                                         {"Man-made Terrain", {0, 0, 255}},
                                         {"Natural Terrain", {128, 0, 0}},
                                         {"High-vegetation", {255, 0, 255}},
                                         {"Low-vegetation", {0, 128, 0}},
                                         {"Building", {255, 0, 0}},
                                         {"Hard Scape", {128, 0, 128}},
                                         {"Scanning Artefacts", {0, 0, 128}},
                                         {"Car", {128, 128, 0}}});
    t.common4 = Make("common4", {{"unlabelled", {0, 0, 0}},
                                 {"Building", {70, 70, 70}},
                                 {"Road", {128, 64, 128}},
                                 {"Car", {0, 0, 255}},
                                 {"Vegetation", {107, 142, 35}}});
    return t;
  }();
  return kTaxonomies;
}

const BuiltinRemaps& builtin_remaps() {
  static const BuiltinRemaps kRemaps = [] {
    const BuiltinTaxonomies& t = builtin_taxonomies();
    return BuiltinRemaps{
        RemapTable::FromNames(t.semantic3d8, t.common4,
                              {{"Building", "Building"},
                               {"Man-made Terrain", "Road"},
                               {"Car", "Car"},
                               {"High-vegetation", "Vegetation"},
                               {"Low-vegetation", "Vegetation"}}),
        RemapTable::FromNames(t.carla12, t.common4,
                              {{"Building", "Building"},
                               {"Road", "Road"},
                               {"Road-line", "Road"},
                               {"Car", "Car"},
                               {"Vegetation", "Vegetation"}}),
        RemapTable::FromNames(t.kitti19, t.common4,
                              {{"Building", "Building"},
                               {"Road", "Road"},
                               {"Car", "Car"},
                               {"Motorcycle", "Car"},
                               {"Bus", "Car"},
                               {"Bicycle", "Car"},
                               {"Vegetation", "Vegetation"}}),
        // Terrain, Sky, Rider, Truck, Bus, Motorcycle, Bicycle and Train fall
        // through to unlabelled. CARLA has no traffic-light class; lights
        // share the traffic-sign id.
        RemapTable::FromNames(t.kitti19, t.carla12,
                              {{"Road", "Road"},
                               {"Sidewalk", "Sidewalk"},
                               {"Building", "Building"},
                               {"Wall", "Wall"},
                               {"Fence", "Fence"},
                               {"Pole", "Pole"},
                               {"Traffic Light", "Traffic-sign"},
                               {"Traffic Sign", "Traffic-sign"},
                               {"Vegetation", "Vegetation"},
                               {"Person", "Pedestrian"},
                               {"Car", "Car"}}),
    };
  }();
  return kRemaps;
}

std::optional<Taxonomy> FindBuiltinTaxonomy(std::string_view name) {
  const BuiltinTaxonomies& t = builtin_taxonomies();
  for (const Taxonomy* tax : {&t.carla12, &t.kitti19, &t.semantic3d8, &t.common4}) {
    if (tax->name() == name) return *tax;
  }
  return std::nullopt;
}

std::optional<RemapTable> FindBuiltinRemap(std::string_view source, std::string_view target) {
  if (source == target) {
    if (auto t = FindBuiltinTaxonomy(source)) return RemapTable::Identity(*t);
    return std::nullopt;
  }
  for (const RemapTable* table : builtin_remaps().all()) {
    if (table->source().name() == source && table->target().name() == target) return *table;
  }
  return std::nullopt;
}

void ValidateLabels(const PointCloud& cloud, const Taxonomy& taxonomy) {
  if (!cloud.has_labels()) throw DataError("point cloud has no labels");
  if (cloud.taxonomy() != taxonomy.name()) {
    throw DataError("cloud taxonomy '" + cloud.taxonomy() + "' does not match '" + taxonomy.name() + "'");
  }
  for (LabelId id : cloud.labels()) {
    if (!taxonomy.Contains(id)) {
      throw DataError("label id " + std::to_string(id) + " not in taxonomy '" + taxonomy.name() + "'");
    }
  }
}

PointCloud RemapCloud(const PointCloud& cloud, const RemapTable& table) {
  if (!cloud.has_labels()) throw DataError("cannot remap: point cloud has no labels");
  ValidateLabels(cloud, table.source());
  std::vector<LabelId> out;
  out.reserve(cloud.size());
  for (LabelId id : cloud.labels()) out.push_back(table.mapping()[id]);
  return cloud.WithLabels(std::move(out), table.target().name());
}

PointCloud ColorizeByLabel(const PointCloud& cloud, const Taxonomy& taxonomy) {
  ValidateLabels(cloud, taxonomy);
  std::vector<Rgb> colors;
  colors.reserve(cloud.size());
  for (LabelId id : cloud.labels()) colors.push_back(taxonomy.ColorOf(id));
  return cloud.WithColors(std::move(colors));
}

std::size_t ClassHistogram::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

void AddToHistogram(ClassHistogram& histogram, const PointCloud& cloud) {
  if (cloud.taxonomy() != histogram.taxonomy.name()) {
    throw DataError("taxonomy mismatch: cloud is '" + cloud.taxonomy() + "', histogram is '" +
                    histogram.taxonomy.name() + "'");
  }
  ValidateLabels(cloud, histogram.taxonomy);
  for (LabelId id : cloud.labels()) ++histogram.counts[id];
}

ClassHistogram Histogram(std::span<const PointCloud> clouds, const Taxonomy& taxonomy) {
  ClassHistogram h{taxonomy, std::vector<std::size_t>(taxonomy.size(), 0)};
  for (const PointCloud& cloud : clouds) AddToHistogram(h, cloud);
  return h;
}

std::string FormatHistogram(const ClassHistogram& histogram) {
  std::size_t width = 5;
  for (const ClassInfo& c : histogram.taxonomy.classes()) width = std::max(width, c.name.size());
  const double total = static_cast<double>(histogram.total());
  std::ostringstream out;
  out << std::left << std::setw(4) << "id" << "  " << std::setw(static_cast<int>(width)) << "class" << "  "
      << std::right << std::setw(12) << "points" << "  " << std::setw(8) << "share" << '\n';
  for (const ClassInfo& c : histogram.taxonomy.classes()) {
    const std::size_t n = histogram.counts[c.id];
    out << std::left << std::setw(4) << c.id << "  " << std::setw(static_cast<int>(width)) << c.name << "  "
        << std::right << std::setw(12) << n << "  " << std::setw(7) << std::fixed << std::setprecision(2)
        << (total > 0 ? 100.0 * n / total : 0.0) << "%\n";
  }
  return out.str();
}

std::string SerializeTaxonomy(const Taxonomy& taxonomy) {
  std::ostringstream out;
  out << "# taxonomy: " << taxonomy.name() << '\n';
  for (const ClassInfo& c : taxonomy.classes()) {
    out << c.id << '\t' << c.name << '\t' << int(c.color.r) << ',' << int(c.color.g) << ',' << int(c.color.b)
        << '\n';
  }
  return out.str();
}

Taxonomy ParseTaxonomy(std::string_view text, std::string name) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<ClassInfo> classes;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "taxonomy line " + std::to_string(line_no);
    line = Trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# taxonomy:";
      if (line.rfind(key, 0) == 0) name = Trim(line.substr(key.size()));
      continue;
    }
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError(where + ": expected id<TAB>name<TAB>r,g,b");
    ClassInfo c;
    const long id = ParseInt(Trim(line.substr(0, t1)), where);
    if (id < 0 || id > 65535) throw DataError(where + ": id out of range");
    c.id = static_cast<LabelId>(id);
    c.name = Trim(line.substr(t1 + 1, t2 - t1 - 1));
    std::istringstream rgb(line.substr(t2 + 1));
    std::string part;
    int channel[3];
    for (int k = 0; k < 3; ++k) {
      if (!std::getline(rgb, part, ',')) throw DataError(where + ": expected r,g,b");
      const long v = ParseInt(Trim(part), where);
      if (v < 0 || v > 255) throw DataError(where + ": color channel out of [0,255]");
      channel[k] = static_cast<int>(v);
    }
    if (std::getline(rgb, part, ',')) throw DataError(where + ": too many color channels");
    c.color = {static_cast<std::uint8_t>(channel[0]), static_cast<std::uint8_t>(channel[1]),
               static_cast<std::uint8_t>(channel[2])};
    classes.push_back(std::move(c));
  }
  std::sort(classes.begin(), classes.end(), [](const ClassInfo& a, const ClassInfo& b) { return a.id < b.id; });
  try {
    return Taxonomy(std::move(name), std::move(classes));
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
}

Taxonomy ReadTaxonomyFile(const std::filesystem::path& path) {
  return ParseTaxonomy(io::ReadFile(path), path.stem().string());
}

std::string SerializeRemap(const RemapTable& table) {
  std::ostringstream out;
  out << "# remap: " << table.source().name() << " -> " << table.target().name() << '\n';
  for (std::size_t s = 0; s < table.mapping().size(); ++s) out << s << '\t' << table.mapping()[s] << '\n';
  return out.str();
}

RemapTable ParseRemap(std::string_view text, const Taxonomy& source, const Taxonomy& target) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::pair<LabelId, LabelId>> pairs;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "remap line " + std::to_string(line_no);
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + ": expected source_id<TAB>target_id");
    const long s = ParseInt(Trim(line.substr(0, tab)), where);
    const long t = ParseInt(Trim(line.substr(tab + 1)), where);
    if (s < 0 || s > 65535 || t < 0 || t > 65535) throw DataError(where + ": id out of range");
    pairs.emplace_back(static_cast<LabelId>(s), static_cast<LabelId>(t));
  }
  try {
    return RemapTable(source, target, pairs);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
}

}  // namespace synseg
