#include "synseg/manifest.hpp"

#include <sstream>

#include "synseg/errors.hpp"
#include "synseg/io.hpp"

namespace synseg {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

fs::path Resolve(const fs::path& base, const std::string& field) {
  if (field == "-" || field.empty()) return {};
  fs::path p(field);
  return p.is_absolute() ? p : base / p;
}

std::string Relativize(const fs::path& base, const fs::path& p) {
  if (p.empty()) return "-";
  std::error_code ec;
  const fs::path abs_base = fs::weakly_canonical(base, ec);
  const fs::path abs_p = fs::weakly_canonical(p, ec);
  const fs::path rel = abs_p.lexically_relative(abs_base);
  if (!rel.empty() && *rel.begin() != "..") return rel.string();
  return p.string();
}

}  // namespace

DatasetManifest ReadManifest(const fs::path& path) {
  const std::string text = io::ReadFile(path);
  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = SplitTabs(line);
    if (f.size() != 7) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 7 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    ManifestEntry e;
    e.frame_id = f[0];
    e.ply_path = Resolve(base, f[1]);
    e.depth_path = Resolve(base, f[2]);
    e.semantic_path = Resolve(base, f[3]);
    e.color_path = Resolve(base, f[4]);
    try {
      std::size_t used = 0;
      const long long n = std::stoll(f[5], &used);
      if (used != f[5].size() || n < 0) throw std::invalid_argument("count");
      e.point_count = static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad point count '" + f[5] + "'");
    }
    e.taxonomy = f[6];
    if (e.frame_id.empty() || e.ply_path.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": frame id and ply path are required");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void WriteManifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::ostringstream out;
  for (const ManifestEntry& e : manifest.entries) {
    out << e.frame_id << '\t' << Relativize(base, e.ply_path) << '\t' << Relativize(base, e.depth_path) << '\t'
        << Relativize(base, e.semantic_path) << '\t' << Relativize(base, e.color_path) << '\t' << e.point_count
        << '\t' << e.taxonomy << '\n';
  }
  io::WriteFileAtomic(path, out.str());
}

std::vector<fs::path> MissingFiles(const DatasetManifest& manifest, bool ply_only) {
  std::vector<fs::path> missing;
  for (const ManifestEntry& e : manifest.entries) {
    std::vector<const fs::path*> paths = {&e.ply_path};
    if (!ply_only) {
      paths.push_back(&e.depth_path);
      paths.push_back(&e.semantic_path);
      paths.push_back(&e.color_path);
    }
    for (const fs::path* p : paths) {
      if (!p->empty() && !fs::exists(*p)) missing.push_back(*p);
    }
  }
  return missing;
}

}  // namespace synseg
