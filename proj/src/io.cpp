#include "synseg/io.hpp"

#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "synseg/errors.hpp"

namespace synseg::io {
namespace {

static_assert(std::endian::native == std::endian::little, "PLY/PGM codecs assume a little-endian host");

using Kind = FormatError::Kind;

template <typename T>
void AppendRaw(std::string& out, const T& value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T LoadRaw(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

std::vector<std::string> Tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

enum class PropType { kDouble, kUint8, kUint16 };

PropType ParsePropType(const std::string& name, std::size_t offset) {
  if (name == "double" || name == "float64") return PropType::kDouble;
  if (name == "uchar" || name == "uint8") return PropType::kUint8;
  if (name == "ushort" || name == "uint16") return PropType::kUint16;
  throw FormatError(Kind::kUnsupportedProperty, offset, "property type '" + name + "'");
}

// Netpbm header reader: magic, then whitespace/comment separated integers.
struct NetpbmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t payload = 0;
};

NetpbmHeader ParseNetpbm(std::string_view bytes, std::string_view magic) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
    throw FormatError(Kind::kBadMagic, 0, "expected '" + std::string(magic) + "'");
  }
  std::size_t pos = 2;
  int values[3] = {0, 0, 0};
  for (int& value : values) {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1LL << 30)) throw FormatError(Kind::kMalformedHeader, start, "header value too large");
      ++pos;
    }
    if (pos == start) throw FormatError(Kind::kMalformedHeader, start, "expected integer");
    value = static_cast<int>(v);
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(Kind::kMalformedHeader, pos, "expected single whitespace after maxval");
  }
  ++pos;
  NetpbmHeader h{values[0], values[1], values[2], pos};
  if (h.width < 1 || h.height < 1) throw FormatError(Kind::kMalformedHeader, 2, "zero image dimension");
  return h;
}

void CheckPayload(std::string_view bytes, const NetpbmHeader& h, std::size_t bytes_per_pixel) {
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * bytes_per_pixel;
  if (bytes.size() - h.payload < need) {
    throw FormatError(Kind::kTruncatedPayload, bytes.size(),
                      "expected " + std::to_string(need) + " payload bytes, found " +
                          std::to_string(bytes.size() - h.payload));
  }
}

std::string NetpbmPreamble(std::string_view magic, int width, int height, int maxval) {
  std::ostringstream out;
  out << magic << '\n' << width << ' ' << height << '\n' << maxval << '\n';
  return out.str();
}

}  // namespace

void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "'");
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string EncodePly(const PointCloud& cloud) {
  std::string out;
  out += "ply\nformat binary_little_endian 1.0\n";
  if (!cloud.taxonomy().empty()) out += "comment taxonomy " + cloud.taxonomy() + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_labels()) out += "property ushort label\n";
  out += "end_header\n";
  const std::size_t stride = 24 + (cloud.has_colors() ? 3 : 0) + (cloud.has_labels() ? 2 : 0);
  out.reserve(out.size() + stride * cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.positions()[i];
    AppendRaw(out, p.x);
    AppendRaw(out, p.y);
    AppendRaw(out, p.z);
    if (cloud.has_colors()) {
      const Rgb& c = cloud.colors()[i];
      out.push_back(static_cast<char>(c.r));
      out.push_back(static_cast<char>(c.g));
      out.push_back(static_cast<char>(c.b));
    }
    if (cloud.has_labels()) AppendRaw(out, cloud.labels()[i]);
  }
  return out;
}

namespace {

struct PlyLayout {
  std::size_t vertex_count = 0;
  std::size_t payload = 0;
  std::string taxonomy;
  // Property order as declared, by name.
  std::vector<std::pair<std::string, PropType>> properties;
};

PlyLayout ParsePlyHeader(std::string_view bytes) {
  PlyLayout layout;
  std::size_t pos = 0;
  auto next_line = [&](std::size_t& line_start) -> std::string {
    line_start = pos;
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw FormatError(Kind::kMalformedHeader, pos, "header not terminated by end_header");
    }
    std::string line(bytes.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    return line;
  };

  std::size_t at = 0;
  if (next_line(at) != "ply") throw FormatError(Kind::kBadMagic, 0, "missing 'ply' magic");
  bool have_format = false;
  bool have_vertex = false;
  bool in_vertex = false;
  while (true) {
    const std::string line = next_line(at);
    const auto tok = Tokens(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok.size() >= 3 && tok[0] == "comment" && tok[1] == "taxonomy") layout.taxonomy = tok[2];
      continue;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) throw FormatError(Kind::kMalformedHeader, at, "bad format line");
      if (tok[1] != "binary_little_endian" || tok[2] != "1.0") {
        throw FormatError(Kind::kUnsupportedProperty, at, "format '" + tok[1] + " " + tok[2] + "'");
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw FormatError(Kind::kMalformedHeader, at, "bad element line");
      if (tok[1] != "vertex" || have_vertex) {
        throw FormatError(Kind::kUnsupportedProperty, at, "element '" + tok[1] + "'");
      }
      try {
        std::size_t used = 0;
        const long long n = std::stoll(tok[2], &used);
        if (used != tok[2].size() || n < 0) throw std::invalid_argument("count");
        layout.vertex_count = static_cast<std::size_t>(n);
      } catch (const std::exception&) {
        throw FormatError(Kind::kMalformedHeader, at, "bad vertex count '" + tok[2] + "'");
      }
      have_vertex = true;
      in_vertex = true;
    } else if (tok[0] == "property") {
      if (!in_vertex) throw FormatError(Kind::kMalformedHeader, at, "property outside element");
      if (tok.size() != 3) {
        throw FormatError(tok.size() > 3 && tok[1] == "list" ? Kind::kUnsupportedProperty : Kind::kMalformedHeader,
                          at, "property line '" + line + "'");
      }
      const PropType type = ParsePropType(tok[1], at);
      const std::string& name = tok[2];
      const bool ok = ((name == "x" || name == "y" || name == "z") && type == PropType::kDouble) ||
                      ((name == "red" || name == "green" || name == "blue") && type == PropType::kUint8) ||
                      (name == "label" && type == PropType::kUint16);
      if (!ok) throw FormatError(Kind::kUnsupportedProperty, at, "property '" + tok[1] + " " + name + "'");
      for (const auto& [existing, _] : layout.properties) {
        if (existing == name) throw FormatError(Kind::kMalformedHeader, at, "duplicate property '" + name + "'");
      }
      layout.properties.emplace_back(name, type);
    } else {
      throw FormatError(Kind::kMalformedHeader, at, "unknown header keyword '" + tok[0] + "'");
    }
  }
  if (!have_format) throw FormatError(Kind::kMalformedHeader, at, "missing format line");
  if (!have_vertex) throw FormatError(Kind::kMalformedHeader, at, "missing vertex element");
  layout.payload = pos;
  return layout;
}

std::size_t TypeSize(PropType t) {
  switch (t) {
    case PropType::kDouble: return 8;
    case PropType::kUint8: return 1;
    case PropType::kUint16: return 2;
  }
  return 0;
}

}  // namespace

PointCloud DecodePly(std::string_view bytes) {
  const PlyLayout layout = ParsePlyHeader(bytes);
  auto has = [&](const char* name) {
    for (const auto& [n, _] : layout.properties) {
      if (n == name) return true;
    }
    return false;
  };
  if (!has("x") || !has("y") || !has("z")) {
    throw FormatError(Kind::kMalformedHeader, layout.payload, "vertex element lacks x/y/z");
  }
  const int color_props = int(has("red")) + int(has("green")) + int(has("blue"));
  if (color_props != 0 && color_props != 3) {
    throw FormatError(Kind::kMalformedHeader, layout.payload, "partial color properties");
  }
  const bool colors = color_props == 3;
  const bool labels = has("label");
  if (labels && layout.taxonomy.empty()) {
    throw FormatError(Kind::kMalformedHeader, layout.payload, "labelled PLY lacks 'comment taxonomy'");
  }

  std::vector<std::size_t> offsets;
  std::size_t stride = 0;
  for (const auto& [_, type] : layout.properties) {
    offsets.push_back(stride);
    stride += TypeSize(type);
  }
  const std::size_t available = bytes.size() - layout.payload;
  if (available < stride * layout.vertex_count) {
    const std::size_t complete = available / stride;
    throw FormatError(Kind::kTruncatedPayload, layout.payload + complete * stride,
                      "header declares " + std::to_string(layout.vertex_count) + " vertices, payload holds " +
                          std::to_string(complete));
  }

  std::vector<Point3> positions(layout.vertex_count);
  std::vector<Rgb> rgb(colors ? layout.vertex_count : 0);
  std::vector<LabelId> ids(labels ? layout.vertex_count : 0);
  for (std::size_t i = 0; i < layout.vertex_count; ++i) {
    const char* rec = bytes.data() + layout.payload + i * stride;
    for (std::size_t k = 0; k < layout.properties.size(); ++k) {
      const std::string& name = layout.properties[k].first;
      const char* f = rec + offsets[k];
      if (name == "x") positions[i].x = LoadRaw<double>(f);
      else if (name == "y") positions[i].y = LoadRaw<double>(f);
      else if (name == "z") positions[i].z = LoadRaw<double>(f);
      else if (name == "red") rgb[i].r = static_cast<std::uint8_t>(*f);
      else if (name == "green") rgb[i].g = static_cast<std::uint8_t>(*f);
      else if (name == "blue") rgb[i].b = static_cast<std::uint8_t>(*f);
      else if (name == "label") ids[i] = LoadRaw<std::uint16_t>(f);
    }
    if (!positions[i].IsFinite()) {
      throw FormatError(Kind::kTruncatedPayload, layout.payload + i * stride, "non-finite vertex coordinate");
    }
  }
  return PointCloud(std::move(positions), colors ? std::optional(std::move(rgb)) : std::nullopt,
                    labels ? std::optional(std::move(ids)) : std::nullopt, labels ? layout.taxonomy : std::string{});
}

void WritePly(const PointCloud& cloud, const std::filesystem::path& path) { WriteFileAtomic(path, EncodePly(cloud)); }

PointCloud ReadPly(const std::filesystem::path& path) { return DecodePly(ReadFile(path)); }

std::size_t ReadPlyVertexCount(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string header;
  std::string line;
  while (std::getline(in, line)) {
    header += line + "\n";
    if (line == "end_header" || line == "end_header\r") break;
    if (header.size() > 1 << 16) break;
  }
  return ParsePlyHeader(header).vertex_count;
}

std::string EncodePgm16(const DepthImage& depth) {
  ValidateDepth(depth);
  std::string out = NetpbmPreamble("P5", depth.width(), depth.height(), 65535);
  out.reserve(out.size() + depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = depth.data()[i];
    if (d >= kMaxEncodableDepth) {
      throw EncodingRangeError("depth " + std::to_string(d) + " m at pixel " + std::to_string(i) +
                               " exceeds 16-bit millimeter range");
    }
    const auto mm = static_cast<std::uint16_t>(std::llround(d * 1000.0));
    out.push_back(static_cast<char>(mm >> 8));
    out.push_back(static_cast<char>(mm & 0xff));
  }
  return out;
}

DepthImage DecodePgm16(std::string_view bytes) {
  const NetpbmHeader h = ParseNetpbm(bytes, "P5");
  if (h.maxval != 65535) throw FormatError(Kind::kUnsupportedProperty, 2, "depth PGM maxval must be 65535");
  CheckPayload(bytes, h, 2);
  std::vector<double> depths(static_cast<std::size_t>(h.width) * h.height);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload);
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const unsigned mm = (unsigned(p[2 * i]) << 8) | unsigned(p[2 * i + 1]);
    depths[i] = mm / 1000.0;
  }
  return DepthImage(h.width, h.height, std::move(depths));
}

void WritePgm16(const DepthImage& depth, const std::filesystem::path& path) {
  WriteFileAtomic(path, EncodePgm16(depth));
}

DepthImage ReadPgm16(const std::filesystem::path& path) { return DecodePgm16(ReadFile(path)); }

std::string EncodePgm8(const SemanticImage& labels) {
  std::string out = NetpbmPreamble("P5", labels.width(), labels.height(), 255);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LabelId id = labels.data()[i];
    if (id > 255) throw EncodingRangeError("label id " + std::to_string(id) + " does not fit 8-bit PGM");
    out.push_back(static_cast<char>(id));
  }
  return out;
}

SemanticImage DecodePgm8(std::string_view bytes) {
  const NetpbmHeader h = ParseNetpbm(bytes, "P5");
  if (h.maxval != 255) throw FormatError(Kind::kUnsupportedProperty, 2, "semantic PGM maxval must be 255");
  CheckPayload(bytes, h, 1);
  std::vector<LabelId> ids(static_cast<std::size_t>(h.width) * h.height);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = p[i];
  return SemanticImage(h.width, h.height, std::move(ids));
}

void WritePgm8(const SemanticImage& labels, const std::filesystem::path& path) {
  WriteFileAtomic(path, EncodePgm8(labels));
}

SemanticImage ReadPgm8(const std::filesystem::path& path) { return DecodePgm8(ReadFile(path)); }

std::string EncodePpm(const ColorImage& image) {
  std::string out = NetpbmPreamble("P6", image.width(), image.height(), 255);
  for (const Rgb& c : image.data()) {
    out.push_back(static_cast<char>(c.r));
    out.push_back(static_cast<char>(c.g));
    out.push_back(static_cast<char>(c.b));
  }
  return out;
}

ColorImage DecodePpm(std::string_view bytes) {
  const NetpbmHeader h = ParseNetpbm(bytes, "P6");
  if (h.maxval != 255) throw FormatError(Kind::kUnsupportedProperty, 2, "PPM maxval must be 255");
  CheckPayload(bytes, h, 3);
  std::vector<Rgb> px(static_cast<std::size_t>(h.width) * h.height);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
  return ColorImage(h.width, h.height, std::move(px));
}

void WritePpm(const ColorImage& image, const std::filesystem::path& path) { WriteFileAtomic(path, EncodePpm(image)); }

ColorImage ReadPpm(const std::filesystem::path& path) { return DecodePpm(ReadFile(path)); }

}  // namespace synseg::io
