#pragma once

// On-disk formats for clouds and images.
//
//   PLY  binary_little_endian 1.0, element vertex with
//        double x,y,z; optional uchar red,green,blue; optional ushort label.
//        The label taxonomy is recorded as "comment taxonomy <name>".
//   PGM  P5. 16-bit big-endian millimeters for depth (maxval 65535),
//        8-bit label ids for semantic images (maxval 255).
//   PPM  P6, 8-bit RGB.
//
// Every writer goes through WriteFileAtomic (temp file + rename).

#include <filesystem>
#include <string>
#include <string_view>

#include "synseg/pcdcore.hpp"

namespace synseg::io {

void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes);
std::string ReadFile(const std::filesystem::path& path);

std::string EncodePly(const PointCloud& cloud);
PointCloud DecodePly(std::string_view bytes);
void WritePly(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud ReadPly(const std::filesystem::path& path);
// Reads only the header and returns the declared vertex count.
std::size_t ReadPlyVertexCount(const std::filesystem::path& path);

// Largest encodable depth is strictly below this many meters.
inline constexpr double kMaxEncodableDepth = 65.535;

std::string EncodePgm16(const DepthImage& depth);
DepthImage DecodePgm16(std::string_view bytes);
void WritePgm16(const DepthImage& depth, const std::filesystem::path& path);
DepthImage ReadPgm16(const std::filesystem::path& path);

std::string EncodePgm8(const SemanticImage& labels);
SemanticImage DecodePgm8(std::string_view bytes);
void WritePgm8(const SemanticImage& labels, const std::filesystem::path& path);
SemanticImage ReadPgm8(const std::filesystem::path& path);

std::string EncodePpm(const ColorImage& image);
ColorImage DecodePpm(std::string_view bytes);
void WritePpm(const ColorImage& image, const std::filesystem::path& path);
ColorImage ReadPpm(const std::filesystem::path& path);

}  // namespace synseg::io
