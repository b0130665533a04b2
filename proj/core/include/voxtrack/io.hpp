#pragma once

#include <string>

#include "voxtrack/field.hpp"
#include "voxtrack/image.hpp"
#include "voxtrack/object_map.hpp"

namespace voxtrack {

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

/// VXF1: text header (magic, bbox, resolution) then little-endian float32
/// pre-activation grids, density then R, G, B, each x-fastest.
std::string encode_field(const VoxelField& field);
VoxelField decode_field(const std::string& bytes);
void save_field(const std::string& path, const VoxelField& field);
VoxelField load_field(const std::string& path);

/// VXM1: text header (magic, point count, descriptor size) then little-endian
/// float32 points (xyz per point) and descriptors.
std::string encode_map(const ObjectMap& map);
ObjectMap decode_map(const std::string& bytes);
void save_map(const std::string& path, const ObjectMap& map);
ObjectMap load_map(const std::string& path);

/// Binary PPM (P6, maxval 255).
std::string encode_ppm(const ImageRGB& image);
ImageRGB decode_ppm(const std::string& bytes);
void save_ppm(const std::string& path, const ImageRGB& image);

}  // namespace voxtrack
