#include "voxtrack/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "voxtrack/errors.hpp"

namespace voxtrack {

namespace {

static_assert(std::endian::native == std::endian::little, "float blocks are written in native little-endian order");

void put_floats(std::string& out, const float* data, size_t n) {
  out.append(reinterpret_cast<const char*>(data), n * sizeof(float));
}

void get_floats(const std::string& in, size_t& pos, float* data, size_t n) {
  const size_t bytes = n * sizeof(float);
  if (pos + bytes > in.size()) throw Error(ErrorCode::Format, "truncated float block");
  std::memcpy(data, in.data() + pos, bytes);
  pos += bytes;
}

// Reads one '\n'-terminated header line.
std::string header_line(const std::string& in, size_t& pos) {
  const size_t nl = in.find('\n', pos);
  if (nl == std::string::npos) throw Error(ErrorCode::Format, "truncated header");
  std::string line = in.substr(pos, nl - pos);
  pos = nl + 1;
  return line;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename onto " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_field(const VoxelField& field) {
  char buf[256];
  const Aabb& b = field.bbox();
  const GridSize r = field.resolution();
  std::string out = "VXF1\n";
  std::snprintf(buf, sizeof buf, "bbox %.17g %.17g %.17g %.17g %.17g %.17g\n", b.min.x(), b.min.y(), b.min.z(),
                b.max.x(), b.max.y(), b.max.z());
  out += buf;
  std::snprintf(buf, sizeof buf, "resolution %d %d %d\n", r.nx, r.ny, r.nz);
  out += buf;
  put_floats(out, field.density_preact().data(), field.node_count());
  for (int c = 0; c < 3; ++c) put_floats(out, field.color_preact(c).data(), field.node_count());
  return out;
}

VoxelField decode_field(const std::string& bytes) {
  size_t pos = 0;
  if (header_line(bytes, pos) != "VXF1") throw Error(ErrorCode::Format, "not a VXF1 field");
  std::istringstream bl(header_line(bytes, pos));
  std::istringstream rl(header_line(bytes, pos));
  std::string tag;
  Aabb box;
  GridSize res;
  if (!(bl >> tag) || tag != "bbox" || !(bl >> box.min.x() >> box.min.y() >> box.min.z() >> box.max.x() >> box.max.y() >> box.max.z()))
    throw Error(ErrorCode::Format, "bad bbox line");
  if (!(rl >> tag) || tag != "resolution" || !(rl >> res.nx >> res.ny >> res.nz))
    throw Error(ErrorCode::Format, "bad resolution line");
  if (!box.valid() || res.nx < 2 || res.ny < 2 || res.nz < 2 || res.count() > (size_t(1) << 30))
    throw Error(ErrorCode::Format, "invalid field header");
  VoxelField field(box, res);
  get_floats(bytes, pos, field.density_preact().data(), field.node_count());
  for (int c = 0; c < 3; ++c) get_floats(bytes, pos, field.color_preact(c).data(), field.node_count());
  if (pos != bytes.size()) throw Error(ErrorCode::Format, "trailing bytes after field grids");
  return field;
}

void save_field(const std::string& path, const VoxelField& field) { write_file_atomic(path, encode_field(field)); }
VoxelField load_field(const std::string& path) { return decode_field(read_file(path)); }

std::string encode_map(const ObjectMap& map) {
  const size_t d = map.descriptors.size() == map.size() && !map.descriptors.empty() ? kDescriptorSize : 0;
  std::string out = "VXM1\npoints " + std::to_string(map.size()) + "\ndescriptor " + std::to_string(d) + "\n";
  std::vector<float> pts;
  pts.reserve(map.size() * 3);
  for (const Vec3& p : map.points)
    for (int i = 0; i < 3; ++i) pts.push_back(float(p[i]));
  put_floats(out, pts.data(), pts.size());
  if (d)
    for (const Descriptor& desc : map.descriptors) put_floats(out, desc.data(), d);
  return out;
}

ObjectMap decode_map(const std::string& bytes) {
  size_t pos = 0;
  if (header_line(bytes, pos) != "VXM1") throw Error(ErrorCode::Format, "not a VXM1 map");
  std::istringstream pl(header_line(bytes, pos));
  std::istringstream dl(header_line(bytes, pos));
  std::string tag;
  long n = -1, d = -1;
  if (!(pl >> tag) || tag != "points" || !(pl >> n) || n < 0) throw Error(ErrorCode::Format, "bad points line");
  if (!(dl >> tag) || tag != "descriptor" || !(dl >> d) || (d != 0 && d != kDescriptorSize))
    throw Error(ErrorCode::Format, "bad descriptor line");
  ObjectMap map;
  std::vector<float> pts(size_t(n) * 3);
  get_floats(bytes, pos, pts.data(), pts.size());
  for (long i = 0; i < n; ++i) map.points.emplace_back(pts[size_t(i) * 3], pts[size_t(i) * 3 + 1], pts[size_t(i) * 3 + 2]);
  if (d) {
    map.descriptors.resize(size_t(n));
    for (Descriptor& desc : map.descriptors) get_floats(bytes, pos, desc.data(), kDescriptorSize);
  }
  if (pos != bytes.size()) throw Error(ErrorCode::Format, "trailing bytes after map blocks");
  return map;
}

void save_map(const std::string& path, const ObjectMap& map) { write_file_atomic(path, encode_map(map)); }
ObjectMap load_map(const std::string& path) { return decode_map(read_file(path)); }

std::string encode_ppm(const ImageRGB& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.data.size());
  for (float v : image.data) out.push_back(char(std::uint8_t(std::lround(std::clamp(double(v), 0.0, 1.0) * 255.0))));
  return out;
}

ImageRGB decode_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  if (!(in >> magic) || magic != "P6" || !(in >> w >> h >> maxval) || w <= 0 || h <= 0 || maxval != 255)
    throw Error(ErrorCode::Format, "unsupported PPM header");
  const size_t pos = size_t(in.tellg()) + 1;
  if (pos + size_t(w) * h * 3 != bytes.size()) throw Error(ErrorCode::Format, "PPM size mismatch");
  ImageRGB img(w, h);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = float(std::uint8_t(bytes[pos + i])) / 255.0f;
  return img;
}

void save_ppm(const std::string& path, const ImageRGB& image) { write_file_atomic(path, encode_ppm(image)); }

}  // namespace voxtrack
