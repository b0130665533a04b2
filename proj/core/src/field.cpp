#include "voxtrack/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "voxtrack/errors.hpp"
#include "field_internal.hpp"

namespace voxtrack {

std::optional<std::pair<double, double>> Aabb::intersect(const Vec3& origin, const Vec3& dir) const {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-300) {
      if (origin[a] < min[a] || origin[a] > max[a]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double ta = (min[a] - origin[a]) * inv;
    double tb = (max[a] - origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

float activate_density(float preact) {
  const double x = preact;
  return float(x > 30.0 ? x : std::log1p(std::exp(x)));
}

float activate_color(float preact) {
  return float(1.0 / (1.0 + std::exp(-double(preact))));
}

float density_preact_for(double density) {
  if (density <= 1e-13) return kEmptyDensityPreact;
  if (density > 30.0) return float(density);
  return float(std::log(std::expm1(density)));
}

float color_preact_for(double color) {
  const double c = std::clamp(color, 1e-4, 1.0 - 1e-4);
  return float(std::log(c / (1.0 - c)));
}

VoxelField::VoxelField(const Aabb& bbox, GridSize res, float density_preact, float color_preact)
    : bbox_(bbox), res_(res) {
  if (!bbox.valid()) throw Error(ErrorCode::InvalidConfig, "field bbox must satisfy min < max");
  if (res.nx < 2 || res.ny < 2 || res.nz < 2)
    throw Error(ErrorCode::InvalidConfig, "field resolution must be at least 2 per axis");
  density_.assign(res.count(), density_preact);
  for (auto& c : color_) c.assign(res.count(), color_preact);
}

Vec3 VoxelField::voxel_size() const {
  const Vec3 e = bbox_.extent();
  return Vec3(e.x() / (res_.nx - 1), e.y() / (res_.ny - 1), e.z() / (res_.nz - 1));
}

Vec3 VoxelField::node_position(int i, int j, int k) const {
  return bbox_.min + voxel_size().cwiseProduct(Vec3(i, j, k));
}

Vec3 VoxelField::node_color(size_t idx) const {
  return Vec3(activate_color(color_[0][idx]), activate_color(color_[1][idx]),
              activate_color(color_[2][idx]));
}

void VoxelField::set_node(size_t idx, double density, const Vec3& color) {
  density_[idx] = density_preact_for(density);
  for (int c = 0; c < 3; ++c) color_[c][idx] = color_preact_for(color[c]);
}

std::uint64_t VoxelField::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::vector<float>& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (size_t i = 0; i < v.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  mix(density_);
  for (const auto& c : color_) mix(c);
  return h;
}

FieldSample sample_field(const VoxelField& field, const Vec3& x) {
  detail::GridCoord g;
  if (!detail::grid_coord(field.bbox(), field.resolution(), x, g)) return {};
  return detail::trilinear(g, field.resolution(), [&field](size_t idx) {
    return detail::NodeValue{field.node_density(idx), float(activate_color(field.color_preact(0)[idx])),
                             float(activate_color(field.color_preact(1)[idx])),
                             float(activate_color(field.color_preact(2)[idx]))};
  });
}

FieldSample compose_sample(double sigma_b, const Vec3& c_b, double sigma_o, const Vec3& c_o) {
  if (sigma_o == 0.0) return {sigma_b, c_b};
  if (sigma_b == 0.0) return {sigma_o, c_o};
  const double sigma = sigma_b + sigma_o;
  if (sigma < 1e-12) return {sigma, c_b};
  // Same value as (sigma_b c_b + sigma_o c_o) / sigma, arranged as a lerp.
  return {sigma, c_b + (sigma_o / sigma) * (c_o - c_b)};
}

VoxelField resample_field(const VoxelField& field, GridSize res) {
  VoxelField out(field.bbox(), res);
  const Aabb& box = field.bbox();
  for (int k = 0; k < res.nz; ++k)
    for (int j = 0; j < res.ny; ++j)
      for (int i = 0; i < res.nx; ++i) {
        const Vec3 x = out.node_position(i, j, k).cwiseMax(box.min).cwiseMin(box.max);
        const FieldSample s = sample_field(field, x);
        out.set_node(out.index(i, j, k), s.density, s.color);
      }
  return out;
}

}  // namespace voxtrack
