#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "voxtrack/geometry.hpp"

namespace voxtrack {

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool valid() const { return (min.array() < max.array()).all(); }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  /// Slab-method intersection; returns the [entry, exit] ray parameters.
  std::optional<std::pair<double, double>> intersect(const Vec3& origin, const Vec3& dir) const;
};

struct GridSize {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  size_t count() const { return size_t(nx) * ny * nz; }
};

namespace detail {
struct NodeValue {
  float density;
  float r, g, b;
};
}  // namespace detail

struct FieldSample {
  double density = 0.0;
  Vec3 color = Vec3::Zero();
};

/// Pre-activation value used for empty space; softplus(-30) ~ 1e-13.
inline constexpr float kEmptyDensityPreact = -30.0f;

float activate_density(float preact);
float activate_color(float preact);
float density_preact_for(double density);
float color_preact_for(double color);

/**
 * Dense radiance field over an axis-aligned box. Grids hold pre-activation
 * values: density goes through softplus and color through sigmoid on read,
 * so any real-valued grid renders as a valid field. Nodes sit on the box
 * corners and are stored x-fastest.
 */
class VoxelField {
 public:
  VoxelField() = default;
  VoxelField(const Aabb& bbox, GridSize res, float density_preact = kEmptyDensityPreact,
             float color_preact = 0.0f);

  const Aabb& bbox() const { return bbox_; }
  GridSize resolution() const { return res_; }
  Vec3 voxel_size() const;
  size_t node_count() const { return res_.count(); }
  size_t index(int i, int j, int k) const { return (size_t(k) * res_.ny + j) * res_.nx + i; }
  Vec3 node_position(int i, int j, int k) const;

  std::vector<float>& density_preact() { return density_; }
  const std::vector<float>& density_preact() const { return density_; }
  std::vector<float>& color_preact(int channel) { return color_[channel]; }
  const std::vector<float>& color_preact(int channel) const { return color_[channel]; }

  float node_density(size_t idx) const { return activate_density(density_[idx]); }
  Vec3 node_color(size_t idx) const;
  void set_node(size_t idx, double density, const Vec3& color);

  /// FNV-1a over the raw grids; used to prove a field was left untouched.
  std::uint64_t checksum() const;

 private:
  Aabb bbox_;
  GridSize res_;
  std::vector<float> density_;
  std::vector<float> color_[3];
};

/// Trilinear interpolation of activated node values; (0, black) outside the box.
FieldSample sample_field(const VoxelField& field, const Vec3& x);

/// Evaluates `field` at every node of a new grid over the same box.
VoxelField resample_field(const VoxelField& field, GridSize res);

/// Density-weighted merge of a background and an object sample:
/// sigma = sigma_b + sigma_o, color weighted by each density share.
FieldSample compose_sample(double sigma_b, const Vec3& c_b, double sigma_o, const Vec3& c_o);

}  // namespace voxtrack
