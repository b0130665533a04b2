#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "voxtrack/field.hpp"
#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"

namespace voxtrack {

struct RayResult {
  Vec3 rgb = Vec3::Zero();
  double depth = 0.0;  ///< expected termination distance along the ray
  double opacity = 0.0;
};

struct RenderResult {
  ImageRGB rgb;
  ImageF depth;    ///< expected camera z of ray termination; 0 where transparent
  ImageF opacity;
};

/// Activated copy of a field plus the tight box around non-empty nodes.
class FieldSampler {
 public:
  explicit FieldSampler(const VoxelField& field);

  /// Bit-identical to sample_field() on the source field.
  FieldSample sample(const Vec3& x) const;
  const Aabb& bbox() const { return bbox_; }
  /// Empty when the field has no node above the occupancy threshold.
  const std::optional<Aabb>& occupied() const { return occupied_; }
  double min_voxel() const { return min_voxel_; }

 private:
  Aabb bbox_;
  GridSize res_;
  std::vector<detail::NodeValue> nodes_;
  std::optional<Aabb> occupied_;
  double min_voxel_ = 0.0;
};

struct RenderOptions {
  double step = 0.0;            ///< 0 picks half the smallest voxel edge
  double near = 1e-3;
  double far = 1e3;
  double min_transmittance = 1e-10;
};

/**
 * Emission-absorption quadrature over one or two fields. Samples sit at whole
 * multiples of the step along the ray, from the entry into the union of field
 * boxes up to and including the exit; each sample carries
 * alpha = 1 - exp(-sigma * step).
 * When both fields are present every sample goes through compose_sample().
 */
class Renderer {
 public:
  Renderer(std::shared_ptr<const VoxelField> object, std::shared_ptr<const VoxelField> background,
           RenderOptions options = {});

  RayResult render_ray(const Vec3& origin, const Vec3& dir) const;
  RayResult render_ray(const Vec3& origin, const Vec3& dir, double near, double far) const;

  /// Renders every pixel, or only the nonzero pixels of `mask` (others stay 0).
  RenderResult render_view(const Camera& cam, const Pose& pose, const PixelMask* mask = nullptr) const;

  /// Expected z-depth along the exact ray through `pixel`.
  double render_depth_at(const Camera& cam, const Pose& pose, const Vec2& pixel) const;

  /// Copy of this renderer with the object field removed.
  Renderer background_only() const;

  double step() const { return step_; }
  const std::shared_ptr<const VoxelField>& object() const { return object_; }
  const std::shared_ptr<const VoxelField>& background() const { return background_; }

 private:
  std::shared_ptr<const VoxelField> object_;
  std::shared_ptr<const VoxelField> background_;
  std::shared_ptr<const FieldSampler> object_sampler_;
  std::shared_ptr<const FieldSampler> background_sampler_;
  RenderOptions options_;
  double step_ = 0.0;
};

/// Single-field ray march with explicit quadrature parameters.
RayResult render_ray(const VoxelField& field, const Vec3& origin, const Vec3& dir, double near,
                     double far, double step);

/// Composed render; `background` may be null.
RenderResult render_view(const VoxelField& object, const VoxelField* background, const Camera& cam,
                         const Pose& pose);

/// Per-point visibility: in frame, in front of the camera, and rendered depth
/// within `depth_tol` of the point's camera depth.
std::vector<bool> visibility_mask(const Renderer& renderer, const Camera& cam, const Pose& pose,
                                  const std::vector<Vec3>& points, double depth_tol);

}  // namespace voxtrack
