#pragma once

#include <cstdint>
#include <vector>

#include "voxtrack/features.hpp"
#include "voxtrack/field.hpp"

namespace voxtrack {

/// Surface points of the object in its own frame. Descriptors are optional
/// (empty, or one per point).
struct ObjectMap {
  std::vector<Vec3> points;
  std::vector<Descriptor> descriptors;
  std::vector<Vec3> colors;

  size_t size() const { return points.size(); }
  /// Largest distance between any two points.
  double diameter() const;
};

/**
 * Samples `m` surface points by casting seeded rays from a sphere around the
 * field box toward random interior targets and keeping the first location
 * where accumulated opacity reaches 0.5. Throws InsufficientSurface when fewer
 * than m/2 rays hit.
 */
ObjectMap extract_object_points(const VoxelField& object, double density_threshold, int m,
                                std::uint64_t seed);

}  // namespace voxtrack
