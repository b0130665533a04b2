#include "voxtrack/object_map.hpp"

#include <cmath>

#include "voxtrack/errors.hpp"
#include "voxtrack/random.hpp"
#include "voxtrack/render.hpp"

namespace voxtrack {

double ObjectMap::diameter() const {
  double best = 0.0;
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t j = i + 1; j < points.size(); ++j) best = std::max(best, (points[i] - points[j]).squaredNorm());
  return std::sqrt(best);
}

ObjectMap extract_object_points(const VoxelField& object, double density_threshold, int m,
                                std::uint64_t seed) {
  if (m <= 0) throw Error(ErrorCode::InvalidConfig, "point count must be positive");
  const FieldSampler sampler(object);
  ObjectMap map;
  if (!sampler.occupied()) throw Error(ErrorCode::InsufficientSurface, "field is empty");

  const Aabb box = object.bbox();
  const double radius = box.extent().norm();
  const double step = 0.25 * sampler.min_voxel();
  Rng rng(seed);
  const long max_rays = 50L * m;
  for (long ray = 0; ray < max_rays && int(map.size()) < m; ++ray) {
    // Uniform direction on the sphere, then a uniform target inside the box.
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 origin = box.center() + radius * Vec3(s * std::cos(phi), s * std::sin(phi), z);
    const Vec3 target(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
                      rng.uniform(box.min.z(), box.max.z()));
    const Vec3 dir = (target - origin).normalized();
    const auto hit = sampler.occupied()->intersect(origin, dir);
    if (!hit || hit->second < 0.0) continue;

    double transmittance = 1.0;
    for (double t = std::max(0.0, hit->first); t <= hit->second; t += step) {
      const FieldSample fs = sampler.sample(origin + t * dir);
      if (!(fs.density > 0.0)) continue;
      const double next = transmittance * std::exp(-fs.density * step);
      if (next <= 0.5) {
        // Exact crossing inside this constant-density interval.
        const double t_hit = t + std::log(transmittance / 0.5) / fs.density;
        const Vec3 p = origin + t_hit * dir;
        const FieldSample at = sampler.sample(p);
        if (at.density > density_threshold) {
          map.points.push_back(p);
          map.colors.push_back(at.color);
        }
        break;
      }
      transmittance = next;
    }
  }
  if (int(map.size()) < (m + 1) / 2)
    throw Error(ErrorCode::InsufficientSurface,
                "found " + std::to_string(map.size()) + " of " + std::to_string(m) + " surface points");
  return map;
}

}  // namespace voxtrack
