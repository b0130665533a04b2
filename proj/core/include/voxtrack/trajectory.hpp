#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"
#include "voxtrack/render.hpp"
#include "voxtrack/scene.hpp"

namespace voxtrack {

/**
 * Camera motion around the object. Same line grammar as scenes:
 *
 *   kind = orbit | roll | static | random-walk
 *   frames = n
 *   radius = r            camera distance from the object centre
 *   elevation = deg       azimuth = deg
 *   step = deg            per-frame azimuth (orbit), roll (roll) or rotation scale (random-walk)
 *   translation_step = d  random-walk translation scale, scene units
 *   noise = s             per-pixel Gaussian std on query images, in [0, 0.1]
 *   occlusion = first count   frames rendered without the object
 *   seed = s
 */
struct TrajectorySpec {
  enum class Kind { Orbit, Roll, Static, RandomWalk };
  Kind kind = Kind::Orbit;
  int frames = 100;
  double radius = 2.6;
  double elevation_deg = 25.0;
  double azimuth_deg = 0.0;
  double step_deg = 1.8;
  double translation_step = 0.005;
  double noise = 0.0;
  int occlusion_start = -1;
  int occlusion_frames = 0;
  std::uint64_t seed = 1;

  bool occluded(int frame) const {
    return occlusion_frames > 0 && frame >= occlusion_start && frame < occlusion_start + occlusion_frames;
  }
};

TrajectorySpec parse_trajectory_spec(const std::string& text);
TrajectorySpec load_trajectory_spec(const std::string& path);
const char* to_string(TrajectorySpec::Kind kind);

/// Ground-truth object-to-camera poses, looking at `center`.
std::vector<Pose> trajectory_poses(const TrajectorySpec& spec, const Vec3& center);

/// Lazily rendered query frames; cheap to copy and safe to read from several
/// threads.
class Sequence {
 public:
  Sequence(std::shared_ptr<const Renderer> full, std::shared_ptr<const Renderer> empty, Camera cam,
           std::vector<Pose> gt, TrajectorySpec spec);
  int size() const { return int(gt_.size()); }
  const Camera& camera() const { return cam_; }
  const std::vector<Pose>& gt() const { return gt_; }
  const TrajectorySpec& spec() const { return spec_; }
  /// Composed render of frame `k` with the frame's seeded noise.
  ImageRGB frame(int k) const;

 private:
  std::shared_ptr<const Renderer> full_;
  std::shared_ptr<const Renderer> empty_;
  Camera cam_;
  std::vector<Pose> gt_;
  TrajectorySpec spec_;
};

Sequence synth_sequence(const Scene& scene, const TrajectorySpec& spec);

}  // namespace voxtrack
