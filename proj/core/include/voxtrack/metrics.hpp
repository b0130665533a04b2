#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voxtrack/geometry.hpp"
#include "voxtrack/object_map.hpp"

namespace voxtrack {

/// One line of a trajectory file:
/// frame,state,qw,qx,qy,qz,tx,ty,tz,iters,visible,residual,ms
struct TrajectoryRow {
  int frame = 0;
  bool warm = false;
  std::optional<Pose> pose;  ///< present iff warm
  int iters = 0;
  int visible = 0;
  double residual = 0.0;
  double ms = 0.0;
};

inline constexpr const char* kTrajectoryHeader = "frame,state,qw,qx,qy,qz,tx,ty,tz,iters,visible,residual,ms";

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> parse_trajectory_csv(const std::string& text);

/// frame,qw,qx,qy,qz,tx,ty,tz
std::string gt_csv(const std::vector<Pose>& poses);
std::vector<Pose> parse_gt_csv(const std::string& text);

struct FrameError {
  bool has_pose = false;
  double rotation_deg = 0.0;
  double translation = 0.0;  ///< fraction of the object diameter
  double add = 0.0;          ///< scene units
};

struct Metrics {
  std::vector<FrameError> frames;
  int frame_count = 0;
  int warm_frames = 0;
  double rotation_median_deg = 0.0;
  double rotation_p90_deg = 0.0;
  double translation_median = 0.0;
  double translation_p90 = 0.0;
  double add_median = 0.0;
  double add_p90 = 0.0;
  double success_rate = 0.0;
  double jitter_rotation_deg = 0.0;
  double jitter_translation = 0.0;
  int cold_starts = 0;
};

/// Percentile with linear interpolation between order statistics; 0 when empty.
double percentile(std::vector<double> values, double q);

/**
 * Per-frame errors against ground truth and their aggregates. Success needs a
 * pose with rotation error below `max_rotation_deg` and translation error below
 * `max_translation` diameters; cold frames always fail. Jitter is the RMS over
 * consecutive warm pairs of the difference between estimated and true
 * frame-to-frame motion (the spread of the deltas on a static sequence).
 * Cold starts are counted as frames entered in the cold state: frame 0 plus
 * every frame after a cold one. Throws LengthMismatch.
 */
Metrics evaluate(const std::vector<TrajectoryRow>& est, const std::vector<Pose>& gt, const ObjectMap& map,
                 double max_rotation_deg = 5.0, double max_translation = 0.05);

}  // namespace voxtrack
