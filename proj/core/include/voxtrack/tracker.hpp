#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "voxtrack/align.hpp"
#include "voxtrack/coldstart.hpp"
#include "voxtrack/field.hpp"
#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"
#include "voxtrack/metrics.hpp"
#include "voxtrack/object_map.hpp"
#include "voxtrack/render.hpp"

namespace voxtrack {

enum class TrackState { Cold, Warm };
const char* to_string(TrackState s);

/// Where the warm path gets its reference from.
enum class ReferenceMode {
  Dynamic,         ///< rendered at the current estimate through the crop camera
  FixedCanonical,  ///< the nearest canonical view, rendered once and reused
};

struct TrackerConfig {
  double warm_max_residual = 0.08;
  int warm_min_visible = 12;
  double crop_margin = 1.25;
  int crop_output = 256;
  int pyramid_levels = 3;
  AlignConfig align{};
  ColdStartConfig cold{};
  ReferenceMode reference = ReferenceMode::Dynamic;
  RenderOptions render{};
  std::shared_ptr<const VoxelField> object;
  std::shared_ptr<const VoxelField> background;  ///< optional
  std::shared_ptr<const ObjectMap> map;
  std::shared_ptr<const ReferenceBundle> bundle;
  /// Throws InvalidConfig.
  void validate() const;
};

struct FrameReport {
  int frame_index = 0;
  TrackState state_before = TrackState::Cold;
  TrackState state_after = TrackState::Cold;
  std::optional<Pose> pose;  ///< present iff state_after is warm
  int iterations = 0;
  bool cold_start_attempted = false;
  int visible_count = 0;
  double mean_residual = 0.0;
  double ms = 0.0;
};

/// Same content ignoring wall time.
bool same_result(const FrameReport& a, const FrameReport& b);
TrajectoryRow to_row(const FrameReport& r, bool with_timing);

/// Square region of the frame and the camera that renders exactly that region
/// at the output size.
struct Crop {
  double x0 = 0.0;  ///< left edge, frame pixel-edge coordinates
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;
  Camera camera;
  /// Frame pixel -> crop pixel.
  Vec2 map(const Vec2& px) const;
  /// Crop pixel -> frame pixel.
  Vec2 unmap(const Vec2& px) const;
};

/**
 * Bounding box of the points projected at `pose`, grown about its centre by
 * `margin` into a square and clamped to the frame, mapped onto an
 * out_size x out_size camera. Throws ObjectOutOfFrame when no point lands in
 * front of the camera and inside the frame.
 */
Crop crop_for_pose(const Pose& pose, const Camera& cam, const std::vector<Vec3>& points, double margin, int out_size);

/// Bilinear resample of the crop region.
ImageF crop_image(const ImageF& frame, const Crop& crop);

/**
 * Cold/warm state machine. Warm frames refine the previous pose against a
 * reference rendered on the fly; a rejected warm result falls back to a cold
 * start in the same frame. Single-threaded; distinct trackers share only
 * immutable data.
 */
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg);
  FrameReport process_frame(const ImageRGB& image, const Camera& cam);
  TrackState state() const { return state_; }
  const std::optional<Pose>& pose() const { return pose_; }
  int frames_processed() const { return frame_; }
  const TrackerConfig& config() const { return cfg_; }
  void reset();

 private:
  struct Attempt {
    bool accepted = false;
    AlignResult result;
  };
  Attempt warm(const ImageF& gray, const Camera& cam, const Pose& init);
  ReferenceView render_reference(const Pose& pose, const Camera& cam, const PixelMask& needed) const;
  const ReferenceView& canonical_reference(const Pose& pose, const Camera& cam);

  TrackerConfig cfg_;
  std::shared_ptr<const Renderer> renderer_;
  TrackState state_ = TrackState::Cold;
  std::optional<Pose> pose_;
  int frame_ = 0;
  std::vector<std::optional<ReferenceView>> canonical_cache_;
};

/// Frames for one tracker: a camera and a frame generator.
struct FrameStream {
  Camera camera;
  int frames = 0;
  std::function<ImageRGB(int)> frame;
};

/// Runs tracker i over stream i, one thread per tracker. Results equal a
/// serial run.
std::vector<std::vector<FrameReport>> run_multi(std::vector<Tracker>& trackers, const std::vector<FrameStream>& streams,
                                                bool parallel = true);

}  // namespace voxtrack
