#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "voxtrack/errors.hpp"
#include "voxtrack/features.hpp"
#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"
#include "voxtrack/render.hpp"

namespace voxtrack {

struct Correspondence {
  Vec2 pixel = Vec2::Zero();
  Vec3 point = Vec3::Zero();  ///< object frame
};

/// Mutual nearest neighbours (L2) that also pass the ratio test against the
/// second-best reference. Ordered by query index.
std::vector<std::pair<int, int>> match(const std::vector<Descriptor>& query, const std::vector<Descriptor>& reference,
                                       double ratio = 0.8);

/**
 * Three-point resection (Grunert). Returns every real, positive-depth solution,
 * at most four. Throws DegenerateConfiguration for coincident or collinear
 * points.
 */
std::vector<Pose> p3p(const std::array<Vec2, 3>& pixels, const std::array<Vec3, 3>& points, const Camera& cam);

struct PnPOptions {
  int max_iters = 500;
  double inlier_px = 2.0;
  int min_inliers = 6;
  std::uint64_t seed = 0;
};

struct PnPResult {
  Pose pose;
  std::vector<int> inliers;
  int inlier_count = 0;
  double rms = 0.0;            ///< reprojection RMS over the inliers, pixels
  double unrefined_rms = 0.0;  ///< same inliers under the best RANSAC model
};

/// Squared reprojection error, or +inf when the point is behind the camera.
double reprojection_error_sq(const Camera& cam, const Pose& pose, const Correspondence& c);

/**
 * RANSAC over p3p with a fourth point choosing among candidates, followed by
 * Levenberg-Marquardt on the inlier set. Throws TooFewCorrespondences below 4
 * inputs and NoConsensus when the best model has fewer than min_inliers.
 */
PnPResult pnp_ransac(const std::vector<Correspondence>& corr, const Camera& cam, const PnPOptions& options = {});

/// Keypoints of one canonical render with their object-frame positions.
struct CanonicalView {
  ImageF gray;
  Pose pose;
  Camera camera;
  std::vector<Keypoint> keypoints;
  std::vector<Vec3> points;
};

struct BundleOptions {
  Vec3 center = Vec3::Zero();  ///< point every canonical camera looks at
  double radius = 0.0;         ///< camera distance from `center`; must be positive
  int max_keypoints = 400;
  int nms_radius = 4;
  double min_patch_opacity = 0.99;
  double max_patch_depth_range = 0.05;
};

/// Cached canonical views (26 directions of a subdivided octahedron).
struct ReferenceBundle {
  std::vector<CanonicalView> views;
  size_t keypoint_count() const;
};

/// The 26 unit viewing directions: 6 axes, 12 edge midpoints, 8 face centres.
std::vector<Vec3> canonical_directions();

/// Camera pose on the bundle sphere looking at `center` from `direction`.
Pose canonical_pose(const Vec3& direction, const Vec3& center, double radius);

/// Renders `renderer` (normally object only) from every canonical direction.
ReferenceBundle build_reference_bundle(const Renderer& renderer, const Camera& cam, const BundleOptions& options = {});

struct ColdStartConfig {
  double ratio = 0.8;
  int max_keypoints = 600;
  int nms_radius = 4;
  int min_inliers = 10;
  PnPOptions pnp{10000, 2.0, 6, 0};
};

/// Thrown by cold_localize; carries the best attempt when RANSAC got that far.
class ColdStartFailedError : public Error {
 public:
  ColdStartFailedError(const std::string& what, std::optional<PnPResult> best, int correspondences)
      : Error(ErrorCode::ColdStartFailed, what), best_(std::move(best)), correspondences_(correspondences) {}
  const std::optional<PnPResult>& best() const { return best_; }
  int correspondences() const { return correspondences_; }

 private:
  std::optional<PnPResult> best_;
  int correspondences_;
};

/// Correspondences pooled over all canonical views, at most one per query
/// keypoint (its closest descriptor among the mutual matches).
std::vector<Correspondence> pooled_correspondences(const ImageF& query, const ReferenceBundle& bundle,
                                                   const ColdStartConfig& cfg);

/// Succeeds iff the pooled PnP has at least cfg.min_inliers inliers and an RMS
/// within the inlier threshold.
PnPResult cold_localize(const ImageF& query, const ReferenceBundle& bundle, const Camera& cam,
                        const ColdStartConfig& cfg);

}  // namespace voxtrack
