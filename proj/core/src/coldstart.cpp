#include "voxtrack/coldstart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace voxtrack {

size_t ReferenceBundle::keypoint_count() const {
  size_t n = 0;
  for (const CanonicalView& v : views) n += v.keypoints.size();
  return n;
}

std::vector<Vec3> canonical_directions() {
  std::vector<Vec3> dirs;
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y)
      for (int z = -1; z <= 1; ++z)
        if (x != 0 || y != 0 || z != 0) dirs.push_back(Vec3(x, y, z).normalized());
  return dirs;
}

Pose canonical_pose(const Vec3& direction, const Vec3& center, double radius) {
  const Vec3 d = direction.normalized();
  const Vec3 up = std::abs(d.z()) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
  return Pose::look_at(center + radius * d, center, up);
}

ReferenceBundle build_reference_bundle(const Renderer& renderer, const Camera& cam, const BundleOptions& options) {
  if (!(options.radius > 0.0)) throw Error(ErrorCode::InvalidConfig, "bundle radius must be positive");
  cam.validate();
  ReferenceBundle bundle;
  const int half = kDescriptorMargin;
  for (const Vec3& dir : canonical_directions()) {
    CanonicalView view;
    view.pose = canonical_pose(dir, options.center, options.radius);
    view.camera = cam;
    const RenderResult rr = renderer.render_view(cam, view.pose);
    view.gray = to_gray(rr.rgb);
    for (const Keypoint& kp : detect_keypoints(view.gray, options.max_keypoints, options.nms_radius)) {
      if (!descriptor_in_bounds(view.gray, kp.position)) continue;
      const int px = int(std::lround(kp.position.x()));
      const int py = int(std::lround(kp.position.y()));
      bool ok = true;
      for (int y = py - half; y <= py + half && ok; ++y)
        for (int x = px - half; x <= px + half && ok; ++x) {
          if (x < 0 || y < 0 || x >= cam.width || y >= cam.height || rr.opacity.at(x, y) < options.min_patch_opacity)
            ok = false;
        }
      if (!ok) continue;
      float dmin = 1e30f, dmax = -1e30f;
      for (int y = py - 2; y <= py + 2; ++y)
        for (int x = px - 2; x <= px + 2; ++x) {
          dmin = std::min(dmin, rr.depth.at(x, y));
          dmax = std::max(dmax, rr.depth.at(x, y));
        }
      if (double(dmax - dmin) > options.max_patch_depth_range) continue;
      const double z = renderer.render_depth_at(cam, view.pose, kp.position);
      if (!(z > kMinDepth)) continue;
      const Vec3 ray = cam.ray_direction(kp.position);
      const Vec3 xc = ray * (z / ray.z());
      Keypoint described = kp;
      described.descriptor = describe(view.gray, kp.position);
      view.keypoints.push_back(described);
      view.points.push_back(view.pose.inverse() * xc);
    }
    bundle.views.push_back(std::move(view));
  }
  return bundle;
}

std::vector<Correspondence> pooled_correspondences(const ImageF& query, const ReferenceBundle& bundle,
                                                   const ColdStartConfig& cfg) {
  std::vector<Keypoint> kps;
  std::vector<Descriptor> desc;
  for (const Keypoint& kp : detect_keypoints(query, cfg.max_keypoints, cfg.nms_radius)) {
    if (!descriptor_in_bounds(query, kp.position)) continue;
    kps.push_back(kp);
    desc.push_back(describe(query, kp.position));
  }
  // Each query keypoint keeps its closest match over all views; ties go to
  // the earlier view.
  std::vector<double> best(kps.size(), std::numeric_limits<double>::infinity());
  std::vector<const Vec3*> point(kps.size(), nullptr);
  for (const CanonicalView& view : bundle.views) {
    std::vector<Descriptor> ref;
    ref.reserve(view.keypoints.size());
    for (const Keypoint& kp : view.keypoints) ref.push_back(kp.descriptor);
    for (const auto& [qi, ri] : match(desc, ref, cfg.ratio)) {
      const double d = double((desc[size_t(qi)] - ref[size_t(ri)]).squaredNorm());
      if (d < best[size_t(qi)]) {
        best[size_t(qi)] = d;
        point[size_t(qi)] = &view.points[size_t(ri)];
      }
    }
  }
  std::vector<Correspondence> corr;
  for (size_t i = 0; i < kps.size(); ++i)
    if (point[i]) corr.push_back({kps[i].position, *point[i]});
  return corr;
}

PnPResult cold_localize(const ImageF& query, const ReferenceBundle& bundle, const Camera& cam,
                        const ColdStartConfig& cfg) {
  if (bundle.views.empty()) throw Error(ErrorCode::InvalidConfig, "empty reference bundle");
  std::vector<Correspondence> corr;
  try {
    corr = pooled_correspondences(query, bundle, cfg);
  } catch (const Error& e) {
    throw ColdStartFailedError(e.what(), std::nullopt, 0);
  }
  const int n = int(corr.size());
  PnPResult result;
  try {
    result = pnp_ransac(corr, cam, cfg.pnp);
  } catch (const Error& e) {
    throw ColdStartFailedError(e.what(), std::nullopt, n);
  }
  if (result.inlier_count < cfg.min_inliers || !(result.rms <= cfg.pnp.inlier_px))
    throw ColdStartFailedError("weak consensus: " + std::to_string(result.inlier_count) + " inliers, rms " +
                                   std::to_string(result.rms),
                               result, n);
  return result;
}

}  // namespace voxtrack
