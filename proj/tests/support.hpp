#pragma once

#include <memory>
#include <string>

#include "voxtrack/features.hpp"
#include "voxtrack/random.hpp"
#include "voxtrack/scene.hpp"
#include "voxtrack/tracker.hpp"
#include "voxtrack/trajectory.hpp"

namespace voxtrack::testing {

inline std::string data_path(const std::string& name) { return std::string(VOXTRACK_DATA_DIR) + "/" + name; }

/// The standard scene, built once per process.
inline const Scene& standard_scene() {
  static const Scene scene = build_scene(load_scene_spec(data_path("standard.scn")));
  return scene;
}

inline TrackerConfig tracker_config(const Scene& scene) {
  TrackerConfig cfg;
  cfg.object = scene.object;
  cfg.background = scene.background;
  cfg.map = std::make_shared<const ObjectMap>(scene.map);
  cfg.bundle = std::make_shared<const ReferenceBundle>(scene.bundle);
  return cfg;
}

inline Camera standard_camera() { return Camera{500.0, 500.0, 319.5, 239.5, 640, 480}; }

/// Solid axis-aligned box of the given half size and density in a field of
/// `n` nodes per axis over [-extent, extent]^3.
inline VoxelField solid_box(double half, double density, const Vec3& color, int n = 48, double extent = 1.0) {
  VoxelField f(Aabb{Vec3::Constant(-extent), Vec3::Constant(extent)}, GridSize{n, n, n});
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 x = f.node_position(i, j, k);
        if ((x.cwiseAbs().array() <= half).all()) f.set_node(f.index(i, j, k), density, color);
        else f.set_node(f.index(i, j, k), 0.0, color);
      }
  return f;
}

/// Rotates by `deg` about a random axis through `center` (object frame) and
/// shifts by `shift` along a random direction, both in the camera frame.
inline Pose perturb(const Pose& pose, const Vec3& center, double deg, double shift, Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  Vec3 dir(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  dir.normalize();
  const Eigen::Quaterniond q(Eigen::AngleAxisd(deg * M_PI / 180.0, axis));
  const Vec3 c = pose * center;
  return Pose(q, c - q * c + shift * dir) * pose;
}

/// Dynamic reference renderer used by the alignment tests.
inline RenderFn reference_renderer(std::shared_ptr<const Renderer> renderer, int levels = 3) {
  return [renderer, levels](const Pose& pose, const Camera& cam, const PixelMask& needed) {
    RenderResult rr = renderer->render_view(cam, pose, &needed);
    ReferenceView ref;
    ref.pyramid = std::make_shared<const FeaturePyramid>(extract_pyramid(to_gray(rr.rgb), levels));
    ref.depth = std::move(rr.depth);
    ref.pose = pose;
    ref.camera = cam;
    return ref;
  };
}

/// Query features of a clean render at `gt` through the crop camera around it.
struct CropQuery {
  Crop crop;
  FeaturePyramid pyramid;
};

inline CropQuery crop_query(const Renderer& renderer, const Pose& gt, const Camera& cam,
                            const std::vector<Vec3>& points, int out_size = 256) {
  CropQuery q;
  q.crop = crop_for_pose(gt, cam, points, 1.25, out_size);
  q.pyramid = extract_pyramid(to_gray(renderer.render_view(q.crop.camera, gt).rgb), 3);
  return q;
}

}  // namespace voxtrack::testing
