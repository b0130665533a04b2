#include "voxtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "voxtrack/errors.hpp"
#include "voxtrack/features.hpp"

namespace voxtrack {

const char* to_string(TrackState s) { return s == TrackState::Warm ? "warm" : "cold"; }

void TrackerConfig::validate() const {
  if (!(crop_margin > 1.0)) throw Error(ErrorCode::InvalidConfig, "crop_margin must exceed 1");
  if (crop_output < 64) throw Error(ErrorCode::InvalidConfig, "crop_output must be at least 64");
  if (!(warm_max_residual > 0.0) || warm_min_visible < 1)
    throw Error(ErrorCode::InvalidConfig, "warm acceptance thresholds must be positive");
  if (!object || !map || !bundle) throw Error(ErrorCode::InvalidConfig, "object field, map and bundle are required");
  if (map->size() < size_t(align.min_visible_points)) throw Error(ErrorCode::InvalidConfig, "map has too few points");
  align.validate();
  if (pyramid_levels < 1 || *std::max_element(align.levels.begin(), align.levels.end()) >= pyramid_levels)
    throw Error(ErrorCode::InvalidConfig, "alignment levels exceed the pyramid depth");
}

bool same_result(const FrameReport& a, const FrameReport& b) {
  auto same_pose = [](const std::optional<Pose>& p, const std::optional<Pose>& q) {
    if (p.has_value() != q.has_value()) return false;
    if (!p) return true;
    return p->rotation().coeffs() == q->rotation().coeffs() && p->translation() == q->translation();
  };
  return a.frame_index == b.frame_index && a.state_before == b.state_before && a.state_after == b.state_after &&
         same_pose(a.pose, b.pose) && a.iterations == b.iterations &&
         a.cold_start_attempted == b.cold_start_attempted && a.visible_count == b.visible_count &&
         a.mean_residual == b.mean_residual;
}

TrajectoryRow to_row(const FrameReport& r, bool with_timing) {
  TrajectoryRow row;
  row.frame = r.frame_index;
  row.warm = r.state_after == TrackState::Warm;
  row.pose = r.pose;
  row.iters = r.iterations;
  row.visible = r.visible_count;
  row.residual = r.mean_residual;
  row.ms = with_timing ? r.ms : 0.0;
  return row;
}

Vec2 Crop::map(const Vec2& px) const {
  const double sx = camera.width / width;
  const double sy = camera.height / height;
  return Vec2((px.x() + 0.5 - x0) * sx - 0.5, (px.y() + 0.5 - y0) * sy - 0.5);
}

Vec2 Crop::unmap(const Vec2& px) const {
  const double sx = width / camera.width;
  const double sy = height / camera.height;
  return Vec2((px.x() + 0.5) * sx + x0 - 0.5, (px.y() + 0.5) * sy + y0 - 0.5);
}

Crop crop_for_pose(const Pose& pose, const Camera& cam, const std::vector<Vec3>& points, double margin, int out_size) {
  if (!(margin > 0.0) || out_size < 1) throw Error(ErrorCode::InvalidConfig, "bad crop parameters");
  Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
  int inside = 0;
  for (const Vec3& x : points) {
    const Vec3 xc = pose * x;
    if (!(xc.z() > kMinDepth)) continue;
    const Vec2 p = project(cam, xc);
    if (!cam.contains(p)) continue;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    ++inside;
  }
  if (inside == 0) throw Error(ErrorCode::ObjectOutOfFrame, "no object point projects into the frame");
  const Vec2 center = 0.5 * (lo + hi);
  double side = std::max(hi.x() - lo.x(), hi.y() - lo.y()) * margin;
  side = std::clamp(side, 8.0, double(std::min(cam.width, cam.height)));
  Crop crop;
  crop.width = crop.height = side;
  // Edge coordinates put the frame's outer edges at 0 and size.
  crop.x0 = std::clamp(center.x() + 0.5 - 0.5 * side, 0.0, cam.width - side);
  crop.y0 = std::clamp(center.y() + 0.5 - 0.5 * side, 0.0, cam.height - side);
  const double s = double(out_size) / side;
  crop.camera = Camera{cam.fx * s, cam.fy * s, (cam.cx + 0.5 - crop.x0) * s - 0.5, (cam.cy + 0.5 - crop.y0) * s - 0.5,
                       out_size, out_size};
  return crop;
}

ImageF crop_image(const ImageF& frame, const Crop& crop) {
  ImageF out(crop.camera.width, crop.camera.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const Vec2 src = crop.unmap(Vec2(x, y));
      out.at(x, y) = sample_bilinear(frame, src.x(), src.y());
    }
  return out;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  renderer_ = std::make_shared<const Renderer>(cfg_.object, cfg_.background, cfg_.render);
  canonical_cache_.resize(cfg_.bundle->views.size());
}

void Tracker::reset() {
  state_ = TrackState::Cold;
  pose_.reset();
  frame_ = 0;
}

ReferenceView Tracker::render_reference(const Pose& pose, const Camera& cam, const PixelMask& needed) const {
  RenderResult rr = renderer_->render_view(cam, pose, &needed);
  ReferenceView ref;
  ref.pyramid = std::make_shared<const FeaturePyramid>(extract_pyramid(to_gray(rr.rgb), cfg_.pyramid_levels));
  ref.depth = std::move(rr.depth);
  ref.pose = pose;
  ref.camera = cam;
  return ref;
}

const ReferenceView& Tracker::canonical_reference(const Pose& pose, const Camera& cam) {
  // Nearest canonical view by viewing direction from the object.
  const Vec3 dir = pose.camera_center().normalized();
  size_t best = 0;
  double best_dot = -2.0;
  const auto& views = cfg_.bundle->views;
  for (size_t i = 0; i < views.size(); ++i) {
    const double d = views[i].pose.camera_center().normalized().dot(dir);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  if (!canonical_cache_[best]) {
    const Pose& vp = views[best].pose;
    const Crop crop = crop_for_pose(vp, cam, cfg_.map->points, cfg_.crop_margin, cfg_.crop_output);
    const RenderResult rr = renderer_->render_view(crop.camera, vp);
    ReferenceView ref;
    ref.pyramid = std::make_shared<const FeaturePyramid>(extract_pyramid(to_gray(rr.rgb), cfg_.pyramid_levels));
    ref.depth = rr.depth;
    ref.pose = vp;
    ref.camera = crop.camera;
    canonical_cache_[best] = std::move(ref);
  }
  return *canonical_cache_[best];
}

Tracker::Attempt Tracker::warm(const ImageF& gray, const Camera& cam, const Pose& init) {
  Attempt a;
  try {
    const Crop crop = crop_for_pose(init, cam, cfg_.map->points, cfg_.crop_margin, cfg_.crop_output);
    const FeaturePyramid query = extract_pyramid(crop_image(gray, crop), cfg_.pyramid_levels);
    RenderFn fn;
    if (cfg_.reference == ReferenceMode::Dynamic) {
      fn = [this](const Pose& p, const Camera& c, const PixelMask& needed) { return render_reference(p, c, needed); };
    } else {
      const ReferenceView fixed = canonical_reference(init, cam);
      fn = [fixed](const Pose&, const Camera&, const PixelMask&) { return fixed; };
    }
    a.result = refine(query, fn, cfg_.map->points, init, crop.camera, cfg_.align);
    a.accepted = a.result.converged && a.result.mean_residual <= cfg_.warm_max_residual &&
                 a.result.visible_count >= cfg_.warm_min_visible;
  } catch (const Error&) {
    a.accepted = false;
  }
  return a;
}

FrameReport Tracker::process_frame(const ImageRGB& image, const Camera& cam) {
  const auto t0 = std::chrono::steady_clock::now();
  if (image.width != cam.width || image.height != cam.height)
    throw Error(ErrorCode::InvalidConfig, "image size does not match the camera");
  FrameReport report;
  report.frame_index = frame_++;
  report.state_before = state_;
  const ImageF gray = to_gray(image);

  auto finish = [&](const Attempt& a) {
    report.iterations += a.result.iterations;
    report.visible_count = a.result.visible_count;
    report.mean_residual = a.result.mean_residual;
    if (a.accepted) {
      state_ = TrackState::Warm;
      pose_ = a.result.pose;
      report.pose = a.result.pose;
    } else {
      state_ = TrackState::Cold;
      pose_.reset();
    }
    report.state_after = state_;
  };

  bool done = false;
  if (state_ == TrackState::Warm && pose_) {
    const Attempt a = warm(gray, cam, *pose_);
    if (a.accepted) {
      finish(a);
      done = true;
    } else {
      report.iterations += a.result.iterations;
    }
  }
  if (!done) {
    report.cold_start_attempted = true;
    Attempt polished;
    try {
      const PnPResult pnp = cold_localize(gray, *cfg_.bundle, cam, cfg_.cold);
      polished = warm(gray, cam, pnp.pose);
    } catch (const Error&) {
      polished = Attempt{};
    }
    finish(polished);
  }
  report.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<std::vector<FrameReport>> run_multi(std::vector<Tracker>& trackers, const std::vector<FrameStream>& streams,
                                                bool parallel) {
  if (trackers.size() != streams.size()) throw Error(ErrorCode::LengthMismatch, "one stream per tracker required");
  std::vector<std::vector<FrameReport>> out(trackers.size());
  std::vector<std::exception_ptr> errors(trackers.size());
  auto run = [&](size_t i) {
    try {
      for (int k = 0; k < streams[i].frames; ++k)
        out[i].push_back(trackers[i].process_frame(streams[i].frame(k), streams[i].camera));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (parallel && trackers.size() > 1) {
    std::vector<std::thread> threads;
    for (size_t i = 0; i < trackers.size(); ++i) threads.emplace_back(run, i);
    for (std::thread& t : threads) t.join();
  } else {
    for (size_t i = 0; i < trackers.size(); ++i) run(i);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace voxtrack
