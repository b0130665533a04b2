#include "voxtrack/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxtrack/errors.hpp"
#include "field_internal.hpp"

namespace voxtrack {

namespace {

constexpr double kOccupancyDensity = 1e-9;
constexpr double kMinOpacity = 1e-6;

struct IndexRange {
  long lo = 0;
  long hi = -1;  // inclusive
  bool empty() const { return hi < lo; }
};

// Sample indices within [first, last] whose positions may fall inside `box`.
IndexRange sample_range(const Aabb& box, const Vec3& origin, const Vec3& dir, double step, long first, long last) {
  const auto hit = box.intersect(origin, dir);
  if (!hit) return {};
  IndexRange r;
  r.lo = std::max(first, long(std::ceil(hit->first / step - 1e-9)));
  r.hi = std::min(last, long(std::floor(hit->second / step + 1e-9)));
  return r;
}

// Core quadrature shared by every render entry point.
RayResult march(const FieldSampler* object, const FieldSampler* background, const Vec3& origin,
                const Vec3& dir, double near, double far, double step, double min_transmittance) {
  RayResult out;
  double t0 = std::numeric_limits<double>::infinity();
  double t1 = -std::numeric_limits<double>::infinity();
  for (const FieldSampler* s : {object, background}) {
    if (!s) continue;
    if (auto hit = s->bbox().intersect(origin, dir)) {
      t0 = std::min(t0, hit->first);
      t1 = std::max(t1, hit->second);
    }
  }
  t0 = std::max(t0, near);
  t1 = std::min(t1, far);
  if (!(t0 <= t1)) return out;
  // Samples sit at whole multiples of the step from the origin, so adding a
  // field never moves the samples of another.
  const long first = long(std::ceil(t0 / step - 1e-9));
  const long last_index = long(std::floor(t1 / step + 1e-9));
  if (first > last_index) return out;

  IndexRange ro, rb;
  if (object && object->occupied()) ro = sample_range(*object->occupied(), origin, dir, step, first, last_index);
  if (background && background->occupied())
    rb = sample_range(*background->occupied(), origin, dir, step, first, last_index);
  if (ro.empty() && rb.empty()) return out;

  long i = std::numeric_limits<long>::max();
  long last = -1;
  if (!ro.empty()) i = std::min(i, ro.lo), last = std::max(last, ro.hi);
  if (!rb.empty()) i = std::min(i, rb.lo), last = std::max(last, rb.hi);

  double transmittance = 1.0;
  double r = 0.0, g = 0.0, b = 0.0, depth = 0.0, opacity = 0.0;
  for (; i <= last; ++i) {
    const bool in_o = i >= ro.lo && i <= ro.hi;
    const bool in_b = i >= rb.lo && i <= rb.hi;
    if (!in_o && !in_b) {
      // Gap between the two occupied intervals.
      const long next_o = (!ro.empty() && ro.lo > i) ? ro.lo : std::numeric_limits<long>::max();
      const long next_b = (!rb.empty() && rb.lo > i) ? rb.lo : std::numeric_limits<long>::max();
      const long next = std::min(next_o, next_b);
      if (next == std::numeric_limits<long>::max()) break;
      i = next - 1;
      continue;
    }
    const double t = double(i) * step;
    const Vec3 x = origin + t * dir;
    FieldSample s;
    if (in_o && in_b) {
      const FieldSample so = object->sample(x);
      const FieldSample sb = background->sample(x);
      s = compose_sample(sb.density, sb.color, so.density, so.color);
    } else if (in_o) {
      s = object->sample(x);
    } else {
      s = background->sample(x);
    }
    if (!(s.density > 0.0)) continue;
    const double alpha = 1.0 - std::exp(-s.density * step);
    const double w = transmittance * alpha;
    r += w * s.color.x();
    g += w * s.color.y();
    b += w * s.color.z();
    depth += w * t;
    opacity += w;
    transmittance *= 1.0 - alpha;
    if (transmittance < min_transmittance) break;
  }
  out.rgb = Vec3(r, g, b);
  out.opacity = opacity;
  out.depth = opacity < kMinOpacity ? 0.0 : depth / opacity;
  return out;
}

void check_ray(const Vec3& dir, double near, double far, double step) {
  if (!(std::abs(dir.norm() - 1.0) <= 1e-6)) throw Error(ErrorCode::InvalidRay, "direction must be unit norm");
  if (!(near < far)) throw Error(ErrorCode::InvalidRay, "near must be below far");
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidRay, "step must be positive");
}

// Crop cameras may put the principal point outside their image, so only the
// focal lengths, size and finiteness are checked here.
void check_intrinsics(const Camera& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0) || cam.width <= 0 || cam.height <= 0 || !std::isfinite(cam.cx) ||
      !std::isfinite(cam.cy))
    throw Error(ErrorCode::InvalidRay, "malformed intrinsics");
}

}  // namespace

FieldSampler::FieldSampler(const VoxelField& field) : bbox_(field.bbox()), res_(field.resolution()) {
  const size_t count = field.node_count();
  nodes_.resize(count);
  int lo[3] = {res_.nx, res_.ny, res_.nz};
  int hi[3] = {-1, -1, -1};
  for (int k = 0; k < res_.nz; ++k)
    for (int j = 0; j < res_.ny; ++j)
      for (int i = 0; i < res_.nx; ++i) {
        const size_t idx = field.index(i, j, k);
        detail::NodeValue& v = nodes_[idx];
        v.density = field.node_density(idx);
        v.r = activate_color(field.color_preact(0)[idx]);
        v.g = activate_color(field.color_preact(1)[idx]);
        v.b = activate_color(field.color_preact(2)[idx]);
        if (v.density > kOccupancyDensity) {
          lo[0] = std::min(lo[0], i), hi[0] = std::max(hi[0], i);
          lo[1] = std::min(lo[1], j), hi[1] = std::max(hi[1], j);
          lo[2] = std::min(lo[2], k), hi[2] = std::max(hi[2], k);
        }
      }
  const Vec3 vs = field.voxel_size();
  min_voxel_ = vs.minCoeff();
  if (hi[0] >= 0) {
    // Trilinear support reaches one voxel past the outermost occupied node.
    Aabb occ;
    const int n[3] = {res_.nx, res_.ny, res_.nz};
    for (int a = 0; a < 3; ++a) {
      occ.min[a] = bbox_.min[a] + vs[a] * std::max(0, lo[a] - 1);
      occ.max[a] = bbox_.min[a] + vs[a] * std::min(n[a] - 1, hi[a] + 1);
    }
    occupied_ = occ;
  }
}

FieldSample FieldSampler::sample(const Vec3& x) const {
  detail::GridCoord g;
  if (!detail::grid_coord(bbox_, res_, x, g)) return {};
  return detail::trilinear(g, res_, [this](size_t idx) { return nodes_[idx]; });
}

Renderer::Renderer(std::shared_ptr<const VoxelField> object, std::shared_ptr<const VoxelField> background,
                   RenderOptions options)
    : object_(std::move(object)), background_(std::move(background)), options_(options) {
  if (!object_ && !background_) throw Error(ErrorCode::InvalidConfig, "renderer needs at least one field");
  if (object_) object_sampler_ = std::make_shared<FieldSampler>(*object_);
  if (background_) background_sampler_ = std::make_shared<FieldSampler>(*background_);
  step_ = options_.step;
  if (step_ <= 0.0) {
    const double v = object_sampler_ ? object_sampler_->min_voxel() : background_sampler_->min_voxel();
    step_ = 0.5 * v;
  }
}

RayResult Renderer::render_ray(const Vec3& origin, const Vec3& dir) const {
  return render_ray(origin, dir, options_.near, options_.far);
}

RayResult Renderer::render_ray(const Vec3& origin, const Vec3& dir, double near, double far) const {
  check_ray(dir, near, far, step_);
  return march(object_sampler_.get(), background_sampler_.get(), origin, dir, near, far, step_,
               options_.min_transmittance);
}

RenderResult Renderer::render_view(const Camera& cam, const Pose& pose, const PixelMask* mask) const {
  check_intrinsics(cam);
  RenderResult out{ImageRGB(cam.width, cam.height), ImageF(cam.width, cam.height),
                   ImageF(cam.width, cam.height)};
  const Mat3 r_t = pose.rotation_matrix().transpose();
  const Vec3 origin = pose.camera_center();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      if (mask && !mask->test(x, y)) continue;
      const Vec3 dir_cam = cam.ray_direction(Vec2(x, y));
      const Vec3 dir = (r_t * dir_cam).normalized();
      const RayResult ray = march(object_sampler_.get(), background_sampler_.get(), origin, dir,
                                  options_.near, options_.far, step_, options_.min_transmittance);
      float* p = out.rgb.px(x, y);
      p[0] = float(std::clamp(ray.rgb.x(), 0.0, 1.0));
      p[1] = float(std::clamp(ray.rgb.y(), 0.0, 1.0));
      p[2] = float(std::clamp(ray.rgb.z(), 0.0, 1.0));
      out.depth.at(x, y) = float(ray.depth * dir_cam.z());
      out.opacity.at(x, y) = float(std::clamp(ray.opacity, 0.0, 1.0));
    }
  }
  return out;
}

double Renderer::render_depth_at(const Camera& cam, const Pose& pose, const Vec2& pixel) const {
  const Vec3 dir_cam = cam.ray_direction(pixel);
  const Vec3 dir = (pose.rotation_matrix().transpose() * dir_cam).normalized();
  const RayResult ray = march(object_sampler_.get(), background_sampler_.get(), pose.camera_center(),
                              dir, options_.near, options_.far, step_, options_.min_transmittance);
  return ray.depth * dir_cam.z();
}

Renderer Renderer::background_only() const {
  if (!background_) throw Error(ErrorCode::InvalidConfig, "renderer has no background field");
  Renderer r = *this;
  r.object_.reset();
  r.object_sampler_.reset();
  return r;
}

RayResult render_ray(const VoxelField& field, const Vec3& origin, const Vec3& dir, double near,
                     double far, double step) {
  check_ray(dir, near, far, step);
  const FieldSampler sampler(field);
  return march(&sampler, nullptr, origin, dir, near, far, step, 1e-10);
}

RenderResult render_view(const VoxelField& object, const VoxelField* background, const Camera& cam,
                         const Pose& pose) {
  auto obj = std::make_shared<const VoxelField>(object);
  std::shared_ptr<const VoxelField> bg;
  if (background) bg = std::make_shared<const VoxelField>(*background);
  return Renderer(obj, bg).render_view(cam, pose);
}

std::vector<bool> visibility_mask(const Renderer& renderer, const Camera& cam, const Pose& pose,
                                  const std::vector<Vec3>& points, double depth_tol) {
  std::vector<bool> visible(points.size(), false);
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 xc = pose * points[i];
    if (!(xc.z() > kMinDepth)) continue;
    const Vec2 px = project(cam, xc);
    if (!cam.contains(px)) continue;
    const double d = renderer.render_depth_at(cam, pose, px);
    visible[i] = std::abs(d - xc.z()) < depth_tol;
  }
  return visible;
}

}  // namespace voxtrack
