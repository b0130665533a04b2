#include "voxtrack/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "voxtrack/errors.hpp"
#include "voxtrack/random.hpp"
#include "spec_text.hpp"

namespace voxtrack {

namespace {

using detail::numbers;

int positive_int(double v, int line, const std::string& key) {
  if (v < 1.0 || v != std::floor(v) || v > 1e9) throw SpecParseError(line, key + " must be a positive integer");
  return int(v);
}

Aabb box_of(const std::vector<double>& v) {
  return Aabb{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
}

Primitive primitive(const std::string& kind, const std::string& value, int line, const std::string& key) {
  Primitive p;
  p.line = line;
  if (kind == "box") {
    const auto v = numbers(value, 9, line, key);
    p.kind = Primitive::Kind::Box;
    p.center = Vec3(v[0], v[1], v[2]);
    p.size = Vec3(v[3], v[4], v[5]);
    p.color = Vec3(v[6], v[7], v[8]);
    if (!(p.size.array() > 0.0).all()) throw SpecParseError(line, "box size must be positive");
  } else {
    const auto v = numbers(value, 7, line, key);
    p.kind = Primitive::Kind::Sphere;
    p.center = Vec3(v[0], v[1], v[2]);
    p.size = Vec3::Constant(v[3]);
    p.color = Vec3(v[4], v[5], v[6]);
    if (!(v[3] > 0.0)) throw SpecParseError(line, "sphere radius must be positive");
  }
  if (!((p.color.array() >= 0.0).all() && (p.color.array() <= 1.0).all()))
    throw SpecParseError(line, "colour channels must lie in [0, 1]");
  return p;
}

Aabb bounds_of(const Primitive& p) {
  const Vec3 half = p.kind == Primitive::Kind::Box ? Vec3(0.5 * p.size) : Vec3(p.size);
  return Aabb{p.center - half, p.center + half};
}

double signed_distance(const Primitive& p, const Vec3& x) {
  if (p.kind == Primitive::Kind::Sphere) return (x - p.center).norm() - p.size.x();
  const Vec3 q = (x - p.center).cwiseAbs() - 0.5 * p.size;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

// Independent random brightness per cell so that corner patches differ after
// bias/gain normalization.
Vec3 cell_color(const SceneSpec& spec, size_t prim, int face, int cu, int cv, const Vec3& base) {
  std::uint64_t key = mix_seed(spec.seed, prim);
  key = mix_seed(key, std::uint64_t(face));
  key = mix_seed(key, std::uint64_t(cu) * 4096u + std::uint64_t(cv));
  Rng rng(key);
  const double level = 0.08 + 0.84 * rng.uniform();
  Vec3 c;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(level + 0.3 * (rng.uniform() - 0.5), 0.0, 1.0);
  return 0.8 * c + 0.2 * base;
}

// Checker colour of the surface nearest to `x`.
Vec3 surface_color(const SceneSpec& spec, size_t index, const Primitive& p, const Vec3& x) {
  const int cells = spec.texture_cells;
  auto cell = [cells](double u) { return std::clamp(int(std::floor(u * cells)), 0, cells - 1); };
  if (p.kind == Primitive::Kind::Sphere) {
    const Vec3 d = (x - p.center).normalized();
    const double u = (std::atan2(d.y(), d.x()) + M_PI) / (2.0 * M_PI);
    const double v = std::acos(std::clamp(d.z(), -1.0, 1.0)) / M_PI;
    const int cu = std::clamp(int(std::floor(u * 2 * cells)), 0, 2 * cells - 1);
    return cell_color(spec, index, 0, cu, cell(v), p.color);
  }
  const Vec3 rel = (x - p.center).cwiseQuotient(0.5 * p.size);
  int axis = 0;
  rel.cwiseAbs().maxCoeff(&axis);
  const int face = 2 * axis + (rel[axis] > 0.0 ? 1 : 0);
  const int a = (axis + 1) % 3;
  const int b = (axis + 2) % 3;
  const double u = 0.5 * (rel[a] + 1.0);
  const double v = 0.5 * (rel[b] + 1.0);
  return cell_color(spec, index, face, cell(u), cell(v), p.color);
}

VoxelField rasterize(const std::vector<Primitive>& prims, const Aabb& bbox, GridSize res, const SceneSpec& spec,
                     bool textured) {
  VoxelField field(bbox, res);
  const Vec3 vs = field.voxel_size();
  const double h = vs.maxCoeff();
  for (int k = 0; k < res.nz; ++k)
    for (int j = 0; j < res.ny; ++j)
      for (int i = 0; i < res.nx; ++i) {
        const Vec3 x = field.node_position(i, j, k);
        double occupancy = 0.0;
        double nearest = 1e30;
        size_t which = 0;
        for (size_t p = 0; p < prims.size(); ++p) {
          const double sd = signed_distance(prims[p], x);
          occupancy = std::max(occupancy, std::clamp(0.5 - sd / h, 0.0, 1.0));
          if (sd < nearest) {
            nearest = sd;
            which = p;
          }
        }
        if (nearest > 2.0 * h) continue;
        const Vec3 color = textured ? surface_color(spec, which, prims[which], x) : prims[which].color;
        field.set_node(field.index(i, j, k), spec.density * occupancy, color);
      }
  return field;
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  int last = 0;
  for (const detail::KeyValue& kv : detail::key_values(text, &last)) {
    const int line = kv.line;
    const std::string& key = kv.key;
    const std::string& value = kv.value;
    if (key == "camera") {
      const auto v = numbers(value, 6, line, key);
      spec.camera = Camera{v[0], v[1], v[2], v[3], positive_int(v[4], line, key), positive_int(v[5], line, key)};
      try {
        spec.camera.validate();
      } catch (const Error& e) {
        throw SpecParseError(line, e.what());
      }
    } else if (key == "bbox") {
      spec.bbox = box_of(numbers(value, 6, line, key));
      if (!spec.bbox.valid()) throw SpecParseError(line, "bbox min must be below max");
    } else if (key == "resolution") {
      spec.resolution = positive_int(numbers(value, 1, line, key)[0], line, key);
      if (spec.resolution < 2) throw SpecParseError(line, "resolution must be at least 2");
    } else if (key == "background.bbox") {
      spec.background_bbox = box_of(numbers(value, 6, line, key));
      if (!spec.background_bbox.valid()) throw SpecParseError(line, "bbox min must be below max");
    } else if (key == "background.resolution") {
      spec.background_resolution = positive_int(numbers(value, 1, line, key)[0], line, key);
      if (spec.background_resolution < 2) throw SpecParseError(line, "resolution must be at least 2");
    } else if (key == "object.box" || key == "object.sphere") {
      spec.object.push_back(primitive(key.substr(7), value, line, key));
    } else if (key == "background.box" || key == "background.sphere") {
      spec.background.push_back(primitive(key.substr(11), value, line, key));
    } else if (key == "density") {
      spec.density = numbers(value, 1, line, key)[0];
      if (!(spec.density > 0.0)) throw SpecParseError(line, "density must be positive");
    } else if (key == "texture_cells") {
      spec.texture_cells = positive_int(numbers(value, 1, line, key)[0], line, key);
    } else if (key == "map_points") {
      spec.map_points = positive_int(numbers(value, 1, line, key)[0], line, key);
    } else if (key == "seed") {
      const double s = numbers(value, 1, line, key)[0];
      if (s < 0.0 || s != std::floor(s)) throw SpecParseError(line, "seed must be a non-negative integer");
      spec.seed = std::uint64_t(s);
    } else {
      throw SpecParseError(line, "unknown key '" + key + "'");
    }
  }
  if (spec.object.empty()) throw SpecParseError(last + 1, "scene has no object primitive");
  for (const Primitive& p : spec.object) {
    const Aabb b = bounds_of(p);
    if (!((b.min.array() >= spec.bbox.min.array()).all() && (b.max.array() <= spec.bbox.max.array()).all()))
      throw SpecParseError(p.line, "object primitive leaves the object bbox");
  }
  return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str());
}

VoxelField rasterize_object(const SceneSpec& spec) {
  const int n = spec.resolution;
  return rasterize(spec.object, spec.bbox, GridSize{n, n, n}, spec, true);
}

VoxelField rasterize_background(const SceneSpec& spec) {
  const Vec3 e = spec.background_bbox.extent();
  const double h = e.maxCoeff() / double(spec.background_resolution - 1);
  const GridSize res{std::max(2, int(std::ceil(e.x() / h)) + 1), std::max(2, int(std::ceil(e.y() / h)) + 1),
                     std::max(2, int(std::ceil(e.z() / h)) + 1)};
  return rasterize(spec.background, spec.background_bbox, res, spec, false);
}

std::vector<TrainingView> training_views(const VoxelField& object, const VoxelField& background, int count, int size,
                                         double radius, std::uint64_t seed) {
  const double f = 500.0 * double(size) / 480.0;
  const Camera cam{f, f, 0.5 * size - 0.5, 0.5 * size - 0.5, size, size};
  const Renderer renderer(std::make_shared<VoxelField>(object), std::make_shared<VoxelField>(background));
  Rng rng(seed);
  std::vector<TrainingView> views;
  for (int i = 0; i < count; ++i) {
    // Upper hemisphere plus a little below the horizon, uniform in azimuth.
    const double z = rng.uniform(-0.2, 0.95);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double s = std::sqrt(1.0 - z * z);
    const Pose pose = canonical_pose(Vec3(s * std::cos(phi), s * std::sin(phi), z), object.bbox().center(), radius);
    views.push_back({renderer.render_view(cam, pose).rgb, pose, cam});
  }
  return views;
}

FitResult fit_object(const VoxelField& reference, const VoxelField& background, double radius,
                     const BuildOptions& options, std::uint64_t seed) {
  const auto views =
      training_views(reference, background, options.fit_views, options.fit_image_size, radius, seed);
  const int n = options.fit_resolution;
  const VoxelField init(reference.bbox(), GridSize{n, n, n}, density_preact_for(options.fit_init_density), 0.0f);
  FitOptions fopt = options.fit;
  if (fopt.step <= 0.0) fopt.step = init.voxel_size().minCoeff();
  FitResult fit = fit_difference_field(views, background, init, fopt);
  fit.field = resample_field(fit.field, reference.resolution());
  return fit;
}

Scene build_scene(const SceneSpec& spec, const BuildOptions& options) {
  Scene scene;
  scene.spec = spec;
  auto background = std::make_shared<VoxelField>(rasterize_background(spec));
  auto analytic = std::make_shared<VoxelField>(rasterize_object(spec));
  scene.background = background;

  // The map and the camera distances come from the analytic surface so both
  // build paths share one geometry.
  ObjectMap map = extract_object_points(*analytic, 1.0, spec.map_points, mix_seed(spec.seed, 1));
  Vec3 lo = map.points.front(), hi = map.points.front();
  for (const Vec3& p : map.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  scene.center = 0.5 * (lo + hi);
  for (const Vec3& p : map.points) scene.bounding_radius = std::max(scene.bounding_radius, (p - scene.center).norm());
  scene.diameter = map.diameter();
  const double radius = 3.0 * scene.bounding_radius;

  if (options.fidelity) {
    FitResult fit = fit_object(*analytic, *background, radius, options, mix_seed(spec.seed, 2));
    scene.object = std::make_shared<VoxelField>(std::move(fit.field));
  } else {
    scene.object = analytic;
  }

  BundleOptions bopt = options.bundle;
  bopt.center = scene.center;
  bopt.radius = radius;
  const Renderer object_only(scene.object, nullptr);
  scene.bundle = build_reference_bundle(object_only, spec.camera, bopt);

  // Map descriptors from the canonical view facing each point most directly.
  const std::vector<Vec3> dirs = canonical_directions();
  map.descriptors.assign(map.size(), Descriptor::Zero());
  for (size_t i = 0; i < map.size(); ++i) {
    const Vec3 out = (map.points[i] - scene.center).normalized();
    size_t best = 0;
    for (size_t v = 1; v < dirs.size(); ++v)
      if (dirs[v].dot(out) > dirs[best].dot(out)) best = v;
    const CanonicalView& view = scene.bundle.views[best];
    const Vec3 xc = view.pose * map.points[i];
    if (!(xc.z() > kMinDepth)) continue;
    const Vec2 px = project(view.camera, xc);
    if (descriptor_in_bounds(view.gray, px)) map.descriptors[i] = describe(view.gray, px);
  }
  scene.map = std::move(map);
  return scene;
}

}  // namespace voxtrack
