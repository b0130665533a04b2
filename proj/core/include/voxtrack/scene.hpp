#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voxtrack/coldstart.hpp"
#include "voxtrack/field.hpp"
#include "voxtrack/fit.hpp"
#include "voxtrack/geometry.hpp"
#include "voxtrack/object_map.hpp"
#include "voxtrack/render.hpp"

namespace voxtrack {

struct Primitive {
  enum class Kind { Box, Sphere };
  Kind kind = Kind::Box;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();  ///< full edge lengths; spheres use size.x() as radius
  Vec3 color = Vec3::Constant(0.5);
  int line = 0;  ///< source line, for error messages
};

/**
 * Scene description. Line grammar (`#` starts a comment):
 *
 *   camera = fx fy cx cy w h
 *   bbox = x0 y0 z0 x1 y1 z1          object field box
 *   resolution = n                    object nodes per axis
 *   background.bbox = x0 y0 z0 x1 y1 z1
 *   background.resolution = n         nodes along the longest background axis
 *   object.box = cx cy cz sx sy sz r g b
 *   object.sphere = cx cy cz radius r g b
 *   background.box = ...  background.sphere = ...
 *   density = d   texture_cells = n   map_points = m   seed = s
 */
struct SceneSpec {
  std::vector<Primitive> object;
  std::vector<Primitive> background;
  Aabb bbox{Vec3::Constant(-0.7), Vec3::Constant(0.7)};
  int resolution = 96;
  Aabb background_bbox{Vec3(-1.6, -1.6, -1.0), Vec3(1.6, 1.6, -0.3)};
  int background_resolution = 128;
  Camera camera{500.0, 500.0, 319.5, 239.5, 640, 480};
  double density = 400.0;
  int texture_cells = 6;
  int map_points = 600;
  std::uint64_t seed = 1;
};

/// Throws SpecParseError with the offending line.
SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::string& path);

/// Analytic rasterization: one-voxel density ramp across each surface,
/// per-face checker colours on object primitives.
VoxelField rasterize_object(const SceneSpec& spec);
VoxelField rasterize_background(const SceneSpec& spec);

struct BuildOptions {
  bool fidelity = false;  ///< fit the object field instead of rasterizing it
  int fit_views = 64;
  int fit_image_size = 64;
  int fit_resolution = 48;  ///< fit grid; the result is resampled to the scene resolution
  double fit_init_density = 1.0;
  FitOptions fit = default_fit();  ///< step 0 picks one fit-grid voxel
  static FitOptions default_fit() {
    FitOptions f;
    f.learning_rate = 1.0;
    return f;
  }
  BundleOptions bundle{};  ///< centre and radius are filled in from the map
};

struct Scene {
  SceneSpec spec;
  std::shared_ptr<const VoxelField> object;
  std::shared_ptr<const VoxelField> background;
  ObjectMap map;
  ReferenceBundle bundle;
  Vec3 center = Vec3::Zero();      ///< centre of the map's bounding box
  double bounding_radius = 0.0;    ///< largest map point distance from `center`
  double diameter = 0.0;
  Renderer renderer() const { return Renderer(object, background); }
};

/// Training views for the fidelity path: composed renders on a sphere at the
/// bundle radius, with a small camera of `size` x `size` pixels.
std::vector<TrainingView> training_views(const VoxelField& object, const VoxelField& background, int count, int size,
                                         double radius, std::uint64_t seed);

/**
 * Fidelity path: fits an object field on the options' fit grid against
 * composed renders of `reference` over `background` from views at `radius`
 * around the box centre, then resamples it onto `reference`'s grid.
 */
FitResult fit_object(const VoxelField& reference, const VoxelField& background, double radius,
                     const BuildOptions& options, std::uint64_t seed);

Scene build_scene(const SceneSpec& spec, const BuildOptions& options = {});

}  // namespace voxtrack
