#include "voxtrack/trajectory.hpp"

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

constexpr double kDeg = M_PI / 180.0;

int integer(double v, int line, const std::string& key, int lo) {
  if (v < lo || v != std::floor(v) || v > 1e9) throw SpecParseError(line, key + " must be an integer >= " + std::to_string(lo));
  return int(v);
}

Pose orbit_pose(double radius, double elevation_deg, double azimuth_deg, const Vec3& center) {
  const double el = elevation_deg * kDeg;
  const double az = azimuth_deg * kDeg;
  const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  return Pose::look_at(center + radius * dir, center, Vec3::UnitZ());
}

}  // namespace

const char* to_string(TrajectorySpec::Kind kind) {
  switch (kind) {
    case TrajectorySpec::Kind::Orbit: return "orbit";
    case TrajectorySpec::Kind::Roll: return "roll";
    case TrajectorySpec::Kind::Static: return "static";
    case TrajectorySpec::Kind::RandomWalk: return "random-walk";
  }
  return "?";
}

TrajectorySpec parse_trajectory_spec(const std::string& text) {
  TrajectorySpec spec;
  for (const detail::KeyValue& kv : detail::key_values(text)) {
    const int line = kv.line;
    const std::string& key = kv.key;
    const std::string& value = kv.value;
    if (key == "kind") {
      if (value == "orbit") spec.kind = TrajectorySpec::Kind::Orbit;
      else if (value == "roll") spec.kind = TrajectorySpec::Kind::Roll;
      else if (value == "static") spec.kind = TrajectorySpec::Kind::Static;
      else if (value == "random-walk") spec.kind = TrajectorySpec::Kind::RandomWalk;
      else throw SpecParseError(line, "unknown trajectory kind '" + value + "'");
    } else if (key == "frames") {
      spec.frames = integer(numbers(value, 1, line, key)[0], line, key, 1);
    } else if (key == "radius") {
      spec.radius = numbers(value, 1, line, key)[0];
      if (!(spec.radius > 0.0)) throw SpecParseError(line, "radius must be positive");
    } else if (key == "elevation") {
      spec.elevation_deg = numbers(value, 1, line, key)[0];
      if (std::abs(spec.elevation_deg) >= 89.0) throw SpecParseError(line, "elevation must be within (-89, 89)");
    } else if (key == "azimuth") {
      spec.azimuth_deg = numbers(value, 1, line, key)[0];
    } else if (key == "step") {
      spec.step_deg = numbers(value, 1, line, key)[0];
    } else if (key == "translation_step") {
      spec.translation_step = numbers(value, 1, line, key)[0];
      if (spec.translation_step < 0.0) throw SpecParseError(line, "translation_step must be non-negative");
    } else if (key == "noise") {
      spec.noise = numbers(value, 1, line, key)[0];
      if (spec.noise < 0.0 || spec.noise > 0.1) throw SpecParseError(line, "noise must lie in [0, 0.1]");
    } else if (key == "occlusion") {
      const auto v = numbers(value, 2, line, key);
      spec.occlusion_start = integer(v[0], line, key, 0);
      spec.occlusion_frames = integer(v[1], line, key, 0);
    } else if (key == "seed") {
      const double s = numbers(value, 1, line, key)[0];
      if (s < 0.0 || s != std::floor(s)) throw SpecParseError(line, "seed must be a non-negative integer");
      spec.seed = std::uint64_t(s);
    } else {
      throw SpecParseError(line, "unknown key '" + key + "'");
    }
  }
  return spec;
}

TrajectorySpec load_trajectory_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory_spec(ss.str());
}

std::vector<Pose> trajectory_poses(const TrajectorySpec& spec, const Vec3& center) {
  std::vector<Pose> poses;
  poses.reserve(size_t(spec.frames));
  const Pose start = orbit_pose(spec.radius, spec.elevation_deg, spec.azimuth_deg, center);
  Rng rng(mix_seed(spec.seed, 77));
  Pose walk = start;
  for (int k = 0; k < spec.frames; ++k) {
    switch (spec.kind) {
      case TrajectorySpec::Kind::Orbit:
        poses.push_back(orbit_pose(spec.radius, spec.elevation_deg, spec.azimuth_deg + k * spec.step_deg, center));
        break;
      case TrajectorySpec::Kind::Roll: {
        const Eigen::Quaterniond roll(Eigen::AngleAxisd(k * spec.step_deg * kDeg, Vec3::UnitZ()));
        poses.push_back(Pose(roll, Vec3::Zero()) * start);
        break;
      }
      case TrajectorySpec::Kind::Static:
        poses.push_back(start);
        break;
      case TrajectorySpec::Kind::RandomWalk: {
        if (k > 0) {
          // Rotate about the object centre (in the camera frame), then shift.
          const Vec3 c = walk * center;
          Vec3 w(rng.normal(), rng.normal(), rng.normal());
          Vec3 v(rng.normal(), rng.normal(), rng.normal());
          const Eigen::Quaterniond q(Eigen::AngleAxisd(w.norm() * spec.step_deg * kDeg / std::sqrt(3.0),
                                                       w.norm() > 0 ? Vec3(w.normalized()) : Vec3::UnitZ()));
          const Pose about(q, c - q * c);
          walk = Pose(Eigen::Quaterniond::Identity(), v * spec.translation_step / std::sqrt(3.0)) * about * walk;
        }
        poses.push_back(walk);
        break;
      }
    }
  }
  return poses;
}

Sequence::Sequence(std::shared_ptr<const Renderer> full, std::shared_ptr<const Renderer> empty, Camera cam,
                   std::vector<Pose> gt, TrajectorySpec spec)
    : full_(std::move(full)), empty_(std::move(empty)), cam_(cam), gt_(std::move(gt)), spec_(spec) {}

ImageRGB Sequence::frame(int k) const {
  if (k < 0 || k >= size()) throw Error(ErrorCode::OutOfBounds, "frame index out of range");
  const Renderer& r = spec_.occluded(k) ? *empty_ : *full_;
  ImageRGB img = r.render_view(cam_, gt_[size_t(k)]).rgb;
  if (spec_.noise > 0.0) {
    Rng rng(mix_seed(spec_.seed, std::uint64_t(k) + 1000));
    for (float& v : img.data) v = float(std::clamp(double(v) + spec_.noise * rng.normal(), 0.0, 1.0));
  }
  return img;
}

Sequence synth_sequence(const Scene& scene, const TrajectorySpec& spec) {
  auto full = std::make_shared<const Renderer>(scene.renderer());
  auto empty = std::make_shared<const Renderer>(full->background_only());
  return Sequence(full, empty, scene.spec.camera, trajectory_poses(spec, scene.center), spec);
}

}  // namespace voxtrack
