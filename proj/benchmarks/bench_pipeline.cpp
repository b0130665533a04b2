#include <benchmark/benchmark.h>

#include <memory>
#include <string>

#include "voxtrack/align.hpp"
#include "voxtrack/coldstart.hpp"
#include "voxtrack/features.hpp"
#include "voxtrack/random.hpp"
#include "voxtrack/scene.hpp"
#include "voxtrack/tracker.hpp"
#include "voxtrack/trajectory.hpp"

using namespace voxtrack;

namespace {

const Scene& scene() {
  static const Scene s = build_scene(load_scene_spec(std::string(VOXTRACK_DATA_DIR) + "/standard.scn"));
  return s;
}

TrackerConfig tracker_config() {
  TrackerConfig cfg;
  cfg.object = scene().object;
  cfg.background = scene().background;
  cfg.map = std::make_shared<const ObjectMap>(scene().map);
  cfg.bundle = std::make_shared<const ReferenceBundle>(scene().bundle);
  return cfg;
}

const Sequence& sequence() {
  static const Sequence seq = [] {
    TrajectorySpec t;
    t.frames = 2;
    t.azimuth_deg = 40.0;
    t.step_deg = 1.8;
    t.noise = 2.0 / 255.0;
    return synth_sequence(scene(), t);
  }();
  return seq;
}

void BM_ExpLog(benchmark::State& state) {
  Twist xi;
  xi << 0.1, -0.2, 0.3, 0.01, 0.02, -0.03;
  for (auto _ : state) {
    const Twist back = log(exp(xi));
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_ExpLog);

void BM_RenderCrop(benchmark::State& state) {
  const int size = int(state.range(0));
  const Renderer r = scene().renderer();
  const Pose gt = sequence().gt()[0];
  const Crop crop = crop_for_pose(gt, sequence().camera(), scene().map.points, 1.25, size);
  for (auto _ : state) benchmark::DoNotOptimize(r.render_view(crop.camera, gt));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_RenderCrop)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ExtractPyramid(benchmark::State& state) {
  const Pose gt = sequence().gt()[0];
  const Crop crop = crop_for_pose(gt, sequence().camera(), scene().map.points, 1.25, 256);
  const ImageF gray = to_gray(scene().renderer().render_view(crop.camera, gt).rgb);
  for (auto _ : state) benchmark::DoNotOptimize(extract_pyramid(gray, 3));
}
BENCHMARK(BM_ExtractPyramid)->Unit(benchmark::kMillisecond);

void BM_Refine(benchmark::State& state) {
  auto renderer = std::make_shared<const Renderer>(scene().renderer());
  const Pose gt = sequence().gt()[0];
  const Crop crop = crop_for_pose(gt, sequence().camera(), scene().map.points, 1.25, 256);
  const FeaturePyramid query = extract_pyramid(to_gray(renderer->render_view(crop.camera, gt).rgb), 3);
  const RenderFn render = [renderer](const Pose& pose, const Camera& cam, const PixelMask& needed) {
    RenderResult rr = renderer->render_view(cam, pose, &needed);
    ReferenceView ref;
    ref.pyramid = std::make_shared<const FeaturePyramid>(extract_pyramid(to_gray(rr.rgb), 3));
    ref.depth = std::move(rr.depth);
    ref.pose = pose;
    ref.camera = cam;
    return ref;
  };
  Twist xi;
  xi << 0.03, -0.04, 0.05, 0.01, -0.01, 0.015;
  const Pose init = exp(xi) * gt;
  for (auto _ : state)
    benchmark::DoNotOptimize(refine(query, render, scene().map.points, init, crop.camera, AlignConfig{}));
}
BENCHMARK(BM_Refine)->Unit(benchmark::kMillisecond);

void BM_PnPRansac(benchmark::State& state) {
  const Camera cam = sequence().camera();
  const Pose gt = sequence().gt()[0];
  Rng rng(5);
  std::vector<Correspondence> corr;
  for (const Vec3& p : scene().map.points) {
    Correspondence c;
    c.point = p;
    c.pixel = project(cam, gt * p);
    if (corr.size() % 2 == 1) c.pixel = Vec2(rng.uniform(0, cam.width), rng.uniform(0, cam.height));
    corr.push_back(c);
    if (corr.size() == 200) break;
  }
  for (auto _ : state) benchmark::DoNotOptimize(pnp_ransac(corr, cam));
}
BENCHMARK(BM_PnPRansac)->Unit(benchmark::kMillisecond);

void BM_ColdLocalize(benchmark::State& state) {
  const ImageF gray = to_gray(sequence().frame(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(cold_localize(gray, scene().bundle, sequence().camera(), ColdStartConfig{}));
}
BENCHMARK(BM_ColdLocalize)->Unit(benchmark::kMillisecond);

void BM_WarmFrame(benchmark::State& state) {
  Tracker warm(tracker_config());
  warm.process_frame(sequence().frame(0), sequence().camera());
  const ImageRGB next = sequence().frame(1);
  for (auto _ : state) {
    Tracker t = warm;
    benchmark::DoNotOptimize(t.process_frame(next, sequence().camera()));
  }
}
BENCHMARK(BM_WarmFrame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
