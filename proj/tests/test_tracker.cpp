#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "voxtrack/errors.hpp"
#include "voxtrack/tracker.hpp"
#include "voxtrack/trajectory.hpp"

using namespace voxtrack;
using namespace voxtrack::testing;

namespace {

TrajectorySpec short_orbit(int frames, double step = 3.0, std::uint64_t seed = 3) {
  TrajectorySpec t;
  t.kind = TrajectorySpec::Kind::Orbit;
  t.frames = frames;
  t.radius = 2.6;
  t.elevation_deg = 25.0;
  t.azimuth_deg = 40.0;
  t.step_deg = step;
  t.noise = 2.0 / 255.0;
  t.seed = seed;
  return t;
}

std::vector<FrameReport> run(Tracker& t, const Sequence& seq) {
  std::vector<FrameReport> out;
  for (int k = 0; k < seq.size(); ++k) out.push_back(t.process_frame(seq.frame(k), seq.camera()));
  return out;
}

std::vector<Vec3> cube_points() {
  std::vector<Vec3> pts;
  for (int i = -1; i <= 1; i += 2)
    for (int j = -1; j <= 1; j += 2)
      for (int k = -1; k <= 1; k += 2) pts.push_back(0.3 * Vec3(i, j, k));
  return pts;
}

}  // namespace

TEST(TrackerConfig, Validation) {
  const Scene& s = standard_scene();
  EXPECT_NO_THROW(Tracker{tracker_config(s)});
  TrackerConfig cfg = tracker_config(s);
  cfg.crop_margin = 0.5;
  try {
    Tracker t(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  cfg = tracker_config(s);
  cfg.crop_output = 32;
  EXPECT_THROW(Tracker{cfg}, Error);
  cfg = tracker_config(s);
  cfg.bundle = nullptr;
  EXPECT_THROW(Tracker{cfg}, Error);
}

TEST(Tracker, StartsCold) {
  const Tracker t(tracker_config(standard_scene()));
  EXPECT_EQ(t.state(), TrackState::Cold);
  EXPECT_FALSE(t.pose().has_value());
  EXPECT_EQ(t.frames_processed(), 0);
}

TEST(CropForPose, CentredOnProjection) {
  const Camera cam = standard_camera();
  const Pose pose(Eigen::Quaterniond::Identity(), Vec3(0, 0, 3));
  const Crop c = crop_for_pose(pose, cam, cube_points(), 1.25, 256);
  EXPECT_NEAR(c.x0 + 0.5 * c.width, cam.cx + 0.5, 1e-9);
  EXPECT_NEAR(c.y0 + 0.5 * c.height, cam.cy + 0.5, 1e-9);
  // Widest extent is the near face: 0.3 / 2.7 * 500 px each side.
  EXPECT_NEAR(c.width, 1.25 * 2.0 * 500.0 * 0.3 / 2.7, 1e-9);
  EXPECT_EQ(c.camera.width, 256);
}

TEST(CropForPose, ProjectionIdentity) {
  const Camera cam = standard_camera();
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Twist xi;
    for (int i = 0; i < 6; ++i) xi[i] = rng.uniform(-0.3, 0.3);
    const Pose pose = Pose(Eigen::Quaterniond::Identity(), Vec3(0, 0, 3)) * exp(xi);
    const Crop c = crop_for_pose(pose, cam, cube_points(), 1.25, 200);
    for (int i = 0; i < 100; ++i) {
      const Vec3 xc = pose * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      const Vec2 direct = project(c.camera, xc);
      const Vec2 mapped = c.map(project(cam, xc));
      EXPECT_LT((direct - mapped).norm(), 1e-9);
      EXPECT_LT((c.unmap(direct) - project(cam, xc)).norm(), 1e-9);
    }
  }
}

TEST(CropForPose, ClampedToFrame) {
  const Camera cam = standard_camera();
  const Pose pose(Eigen::Quaterniond::Identity(), Vec3(1.6, 1.0, 3));
  const Crop c = crop_for_pose(pose, cam, cube_points(), 1.25, 128);
  EXPECT_GE(c.x0, 0.0);
  EXPECT_GE(c.y0, 0.0);
  EXPECT_LE(c.x0 + c.width, cam.width + 1e-9);
  EXPECT_LE(c.y0 + c.height, cam.height + 1e-9);
}

TEST(CropForPose, BehindCamera) {
  const Pose pose(Eigen::Quaterniond::Identity(), Vec3(0, 0, -3));
  try {
    crop_for_pose(pose, standard_camera(), cube_points(), 1.25, 256);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ObjectOutOfFrame);
  }
}

TEST(CropImage, ResamplesLinearRamp) {
  const Camera cam = standard_camera();
  ImageF frame(cam.width, cam.height);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) frame.at(x, y) = float(0.001 * x + 0.002 * y);
  const Crop c = crop_for_pose(Pose(Eigen::Quaterniond::Identity(), Vec3(0.1, 0, 3)), cam, cube_points(), 1.25, 64);
  const ImageF out = crop_image(frame, c);
  for (int y = 0; y < 64; y += 7)
    for (int x = 0; x < 64; x += 5) {
      const Vec2 src = c.unmap(Vec2(x, y));
      EXPECT_NEAR(out.at(x, y), 0.001 * src.x() + 0.002 * src.y(), 1e-5);
    }
}

TEST(Tracker, ColdThenWarm) {
  const Scene& s = standard_scene();
  const Sequence seq = synth_sequence(s, short_orbit(4));
  Tracker t(tracker_config(s));
  const std::vector<FrameReport> r = run(t, seq);
  EXPECT_TRUE(r[0].cold_start_attempted);
  EXPECT_EQ(r[0].state_before, TrackState::Cold);
  ASSERT_EQ(r[0].state_after, TrackState::Warm);
  EXPECT_LT(rotation_distance_deg(*r[0].pose, seq.gt()[0]), 2.0);
  EXPECT_LT(translation_distance(*r[0].pose, seq.gt()[0]), 0.02 * s.diameter);
  for (size_t k = 1; k < r.size(); ++k) {
    EXPECT_FALSE(r[k].cold_start_attempted) << k;
    EXPECT_EQ(r[k].state_before, TrackState::Warm);
    ASSERT_EQ(r[k].state_after, TrackState::Warm);
    EXPECT_LT(rotation_distance_deg(*r[k].pose, seq.gt()[k]), 0.5) << k;
    EXPECT_LT(translation_distance(*r[k].pose, seq.gt()[k]), 0.005 * s.diameter) << k;
  }
  EXPECT_EQ(t.frames_processed(), 4);
}

TEST(Tracker, AbsentObjectGoesCold) {
  const Scene& s = standard_scene();
  TrajectorySpec spec = short_orbit(3);
  spec.occlusion_start = 1;
  spec.occlusion_frames = 1;
  const Sequence seq = synth_sequence(s, spec);
  Tracker t(tracker_config(s));
  const std::vector<FrameReport> r = run(t, seq);
  EXPECT_EQ(r[0].state_after, TrackState::Warm);
  EXPECT_EQ(r[1].state_before, TrackState::Warm);
  EXPECT_EQ(r[1].state_after, TrackState::Cold);
  EXPECT_FALSE(r[1].pose.has_value());
  EXPECT_TRUE(r[1].cold_start_attempted);
  // Reacquired as soon as it reappears.
  EXPECT_EQ(r[2].state_after, TrackState::Warm);
  EXPECT_FALSE(t.pose() == std::nullopt);
}

TEST(Tracker, ReportsAreTotal) {
  const Scene& s = standard_scene();
  TrajectorySpec spec = short_orbit(4);
  spec.occlusion_start = 2;
  spec.occlusion_frames = 1;
  const Sequence seq = synth_sequence(s, spec);
  Tracker t(tracker_config(s));
  const std::vector<FrameReport> r = run(t, seq);
  ASSERT_EQ(r.size(), 4u);
  for (size_t k = 0; k < r.size(); ++k) {
    EXPECT_EQ(r[k].frame_index, int(k));
    EXPECT_EQ(r[k].pose.has_value(), r[k].state_after == TrackState::Warm);
    if (r[k].pose) EXPECT_NEAR(r[k].pose->rotation().norm(), 1.0, 1e-12);
    if (k > 0) EXPECT_EQ(r[k].state_before, r[k - 1].state_after);
  }
}

TEST(Tracker, WrongImageSize) {
  Tracker t(tracker_config(standard_scene()));
  EXPECT_THROW(t.process_frame(ImageRGB(320, 240), standard_camera()), Error);
}

TEST(Tracker, ResetAndDeterminism) {
  const Scene& s = standard_scene();
  const Sequence seq = synth_sequence(s, short_orbit(3));
  Tracker t(tracker_config(s));
  const std::vector<FrameReport> a = run(t, seq);
  t.reset();
  EXPECT_EQ(t.state(), TrackState::Cold);
  const std::vector<FrameReport> b = run(t, seq);
  for (size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(same_result(a[k], b[k])) << k;
}

TEST(Tracker, InstancesAreIndependent) {
  const Scene& s = standard_scene();
  const Sequence seq = synth_sequence(s, short_orbit(2));
  Tracker a(tracker_config(s));
  Tracker b(tracker_config(s));
  a.process_frame(seq.frame(0), seq.camera());
  EXPECT_EQ(b.state(), TrackState::Cold);
  EXPECT_EQ(b.frames_processed(), 0);
  const FrameReport rb = b.process_frame(seq.frame(0), seq.camera());
  const FrameReport ra = a.process_frame(seq.frame(1), seq.camera());
  EXPECT_EQ(rb.frame_index, 0);
  EXPECT_EQ(ra.frame_index, 1);
}

TEST(RunMulti, SingleTrackerMatchesLoop) {
  const Scene& s = standard_scene();
  const Sequence seq = synth_sequence(s, short_orbit(3));
  Tracker loop(tracker_config(s));
  const std::vector<FrameReport> expected = run(loop, seq);
  std::vector<Tracker> ts{Tracker(tracker_config(s))};
  const auto got = run_multi(ts, {FrameStream{seq.camera(), seq.size(), [seq](int k) { return seq.frame(k); }}});
  ASSERT_EQ(got.size(), 1u);
  ASSERT_EQ(got[0].size(), expected.size());
  for (size_t k = 0; k < expected.size(); ++k) EXPECT_TRUE(same_result(got[0][k], expected[k]));
}

TEST(RunMulti, ParallelEqualsSerial) {
  const Scene& s = standard_scene();
  const Sequence s1 = synth_sequence(s, short_orbit(3, 3.0, 5));
  const Sequence s2 = synth_sequence(s, short_orbit(3, -2.0, 6));
  const std::vector<FrameStream> streams{
      FrameStream{s1.camera(), s1.size(), [s1](int k) { return s1.frame(k); }},
      FrameStream{s2.camera(), s2.size(), [s2](int k) { return s2.frame(k); }}};
  std::vector<Tracker> serial{Tracker(tracker_config(s)), Tracker(tracker_config(s))};
  std::vector<Tracker> parallel = serial;
  const auto a = run_multi(serial, streams, false);
  const auto b = run_multi(parallel, streams, true);
  for (size_t i = 0; i < 2; ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    for (size_t k = 0; k < a[i].size(); ++k) EXPECT_TRUE(same_result(a[i][k], b[i][k]));
  }
}

TEST(RunMulti, LengthMismatch) {
  std::vector<Tracker> ts{Tracker(tracker_config(standard_scene()))};
  EXPECT_THROW(run_multi(ts, {}), Error);
}
