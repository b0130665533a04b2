#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "voxtrack/coldstart.hpp"
#include "voxtrack/errors.hpp"
#include "voxtrack/random.hpp"

using namespace voxtrack;
using namespace voxtrack::testing;

namespace {

Descriptor random_descriptor(Rng& rng) {
  Descriptor d;
  for (int i = 0; i < kDescriptorSize; ++i) d[i] = float(rng.normal());
  return d.normalized();
}

Pose random_pose(Rng& rng) {
  Twist xi;
  for (int i = 0; i < 3; ++i) xi[i] = rng.uniform(-1.0, 1.0);
  for (int i = 3; i < 6; ++i) xi[i] = rng.uniform(-0.3, 0.3);
  return Pose(Eigen::Quaterniond::Identity(), Vec3(0, 0, 4)) * exp(xi);
}

// Object points seen by `pose` inside the standard image.
std::vector<Correspondence> synth(Rng& rng, const Pose& pose, const Camera& cam, int n) {
  std::vector<Correspondence> out;
  while (int(out.size()) < n) {
    const Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 xc = pose * x;
    if (xc.z() < 0.5) continue;
    const Vec2 px = project(cam, xc);
    if (!cam.contains(px)) continue;
    out.push_back({px, x});
  }
  return out;
}

bool contains_pose(const std::vector<Pose>& cands, const Pose& p, double rot_rad, double trans) {
  for (const Pose& c : cands)
    if (c.rotation().angularDistance(p.rotation()) < rot_rad && (c.translation() - p.translation()).norm() < trans)
      return true;
  return false;
}

}  // namespace

TEST(Match, IdenticalListsGiveIdentity) {
  Rng rng(1);
  std::vector<Descriptor> d;
  for (int i = 0; i < 30; ++i) d.push_back(random_descriptor(rng));
  const auto m = match(d, d, 0.8);
  ASSERT_EQ(m.size(), 30u);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(m[size_t(i)], std::make_pair(i, i));
}

TEST(Match, RandomDescriptorsRarelyMatch) {
  Rng rng(2);
  int spurious = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Descriptor> q, r;
    for (int i = 0; i < 50; ++i) q.push_back(random_descriptor(rng));
    for (int i = 0; i < 200; ++i) r.push_back(random_descriptor(rng));
    spurious += int(match(q, r, 0.8).size());
    total += 50;
  }
  EXPECT_LE(spurious, total / 20);
}

TEST(Match, EquidistantReferencesAreRejected) {
  Descriptor q = Descriptor::Zero(), a = Descriptor::Zero(), b = Descriptor::Zero();
  q[0] = 1.0f;
  a[0] = b[0] = 0.8f;
  a[1] = 0.6f;
  b[1] = -0.6f;
  EXPECT_TRUE(match({q}, {a, b}, 0.8).empty());
  EXPECT_EQ(match({q}, {a}, 0.8).size(), 1u);
}

TEST(P3P, RecoversKnownPose) {
  Rng rng(3);
  const Camera cam = standard_camera();
  for (int trial = 0; trial < 200; ++trial) {
    const Pose gt = random_pose(rng);
    const auto c = synth(rng, gt, cam, 3);
    std::vector<Pose> cands;
    try {
      cands = p3p({c[0].pixel, c[1].pixel, c[2].pixel}, {c[0].point, c[1].point, c[2].point}, cam);
    } catch (const Error&) {
      continue;  // nearly collinear draw
    }
    ASSERT_LE(cands.size(), 4u);
    EXPECT_TRUE(contains_pose(cands, gt, 1e-6, 1e-8)) << "trial " << trial;
    for (const Pose& p : cands)
      for (int k = 0; k < 3; ++k) EXPECT_LT((project(cam, p * c[size_t(k)].point) - c[size_t(k)].pixel).norm(), 1e-6);
  }
}

TEST(P3P, Degenerate) {
  const Camera cam = standard_camera();
  const std::array<Vec2, 3> px = {Vec2(300, 200), Vec2(320, 240), Vec2(340, 280)};
  try {
    p3p(px, {Vec3(0, 0, 3), Vec3(0.1, 0.1, 3), Vec3(0.2, 0.2, 3)}, cam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
  }
  EXPECT_THROW(p3p(px, {Vec3(0, 0, 3), Vec3(0, 0, 3), Vec3(0.2, 0.1, 3)}, cam), Error);
}

TEST(P3P, PermutationInvariant) {
  Rng rng(4);
  const Camera cam = standard_camera();
  const Pose gt = random_pose(rng);
  const auto c = synth(rng, gt, cam, 3);
  const auto a = p3p({c[0].pixel, c[1].pixel, c[2].pixel}, {c[0].point, c[1].point, c[2].point}, cam);
  const auto b = p3p({c[2].pixel, c[0].pixel, c[1].pixel}, {c[2].point, c[0].point, c[1].point}, cam);
  ASSERT_EQ(a.size(), b.size());
  for (const Pose& p : a) EXPECT_TRUE(contains_pose(b, p, 1e-6, 1e-6));
}

TEST(PnPRansac, NoiseFreeExact) {
  Rng rng(5);
  const Camera cam = standard_camera();
  const Pose gt = random_pose(rng);
  const PnPResult r = pnp_ransac(synth(rng, gt, cam, 40), cam);
  EXPECT_EQ(r.inlier_count, 40);
  EXPECT_LT(rotation_distance_deg(r.pose, gt), 0.01);
  EXPECT_LT(translation_distance(r.pose, gt), 1e-4);
}

TEST(PnPRansac, HalfOutliers) {
  Rng rng(6);
  const Camera cam = standard_camera();
  const double diameter = 2.0 * std::sqrt(3.0);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose gt = random_pose(rng);
    auto corr = synth(rng, gt, cam, 20);
    for (int i = 0; i < 20; ++i)
      corr.push_back({Vec2(rng.uniform(0, 639), rng.uniform(0, 479)),
                      Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))});
    PnPOptions opt;
    opt.seed = std::uint64_t(trial);
    try {
      const PnPResult r = pnp_ransac(corr, cam, opt);
      if (rotation_distance_deg(r.pose, gt) < 0.5 && translation_distance(r.pose, gt) < 0.005 * diameter) ++ok;
      EXPECT_LE(r.rms, r.unrefined_rms + 1e-12);
      for (int i : r.inliers) EXPECT_LT(std::sqrt(reprojection_error_sq(cam, r.pose, corr[size_t(i)])), opt.inlier_px);
    } catch (const Error&) {
    }
  }
  EXPECT_GE(ok, 95);
}

TEST(PnPRansac, DeterministicGivenSeed) {
  Rng rng(7);
  const Camera cam = standard_camera();
  auto corr = synth(rng, random_pose(rng), cam, 30);
  for (int i = 0; i < 20; ++i)
    corr.push_back({Vec2(rng.uniform(0, 639), rng.uniform(0, 479)), Vec3(rng.uniform(-1, 1), 0.0, 0.5)});
  PnPOptions opt;
  opt.seed = 42;
  const PnPResult a = pnp_ransac(corr, cam, opt);
  const PnPResult b = pnp_ransac(corr, cam, opt);
  EXPECT_EQ(a.pose.matrix(), b.pose.matrix());
  EXPECT_EQ(a.inliers, b.inliers);
}

TEST(PnPRansac, TooFew) {
  Rng rng(8);
  const Camera cam = standard_camera();
  try {
    pnp_ransac(synth(rng, random_pose(rng), cam, 3), cam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewCorrespondences);
  }
}

TEST(PnPRansac, NoConsensusOnNoise) {
  Rng rng(9);
  std::vector<Correspondence> corr;
  for (int i = 0; i < 30; ++i)
    corr.push_back({Vec2(rng.uniform(0, 639), rng.uniform(0, 479)),
                    Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))});
  PnPOptions opt;
  opt.min_inliers = 12;
  try {
    pnp_ransac(corr, standard_camera(), opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConsensus);
  }
}

TEST(Bundle, CanonicalDirections) {
  const auto dirs = canonical_directions();
  ASSERT_EQ(dirs.size(), 26u);
  for (size_t i = 0; i < dirs.size(); ++i) {
    EXPECT_NEAR(dirs[i].norm(), 1.0, 1e-12);
    for (size_t j = i + 1; j < dirs.size(); ++j) EXPECT_LT(dirs[i].dot(dirs[j]), 0.99);
  }
}

TEST(Bundle, KeypointsHaveSurfacePoints) {
  const Scene& s = standard_scene();
  ASSERT_EQ(s.bundle.views.size(), 26u);
  EXPECT_GT(s.bundle.keypoint_count(), 1000u);
  for (const CanonicalView& v : s.bundle.views) {
    ASSERT_EQ(v.keypoints.size(), v.points.size());
    EXPECT_NEAR((v.pose.camera_center() - s.center).norm(), 3.0 * s.bounding_radius, 1e-9);
    for (size_t i = 0; i < v.points.size(); ++i) {
      EXPECT_LT((project(v.camera, v.pose * v.points[i]) - v.keypoints[i].position).norm(), 0.05);
    }
  }
}

TEST(ColdLocalize, CanonicalRenderSelfLocalizes) {
  const Scene& s = standard_scene();
  for (size_t k : {0u, 7u, 19u}) {
    const CanonicalView& v = s.bundle.views[k];
    const PnPResult r = cold_localize(v.gray, s.bundle, v.camera, ColdStartConfig{});
    EXPECT_LT(rotation_distance_deg(r.pose, v.pose), 0.1) << k;
    EXPECT_LT(translation_distance(r.pose, v.pose), 0.001 * s.diameter) << k;
    EXPECT_GE(r.inlier_count, 10);
  }
}

TEST(ColdLocalize, EmptySceneFails) {
  const Scene& s = standard_scene();
  try {
    cold_localize(ImageF(640, 480, 0.3f), s.bundle, standard_camera(), ColdStartConfig{});
    FAIL();
  } catch (const ColdStartFailedError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ColdStartFailed);
    EXPECT_EQ(e.correspondences(), 0);
  }
}

TEST(ColdLocalize, BetweenCanonicalViews) {
  const Scene& s = standard_scene();
  const Renderer r = s.renderer();
  const auto dirs = canonical_directions();
  const Camera cam = standard_camera();
  // Halfway between a view above the table and its nearest neighbour.
  for (size_t a : {4u, 15u, 22u, 25u}) {
    size_t b = a == 0 ? 1 : 0;
    for (size_t k = 0; k < dirs.size(); ++k)
      if (k != a && dirs[k].dot(dirs[a]) > dirs[b].dot(dirs[a])) b = k;
    const Vec3 d = (dirs[a] + dirs[b]).normalized();
    ASSERT_GE(d.z(), 0.0);
    ASSERT_LE(std::acos(d.dot(dirs[a])) * 180.0 / M_PI, 25.0);
    const Pose gt = canonical_pose(d, s.center, 3.0 * s.bounding_radius);
    const ImageF query = to_gray(r.render_view(cam, gt).rgb);
    const PnPResult res = cold_localize(query, s.bundle, cam, ColdStartConfig{});
    EXPECT_LT(rotation_distance_deg(res.pose, gt), 1.0) << a;
    EXPECT_LT(translation_distance(res.pose, gt), 0.02 * s.diameter) << a;
  }
}

TEST(ColdLocalize, LargeRollFails) {
  // Canonical views do not cover in-plane rotation of side views.
  const Scene& s = standard_scene();
  for (size_t k : {4u, 10u, 22u}) {
    const CanonicalView& v = s.bundle.views[k];
    EXPECT_THROW(cold_localize(rotate90(v.gray, 2), s.bundle, v.camera, ColdStartConfig{}), ColdStartFailedError) << k;
  }
}
