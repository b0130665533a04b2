#pragma once

#include <Eigen/Core>
#include <vector>

#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"

namespace voxtrack {

/// Channels per feature: smoothed intensity, d/dx, d/dy.
inline constexpr int kFeatureChannels = 3;
inline constexpr int kDescriptorSize = 64;
inline constexpr int kDescriptorMargin = 8;

using Feature = Eigen::Matrix<double, kFeatureChannels, 1>;
using FeatureGradient = Eigen::Matrix<double, kFeatureChannels, 2>;
using Descriptor = Eigen::Matrix<float, kDescriptorSize, 1>;

struct FeatureLevel {
  int width = 0;
  int height = 0;
  double scale = 1.0;   ///< 2^level
  double weight = 1.0;  ///< per-level uncertainty weight (fixed)
  std::vector<double> data;  ///< interleaved, kFeatureChannels per pixel

  const double* at(int x, int y) const { return &data[(size_t(y) * width + x) * kFeatureChannels]; }
  double* at(int x, int y) { return &data[(size_t(y) * width + x) * kFeatureChannels]; }
};

/// Level 0 is finest; level l has ceil(H_{l-1} / 2) rows.
struct FeaturePyramid {
  std::vector<FeatureLevel> levels;
  int num_levels() const { return int(levels.size()); }
};

struct FeatureSample {
  Feature value;
  FeatureGradient gradient;  ///< d(feature)/d(x, y) in level pixels
};

struct Keypoint {
  Vec2 position = Vec2::Zero();
  double response = 0.0;
  Descriptor descriptor = Descriptor::Zero();
};

/// Level-0 pixel to level-l pixel, for area downsampling with integer centres.
inline Vec2 to_level(const Vec2& px0, int level) {
  const double s = double(1 << level);
  return Vec2((px0.x() + 0.5) / s - 0.5, (px0.y() + 0.5) / s - 0.5);
}

/// Gaussian blur (sigma 1) -> central differences per level, then 2x area
/// downsample of the blurred image for the next level. Throws ImageTooSmall
/// below 32x32.
FeaturePyramid extract_pyramid(const ImageF& gray, int levels = 3);

/// Bilinear feature and its analytic spatial derivative at `pt` (level pixels).
/// Requires a one-pixel margin; throws OutOfBounds otherwise.
FeatureSample sample_feature(const FeaturePyramid& pyr, int level, const Vec2& pt);
bool feature_in_bounds(const FeatureLevel& level, const Vec2& pt);
FeatureSample sample_feature(const FeatureLevel& level, const Vec2& pt);

/// Radius in level-0 pixels whose content determines a feature sampled at
/// `level`; used to size sparse reference renders.
int feature_footprint(int level);

struct HarrisOptions {
  double k = 0.04;
  double sigma = 1.0;
  double relative_threshold = 1e-3;  ///< fraction of the strongest response
  double absolute_threshold = 1e-10;
};

/// Harris corners with greedy Chebyshev suppression; ordered by response
/// (desc), then y, then x. Descriptors are left zero.
std::vector<Keypoint> detect_keypoints(const ImageF& gray, int max_n, int nms_radius,
                                       const HarrisOptions& options = {});

bool descriptor_in_bounds(const ImageF& gray, const Vec2& pos);
/// 16x16 bias/gain-normalized patch pooled 2x2 to 8x8, L2-normalized.
Descriptor describe(const ImageF& gray, const Vec2& pos);

/// Gaussian blur with clamped borders, kernel radius ceil(3 sigma).
ImageF gaussian_blur(const ImageF& img, double sigma);

}  // namespace voxtrack
