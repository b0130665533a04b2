#include "voxtrack/features.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "voxtrack/errors.hpp"

namespace voxtrack {

namespace {

constexpr double kPyramidSigma = 1.0;

struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  double at(int x, int y) const {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return v[size_t(y) * w + x];
  }
};

std::vector<double> gaussian_kernel(double sigma, int& radius) {
  if (!(sigma > 0.0)) {
    radius = 0;
    return {1.0};
  }
  radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& x : k) x /= sum;
  return k;
}

Plane blur(const Plane& in, double sigma) {
  int r = 0;
  const std::vector<double> k = gaussian_kernel(sigma, r);
  Plane tmp{in.w, in.h, std::vector<double>(in.v.size())};
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * in.at(x + i, y);
      tmp.v[size_t(y) * in.w + x] = s;
    }
  Plane out{in.w, in.h, std::vector<double>(in.v.size())};
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, y + i);
      out.v[size_t(y) * in.w + x] = s;
    }
  return out;
}

Plane downsample(const Plane& in) {
  Plane out{(in.w + 1) / 2, (in.h + 1) / 2, {}};
  out.v.resize(size_t(out.w) * out.h);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.v[size_t(y) * out.w + x] = 0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) +
                                             in.at(2 * x, 2 * y + 1) + in.at(2 * x + 1, 2 * y + 1));
  return out;
}

Plane to_plane(const ImageF& img) {
  Plane p{img.width, img.height, std::vector<double>(img.data.begin(), img.data.end())};
  return p;
}

}  // namespace

ImageF gaussian_blur(const ImageF& img, double sigma) {
  const Plane b = blur(to_plane(img), sigma);
  ImageF out(img.width, img.height);
  for (size_t i = 0; i < b.v.size(); ++i) out.data[i] = float(b.v[i]);
  return out;
}

FeaturePyramid extract_pyramid(const ImageF& gray, int levels) {
  if (gray.width < 32 || gray.height < 32) throw Error(ErrorCode::ImageTooSmall, "pyramid input below 32x32");
  if (levels < 1) throw Error(ErrorCode::InvalidConfig, "pyramid needs at least one level");
  FeaturePyramid pyr;
  Plane cur = to_plane(gray);
  for (int l = 0; l < levels; ++l) {
    const Plane b = blur(cur, kPyramidSigma);
    FeatureLevel level;
    level.width = b.w;
    level.height = b.h;
    level.scale = double(1 << l);
    level.data.resize(size_t(b.w) * b.h * kFeatureChannels);
    for (int y = 0; y < b.h; ++y)
      for (int x = 0; x < b.w; ++x) {
        double* f = level.at(x, y);
        f[0] = b.at(x, y);
        f[1] = 0.5 * (b.at(x + 1, y) - b.at(x - 1, y));
        f[2] = 0.5 * (b.at(x, y + 1) - b.at(x, y - 1));
      }
    pyr.levels.push_back(std::move(level));
    if (l + 1 < levels) cur = downsample(b);
  }
  return pyr;
}

int feature_footprint(int level) {
  int r = 0;
  gaussian_kernel(kPyramidSigma, r);
  int dep = r;
  for (int l = 1; l <= level; ++l) dep += (1 << (l - 1)) + r * (1 << l);
  // Central difference and bilinear lookup each reach one more level pixel.
  return dep + 2 * (1 << level) + 1;
}

bool feature_in_bounds(const FeatureLevel& level, const Vec2& pt) {
  return pt.x() >= 1.0 && pt.y() >= 1.0 && pt.x() <= level.width - 2 && pt.y() <= level.height - 2;
}

FeatureSample sample_feature(const FeatureLevel& level, const Vec2& pt) {
  if (!feature_in_bounds(level, pt)) throw Error(ErrorCode::OutOfBounds, "feature lookup outside margin");
  const int x0 = int(std::floor(pt.x()));
  const int y0 = int(std::floor(pt.y()));
  const double fx = pt.x() - x0;
  const double fy = pt.y() - y0;
  const double* f00 = level.at(x0, y0);
  const double* f10 = level.at(x0 + 1, y0);
  const double* f01 = level.at(x0, y0 + 1);
  const double* f11 = level.at(x0 + 1, y0 + 1);
  FeatureSample s;
  for (int c = 0; c < kFeatureChannels; ++c) {
    s.value[c] = (1.0 - fy) * ((1.0 - fx) * f00[c] + fx * f10[c]) + fy * ((1.0 - fx) * f01[c] + fx * f11[c]);
    s.gradient(c, 0) = (1.0 - fy) * (f10[c] - f00[c]) + fy * (f11[c] - f01[c]);
    s.gradient(c, 1) = (1.0 - fx) * (f01[c] - f00[c]) + fx * (f11[c] - f10[c]);
  }
  return s;
}

FeatureSample sample_feature(const FeaturePyramid& pyr, int level, const Vec2& pt) {
  if (level < 0 || level >= pyr.num_levels()) throw Error(ErrorCode::OutOfBounds, "no such pyramid level");
  return sample_feature(pyr.levels[size_t(level)], pt);
}

std::vector<Keypoint> detect_keypoints(const ImageF& gray, int max_n, int nms_radius,
                                       const HarrisOptions& options) {
  const int w = gray.width, h = gray.height;
  std::vector<Keypoint> out;
  if (w < 2 * kDescriptorMargin + 3 || h < 2 * kDescriptorMargin + 3 || max_n <= 0) return out;
  const Plane img = to_plane(gray);
  Plane ixx{w, h, std::vector<double>(img.v.size())};
  Plane iyy = ixx, ixy = ixx;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      const size_t i = size_t(y) * w + x;
      ixx.v[i] = gx * gx;
      iyy.v[i] = gy * gy;
      ixy.v[i] = gx * gy;
    }
  ixx = blur(ixx, options.sigma);
  iyy = blur(iyy, options.sigma);
  ixy = blur(ixy, options.sigma);
  Plane resp{w, h, std::vector<double>(img.v.size())};
  double max_r = 0.0;
  for (size_t i = 0; i < resp.v.size(); ++i) {
    const double det = ixx.v[i] * iyy.v[i] - ixy.v[i] * ixy.v[i];
    const double tr = ixx.v[i] + iyy.v[i];
    resp.v[i] = det - options.k * tr * tr;
    max_r = std::max(max_r, resp.v[i]);
  }
  const double thr = std::max(options.absolute_threshold, options.relative_threshold * max_r);

  struct Candidate {
    double r;
    int x, y;
  };
  std::vector<Candidate> cands;
  const int m = kDescriptorMargin;
  for (int y = m; y < h - m - 1; ++y)
    for (int x = m; x < w - m - 1; ++x) {
      const double r = resp.at(x, y);
      if (!(r > thr)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy) continue;
          const double o = resp.at(x + dx, y + dy);
          // Ties resolve toward the earlier pixel in raster order.
          if (o > r || (o == r && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({r, x, y});
    }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.r, a.y, a.x) < std::tie(a.r, b.y, b.x);
  });

  auto refine = [&resp](int x, int y, int axis) {
    const double a = axis == 0 ? resp.at(x - 1, y) : resp.at(x, y - 1);
    const double c = resp.at(x, y);
    const double b = axis == 0 ? resp.at(x + 1, y) : resp.at(x, y + 1);
    const double denom = a - 2.0 * c + b;
    if (!(denom < 0.0)) return 0.0;
    return std::clamp(0.5 * (a - b) / denom, -0.5, 0.5);
  };

  for (const Candidate& c : cands) {
    if (int(out.size()) >= max_n) break;
    Keypoint kp;
    kp.position = Vec2(c.x + refine(c.x, c.y, 0), c.y + refine(c.x, c.y, 1));
    kp.response = c.r;
    if (!descriptor_in_bounds(gray, kp.position)) continue;
    bool far_enough = true;
    for (const Keypoint& o : out) {
      const Vec2 d = (o.position - kp.position).cwiseAbs();
      if (std::max(d.x(), d.y()) < nms_radius) {
        far_enough = false;
        break;
      }
    }
    if (far_enough) out.push_back(kp);
  }
  return out;
}

bool descriptor_in_bounds(const ImageF& gray, const Vec2& pos) {
  const double m = kDescriptorMargin;
  return pos.x() >= m && pos.y() >= m && pos.x() <= gray.width - 1 - m && pos.y() <= gray.height - 1 - m;
}

Descriptor describe(const ImageF& gray, const Vec2& pos) {
  if (!descriptor_in_bounds(gray, pos)) throw Error(ErrorCode::OutOfBounds, "descriptor patch leaves the image");
  constexpr int kPatch = 16;
  double patch[kPatch][kPatch];
  double mean = 0.0;
  for (int j = 0; j < kPatch; ++j)
    for (int i = 0; i < kPatch; ++i) {
      patch[j][i] = sample_bilinear(gray, pos.x() + i - 7.5, pos.y() + j - 7.5);
      mean += patch[j][i];
    }
  mean /= kPatch * kPatch;
  double var = 0.0;
  for (auto& row : patch)
    for (double v : row) var += (v - mean) * (v - mean);
  const double inv = 1.0 / (std::sqrt(var / (kPatch * kPatch)) + 1e-6);
  Eigen::Matrix<double, kDescriptorSize, 1> d;
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) {
      const double s = patch[2 * j][2 * i] + patch[2 * j][2 * i + 1] + patch[2 * j + 1][2 * i] +
                       patch[2 * j + 1][2 * i + 1];
      d[j * 8 + i] = 0.25 * (s - 4.0 * mean) * inv;
    }
  const double n = d.norm();
  if (n > 1e-12) d /= n;
  return d.cast<float>();
}

}  // namespace voxtrack
