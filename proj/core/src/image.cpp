#include "voxtrack/image.hpp"

#include <algorithm>
#include <cmath>

namespace voxtrack {

size_t PixelMask::count() const {
  return size_t(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

PixelMask PixelMask::dilated(int radius) const {
  if (radius <= 0) return *this;
  // Separable max filter: rows then columns, using prefix counts.
  PixelMask rows(width, height);
  std::vector<int> prefix(size_t(std::max(width, height)) + 1);
  for (int y = 0; y < height; ++y) {
    prefix[0] = 0;
    for (int x = 0; x < width; ++x) prefix[x + 1] = prefix[x] + (test(x, y) ? 1 : 0);
    for (int x = 0; x < width; ++x) {
      const int lo = std::max(0, x - radius);
      const int hi = std::min(width, x + radius + 1);
      if (prefix[hi] - prefix[lo] > 0) rows.set(x, y);
    }
  }
  PixelMask out(width, height);
  for (int x = 0; x < width; ++x) {
    prefix[0] = 0;
    for (int y = 0; y < height; ++y) prefix[y + 1] = prefix[y] + (rows.test(x, y) ? 1 : 0);
    for (int y = 0; y < height; ++y) {
      const int lo = std::max(0, y - radius);
      const int hi = std::min(height, y + radius + 1);
      if (prefix[hi] - prefix[lo] > 0) out.set(x, y);
    }
  }
  return out;
}

ImageF to_gray(const ImageRGB& rgb) {
  ImageF out(rgb.width, rgb.height);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const float* p = &rgb.data[i * 3];
    out.data[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

float sample_bilinear(const ImageF& img, double x, double y) {
  x = std::clamp(x, 0.0, double(img.width - 1));
  y = std::clamp(y, 0.0, double(img.height - 1));
  const int x0 = std::min(int(x), img.width - 2 >= 0 ? img.width - 2 : 0);
  const int y0 = std::min(int(y), img.height - 2 >= 0 ? img.height - 2 : 0);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return float((1.0 - fy) * top + fy * bot);
}

namespace {

// Output coordinates of input pixel (x, y) after one quarter turn.
template <typename Img, typename Copy>
Img rotate_once(const Img& in, Copy copy) {
  Img out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) copy(out, in.height - 1 - y, x, in, x, y);
  return out;
}

}  // namespace

ImageF rotate90(const ImageF& img, int k) {
  k = ((k % 4) + 4) % 4;
  ImageF out = img;
  for (int i = 0; i < k; ++i)
    out = rotate_once(out, [](ImageF& o, int ox, int oy, const ImageF& in, int x, int y) {
      o.at(ox, oy) = in.at(x, y);
    });
  return out;
}

ImageRGB rotate90(const ImageRGB& img, int k) {
  k = ((k % 4) + 4) % 4;
  ImageRGB out = img;
  for (int i = 0; i < k; ++i)
    out = rotate_once(out, [](ImageRGB& o, int ox, int oy, const ImageRGB& in, int x, int y) {
      std::copy_n(in.px(x, y), 3, o.px(ox, oy));
    });
  return out;
}

}  // namespace voxtrack
