#pragma once

#include <cstdint>
#include <vector>

namespace voxtrack {

/// Single-channel float image, row-major, pixel (x, y) centred on integer coordinates.
struct ImageF {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int w, int h, float fill = 0.0f) : width(w), height(h), data(size_t(w) * h, fill) {}

  float& at(int x, int y) { return data[size_t(y) * width + x]; }
  float at(int x, int y) const { return data[size_t(y) * width + x]; }
  bool empty() const { return data.empty(); }
};

/// Interleaved RGB float image with channel values in [0, 1].
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  ImageRGB() = default;
  ImageRGB(int w, int h, float fill = 0.0f) : width(w), height(h), data(size_t(w) * h * 3, fill) {}

  float* px(int x, int y) { return &data[(size_t(y) * width + x) * 3]; }
  const float* px(int x, int y) const { return &data[(size_t(y) * width + x) * 3]; }
};

/// Pixel selection used for sparse rendering; nonzero means "render".
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  PixelMask() = default;
  PixelMask(int w, int h) : width(w), height(h), data(size_t(w) * h, 0) {}
  bool test(int x, int y) const { return data[size_t(y) * width + x] != 0; }
  void set(int x, int y) { data[size_t(y) * width + x] = 1; }
  size_t count() const;
  /// Chebyshev dilation by `radius` pixels.
  PixelMask dilated(int radius) const;
};

/// Rec.601 luma.
ImageF to_gray(const ImageRGB& rgb);

/// Bilinear lookup with edge clamping.
float sample_bilinear(const ImageF& img, double x, double y);

/// Rotates the image by k quarter turns clockwise as displayed (x right, y
/// down): what a camera sees after rolling by +k * 90 degrees about its
/// optical axis.
ImageF rotate90(const ImageF& img, int k);
ImageRGB rotate90(const ImageRGB& img, int k);

}  // namespace voxtrack
