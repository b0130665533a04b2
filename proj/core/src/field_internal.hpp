#pragma once

#include <algorithm>
#include <cmath>

#include "voxtrack/field.hpp"

namespace voxtrack::detail {

struct GridCoord {
  int i, j, k;          // lower node
  double fx, fy, fz;    // fractional offsets in [0, 1]
};

// Tolerance (in voxels) for samples that land on the box faces through rounding.
inline constexpr double kFaceTolerance = 1e-7;

inline bool grid_coord(const Aabb& box, GridSize res, const Vec3& x, GridCoord& out) {
  const int n[3] = {res.nx, res.ny, res.nz};
  int idx[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double scale = (n[a] - 1) / (box.max[a] - box.min[a]);
    double g = (x[a] - box.min[a]) * scale;
    if (!(g >= -kFaceTolerance && g <= (n[a] - 1) + kFaceTolerance)) return false;
    g = std::clamp(g, 0.0, double(n[a] - 1));
    int i = std::min(int(g), n[a] - 2);
    idx[a] = i;
    frac[a] = g - i;
  }
  out = {idx[0], idx[1], idx[2], frac[0], frac[1], frac[2]};
  return true;
}

template <typename Fetch>
inline FieldSample trilinear(const GridCoord& g, GridSize res, Fetch&& fetch) {
  const size_t sx = 1, sy = size_t(res.nx), sz = size_t(res.nx) * res.ny;
  const size_t base = size_t(g.k) * sz + size_t(g.j) * sy + size_t(g.i);
  const double wx[2] = {1.0 - g.fx, g.fx};
  const double wy[2] = {1.0 - g.fy, g.fy};
  const double wz[2] = {1.0 - g.fz, g.fz};
  double d = 0.0, r = 0.0, gr = 0.0, b = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int bb = 0; bb < 2; ++bb)
      for (int a = 0; a < 2; ++a) {
        const double w = wx[a] * wy[bb] * wz[c];
        const NodeValue v = fetch(base + a * sx + bb * sy + c * sz);
        d += w * v.density;
        r += w * v.r;
        gr += w * v.g;
        b += w * v.b;
      }
  return {d, Vec3(r, gr, b)};
}

}  // namespace voxtrack::detail
