#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voxtrack/coldstart.hpp"
#include "voxtrack/random.hpp"

namespace voxtrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Real roots of sum c[i] v^i, polished with Newton steps.
std::vector<double> real_roots(const std::array<double, 5>& c) {
  const double scale = std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2]), std::abs(c[3]), std::abs(c[4])});
  if (scale == 0.0) return {};
  int degree = 4;
  while (degree > 0 && std::abs(c[size_t(degree)]) <= 1e-14 * scale) --degree;
  if (degree == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -c[size_t(i)] / c[size_t(degree)];
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  auto poly = [&](double v, double* deriv) {
    double p = 0.0, d = 0.0;
    for (int i = degree; i >= 0; --i) {
      d = d * v + p;
      p = p * v + c[size_t(i)];
    }
    *deriv = d;
    return p;
  };
  std::vector<double> roots;
  for (int i = 0; i < degree; ++i) {
    const std::complex<double> z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
    double v = z.real();
    for (int it = 0; it < 8; ++it) {
      double d = 0.0;
      const double p = poly(v, &d);
      if (d == 0.0) break;
      const double next = v - p / d;
      if (!std::isfinite(next)) break;
      if (std::abs(poly(next, &d)) > std::abs(p)) break;
      v = next;
    }
    roots.push_back(v);
  }
  return roots;
}

// Rigid transform taking `world` onto `camera` (least squares).
Pose kabsch(const std::array<Vec3, 3>& world, const std::array<Vec3, 3>& camera) {
  Vec3 mw = Vec3::Zero(), mc = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    mw += world[size_t(i)];
    mc += camera[size_t(i)];
  }
  mw /= 3.0;
  mc /= 3.0;
  Mat3 h = Mat3::Zero();
  for (int i = 0; i < 3; ++i) h += (world[size_t(i)] - mw) * (camera[size_t(i)] - mc).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return Pose(Eigen::Quaterniond(r), mc - r * mw);
}

double sum_sq(const Camera& cam, const Pose& pose, const std::vector<Correspondence>& corr,
              const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += reprojection_error_sq(cam, pose, corr[size_t(i)]);
  return s;
}

// Levenberg-Marquardt on squared reprojection error; never increases the cost.
Pose refine_reprojection(const Camera& cam, const Pose& init, const std::vector<Correspondence>& corr,
                         const std::vector<int>& idx, int max_iters = 30) {
  Pose pose = init;
  double cost = sum_sq(cam, pose, corr, idx);
  if (!std::isfinite(cost)) return pose;
  double lambda = 1e-4;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (int i : idx) {
      const Correspondence& c = corr[size_t(i)];
      const Vec3 y = pose * c.point;
      const Vec2 r = project(cam, y) - c.pixel;
      const Eigen::Matrix<double, 2, 6> j = projection_jacobian(cam, y) * action_jacobian(y);
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * r;
    }
    bool improved = false;
    while (lambda < 1e8) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-9);
      const Twist delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) break;
      const Pose candidate = exp(delta) * pose;
      const double c = sum_sq(cam, candidate, corr, idx);
      if (c < cost) {
        const bool tiny = delta.norm() < 1e-12 || cost - c < 1e-15 * cost;
        pose = candidate;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = !tiny;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return pose;
}

}  // namespace

double reprojection_error_sq(const Camera& cam, const Pose& pose, const Correspondence& c) {
  const Vec3 y = pose * c.point;
  if (!(y.z() > kMinDepth)) return kInf;
  return (project(cam, y) - c.pixel).squaredNorm();
}

std::vector<std::pair<int, int>> match(const std::vector<Descriptor>& query, const std::vector<Descriptor>& reference,
                                       double ratio) {
  std::vector<std::pair<int, int>> out;
  const int nq = int(query.size());
  const int nr = int(reference.size());
  if (nq == 0 || nr == 0) return out;
  Eigen::MatrixXf q(kDescriptorSize, nq), r(kDescriptorSize, nr);
  for (int i = 0; i < nq; ++i) q.col(i) = query[size_t(i)];
  for (int j = 0; j < nr; ++j) r.col(j) = reference[size_t(j)];
  const Eigen::MatrixXf dots = q.transpose() * r;
  auto dist = [&](int i, int j) {
    const double d2 = double(query[size_t(i)].squaredNorm()) + double(reference[size_t(j)].squaredNorm()) -
                      2.0 * double(dots(i, j));
    return std::sqrt(std::max(0.0, d2));
  };
  std::vector<int> best_query(size_t(nr), -1);
  std::vector<double> best_query_d(size_t(nr), kInf);
  for (int j = 0; j < nr; ++j)
    for (int i = 0; i < nq; ++i) {
      const double d = dist(i, j);
      if (d < best_query_d[size_t(j)]) {
        best_query_d[size_t(j)] = d;
        best_query[size_t(j)] = i;
      }
    }
  for (int i = 0; i < nq; ++i) {
    int best = -1;
    double d1 = kInf, d2 = kInf;
    for (int j = 0; j < nr; ++j) {
      const double d = dist(i, j);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = j;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (best < 0 || best_query[size_t(best)] != i) continue;
    if (!(d1 < ratio * d2)) continue;
    out.emplace_back(i, best);
  }
  return out;
}

std::vector<Pose> p3p(const std::array<Vec2, 3>& pixels, const std::array<Vec3, 3>& points, const Camera& cam) {
  const Vec3& p1 = points[0];
  const Vec3& p2 = points[1];
  const Vec3& p3 = points[2];
  const double a = (p2 - p3).norm();
  const double b = (p1 - p3).norm();
  const double c = (p1 - p2).norm();
  const double longest = std::max({a, b, c});
  if (!(longest > 0.0) || std::min({a, b, c}) <= 1e-9 * longest)
    throw Error(ErrorCode::DegenerateConfiguration, "coincident points");
  if ((p2 - p1).cross(p3 - p1).norm() <= 1e-9 * longest * longest)
    throw Error(ErrorCode::DegenerateConfiguration, "collinear points");

  std::array<Vec3, 3> j;
  for (int i = 0; i < 3; ++i) j[size_t(i)] = cam.ray_direction(pixels[size_t(i)]);
  const double ca = j[1].dot(j[2]);
  const double cb = j[0].dot(j[2]);
  const double cg = j[0].dot(j[1]);
  const double a2 = a * a, b2 = b * b, c2 = c * c;
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;

  std::array<double, 5> coef;
  coef[4] = (amc - 1.0) * (amc - 1.0) - 4.0 * c2 / b2 * ca * ca;
  coef[3] = 4.0 * (amc * (1.0 - amc) * cb - (1.0 - apc) * ca * cg + 2.0 * c2 / b2 * ca * ca * cb);
  coef[2] = 2.0 * (amc * amc - 1.0 + 2.0 * amc * amc * cb * cb + 2.0 * (b2 - c2) / b2 * ca * ca -
                   4.0 * apc * ca * cb * cg + 2.0 * (b2 - a2) / b2 * cg * cg);
  coef[1] = 4.0 * (-amc * (1.0 + amc) * cb + 2.0 * a2 / b2 * cg * cg * cb - (1.0 - apc) * ca * cg);
  coef[0] = (1.0 + amc) * (1.0 + amc) - 4.0 * a2 / b2 * cg * cg;

  std::vector<Pose> out;
  for (double v : real_roots(coef)) {
    if (!(v > 0.0)) continue;
    const double den = 2.0 * (cg - v * ca);
    if (std::abs(den) < 1e-14) continue;
    const double u = ((-1.0 + amc) * v * v - 2.0 * amc * cb * v + 1.0 + amc) / den;
    if (!(u > 0.0)) continue;
    const double q = 1.0 + v * v - 2.0 * v * cb;
    if (!(q > 0.0)) continue;
    const double s1 = std::sqrt(b2 / q);
    const std::array<Vec3, 3> xc = {s1 * j[0], u * s1 * j[1], v * s1 * j[2]};
    Pose pose = kabsch(points, xc);

    // Polish on the three exact constraints.
    std::vector<Correspondence> corr = {{pixels[0], p1}, {pixels[1], p2}, {pixels[2], p3}};
    pose = refine_reprojection(cam, pose, corr, {0, 1, 2}, 5);
    bool ok = true;
    for (const Correspondence& cc : corr) {
      const double e = reprojection_error_sq(cam, pose, cc);
      if (!(e < 1e-6)) ok = false;
    }
    if (!ok) continue;
    bool duplicate = false;
    for (const Pose& prev : out)
      if (rotation_distance_deg(prev, pose) < 1e-7 && translation_distance(prev, pose) < 1e-9) duplicate = true;
    if (!duplicate) out.push_back(pose);
  }
  return out;
}

PnPResult pnp_ransac(const std::vector<Correspondence>& corr, const Camera& cam, const PnPOptions& options) {
  const int n = int(corr.size());
  if (n < 4) throw Error(ErrorCode::TooFewCorrespondences, std::to_string(n) + " correspondences, need 4");
  const double thr2 = options.inlier_px * options.inlier_px;
  Rng rng(mix_seed(options.seed, 0x9e37));

  auto inliers_of = [&](const Pose& pose, double* sq) {
    std::vector<int> in;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = reprojection_error_sq(cam, pose, corr[size_t(i)]);
      if (e < thr2) {
        in.push_back(i);
        s += e;
      }
    }
    if (sq) *sq = s;
    return in;
  };

  std::optional<Pose> best;
  int best_count = -1;
  double best_sq = kInf;
  for (int it = 0; it < options.max_iters; ++it) {
    int idx[4];
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = int(rng.below(std::uint64_t(n)));
        fresh = true;
        for (int m = 0; m < k; ++m) fresh = fresh && idx[m] != idx[k];
      } while (!fresh);
    }
    std::vector<Pose> cands;
    try {
      cands = p3p({corr[size_t(idx[0])].pixel, corr[size_t(idx[1])].pixel, corr[size_t(idx[2])].pixel},
                  {corr[size_t(idx[0])].point, corr[size_t(idx[1])].point, corr[size_t(idx[2])].point}, cam);
    } catch (const Error&) {
      continue;
    }
    int chosen = -1;
    double chosen_e4 = kInf, chosen_rms = kInf;
    for (int k = 0; k < int(cands.size()); ++k) {
      const double e4 = reprojection_error_sq(cam, cands[size_t(k)], corr[size_t(idx[3])]);
      double r3 = 0.0;
      for (int m = 0; m < 3; ++m) r3 += reprojection_error_sq(cam, cands[size_t(k)], corr[size_t(idx[m])]);
      if (e4 < chosen_e4 || (e4 == chosen_e4 && r3 < chosen_rms)) {
        chosen = k;
        chosen_e4 = e4;
        chosen_rms = r3;
      }
    }
    if (chosen < 0 || !(chosen_e4 < thr2)) continue;
    double sq = 0.0;
    const std::vector<int> in = inliers_of(cands[size_t(chosen)], &sq);
    const int count = int(in.size());
    if (count > best_count || (count == best_count && sq < best_sq)) {
      best = cands[size_t(chosen)];
      best_count = count;
      best_sq = sq;
    }
  }
  if (!best || best_count < options.min_inliers)
    throw Error(ErrorCode::NoConsensus,
                "best model has " + std::to_string(std::max(best_count, 0)) + " inliers, need " +
                    std::to_string(options.min_inliers));

  // Alternate refinement and inlier re-selection. The final refinement always
  // starts from the RANSAC model on the reported set, so it cannot raise the
  // RMS there.
  const Pose model = *best;
  std::vector<int> set = inliers_of(model, nullptr);
  Pose pose = model;
  for (int round = 0; round < 5; ++round) {
    pose = refine_reprojection(cam, pose, corr, set);
    std::vector<int> next = inliers_of(pose, nullptr);
    if (next == set || int(next.size()) < options.min_inliers) break;
    set = std::move(next);
  }
  for (int round = 0; round < 10; ++round) {
    pose = refine_reprojection(cam, model, corr, set);
    std::vector<int> kept;
    for (int i : set)
      if (reprojection_error_sq(cam, pose, corr[size_t(i)]) < thr2) kept.push_back(i);
    if (kept.size() == set.size()) break;
    set = std::move(kept);
  }
  if (int(set.size()) < options.min_inliers)
    throw Error(ErrorCode::NoConsensus, "refined model keeps too few inliers");

  PnPResult out;
  out.pose = pose;
  out.inliers = set;
  out.inlier_count = int(set.size());
  out.rms = std::sqrt(sum_sq(cam, pose, corr, set) / double(set.size()));
  out.unrefined_rms = std::sqrt(sum_sq(cam, model, corr, set) / double(set.size()));
  return out;
}

}  // namespace voxtrack
