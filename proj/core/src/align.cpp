#include "voxtrack/align.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "voxtrack/errors.hpp"

namespace voxtrack {

namespace {

double bilinear_depth(const ImageF& depth, const Vec2& p) {
  if (p.x() < 0.0 || p.y() < 0.0 || p.x() > depth.width - 1 || p.y() > depth.height - 1) return 0.0;
  return sample_bilinear(depth, p.x(), p.y());
}

// Fixed point set for one pyramid level.
struct LevelProblem {
  const FeatureLevel* query;
  const Camera* cam;
  const std::vector<Vec3>* points;
  std::vector<int> indices;
  std::vector<Feature> reference;
  int level;
  double tau;

  // Robust cost at `pose`; +inf when any point leaves the query image.
  double cost(const Pose& pose) const {
    double total = 0.0;
    for (size_t n = 0; n < indices.size(); ++n) {
      const Vec3 xc = pose * (*points)[size_t(indices[n])];
      if (!(xc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
      const Vec2 p = to_level(project(*cam, xc), level);
      if (!feature_in_bounds(*query, p)) return std::numeric_limits<double>::infinity();
      const FeatureSample fs = sample_feature(*query, p);
      total += robust_cost((fs.value - reference[n]).norm(), tau);
    }
    return total;
  }

  NormalEquations linearize(const Pose& pose, double* cost_out) const {
    NormalEquations ne;
    double total = 0.0;
    for (size_t n = 0; n < indices.size(); ++n) {
      const Vec3& x = (*points)[size_t(indices[n])];
      const Vec3 xc = pose * x;
      const FeatureSample fs = sample_feature(*query, to_level(project(*cam, xc), level));
      const Feature r = fs.value - reference[n];
      const double rn = r.norm();
      total += robust_cost(rn, tau);
      ne.add(residual_jacobian(x, pose, *cam, fs.gradient, level), r, robust_weight(rn, tau));
    }
    if (cost_out) *cost_out = total;
    return ne;
  }
};

}  // namespace

void AlignConfig::validate() const {
  const bool ok = max_iters_per_level > 0 && lambda_init > 0.0 && lambda_up > 1.0 && lambda_down > 0.0 &&
                  lambda_down < 1.0 && lambda_max > lambda_init && convergence_delta > 0.0 &&
                  robust_scale_factor > 0.0 && min_visible_points > 0 && !levels.empty() && depth_tol > 0.0;
  if (!ok) throw Error(ErrorCode::InvalidConfig, "invalid alignment configuration");
  for (int l : levels)
    if (l < 0) throw Error(ErrorCode::InvalidConfig, "negative pyramid level");
}

double ResidualSet::rms() const {
  if (residuals.empty()) return 0.0;
  double s = 0.0;
  for (const Feature& r : residuals) s += r.squaredNorm();
  return std::sqrt(s / double(residuals.size() * kFeatureChannels));
}

double ResidualSet::mean_norm() const {
  if (residuals.empty()) return 0.0;
  double s = 0.0;
  for (const Feature& r : residuals) s += r.norm();
  return s / double(residuals.size());
}

ResidualSet residuals(const FeaturePyramid& query_pyr, const Camera& query_cam, const ReferenceView& ref,
                      const std::vector<Vec3>& points, const Pose& pose, int level, double depth_tol,
                      int min_visible) {
  if (!ref.pyramid) throw Error(ErrorCode::InvalidConfig, "reference has no features");
  if (level < 0 || level >= query_pyr.num_levels() || level >= ref.pyramid->num_levels())
    throw Error(ErrorCode::OutOfBounds, "pyramid level missing");
  const FeatureLevel& q = query_pyr.levels[size_t(level)];
  const FeatureLevel& r = ref.pyramid->levels[size_t(level)];
  ResidualSet out;
  out.mask.assign(points.size(), false);
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 xr = ref.pose * points[i];
    if (!(xr.z() > kMinDepth)) continue;
    const Vec2 pr0 = project(ref.camera, xr);
    const Vec2 pr = to_level(pr0, level);
    if (!feature_in_bounds(r, pr)) continue;
    const double d = bilinear_depth(ref.depth, pr0);
    if (!(std::abs(d - xr.z()) < depth_tol)) continue;
    const Vec3 xq = pose * points[i];
    if (!(xq.z() > kMinDepth)) continue;
    const Vec2 pq = to_level(project(query_cam, xq), level);
    if (!feature_in_bounds(q, pq)) continue;
    const FeatureSample fq = sample_feature(q, pq);
    const FeatureSample fr = sample_feature(r, pr);
    out.mask[i] = true;
    out.indices.push_back(int(i));
    out.residuals.push_back(fq.value - fr.value);
    out.reference.push_back(fr.value);
    out.query_gradient.push_back(fq.gradient);
    out.query_points.push_back(xq);
  }
  if (int(out.size()) < min_visible)
    throw Error(ErrorCode::TooFewVisible,
                std::to_string(out.size()) + " visible points, need " + std::to_string(min_visible));
  return out;
}

double robust_weight(double r_norm, double tau) {
  return r_norm <= tau ? 1.0 : tau / r_norm;
}

double robust_cost(double r_norm, double tau) {
  return r_norm <= tau ? 0.5 * r_norm * r_norm : tau * (r_norm - 0.5 * tau);
}

ResidualJacobian residual_jacobian(const Vec3& point, const Pose& pose, const Camera& cam,
                                   const FeatureGradient& feature_gradient, int level) {
  const Vec3 y = pose * point;
  const double inv_scale = 1.0 / double(1 << level);
  return inv_scale * feature_gradient * projection_jacobian(cam, y) * action_jacobian(y);
}

void NormalEquations::add(const ResidualJacobian& j, const Feature& r, double weight) {
  hessian.noalias() += weight * (j.transpose() * j);
  gradient.noalias() += weight * (j.transpose() * r);
}

PixelMask required_reference_pixels(const Camera& cam, const Pose& pose, const std::vector<Vec3>& points,
                                    int level) {
  PixelMask mask(cam.width, cam.height);
  for (const Vec3& x : points) {
    const Vec3 xc = pose * x;
    if (!(xc.z() > kMinDepth)) continue;
    const Vec2 p = project(cam, xc);
    const int px = int(std::lround(p.x()));
    const int py = int(std::lround(p.y()));
    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
    mask.set(px, py);
  }
  return mask.dilated(feature_footprint(level) + 2);
}

AlignResult refine(const FeaturePyramid& query_pyr, const RenderFn& render_fn, const std::vector<Vec3>& points,
                   const Pose& init_pose, const Camera& cam, const AlignConfig& cfg, AlignTrace* trace) {
  cfg.validate();
  AlignResult result;
  Pose pose = init_pose;
  bool level_converged = false;

  for (size_t li = 0; li < cfg.levels.size(); ++li) {
    const int level = cfg.levels[li];
    if (level >= query_pyr.num_levels()) throw Error(ErrorCode::OutOfBounds, "query pyramid too shallow");
    level_converged = false;

    LevelProblem prob{&query_pyr.levels[size_t(level)], &cam, &points, {}, {}, level, 0.0};
    auto setup = [&](const Pose& at) {
      const ReferenceView ref = render_fn(at, cam, required_reference_pixels(cam, at, points, level));
      const ResidualSet rs = residuals(query_pyr, cam, ref, points, at, level, cfg.depth_tol,
                                       cfg.min_visible_points);
      prob.indices = rs.indices;
      prob.reference = rs.reference;
      double sq = 0.0;
      for (const Feature& f : rs.reference) sq += f.squaredNorm();
      prob.tau = std::max(1e-6, cfg.robust_scale_factor * std::sqrt(sq / double(rs.size() * kFeatureChannels)));
    };
    setup(pose);

    double lambda = cfg.lambda_init;
    double cost = 0.0;
    for (int it = 0; it < cfg.max_iters_per_level; ++it) {
      if (cfg.rerender_each_iteration && it > 0) setup(pose);
      ++result.iterations;
      const NormalEquations ne = prob.linearize(pose, &cost);
      Eigen::Matrix<double, 6, 1> diag = ne.hessian.diagonal();
      const double floor = std::max(1e-12, 1e-9 * diag.maxCoeff());
      diag = diag.cwiseMax(floor);

      bool accepted = false;
      bool stop = false;
      while (true) {
        Eigen::Matrix<double, 6, 6> damped = ne.hessian;
        damped.diagonal() += lambda * diag;
        const Twist delta = damped.ldlt().solve(-ne.gradient);
        const double norm = delta.norm();
        if (!std::isfinite(norm)) throw Error(ErrorCode::Diverged, "non-finite update");
        if (norm < cfg.convergence_delta) {
          level_converged = true;
          stop = true;
          break;
        }
        const Pose candidate = exp(delta) * pose;
        const double c = prob.cost(candidate);
        if (c < cost) {
          if (trace)
            trace->accepted.push_back({level, cost, c, norm, lambda, candidate.rotation().norm()});
          pose = candidate;
          lambda = std::max(lambda * cfg.lambda_down, 1e-12);
          accepted = true;
          break;
        }
        if (trace) ++trace->rejected;
        lambda *= cfg.lambda_up;
        if (lambda > cfg.lambda_max)
          throw Error(ErrorCode::Diverged, "no damping in range lowers the cost");
      }
      if (stop || !accepted) break;
    }
  }

  // Final statistics on the finest level's point set.
  const int finest = cfg.levels.back();
  const FeatureLevel& q = query_pyr.levels[size_t(finest)];
  LevelProblem last{&q, &cam, &points, {}, {}, finest, 0.0};
  {
    const ReferenceView ref = render_fn(pose, cam, required_reference_pixels(cam, pose, points, finest));
    const ResidualSet rs = residuals(query_pyr, cam, ref, points, pose, finest, cfg.depth_tol,
                                     cfg.min_visible_points);
    double sq = 0.0;
    for (const Feature& f : rs.reference) sq += f.squaredNorm();
    const double tau = std::max(1e-6, cfg.robust_scale_factor * std::sqrt(sq / double(rs.size() * kFeatureChannels)));
    double cost = 0.0;
    for (const Feature& r : rs.residuals) cost += robust_cost(r.norm(), tau);
    result.final_cost = cost;
    result.visible_count = int(rs.size());
    result.mean_residual = rs.mean_norm();
  }
  result.pose = pose;
  result.converged = level_converged;
  return result;
}

}  // namespace voxtrack
