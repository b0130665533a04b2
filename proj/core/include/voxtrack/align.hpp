#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "voxtrack/features.hpp"
#include "voxtrack/geometry.hpp"
#include "voxtrack/image.hpp"

namespace voxtrack {

struct AlignConfig {
  int max_iters_per_level = 30;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double lambda_max = 1e6;
  double convergence_delta = 1e-6;  ///< twist-norm threshold
  double robust_scale_factor = 0.5;  ///< Huber scale = factor * RMS of reference features
  int min_visible_points = 12;
  std::vector<int> levels = {2, 1, 0};  ///< coarse to fine
  double depth_tol = 0.03;  ///< visibility depth tolerance, scene units
  bool rerender_each_iteration = false;

  void validate() const;
};

/// A reference frame: features, rendered z-depth and the pose/camera it was
/// rendered with. Depth is only meaningful on the pixels that were requested.
struct ReferenceView {
  std::shared_ptr<const FeaturePyramid> pyramid;
  ImageF depth;
  Pose pose;
  Camera camera;
};

/// Produces a reference near `pose` for camera `cam`. `needed` marks the
/// pixels whose content the caller will read.
using RenderFn = std::function<ReferenceView(const Pose& pose, const Camera& cam, const PixelMask& needed)>;

struct ResidualSet {
  std::vector<bool> mask;  ///< per input point
  std::vector<int> indices;
  std::vector<Feature> residuals;
  std::vector<Feature> reference;  ///< F_r at the reference projection
  std::vector<FeatureGradient> query_gradient;
  std::vector<Vec3> query_points;  ///< points in the query camera frame

  size_t size() const { return indices.size(); }
  double rms() const;
  double mean_norm() const;
};

/// r_i = F_q(pi(T_query X_i)) - F_r(pi(T_ref X_i)) for points that pass the
/// reference depth test and land inside both images. Throws TooFewVisible.
ResidualSet residuals(const FeaturePyramid& query_pyr, const Camera& query_cam, const ReferenceView& ref,
                      const std::vector<Vec3>& points, const Pose& pose, int level, double depth_tol,
                      int min_visible);

/// Huber IRLS weight: 1 inside the scale, scale / |r| outside.
double robust_weight(double r_norm, double tau);
double robust_cost(double r_norm, double tau);

using ResidualJacobian = Eigen::Matrix<double, kFeatureChannels, 6>;

/// d(residual)/d(xi) for the left update exp(xi) * pose, with the feature
/// gradient given in pixels of pyramid `level`.
ResidualJacobian residual_jacobian(const Vec3& point, const Pose& pose, const Camera& cam,
                                   const FeatureGradient& feature_gradient, int level = 0);

struct NormalEquations {
  Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();

  void add(const ResidualJacobian& j, const Feature& r, double weight);
};

struct AlignResult {
  Pose pose;
  bool converged = false;
  double final_cost = 0.0;
  int iterations = 0;
  int visible_count = 0;
  double mean_residual = 0.0;
};

/// Per-step record for inspecting the optimizer.
struct AlignTrace {
  struct Step {
    int level = 0;
    double cost_before = 0.0;
    double cost_after = 0.0;
    double step_norm = 0.0;
    double lambda = 0.0;
    double quaternion_norm = 1.0;
  };
  std::vector<Step> accepted;
  int rejected = 0;
};

/**
 * Coarse-to-fine Levenberg-Marquardt over SE(3). At each level a single
 * reference is produced by `render_fn` at the current estimate, the point set
 * is fixed, and damped Gauss-Newton steps on the Huber cost are accepted only
 * when they lower it. Throws TooFewVisible, or Diverged when even the most
 * damped step increases the cost while still exceeding convergence_delta.
 */
AlignResult refine(const FeaturePyramid& query_pyr, const RenderFn& render_fn, const std::vector<Vec3>& points,
                   const Pose& init_pose, const Camera& cam, const AlignConfig& cfg,
                   AlignTrace* trace = nullptr);

/// Pixels a reference must provide so features at the projected points are exact.
PixelMask required_reference_pixels(const Camera& cam, const Pose& pose, const std::vector<Vec3>& points,
                                    int level);

}  // namespace voxtrack
