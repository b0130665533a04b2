#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <string>

namespace voxtrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Tangent vector of SE(3), ordered (omega, v): rotation first, radians; then
/// translation, scene units. Updates are left-multiplicative: T <- exp(xi) * T.
using Twist = Eigen::Matrix<double, 6, 1>;

inline constexpr double kSmallAngle = 1e-8;
inline constexpr double kMinDepth = 1e-6;

/**
 * Rigid transform stored as unit quaternion + translation. Maps object-frame
 * points into the camera frame. Every construction renormalizes a quaternion
 * that is off unit length by more than a few ulps, so no sequence of updates
 * can leave the rotation group.
 */
class Pose {
 public:
  Pose() : q_(Eigen::Quaterniond::Identity()), t_(Vec3::Zero()) {}
  Pose(const Eigen::Quaterniond& q, const Vec3& t);

  static Pose identity() { return Pose(); }
  /// Projects the upper-left 3x3 block onto SO(3) before storing.
  static Pose from_matrix(const Mat4& m);
  /// Camera at `eye` looking at `target`; `up` fixes the roll (image y points
  /// along -up).
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

  const Eigen::Quaterniond& rotation() const { return q_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }
  const Vec3& translation() const { return t_; }
  Mat4 matrix() const;

  Pose inverse() const;
  Vec3 operator*(const Vec3& x) const { return q_ * x + t_; }
  Pose operator*(const Pose& other) const;

  /// Camera centre in the object frame.
  Vec3 camera_center() const { return -(q_.conjugate() * t_); }

 private:
  Eigen::Quaterniond q_;
  Vec3 t_;
};

Mat3 hat(const Vec3& v);

Pose exp(const Twist& xi);
Twist log(const Pose& p);

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose inverse(const Pose& p) { return p.inverse(); }
inline Vec3 transform_point(const Pose& p, const Vec3& x) { return p * x; }

/// Rotation angle of a relative rotation, radians in [0, pi].
double rotation_angle(const Eigen::Quaterniond& q);
double rotation_distance_deg(const Pose& a, const Pose& b);
double translation_distance(const Pose& a, const Pose& b);

/// d(exp(xi) * y)/d(xi) at xi = 0.
Mat36 action_jacobian(const Vec3& y);

struct Camera {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidConfig when the intrinsics break fx,fy > 0 or put the
  /// principal point outside the image.
  void validate() const;
  bool contains(const Vec2& px, double margin = 0.0) const {
    return px.x() >= margin && px.y() >= margin && px.x() <= width - 1 - margin &&
           px.y() <= height - 1 - margin;
  }
  /// Unit-norm ray direction through pixel `px` in the camera frame.
  Vec3 ray_direction(const Vec2& px) const;
};

/// Pixel coordinates put pixel centres on integers.
Vec2 project(const Camera& cam, const Vec3& x_cam, double min_depth = kMinDepth);
Mat23 projection_jacobian(const Camera& cam, const Vec3& x_cam);

/// Seven comma-separated fields qw,qx,qy,qz,tx,ty,tz at 17 significant digits.
std::string pose_to_csv(const Pose& p);
Pose pose_from_fields(const std::array<double, 7>& f);

}  // namespace voxtrack
