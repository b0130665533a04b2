#include "voxtrack/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <Eigen/SVD>

#include "voxtrack/errors.hpp"

namespace voxtrack {

Pose::Pose(const Eigen::Quaterniond& q, const Vec3& t) : q_(q), t_(t) {
  // Already-unit inputs are kept bit-for-bit so serialization round-trips.
  if (std::abs(q_.squaredNorm() - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q_.normalize();
  // Canonical hemisphere keeps serialization stable for q and -q.
  if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
}

Pose Pose::from_matrix(const Mat4& m) {
  Eigen::JacobiSVD<Mat3> svd(m.topLeftCorner<3, 3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return Pose(Eigen::Quaterniond(r), m.topRightCorner<3, 1>());
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) {
    // Looking along `up`: any perpendicular works, pick one deterministically.
    x = z.cross(std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
  }
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return Pose(Eigen::Quaterniond(r), -r * eye);
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Pose Pose::inverse() const {
  const Eigen::Quaterniond qi = q_.conjugate();
  return Pose(qi, -(qi * t_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(q_ * other.q_, q_ * other.t_ + t_);
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Pose exp(const Twist& xi) {
  const Vec3 omega = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  const Mat3 w2 = w * w;

  Eigen::Quaterniond q;
  Mat3 jl;
  if (theta < kSmallAngle) {
    const double theta2 = theta * theta;
    q = Eigen::Quaterniond(1.0 - theta2 / 8.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
    jl = Mat3::Identity() + 0.5 * w + w2 / 6.0;
  } else {
    const double half = 0.5 * theta;
    const Vec3 axis = omega / theta;
    const double s = std::sin(half);
    q = Eigen::Quaterniond(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
    const double theta2 = theta * theta;
    // Cancellation-free forms; the cubic coefficient uses its series below 1e-3.
    const double a = 2.0 * s * s / theta2;
    const double b = theta < 1e-3 ? 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0
                                  : (theta - std::sin(theta)) / (theta2 * theta);
    jl = Mat3::Identity() + a * w + b * w2;
  }
  return Pose(q, jl * v);
}

Twist log(const Pose& p) {
  Eigen::Quaterniond q = p.rotation();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 qv = q.vec();
  const double n = qv.norm();
  Vec3 omega;
  double theta;
  if (n < kSmallAngle) {
    omega = 2.0 * qv / q.w();
    theta = omega.norm();
  } else {
    theta = 2.0 * std::atan2(n, q.w());
    omega = theta / n * qv;
  }
  const Mat3 w = hat(omega);
  Mat3 jl_inv;
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    jl_inv = Mat3::Identity() - 0.5 * w + (1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0) * w * w;
  } else {
    const double coef =
        (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
    jl_inv = Mat3::Identity() - 0.5 * w + coef * w * w;
  }
  Twist xi;
  xi.head<3>() = omega;
  xi.tail<3>() = jl_inv * p.translation();
  return xi;
}

double rotation_angle(const Eigen::Quaterniond& q) {
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double rotation_distance_deg(const Pose& a, const Pose& b) {
  const Eigen::Quaterniond d = a.rotation().conjugate() * b.rotation();
  return rotation_angle(d) * 180.0 / M_PI;
}

double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

Mat36 action_jacobian(const Vec3& y) {
  Mat36 j;
  j.leftCols<3>() = -hat(y);
  j.rightCols<3>().setIdentity();
  return j;
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidConfig, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidConfig, "image size must be positive");
  if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
    throw Error(ErrorCode::InvalidConfig, "principal point outside image");
}

Vec3 Camera::ray_direction(const Vec2& px) const {
  return Vec3((px.x() - cx) / fx, (px.y() - cy) / fy, 1.0).normalized();
}

Vec2 project(const Camera& cam, const Vec3& x_cam, double min_depth) {
  if (!(x_cam.z() > min_depth)) throw Error(ErrorCode::PointBehindCamera, "depth below minimum");
  const double inv_z = 1.0 / x_cam.z();
  return Vec2(cam.fx * x_cam.x() * inv_z + cam.cx, cam.fy * x_cam.y() * inv_z + cam.cy);
}

Mat23 projection_jacobian(const Camera& cam, const Vec3& x_cam) {
  const double inv_z = 1.0 / x_cam.z();
  const double inv_z2 = inv_z * inv_z;
  Mat23 j;
  j << cam.fx * inv_z, 0.0, -cam.fx * x_cam.x() * inv_z2,
       0.0, cam.fy * inv_z, -cam.fy * x_cam.y() * inv_z2;
  return j;
}

std::string pose_to_csv(const Pose& p) {
  const auto& q = p.rotation();
  const auto& t = p.translation();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", q.w(), q.x(), q.y(),
                q.z(), t.x(), t.y(), t.z());
  return buf;
}

Pose pose_from_fields(const std::array<double, 7>& f) {
  return Pose(Eigen::Quaterniond(f[0], f[1], f[2], f[3]), Vec3(f[4], f[5], f[6]));
}

}  // namespace voxtrack
