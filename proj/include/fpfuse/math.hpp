#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace fpfuse {

using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat15 = Eigen::Matrix<double, 15, 15>;

constexpr double kGravityMps2 = 9.80665;
constexpr double kDegToRad = M_PI / 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

// Cross-product (skew-symmetric) form of a 3-vector: skew(v) * w == v x w.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> skew(const Eigen::MatrixBase<Derived>& v) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0), -v[2], v[1],
       v[2], Scalar(0), -v[0],
       -v[1], v[0], Scalar(0);
  return m;
}

// exp([phi x]) by Rodrigues' formula. Exact for a constant rotation axis,
// which keeps heading integration error at machine precision per step.
inline Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& phi) {
  const double angle = phi.norm();
  const Eigen::Matrix3d s = skew(phi);
  if (angle < 1e-12) {
    return Eigen::Matrix3d::Identity() + s;
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Eigen::Matrix3d::Identity() + a * s + b * s * s;
}

// Frobenius norm of C^T C - I.
inline double orthonormality_defect(const Eigen::Matrix3d& c) {
  return (c.transpose() * c - Eigen::Matrix3d::Identity()).norm();
}

// Nearest proper rotation via quaternion renormalization.
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& c) {
  Eigen::Quaterniond q(c);
  q.normalize();
  return q.toRotationMatrix();
}

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = ((m + m.transpose()) * 0.5).eval();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

// ZYX Euler angles (roll about x, pitch about y, yaw about z) of a
// body-to-level direction cosine matrix.
struct EulerRpy {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

inline EulerRpy dcm_to_euler(const Eigen::Matrix3d& c_bn) {
  EulerRpy e;
  e.pitch = -std::asin(std::clamp(c_bn(2, 0), -1.0, 1.0));
  e.roll = std::atan2(c_bn(2, 1), c_bn(2, 2));
  e.yaw = std::atan2(c_bn(1, 0), c_bn(0, 0));
  return e;
}

inline Eigen::Matrix3d euler_to_dcm(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace fpfuse
