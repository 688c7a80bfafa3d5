#pragma once

#include <Eigen/Dense>

#include <span>

#include "fpfuse/math.hpp"
#include "fpfuse/trace.hpp"

namespace fpfuse {

// Full navigation state in a flat local ENU frame (x east, y north, z up).
struct NavState {
  Eigen::Vector3d p_n = Eigen::Vector3d::Zero();   // m
  Eigen::Vector3d v_n = Eigen::Vector3d::Zero();   // m/s
  Eigen::Matrix3d C_bn = Eigen::Matrix3d::Identity();  // body -> local level
  Eigen::Vector3d b_g = Eigen::Vector3d::Zero();   // rad/s, applied gyro bias
  Eigen::Vector3d b_a = Eigen::Vector3d::Zero();   // m/s^2, applied accel bias
};

// Stochastic sensor model. Defaults follow a typical consumer-grade IMU
// data sheet: 0.6 deg/sqrt(h) ARW, 0.18 m/s/sqrt(h) VRW, 0.05 deg/s and
// 0.01 m/s^2 bias instabilities.
struct ImuNoiseModel {
  double arw = 0.6 * kDegToRad / 60.0;   // rad/sqrt(s)
  double vrw = 0.18 / 60.0;              // m/s/sqrt(s)
  double eps_g = 0.05 * kDegToRad;       // rad/s, gyro bias instability
  double eps_a = 0.01;                   // m/s^2, accel bias instability
  double tau_bg = 300.0;                 // s, bias correlation times
  double tau_ba = 300.0;
  // Gauss-Markov driving noise densities; defaults keep the stationary
  // bias variance equal to the instability values above.
  double w_bg = 0.05 * kDegToRad * std::sqrt(2.0 / 300.0);
  double w_ba = 0.01 * std::sqrt(2.0 / 300.0);

  void validate() const;
};

// Local gravity and magnetic reference. The magnetic vector has a downward
// component in the northern hemisphere (negative z in ENU).
struct EnvironmentReference {
  Eigen::Vector3d g_n = Eigen::Vector3d(0.0, 0.0, -kGravityMps2);  // m/s^2
  Eigen::Vector3d m_n = Eigen::Vector3d(0.0, 0.20, -0.45);         // Gauss
};

// One strapdown step: attitude from bias-corrected rates (Rodrigues), then
// velocity from rotated specific force plus gravity, then position by the
// trapezoid rule. dt must lie in (0, 0.5] s.
NavState mechanize(const NavState& state, const ImuSample& sample, double dt,
                   const EnvironmentReference& env);

// Accelerometer leveling: roll and pitch of the body under the assumption
// that the averaged specific force is purely gravitational.
EulerRpy level_from_accel(const Eigen::Vector3d& accel_mean);

// Heading that aligns the leveled magnetometer reading with the horizontal
// component of the reference field.
double heading_from_mag(const Eigen::Vector3d& mag_body, double roll, double pitch,
                        const Eigen::Vector3d& m_n);

// Coarse alignment over an assumed-static window of samples.
NavState align_static(std::span<const ImuSample> window, const EnvironmentReference& env,
                      const Eigen::Vector3d& p0);

}  // namespace fpfuse
