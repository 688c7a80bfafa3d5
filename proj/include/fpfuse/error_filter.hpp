#pragma once

#include <Eigen/Dense>

#include "fpfuse/math.hpp"
#include "fpfuse/nav.hpp"

namespace fpfuse {

// Error-state block layout: [dp dv psi b_g b_a], 3 each.
struct ErrorState {
  static constexpr int kP = 0;
  static constexpr int kV = 3;
  static constexpr int kPsi = 6;
  static constexpr int kBg = 9;
  static constexpr int kBa = 12;
  Vec15 x = Vec15::Zero();
};

// Initial standard deviations for the covariance, one value per axis group.
struct InitialUncertainty {
  Eigen::Vector3d pos_m = Eigen::Vector3d::Constant(20.0);
  Eigen::Vector3d vel_mps = Eigen::Vector3d::Constant(1.0);
  Eigen::Vector3d att_rad = Eigen::Vector3d(10.0 * kDegToRad, 10.0 * kDegToRad,
                                            90.0 * kDegToRad);
  Eigen::Vector3d bg_rps = Eigen::Vector3d::Constant(1.0 * kDegToRad);
  Eigen::Vector3d ba_mps2 = Eigen::Vector3d::Constant(0.1);
};

// Measurement noise settings for the sensor- and motion-related updates.
struct UpdateNoise {
  double sigma_f = 2.0;                  // m/s^2, accelerometer update
  double sigma_m = 0.03;                 // Gauss, magnetometer update
  double sigma_v = 0.3;                  // m/s, velocity / zero velocity
  double sigma_w = 0.1 * kDegToRad;      // rad/s, zero angular rate
  double gravity_gate_mps2 = 1.0;        // |norm(f) - g| beyond this skips
  double mag_gate_frac = 0.3;            // field magnitude deviation gate
};

struct PositionUpdateResult {
  bool applied = false;
  bool gated = false;
  Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
  Eigen::Vector2d correction = Eigen::Vector2d::Zero();
};

// Discrete transition Phi = I + F dt of the continuous error model. Rows:
// position errors follow velocity errors; velocity errors pick up attitude
// error through the rotated specific force and the accel bias; attitude
// errors integrate the gyro bias; biases decay with their correlation times.
Mat15 error_transition(const NavState& state, const ImuSample& sample,
                       const ImuNoiseModel& noise, double dt,
                       bool earth_rate_enabled = false, double latitude_rad = 0.0);

// Closed-loop 15-state error filter. Every update feeds the estimated error
// back into the navigation state and zeroes the error state, so the filter
// carries only the covariance between updates.
class ErrorStateFilter {
 public:
  ErrorStateFilter() { P_.setZero(); }

  void init_covariance(const InitialUncertainty& u);

  // Phi = I + F dt from the continuous error model; P <- Phi P Phi' + Q dt.
  // Earth-rate coupling terms are included only when enabled (the gyro bias
  // of a consumer IMU dwarfs Earth rate; a flag restores them).
  void propagate(const NavState& state, const ImuSample& sample,
                 const ImuNoiseModel& noise, double dt);

  // Accelerometer leveling update; returns false when the quasi-static gate
  // rejects the sample.
  bool update_gravity(NavState& state, const ImuSample& sample,
                      const EnvironmentReference& env, const UpdateNoise& un);

  // Magnetometer heading update with a field-magnitude anomaly gate.
  bool update_magnetometer(NavState& state, const ImuSample& sample,
                           const EnvironmentReference& env, const UpdateNoise& un);

  // Body-frame velocity update (pedestrian velocity model). Pass zero for a
  // zero velocity update.
  void update_velocity(NavState& state, const Eigen::Vector3d& v_meas_body,
                       double sigma_v);

  // Zero angular rate update: the residual gyro reading observes b_g.
  void update_zaru(NavState& state, const Eigen::Vector3d& gyro_meas, double sigma_w);

  // Flat-floor pseudo measurement on vertical position.
  void update_height(NavState& state, double z_meas, double sigma_z);

  // 2D fingerprint position update, R = diag(eta^2, eta^2). When gating is
  // on, innovations beyond 6 eta are skipped and counted.
  PositionUpdateResult update_position(NavState& state, const Eigen::Vector2d& p_meas,
                                       double eta, bool gate_enabled = false);

  const Mat15& P() const { return P_; }
  Mat15& mutable_P() { return P_; }
  const ErrorState& error_state() const { return err_; }
  const Vec15& last_correction() const { return last_dx_; }
  int resymmetrize_count() const { return resym_count_; }
  int gated_count() const { return gated_count_; }

  void set_earth_rate(bool enabled, double latitude_deg) {
    earth_rate_enabled_ = enabled;
    latitude_rad_ = latitude_deg * kDegToRad;
  }

 private:
  // Generic EKF update: gain from P and R, Joseph-form covariance, feedback.
  void apply_update(NavState& state, const Eigen::Ref<const Eigen::MatrixXd>& H,
                    const Eigen::Ref<const Eigen::VectorXd>& z,
                    const Eigen::Ref<const Eigen::MatrixXd>& R);
  void feedback(NavState& state);

  Mat15 P_ = Mat15::Zero();
  ErrorState err_;
  Vec15 last_dx_ = Vec15::Zero();
  int resym_count_ = 0;
  int gated_count_ = 0;
  bool earth_rate_enabled_ = false;
  double latitude_rad_ = 0.0;
};

}  // namespace fpfuse
