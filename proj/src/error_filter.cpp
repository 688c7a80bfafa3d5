#include "fpfuse/error_filter.hpp"

#include <cmath>

namespace fpfuse {

namespace {
constexpr double kEarthRateRps = 7.2921159e-5;
}

void ErrorStateFilter::init_covariance(const InitialUncertainty& u) {
  P_.setZero();
  P_.diagonal().segment<3>(ErrorState::kP) = u.pos_m.cwiseAbs2();
  P_.diagonal().segment<3>(ErrorState::kV) = u.vel_mps.cwiseAbs2();
  P_.diagonal().segment<3>(ErrorState::kPsi) = u.att_rad.cwiseAbs2();
  P_.diagonal().segment<3>(ErrorState::kBg) = u.bg_rps.cwiseAbs2();
  P_.diagonal().segment<3>(ErrorState::kBa) = u.ba_mps2.cwiseAbs2();
  err_.x.setZero();
}

Mat15 error_transition(const NavState& state, const ImuSample& sample,
                       const ImuNoiseModel& noise, double dt,
                       bool earth_rate_enabled, double latitude_rad) {
  const Eigen::Vector3d f_n = state.C_bn * (sample.accel - state.b_a);

  Mat15 F = Mat15::Zero();
  F.block<3, 3>(ErrorState::kP, ErrorState::kV).setIdentity();
  F.block<3, 3>(ErrorState::kV, ErrorState::kPsi) = skew(f_n);
  F.block<3, 3>(ErrorState::kV, ErrorState::kBa) = state.C_bn;
  F.block<3, 3>(ErrorState::kPsi, ErrorState::kBg) = -state.C_bn;
  F.block<3, 3>(ErrorState::kBg, ErrorState::kBg) =
      -Eigen::Matrix3d::Identity() / noise.tau_bg;
  F.block<3, 3>(ErrorState::kBa, ErrorState::kBa) =
      -Eigen::Matrix3d::Identity() / noise.tau_ba;

  if (earth_rate_enabled) {
    // Transport rate is zero on the flat local frame; only Earth rotation
    // remains.
    const Eigen::Vector3d w_ie_n(0.0, kEarthRateRps * std::cos(latitude_rad),
                                 kEarthRateRps * std::sin(latitude_rad));
    F.block<3, 3>(ErrorState::kV, ErrorState::kV) -= 2.0 * skew(w_ie_n);
    F.block<3, 3>(ErrorState::kPsi, ErrorState::kPsi) -= skew(w_ie_n);
  }
  return Mat15::Identity() + F * dt;
}

void ErrorStateFilter::propagate(const NavState& state, const ImuSample& sample,
                                 const ImuNoiseModel& noise, double dt) {
  const Mat15 Phi =
      error_transition(state, sample, noise, dt, earth_rate_enabled_, latitude_rad_);

  Vec15 q_diag = Vec15::Zero();
  q_diag.segment<3>(ErrorState::kV).setConstant(noise.vrw * noise.vrw);
  q_diag.segment<3>(ErrorState::kPsi).setConstant(noise.arw * noise.arw);
  q_diag.segment<3>(ErrorState::kBg).setConstant(noise.w_bg * noise.w_bg);
  q_diag.segment<3>(ErrorState::kBa).setConstant(noise.w_ba * noise.w_ba);

  P_ = Phi * P_ * Phi.transpose();
  P_.diagonal() += q_diag * dt;

  const double asym = (P_ - P_.transpose()).norm();
  if (asym > 1e-9) {
    ++resym_count_;
  }
  symmetrize(P_);
}

void ErrorStateFilter::apply_update(NavState& state,
                                    const Eigen::Ref<const Eigen::MatrixXd>& H,
                                    const Eigen::Ref<const Eigen::VectorXd>& z,
                                    const Eigen::Ref<const Eigen::MatrixXd>& R) {
  const Eigen::MatrixXd S = H * P_ * H.transpose() + R;
  const Eigen::MatrixXd K = S.ldlt().solve(H * P_).transpose();
  last_dx_ = K * z;

  // Joseph form; Eq.-style (I - KH)P is fragile once R gets tiny.
  const Mat15 IKH = Mat15::Identity() - K * H;
  P_ = IKH * P_ * IKH.transpose() + K * R * K.transpose();
  symmetrize(P_);

  err_.x = last_dx_;
  feedback(state);
}

void ErrorStateFilter::feedback(NavState& state) {
  // Error convention is estimate minus truth, so corrections subtract.
  state.p_n -= err_.x.segment<3>(ErrorState::kP);
  state.v_n -= err_.x.segment<3>(ErrorState::kV);
  const Eigen::Vector3d psi = err_.x.segment<3>(ErrorState::kPsi);
  state.C_bn = orthonormalize(rotation_exp(psi) * state.C_bn);
  state.b_g += err_.x.segment<3>(ErrorState::kBg);
  state.b_a += err_.x.segment<3>(ErrorState::kBa);
  err_.x.setZero();
}

bool ErrorStateFilter::update_gravity(NavState& state, const ImuSample& sample,
                                      const EnvironmentReference& env,
                                      const UpdateNoise& un) {
  const Eigen::Vector3d f_b = sample.accel - state.b_a;
  const double g = env.g_n.norm();
  if (std::abs(f_b.norm() - g) > un.gravity_gate_mps2) {
    return false;
  }
  // Reference static specific force in the local frame (it opposes gravity).
  const Eigen::Vector3d f_ref = -env.g_n;
  const Eigen::Vector3d z = f_ref - state.C_bn * f_b;  // predicted minus measured
  Eigen::Matrix<double, 3, 15> H = Eigen::Matrix<double, 3, 15>::Zero();
  H.block<3, 3>(0, ErrorState::kPsi) = -skew(f_ref);
  const Eigen::Matrix3d R = Eigen::Matrix3d::Identity() * un.sigma_f * un.sigma_f;
  apply_update(state, H, z, R);
  return true;
}

bool ErrorStateFilter::update_magnetometer(NavState& state, const ImuSample& sample,
                                           const EnvironmentReference& env,
                                           const UpdateNoise& un) {
  const double ref_norm = env.m_n.norm();
  if (std::abs(sample.mag.norm() - ref_norm) > un.mag_gate_frac * ref_norm) {
    return false;  // magnetically anomalous; leave the field to the matcher
  }
  const Eigen::Vector3d z = env.m_n - state.C_bn * sample.mag;
  Eigen::Matrix<double, 3, 15> H = Eigen::Matrix<double, 3, 15>::Zero();
  H.block<3, 3>(0, ErrorState::kPsi) = -skew(env.m_n);
  const Eigen::Matrix3d R = Eigen::Matrix3d::Identity() * un.sigma_m * un.sigma_m;
  apply_update(state, H, z, R);
  return true;
}

void ErrorStateFilter::update_velocity(NavState& state, const Eigen::Vector3d& v_meas_body,
                                       double sigma_v) {
  const Eigen::Matrix3d Cnb = state.C_bn.transpose();
  const Eigen::Vector3d z = Cnb * state.v_n - v_meas_body;  // predicted minus measured
  Eigen::Matrix<double, 3, 15> H = Eigen::Matrix<double, 3, 15>::Zero();
  H.block<3, 3>(0, ErrorState::kV) = Cnb;
  H.block<3, 3>(0, ErrorState::kPsi) = -Cnb * skew(state.v_n);
  const Eigen::Matrix3d R = Eigen::Matrix3d::Identity() * sigma_v * sigma_v;
  apply_update(state, H, z, R);
}

void ErrorStateFilter::update_zaru(NavState& state, const Eigen::Vector3d& gyro_meas,
                                   double sigma_w) {
  const Eigen::Vector3d z = gyro_meas - state.b_g;  // residual bias plus noise
  Eigen::Matrix<double, 3, 15> H = Eigen::Matrix<double, 3, 15>::Zero();
  H.block<3, 3>(0, ErrorState::kBg).setIdentity();
  const Eigen::Matrix3d R = Eigen::Matrix3d::Identity() * sigma_w * sigma_w;
  apply_update(state, H, z, R);
}

void ErrorStateFilter::update_height(NavState& state, double z_meas, double sigma_z) {
  Eigen::Matrix<double, 1, 15> H = Eigen::Matrix<double, 1, 15>::Zero();
  H(0, ErrorState::kP + 2) = 1.0;
  Eigen::Matrix<double, 1, 1> z;
  z(0) = state.p_n.z() - z_meas;
  Eigen::Matrix<double, 1, 1> R;
  R(0) = sigma_z * sigma_z;
  apply_update(state, H, z, R);
}

PositionUpdateResult ErrorStateFilter::update_position(NavState& state,
                                                       const Eigen::Vector2d& p_meas,
                                                       double eta, bool gate_enabled) {
  PositionUpdateResult res;
  res.innovation = state.p_n.head<2>() - p_meas;  // predicted minus measured
  if (gate_enabled && res.innovation.norm() > 6.0 * eta) {
    res.gated = true;
    ++gated_count_;
    return res;
  }
  Eigen::Matrix<double, 2, 15> H = Eigen::Matrix<double, 2, 15>::Zero();
  H.block<2, 2>(0, ErrorState::kP).setIdentity();
  const Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * eta * eta;
  apply_update(state, H, res.innovation, R);
  res.applied = true;
  res.correction = last_dx_.segment<2>(ErrorState::kP);
  return res;
}

}  // namespace fpfuse
