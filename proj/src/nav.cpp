#include "fpfuse/nav.hpp"

#include <cmath>
#include <stdexcept>

namespace fpfuse {

void ImuNoiseModel::validate() const {
  if (arw <= 0 || vrw <= 0 || eps_g <= 0 || eps_a <= 0 || tau_bg <= 0 || tau_ba <= 0 ||
      w_bg <= 0 || w_ba <= 0) {
    throw std::invalid_argument("ImuNoiseModel: all parameters must be strictly positive");
  }
}

NavState mechanize(const NavState& state, const ImuSample& sample, double dt,
                   const EnvironmentReference& env) {
  if (!(dt > 0.0 && dt <= 0.5)) {
    throw std::invalid_argument("mechanize: dt out of (0, 0.5] s");
  }
  if (!all_finite(sample.gyro) || !all_finite(sample.accel)) {
    throw std::invalid_argument("mechanize: non-finite sample");
  }
  const Eigen::Vector3d w = sample.gyro - state.b_g;
  const Eigen::Vector3d f = sample.accel - state.b_a;

  NavState out = state;
  out.C_bn = orthonormalize(state.C_bn * rotation_exp(w * dt));
  // Average of old/new attitude approximates the mid-step rotation.
  const Eigen::Vector3d f_n = 0.5 * (state.C_bn + out.C_bn) * f;
  out.v_n = state.v_n + (f_n + env.g_n) * dt;
  out.p_n = state.p_n + 0.5 * (state.v_n + out.v_n) * dt;
  return out;
}

EulerRpy level_from_accel(const Eigen::Vector3d& accel_mean) {
  const double g = accel_mean.norm();
  EulerRpy e;
  if (g < 1e-6) {
    return e;
  }
  // Static specific force in body frame: g * (-sin(pitch),
  // cos(pitch)sin(roll), cos(pitch)cos(roll)).
  e.pitch = -std::asin(std::clamp(accel_mean.x() / g, -1.0, 1.0));
  e.roll = std::atan2(accel_mean.y(), accel_mean.z());
  e.yaw = 0.0;
  return e;
}

double heading_from_mag(const Eigen::Vector3d& mag_body, double roll, double pitch,
                        const Eigen::Vector3d& m_n) {
  const Eigen::Matrix3d level = euler_to_dcm(roll, pitch, 0.0);
  const Eigen::Vector3d m_lev = level * mag_body;
  const double ref = std::atan2(m_n.y(), m_n.x());
  const double obs = std::atan2(m_lev.y(), m_lev.x());
  return wrap_angle(ref - obs);
}

NavState align_static(std::span<const ImuSample> window, const EnvironmentReference& env,
                      const Eigen::Vector3d& p0) {
  if (window.empty()) {
    throw std::invalid_argument("align_static: empty window");
  }
  Eigen::Vector3d f_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d m_mean = Eigen::Vector3d::Zero();
  for (const auto& s : window) {
    f_mean += s.accel;
    m_mean += s.mag;
  }
  f_mean /= static_cast<double>(window.size());
  m_mean /= static_cast<double>(window.size());

  const EulerRpy rp = level_from_accel(f_mean);
  const double yaw = heading_from_mag(m_mean, rp.roll, rp.pitch, env.m_n);

  NavState s;
  s.p_n = p0;
  s.v_n.setZero();
  s.C_bn = euler_to_dcm(rp.roll, rp.pitch, yaw);
  return s;
}

}  // namespace fpfuse
