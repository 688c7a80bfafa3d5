#pragma once

#include <Eigen/Dense>

#include <deque>
#include <optional>
#include <vector>

#include "fpfuse/error_filter.hpp"
#include "fpfuse/nav.hpp"
#include "fpfuse/steps.hpp"
#include "fpfuse/trace.hpp"

namespace fpfuse {

struct DrEpoch {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Matrix3d C_bn = Eigen::Matrix3d::Identity();
  Eigen::Vector2d sigma_p = Eigen::Vector2d::Zero();  // per-axis std from P
};

struct DrTrack {
  std::vector<DrEpoch> epochs;
  std::vector<StepEvent> steps;

  // Nearest epoch in time, or nullptr when none is within tol.
  const DrEpoch* nearest(double t, double tol = 0.1) const;
};

struct DrEngineConfig {
  ImuNoiseModel noise;
  EnvironmentReference env;
  InitialUncertainty init;
  UpdateNoise update_noise;
  StepDetectorConfig step;

  double align_duration_s = 1.0;        // static prefix used for alignment
  double static_window_s = 0.5;
  double static_accel_std_mps2 = 0.3;
  double static_gyro_mean_rps = 3.0 * kDegToRad;
  double attitude_update_interval_s = 0.5;
  bool use_gravity_update = true;
  bool use_mag_update = true;
  bool use_pdr = true;
  bool height_hold = true;              // flat-floor pseudo update on p_z
  double height_hold_sigma_m = 0.1;
  bool backward = false;                // negate PDR velocity (reversed trace)
  bool earth_rate = false;
  double latitude_deg = 51.0;
};

// Stateful single-trace dead-reckoning engine: strapdown mechanization with
// the closed-loop error filter, ZUPT/ZARU during detected static periods,
// gravity/magnetometer attitude updates, and PDR velocity updates at steps.
class DrEngine {
 public:
  explicit DrEngine(const DrEngineConfig& cfg);

  // Coarse alignment from a static window plus a position fix.
  void initialize(std::span<const ImuSample> align_window, const Eigen::Vector2d& p0,
                  double sigma_p0);

  // Feed one IMU sample (in time order). Returns the step event fired by
  // this sample, if any.
  std::optional<StepEvent> process(const ImuSample& sample);

  bool initialized() const { return initialized_; }
  const NavState& nav() const { return nav_; }
  NavState& mutable_nav() { return nav_; }
  const ErrorStateFilter& filter() const { return filter_; }
  ErrorStateFilter& mutable_filter() { return filter_; }
  bool is_static() const { return static_now_; }
  DrEpoch epoch() const;

  // Forward (or reversed-input) pass over a whole trace.
  static DrTrack run_trace(const SensorTrace& trace, const DrEngineConfig& cfg,
                           const Eigen::Vector2d& p0, double sigma_p0);

 private:
  void update_static_window(const ImuSample& sample);

  DrEngineConfig cfg_;
  NavState nav_;
  ErrorStateFilter filter_;
  StepDetector detector_;
  std::deque<ImuSample> window_;
  bool initialized_ = false;
  bool static_now_ = false;
  double last_t_ = 0.0;
  double last_attitude_update_t_ = -1e9;
  double last_height_update_t_ = -1e9;
};

}  // namespace fpfuse
