#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "fpfuse/trace.hpp"

namespace fpfuse {

struct StepEvent {
  double t_prev = 0.0;   // s, previous step epoch
  double t = 0.0;        // s, this step epoch
  double length = 0.0;   // m, in [0.2, 1.2]
  double heading = 0.0;  // rad, filled by the caller that knows attitude
};

struct StepDetectorConfig {
  double refractory_s = 0.3;        // minimum peak spacing
  double max_interval_s = 2.0;      // gaps longer than this restart the gait
  double prominence_mps2 = 0.5;     // peak height above the preceding valley
  double length_gain = 0.4;         // Weinberg-style K
  double min_length_m = 0.2;
  double max_length_m = 1.2;
};

// Peak detector on low-pass-filtered acceleration magnitude (2-sample moving
// average). Feed samples in time order; a StepEvent is emitted at every
// accepted peak after the first, so one walk of n cycles yields n-1 events.
class StepDetector {
 public:
  explicit StepDetector(StepDetectorConfig cfg = {}) : cfg_(cfg) {}

  std::optional<StepEvent> push(double t, const Eigen::Vector3d& accel);

  void reset();

 private:
  std::optional<StepEvent> on_peak(double t_peak, double value);

  StepDetectorConfig cfg_;
  bool have_prev_raw_ = false;
  double prev_raw_ = 0.0;
  // Last two filtered samples with their timestamps.
  int n_filtered_ = 0;
  double f1_ = 0.0, f2_ = 0.0;
  double t1_ = 0.0, t2_ = 0.0;
  double valley_ = 0.0;        // min filtered value since the last peak
  bool have_last_step_ = false;
  double t_last_step_ = 0.0;
  double window_max_ = 0.0;    // amplitude trackers since the last step
  double window_min_ = 0.0;
  bool window_init_ = false;
};

// Batch pass over an IMU stream. Streams shorter than one second produce no
// events.
std::vector<StepEvent> detect_steps(std::span<const ImuSample> imu,
                                    const StepDetectorConfig& cfg = {});

// Pedestrian velocity in the body frame: step length over step duration
// along body x. Throws on a non-positive duration.
Eigen::Vector3d pdr_velocity(const StepEvent& step);

}  // namespace fpfuse
