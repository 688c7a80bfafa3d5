#include "fpfuse/steps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpfuse {

void StepDetector::reset() {
  have_prev_raw_ = false;
  n_filtered_ = 0;
  have_last_step_ = false;
  window_init_ = false;
}

std::optional<StepEvent> StepDetector::push(double t, const Eigen::Vector3d& accel) {
  const double raw = accel.norm();
  if (!have_prev_raw_) {
    have_prev_raw_ = true;
    prev_raw_ = raw;
    return std::nullopt;
  }
  const double filtered = 0.5 * (raw + prev_raw_);
  prev_raw_ = raw;

  if (!window_init_) {
    window_max_ = window_min_ = filtered;
    window_init_ = true;
  } else {
    window_max_ = std::max(window_max_, filtered);
    window_min_ = std::min(window_min_, filtered);
  }

  std::optional<StepEvent> event;
  if (n_filtered_ >= 2) {
    // Local maximum at the previous filtered sample.
    if (f1_ >= filtered && f1_ > f2_) {
      event = on_peak(t1_, f1_);
    }
    valley_ = std::min(valley_, filtered);
  } else if (n_filtered_ == 1) {
    valley_ = std::min(f1_, filtered);
  } else {
    valley_ = filtered;
  }

  f2_ = f1_;
  t2_ = t1_;
  f1_ = filtered;
  t1_ = t;
  ++n_filtered_;
  return event;
}

std::optional<StepEvent> StepDetector::on_peak(double t_peak, double value) {
  if (value - valley_ < cfg_.prominence_mps2) {
    return std::nullopt;
  }
  if (have_last_step_ && t_peak - t_last_step_ < cfg_.refractory_s) {
    return std::nullopt;
  }
  valley_ = value;

  if (!have_last_step_ || t_peak - t_last_step_ > cfg_.max_interval_s) {
    // First peak of a gait: establishes timing only.
    have_last_step_ = true;
    t_last_step_ = t_peak;
    window_max_ = window_min_ = value;
    return std::nullopt;
  }

  StepEvent ev;
  ev.t_prev = t_last_step_;
  ev.t = t_peak;
  const double amplitude = std::max(0.0, window_max_ - window_min_);
  ev.length = std::clamp(cfg_.length_gain * std::pow(amplitude, 0.25),
                         cfg_.min_length_m, cfg_.max_length_m);
  t_last_step_ = t_peak;
  window_max_ = window_min_ = value;
  return ev;
}

std::vector<StepEvent> detect_steps(std::span<const ImuSample> imu,
                                    const StepDetectorConfig& cfg) {
  std::vector<StepEvent> events;
  if (imu.size() < 2 || imu.back().t - imu.front().t < 1.0) {
    return events;
  }
  StepDetector det(cfg);
  for (const auto& s : imu) {
    if (auto ev = det.push(s.t, s.accel)) {
      events.push_back(*ev);
    }
  }
  return events;
}

Eigen::Vector3d pdr_velocity(const StepEvent& step) {
  const double dt = step.t - step.t_prev;
  if (!(dt > 0.0)) {
    throw std::invalid_argument("pdr_velocity: non-positive step duration");
  }
  return {step.length / dt, 0.0, 0.0};
}

}  // namespace fpfuse
