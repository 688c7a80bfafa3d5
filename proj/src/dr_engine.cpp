#include "fpfuse/dr_engine.hpp"

#include <cmath>
#include <stdexcept>

namespace fpfuse {

const DrEpoch* DrTrack::nearest(double t, double tol) const {
  if (epochs.empty()) return nullptr;
  auto it = std::lower_bound(epochs.begin(), epochs.end(), t,
                             [](const DrEpoch& e, double tt) { return e.t < tt; });
  const DrEpoch* best = nullptr;
  double best_dt = tol;
  if (it != epochs.end() && std::abs(it->t - t) <= best_dt) {
    best = &*it;
    best_dt = std::abs(it->t - t);
  }
  if (it != epochs.begin()) {
    auto prev = std::prev(it);
    if (std::abs(prev->t - t) <= best_dt) {
      best = &*prev;
    }
  }
  return best;
}

DrEngine::DrEngine(const DrEngineConfig& cfg) : cfg_(cfg), detector_(cfg.step) {
  cfg_.noise.validate();
  filter_.set_earth_rate(cfg_.earth_rate, cfg_.latitude_deg);
}

void DrEngine::initialize(std::span<const ImuSample> align_window,
                          const Eigen::Vector2d& p0, double sigma_p0) {
  nav_ = align_static(align_window, cfg_.env, {p0.x(), p0.y(), 0.0});
  InitialUncertainty init = cfg_.init;
  if (sigma_p0 > 0.0) {
    init.pos_m = Eigen::Vector3d(sigma_p0, sigma_p0, 0.5);
  }
  filter_.init_covariance(init);
  initialized_ = true;
  last_t_ = align_window.back().t;
  for (const auto& s : align_window) {
    update_static_window(s);
    detector_.push(s.t, s.accel);
  }
}

void DrEngine::update_static_window(const ImuSample& sample) {
  window_.push_back(sample);
  while (!window_.empty() && sample.t - window_.front().t > cfg_.static_window_s) {
    window_.pop_front();
  }
  if (window_.size() < 4 ||
      window_.back().t - window_.front().t < 0.8 * cfg_.static_window_s) {
    static_now_ = false;
    return;
  }
  double mean_mag = 0.0;
  double gyro_mean = 0.0;
  for (const auto& s : window_) {
    mean_mag += s.accel.norm();
    gyro_mean += s.gyro.norm();
  }
  mean_mag /= static_cast<double>(window_.size());
  gyro_mean /= static_cast<double>(window_.size());
  double var = 0.0;
  for (const auto& s : window_) {
    const double d = s.accel.norm() - mean_mag;
    var += d * d;
  }
  var /= static_cast<double>(window_.size());
  static_now_ = std::sqrt(var) < cfg_.static_accel_std_mps2 &&
                gyro_mean < cfg_.static_gyro_mean_rps;
}

std::optional<StepEvent> DrEngine::process(const ImuSample& sample) {
  if (!initialized_) {
    throw std::logic_error("DrEngine: process before initialize");
  }
  const double dt = sample.t - last_t_;
  if (dt <= 0.0) {
    return std::nullopt;
  }
  last_t_ = sample.t;

  nav_ = mechanize(nav_, sample, dt, cfg_.env);
  filter_.propagate(nav_, sample, cfg_.noise, dt);

  update_static_window(sample);
  if (static_now_) {
    filter_.update_velocity(nav_, Eigen::Vector3d::Zero(), cfg_.update_noise.sigma_v);
    filter_.update_zaru(nav_, sample.gyro, cfg_.update_noise.sigma_w);
  }

  if (sample.t - last_attitude_update_t_ >= cfg_.attitude_update_interval_s) {
    bool any = false;
    if (cfg_.use_gravity_update) {
      any |= filter_.update_gravity(nav_, sample, cfg_.env, cfg_.update_noise);
    }
    if (cfg_.use_mag_update) {
      any |= filter_.update_magnetometer(nav_, sample, cfg_.env, cfg_.update_noise);
    }
    if (any) {
      last_attitude_update_t_ = sample.t;
    }
  }

  if (cfg_.height_hold && sample.t - last_height_update_t_ >= 1.0) {
    filter_.update_height(nav_, 0.0, cfg_.height_hold_sigma_m);
    last_height_update_t_ = sample.t;
  }

  std::optional<StepEvent> step = detector_.push(sample.t, sample.accel);
  if (step && !static_now_) {
    step->heading = dcm_to_euler(nav_.C_bn).yaw;
    if (cfg_.use_pdr) {
      Eigen::Vector3d v_b = pdr_velocity(*step);
      if (cfg_.backward) {
        v_b = -v_b;  // reversed-time walk moves along negative body x
      }
      filter_.update_velocity(nav_, v_b, cfg_.update_noise.sigma_v);
    }
    return step;
  }
  return std::nullopt;
}

DrEpoch DrEngine::epoch() const {
  DrEpoch e;
  e.t = last_t_;
  e.p = nav_.p_n;
  e.v = nav_.v_n;
  e.C_bn = nav_.C_bn;
  e.sigma_p = Eigen::Vector2d(std::sqrt(std::max(0.0, filter_.P()(0, 0))),
                              std::sqrt(std::max(0.0, filter_.P()(1, 1))));
  return e;
}

DrTrack DrEngine::run_trace(const SensorTrace& trace, const DrEngineConfig& cfg,
                            const Eigen::Vector2d& p0, double sigma_p0) {
  if (trace.imu.size() < 2) {
    throw std::invalid_argument("run_trace: trace too short");
  }
  DrEngine engine(cfg);
  const double t0 = trace.imu.front().t;
  std::size_t align_end = 0;
  while (align_end < trace.imu.size() &&
         trace.imu[align_end].t - t0 < cfg.align_duration_s) {
    ++align_end;
  }
  align_end = std::max<std::size_t>(align_end, 2);
  engine.initialize({trace.imu.data(), align_end}, p0, sigma_p0);

  DrTrack track;
  track.epochs.reserve(trace.imu.size());
  for (std::size_t i = 0; i < align_end; ++i) {
    DrEpoch e = engine.epoch();
    e.t = trace.imu[i].t;
    track.epochs.push_back(e);
  }
  for (std::size_t i = align_end; i < trace.imu.size(); ++i) {
    auto step = engine.process(trace.imu[i]);
    if (step) {
      track.steps.push_back(*step);
    }
    track.epochs.push_back(engine.epoch());
  }
  return track;
}

}  // namespace fpfuse
