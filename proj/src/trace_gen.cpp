#include "fpfuse/trace_gen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fpfuse/ioutil.hpp"
#include "fpfuse/math.hpp"

namespace fpfuse {

Eigen::Vector2d GroundTruth::position_at(double t) const {
  if (epochs.empty()) {
    throw std::logic_error("GroundTruth: empty");
  }
  if (t <= epochs.front().t) return epochs.front().p.head<2>();
  if (t >= epochs.back().t) return epochs.back().p.head<2>();
  auto it = std::lower_bound(epochs.begin(), epochs.end(), t,
                             [](const TruthEpoch& e, double tt) { return e.t < tt; });
  const auto& b = *it;
  const auto& a = *std::prev(it);
  const double w = (t - a.t) / std::max(1e-12, b.t - a.t);
  return (1.0 - w) * a.p.head<2>() + w * b.p.head<2>();
}

void GroundTruth::save_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "t,x,y,z,vx,vy,vz,yaw\n";
  for (const auto& e : epochs) {
    out << format_double(e.t) << ',' << format_double(e.p.x()) << ','
        << format_double(e.p.y()) << ',' << format_double(e.p.z()) << ','
        << format_double(e.v.x()) << ',' << format_double(e.v.y()) << ','
        << format_double(e.v.z()) << ',' << format_double(e.yaw) << '\n';
  }
  atomic_write_file(path, out.str());
}

double GroundTruth::kinematic_defect() const {
  double worst = 0.0;
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    const auto& a = epochs[i - 1];
    const auto& b = epochs[i];
    const Eigen::Vector3d pred = a.p + 0.5 * (a.v + b.v) * (b.t - a.t);
    worst = std::max(worst, (pred - b.p).norm());
  }
  return worst;
}

namespace {

// First-order Gauss-Markov bias, discretized exactly.
class GaussMarkov {
 public:
  GaussMarkov(double tau, double drive_psd_sqrt, RandomStream& rng)
      : tau_(tau),
        stationary_std_(drive_psd_sqrt * std::sqrt(tau / 2.0)),
        state_(stationary_std_ * rng.gaussian3()) {}

  const Eigen::Vector3d& value() const { return state_; }

  void step(double dt, RandomStream& rng) {
    const double phi = std::exp(-dt / tau_);
    const double q = stationary_std_ * std::sqrt(1.0 - phi * phi);
    state_ = phi * state_ + q * rng.gaussian3();
  }

 private:
  double tau_;
  double stationary_std_;
  Eigen::Vector3d state_;
};

}  // namespace

SyntheticTrace synthesize_trace(const World& world, const PathSpec& path,
                                const TraceGenConfig& cfg, std::uint64_t seed) {
  if (path.waypoints.size() < 2) {
    throw std::invalid_argument("synthesize_trace: need at least two waypoints");
  }
  for (const auto& w : path.waypoints) {
    if (!world.contains(w)) {
      throw std::invalid_argument("synthesize_trace: waypoint outside world");
    }
  }

  RandomStream rng(seed);
  RandomStream rng_imu = rng.fork(1);
  RandomStream rng_rss = rng.fork(2);
  RandomStream rng_anchor = rng.fork(3);

  const double dt = 1.0 / cfg.imu_rate_hz;
  const double rss_interval = 1.0 / cfg.rss_rate_hz;

  GaussMarkov bias_g(cfg.imu_noise.tau_bg, cfg.imu_noise.w_bg, rng_imu);
  GaussMarkov bias_a(cfg.imu_noise.tau_ba, cfg.imu_noise.w_ba, rng_imu);

  // Walk controller state.
  Eigen::Vector2d p2 = path.waypoints.front();
  double heading = std::atan2(path.waypoints[1].y() - p2.y(),
                              path.waypoints[1].x() - p2.x());
  double speed = 0.0;
  std::size_t wp_index = 1;
  bool walk_done = false;
  double walk_done_t = -1.0;

  SyntheticTrace out;
  out.truth.aps = world.config().aps;

  Eigen::Vector3d p3(p2.x(), p2.y(), 0.0);
  Eigen::Vector3d v3 = Eigen::Vector3d::Zero();
  double next_rss_t = 1.0;
  double next_anchor_t = cfg.anchor_interval_s > 0.0 ? cfg.anchor_interval_s : -1.0;
  bool end_anchor_done = false;

  const double accel_limit = 1.2;  // m/s^2 forward speed ramp

  auto emit_anchor = [&](double t) {
    AnchorFix a;
    a.t = t;
    a.p = p3.head<2>() + cfg.anchor_sigma_m * rng_anchor.gaussian2();
    a.sigma = cfg.anchor_sigma_m;
    out.trace.anchors.push_back(a);
  };

  double polyline = 0.0;
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    polyline += (path.waypoints[i] - path.waypoints[i - 1]).norm();
  }
  // A stuck controller must not hang the generator.
  const double max_t = path.stand_start_s + path.stand_end_s +
                       3.0 * polyline / std::max(0.1, path.speed_mps) + 60.0;

  double t = 0.0;
  emit_anchor(0.0);

  for (int k = 0;; ++k, t = k * dt) {
    if (t > max_t) {
      if (!end_anchor_done) {
        emit_anchor(t);
      }
      break;
    }
    // --- control phase ---
    const bool standing_start = t < path.stand_start_s;
    double target_speed = 0.0;
    double yaw_rate = 0.0;
    if (!standing_start && !walk_done) {
      const Eigen::Vector2d target = path.waypoints[wp_index];
      const Eigen::Vector2d to_target = target - p2;
      if (to_target.norm() < 0.5) {
        if (wp_index + 1 < path.waypoints.size()) {
          ++wp_index;
        } else {
          walk_done = true;
          walk_done_t = t;
        }
      }
      if (!walk_done) {
        target_speed = path.speed_mps;
        const double bearing = std::atan2(to_target.y(), to_target.x());
        yaw_rate = std::clamp(3.0 * wrap_angle(bearing - heading),
                              -path.turn_rate_rps, path.turn_rate_rps);
      }
    }
    const double ds = std::clamp((target_speed - speed) / dt, -accel_limit, accel_limit);

    // --- true kinematics at this sample ---
    const double sin_h = std::sin(heading);
    const double cos_h = std::cos(heading);
    Eigen::Vector3d a_n(ds * cos_h - speed * yaw_rate * sin_h,
                        ds * sin_h + speed * yaw_rate * cos_h, 0.0);
    // Gait bounce rides on the accelerometer only; it is periodic and
    // zero-mean, so the smooth trajectory stays the reference.
    const double gait_scale = speed / std::max(0.1, path.speed_mps);
    const double gait = path.gait_amp_mps2 * gait_scale *
                        std::sin(2.0 * M_PI * path.gait_hz * t);

    const Eigen::Matrix3d C_bn = euler_to_dcm(0.0, 0.0, heading);

    // --- sensor outputs for the step ending at t (skip k = 0) ---
    if (k > 0) {
      ImuSample s;
      s.t = t;
      Eigen::Vector3d gyro_true(0.0, 0.0, yaw_rate);
      Eigen::Vector3d a_sens = a_n + Eigen::Vector3d(0.0, 0.0, gait);
      Eigen::Vector3d f_b = C_bn.transpose() *
                            (a_sens - Eigen::Vector3d(0.0, 0.0, -kGravityMps2));
      s.gyro = C_bn.transpose() * gyro_true;
      s.accel = f_b;
      Eigen::Vector3d m_b = C_bn.transpose() * world.mag_field(p3);
      if (cfg.imu_noise_enabled) {
        s.gyro += bias_g.value() +
                  (cfg.imu_noise.arw / std::sqrt(dt)) * rng_imu.gaussian3();
        s.accel += bias_a.value() +
                   (cfg.imu_noise.vrw / std::sqrt(dt)) * rng_imu.gaussian3();
        m_b += world.config().mag_noise_gauss * rng_imu.gaussian3();
        bias_g.step(dt, rng_imu);
        bias_a.step(dt, rng_imu);
      }
      s.mag = m_b;
      out.trace.imu.push_back(s);
    }

    TruthEpoch te;
    te.t = t;
    te.p = p3;
    te.v = v3;
    te.yaw = heading;
    out.truth.epochs.push_back(te);

    // --- RSS / anchors ---
    if (t >= next_rss_t) {
      next_rss_t += rss_interval;
      Eigen::Vector2d emit_p = p3.head<2>();
      double atten = 0.0;
      if (cfg.outliers.fraction > 0.0 && rng_rss.uniform() < cfg.outliers.fraction) {
        const double d = rng_rss.uniform(cfg.outliers.min_offset_m,
                                         cfg.outliers.max_offset_m);
        const double ang = rng_rss.uniform(0.0, 2.0 * M_PI);
        emit_p += d * Eigen::Vector2d(std::cos(ang), std::sin(ang));
        atten = cfg.outliers.attenuation_db;
      }
      RssObservation obs = world.sample_rss(t, emit_p, rng_rss);
      if (atten != 0.0) {
        for (auto& r : obs.readings) {
          r.rssi = std::max(-100.0, r.rssi - atten);
        }
        std::erase_if(obs.readings, [&](const RssReading& r) {
          return r.rssi < world.config().rss_floor_dbm;
        });
      }
      if (!obs.readings.empty()) {
        out.trace.rss.push_back(std::move(obs));
      }
    }
    if (next_anchor_t > 0.0 && t >= next_anchor_t) {
      next_anchor_t += cfg.anchor_interval_s;
      emit_anchor(t);
    }

    // --- termination ---
    if (walk_done && t - walk_done_t >= path.stand_end_s) {
      if (!end_anchor_done) {
        emit_anchor(t);
        end_anchor_done = true;
      }
      break;
    }

    // --- integrate truth to the next sample ---
    heading = wrap_angle(heading + yaw_rate * dt);
    speed = std::max(0.0, speed + ds * dt);
    const Eigen::Vector3d v_new(speed * std::cos(heading), speed * std::sin(heading),
                                0.0);
    p3 += 0.5 * (v3 + v_new) * dt;
    v3 = v_new;
    p2 = p3.head<2>();
  }

  return out;
}

}  // namespace fpfuse
