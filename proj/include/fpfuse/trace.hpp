#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace fpfuse {

// One inertial/magnetic epoch. Loading merges "imu" and "mag" records that
// share a timestamp; a missing magnetometer value holds the previous one.
struct ImuSample {
  double t = 0.0;                                  // s, strictly increasing
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();  // rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero(); // m/s^2 (specific force)
  Eigen::Vector3d mag = Eigen::Vector3d::Zero();   // Gauss
};

struct RssReading {
  std::string ap_id;
  double rssi = 0.0;  // dBm, clamped to [-100, 0]
};

struct RssObservation {
  double t = 0.0;
  std::vector<RssReading> readings;
};

// An epoch with an absolute position fix bounding a crowdsourced segment.
struct AnchorFix {
  double t = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();  // m
  double sigma = 1.0;                           // m, > 0
};

struct SensorTrace {
  std::vector<ImuSample> imu;
  std::vector<RssObservation> rss;
  std::vector<AnchorFix> anchors;

  double start_time() const;
  double end_time() const;

  // Slice of all streams with t in [t0, t1].
  SensorTrace slice(double t0, double t1) const;

  void save_jsonl(const std::filesystem::path& path) const;
  static SensorTrace load_jsonl(const std::filesystem::path& path);
};

// Time reversal for backward dead reckoning: timestamps become t_end - t,
// gyro rates are negated, specific force and magnetics are kept.
SensorTrace reverse_trace(const SensorTrace& trace);

}  // namespace fpfuse
