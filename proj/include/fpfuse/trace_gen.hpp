#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <vector>

#include "fpfuse/nav.hpp"
#include "fpfuse/random.hpp"
#include "fpfuse/trace.hpp"
#include "fpfuse/world.hpp"

namespace fpfuse {

struct TruthEpoch {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

struct GroundTruth {
  std::vector<TruthEpoch> epochs;
  std::vector<ApTruth> aps;

  Eigen::Vector2d position_at(double t) const;  // linear interpolation
  void save_csv(const std::filesystem::path& path) const;

  // Max deviation between stored positions and trapezoid-integrated
  // velocities; the generator keeps this at machine precision.
  double kinematic_defect() const;
};

// Waypoint walk with constant cruise speed, bounded turn rate, a standing
// interval at the start, and a gait oscillation superimposed on the
// accelerometer so steps are detectable.
struct PathSpec {
  std::vector<Eigen::Vector2d> waypoints;
  double speed_mps = 1.2;
  double stand_start_s = 3.0;
  double stand_end_s = 2.0;
  double turn_rate_rps = 1.2;
  double gait_hz = 2.0;
  double gait_amp_mps2 = 2.53;  // keeps the default step-length gain honest
};

struct OutlierSpec {
  double fraction = 0.0;        // share of RSS epochs replaced
  double min_offset_m = 20.0;   // displacement of the emitting position
  double max_offset_m = 30.0;
  double attenuation_db = 15.0; // extra loss, mimicking heavy shadowing
};

struct TraceGenConfig {
  double imu_rate_hz = 20.0;
  double rss_rate_hz = 0.5;
  ImuNoiseModel imu_noise;
  bool imu_noise_enabled = true;
  double anchor_sigma_m = 2.0;
  double anchor_interval_s = 0.0;  // 0: anchors at start and end only
  OutlierSpec outliers;
};

struct SyntheticTrace {
  SensorTrace trace;
  GroundTruth truth;
};

// Deterministic given (world, path, cfg, seed).
SyntheticTrace synthesize_trace(const World& world, const PathSpec& path,
                                const TraceGenConfig& cfg, std::uint64_t seed);

}  // namespace fpfuse
