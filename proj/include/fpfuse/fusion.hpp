#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

#include "fpfuse/dr_engine.hpp"
#include "fpfuse/fai.hpp"
#include "fpfuse/matcher.hpp"
#include "fpfuse/trace_gen.hpp"

namespace fpfuse {

enum class FusionMode { kDw, kDm, kDwm };

const char* to_string(FusionMode m);
FusionMode mode_from_string(const std::string& s);

// Strategy selection plus the constant-noise baseline values.
struct StrategyConfig {
  Strategy strategy = Strategy::kMcm;
  double ct_wifi_m = 6.0;
  double ct_mag_m = 5.0;
};

// One fingerprint fix with every indicator evaluated on it, whether or not
// the strategy in force used it.
struct FixRecord {
  double t = 0.0;
  Modality modality = Modality::kWifi;
  Eigen::Vector2d fix = Eigen::Vector2d::Zero();
  double err_m = std::numeric_limits<double>::quiet_NaN();  // vs truth
  FaiBundle fai;
  double eta_used_m = 0.0;
  bool applied = false;
  bool gated = false;
  bool region_fallback = false;
};

struct FusionEpoch {
  double t = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  double eta_wifi = std::numeric_limits<double>::quiet_NaN();
  double eta_mag = std::numeric_limits<double>::quiet_NaN();
  double err_m = std::numeric_limits<double>::quiet_NaN();
};

struct FusionOutput {
  std::vector<FusionEpoch> epochs;
  std::vector<FixRecord> fixes;
  int wifi_updates = 0;
  int mag_updates = 0;
  int gated_updates = 0;
  int mag_region_fallbacks = 0;
  int skipped_queries = 0;

  std::vector<double> errors() const;  // finite per-epoch errors
};

struct PipelineConfig {
  DrEngineConfig dr;
  MatchParams match;
  FaiConfig fai;
  McCoefficients rho{0.2, 0.3, 0.5};
  StrategyConfig strategy;
  FusionMode mode = FusionMode::kDwm;
  bool innovation_gate = false;  // FAI is the primary defense; gate optional
  double init_timeout_s = 30.0;
  double wifi_aid_timeout_s = 10.0;
  std::size_t profile_window_steps = 10;
  int mag_match_stride_steps = 5;
  double rss_cutoff_dbm = -95.0;
  // Skip the WiFi-fix initialization (tests, magnetic-only studies).
  std::optional<Eigen::Vector2d> init_position;
  double init_sigma_m = 6.0;
};

// 2D fingerprint position update against the engine's filter; exposed
// separately so the update algebra is testable in isolation.
PositionUpdateResult position_update(DrEngine& engine, const Eigen::Vector2d& p_meas,
                                     const FaiValue& fai, bool gate_enabled);

// Full integration run: DR prediction, WiFi matches as position updates, and
// wireless-aided magnetic matches as position updates, with the measurement
// noise chosen per strategy. Throws when no WiFi fix arrives within the
// initialization timeout (unless an initial position is injected).
FusionOutput run_pipeline(const SensorTrace& trace, const FingerprintDatabase* db_wifi,
                          const FingerprintDatabase* db_mag, const PipelineConfig& cfg,
                          const GroundTruth* truth = nullptr);

}  // namespace fpfuse
