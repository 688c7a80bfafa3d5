#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpfuse/db_builder.hpp"
#include "fpfuse/fusion.hpp"
#include "fpfuse/smoothing.hpp"
#include "fpfuse/stats.hpp"
#include "fpfuse/trace_gen.hpp"
#include "fpfuse/world.hpp"

namespace fpfuse {

inline constexpr const char* kToolVersion = "0.1.0";

// Every constant the pipeline consumes, with defaults pre-filled. A config
// file may override any subset; runs always log the fully resolved form.
struct AppConfig {
  // synthetic world
  double world_width_m = 80.0;
  double world_height_m = 50.0;
  int world_aps = 10;
  bool world_clustered_aps = true;
  int world_dipoles = 25;
  double rss_noise_dbm = 2.0;
  double rss_floor_dbm = -95.0;
  double mag_noise_gauss = 0.005;

  // trace generation
  double imu_rate_hz = 20.0;
  double rss_rate_hz = 0.5;
  double walk_speed_mps = 1.2;
  double gait_hz = 2.0;
  double gait_amp_mps2 = 2.53;
  double anchor_sigma_m = 2.0;
  double anchor_interval_s = 60.0;
  double outlier_fraction = 0.0;
  double outlier_min_m = 20.0;
  double outlier_max_m = 30.0;
  double outlier_attenuation_db = 15.0;

  // dead reckoning (noise model, initial covariance, update noise)
  ImuNoiseModel imu_noise;
  InitialUncertainty init_std;
  UpdateNoise update_noise;
  StepDetectorConfig step;
  bool earth_rate = false;
  double latitude_deg = 51.0;

  // crowdsourcing
  double lambda_d_m = 20.0;
  double segment_min_duration_s = 5.0;

  // mapping
  double grid_len_m = 3.0;
  int lambda_n1 = 5;
  int lambda_n2 = 20;
  double default_var_rss = 25.0;
  double default_var_mag = 9e-4;
  std::size_t profile_window_steps = 10;

  // fingerprinting
  int kappa = 5;
  int min_shared_wifi = 3;
  double log_floor = -30.0;

  // FAI
  FaiConfig fai;
  double ct_wifi_m = 6.0;
  double ct_mag_m = 5.0;

  // fusion
  bool innovation_gate = false;
  double init_timeout_s = 30.0;
  double wifi_aid_timeout_s = 10.0;
  int mag_match_stride_steps = 5;

  std::string to_json_string() const;
  static AppConfig from_json_string(const std::string& text);
  static AppConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Derived composite configs.
  DrEngineConfig dr_config() const;
  MatchParams match_params() const;
  DatabaseBuildParams build_params() const;
  SegmentSelectionConfig segment_config() const;
  TraceGenConfig gen_config(bool with_outliers) const;
  PathSpec path_spec(std::vector<Eigen::Vector2d> waypoints) const;
  PipelineConfig pipeline_config(Strategy strategy, FusionMode mode) const;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> strategies;
  std::vector<std::string> inputs;
  std::string output_dir;
  std::string tool_version = kToolVersion;

  std::string hash() const;  // over all fields
  std::string to_json_string() const;
  void save(const std::filesystem::path& dir) const;
};

// World and walking paths derived deterministically from (config, seed).
World make_world(const AppConfig& cfg, std::uint64_t seed);
std::vector<Eigen::Vector2d> make_waypoints(const AppConfig& cfg, RandomStream& rng,
                                            int count);

// Output-directory resolution: the FPFUSE_OUT environment variable overrides
// whatever the caller passed.
std::filesystem::path resolve_out_dir(const std::filesystem::path& requested);

// ---- CSV emission --------------------------------------------------------

void write_epochs_csv(const std::filesystem::path& path, const FusionOutput& out,
                      const std::string& manifest_hash);
void write_fixes_csv(const std::filesystem::path& path, const FusionOutput& out,
                     const std::string& manifest_hash);
void write_summary_csv(const std::filesystem::path& path, const FusionOutput& out,
                       Strategy strategy, FusionMode mode,
                       const std::string& manifest_hash);

// ---- Strategy comparison (tables) ----------------------------------------

struct StrategyRun {
  Strategy strategy = Strategy::kCt;
  FusionMode mode = FusionMode::kDwm;
  FusionOutput output;
};

struct ComparisonTables {
  // strategy -> error statistics of the fused track
  std::vector<std::pair<Strategy, ErrorStats>> stats;
  // (modality, fai name) -> Pearson correlation with actual fix errors
  std::vector<std::tuple<Modality, std::string, double>> correlations;
  // strategy -> percent improvement vs CT (rms, max)
  std::vector<std::tuple<Strategy, double, double>> improvements;
};

// Requires every run to carry truth-aligned errors; throws on misaligned
// epoch counts.
ComparisonTables compare_strategies(const std::vector<StrategyRun>& runs);

void write_comparison_csv(const std::filesystem::path& dir, const ComparisonTables& t,
                          const std::string& manifest_hash);

// ---- Subcommand implementations (thin CLI wraps these) -------------------

int cmd_simulate(const AppConfig& cfg, std::uint64_t seed, int n_traces,
                 bool with_outliers, const std::filesystem::path& out_dir);
int cmd_build_db(const AppConfig& cfg, const std::vector<std::filesystem::path>& traces,
                 const std::filesystem::path& out_dir, std::uint64_t seed);
int cmd_fit_aps(const AppConfig& cfg, const std::vector<std::filesystem::path>& traces,
                const std::filesystem::path& db_wifi_path, std::uint64_t seed);
int cmd_train_mc(const AppConfig& cfg, const std::vector<std::filesystem::path>& traces,
                 const std::filesystem::path& db_wifi_path,
                 const std::filesystem::path& db_mag_path,
                 const std::filesystem::path& out_config_path, std::uint64_t seed);
int cmd_run(const AppConfig& cfg, Strategy strategy, FusionMode mode,
            const std::filesystem::path& trace_path,
            const std::optional<std::filesystem::path>& truth_path,
            const std::filesystem::path& db_wifi_path,
            const std::filesystem::path& db_mag_path,
            const std::filesystem::path& out_dir, std::uint64_t seed);
int cmd_eval(const std::vector<std::filesystem::path>& run_dirs,
             const std::filesystem::path& out_dir);

}  // namespace fpfuse
