#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

#include "fpfuse/fingerprint_db.hpp"
#include "fpfuse/matcher.hpp"

namespace fpfuse {

// Measurement-noise strategies for fingerprint position updates.
enum class Strategy { kCt, kSs, kSd, kWd, kMc, kMcm };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
constexpr std::array<Strategy, 6> kAllStrategies = {
    Strategy::kCt, Strategy::kSs, Strategy::kSd,
    Strategy::kWd, Strategy::kMc, Strategy::kMcm};

struct FaiConfig {
  double alpha_ss_wifi = 0.2;
  double alpha_ss_mag = 50.0;
  double alpha_sd_wifi = 5.0;
  double alpha_sd_mag = 1.0;
  double rho_ss = 0.2;
  double rho_sd = 0.3;
  double rho_wd = 0.5;
  int kappa_d = 5;
  // Larger than any plausible indoor error, so a sentinel-weighted update is
  // effectively ignored by the filter.
  double sentinel_m = 50.0;
};

// A predicted 1-sigma fingerprinting accuracy in meters.
struct FaiValue {
  double value = 0.0;
  Strategy strategy = Strategy::kCt;
  Modality modality = Modality::kWifi;
  bool sentinel = false;
};

// Signal-strength level: WiFi scores are the per-AP distances implied by the
// path-loss inversion 10^((r - b2) / (10 b1)); magnetic scores are reciprocal
// gradient magnitudes. Features without registry parameters (or zero
// gradients) are skipped; when everything is skipped the sentinel is
// returned.
FaiValue fai_ss_wifi(const FeatureVec& query,
                     const std::map<std::string, ApEstimate>& ap_registry,
                     const FaiConfig& cfg);
FaiValue fai_ss_mag(const FeatureVec& profile_features, const FaiConfig& cfg);

// Geometry level: scaled 2D DOP. WiFi rows are device-to-AP unit vectors at
// the given device position; magnetic rows are normalized (horizontal,
// vertical) gradient pairs. Rank-deficient geometry yields the sentinel.
FaiValue fai_sd_wifi(const Eigen::Vector2d& device_p,
                     std::span<const Eigen::Vector2d> ap_positions,
                     const FaiConfig& cfg);
FaiValue fai_sd_mag(const FeatureVec& profile_features, const FaiConfig& cfg);

// Plain DOP value (no scale factor); exposed for the geometry oracle tests.
double dop_from_rows(const Eigen::MatrixX2d& rows, bool* singular = nullptr);

// Database level: for every fingerprint, the mean geographic distance to its
// kappa_d most feature-similar peers (similarity by the same Gaussian product
// used in matching). Precomputed once per database snapshot.
void compute_dsf(FingerprintDatabase& db, int kappa_d, double log_floor = -30.0);

// Distance between similar fingerprints for one fingerprint index.
double dsf_for(const FingerprintDatabase& db, std::size_t index, int kappa_d,
               double log_floor = -30.0);

// Weighted DSF over the fingerprints selected by a match. Falls back to the
// unweighted mean when every selected likelihood sat at the floor.
FaiValue fai_wd(const MatchResult& match, const FingerprintDatabase& db,
                const FaiConfig& cfg);

// Reference-point uncertainty injection: value <- sqrt(value^2 + sigma_sm^2).
FaiValue inject_rp_uncertainty(FaiValue fai, double sigma_sm);

// Least-squares fit (no intercept) of actual errors on the three FAI series;
// negative coefficients are clamped to zero and the rest refit.
struct McCoefficients {
  double rho_ss = 0.0;
  double rho_sd = 0.0;
  double rho_wd = 0.0;
};
McCoefficients train_mc(std::span<const double> ss, std::span<const double> sd,
                        std::span<const double> wd, std::span<const double> actual);

FaiValue fai_mc(const FaiValue& ss, const FaiValue& sd, const FaiValue& wd,
                const McCoefficients& rho);
FaiValue fai_mcm(const FaiValue& ss, const FaiValue& sd, const FaiValue& wd);

// All six strategy values for one fix (ct passed in by the caller), with the
// RP uncertainty of the matched fingerprints already injected.
struct FaiBundle {
  double ct = 0.0;
  double ss = 0.0;
  double sd = 0.0;
  double wd = 0.0;
  double mc = 0.0;
  double mcm = 0.0;

  double by_strategy(Strategy s) const;
};

FaiBundle compute_fai_bundle(const FeatureVec& query, const MatchResult& match,
                             const FingerprintDatabase& db, const FaiConfig& cfg,
                             const McCoefficients& rho, double ct_value);

}  // namespace fpfuse
