#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpfuse/fingerprint_db.hpp"

namespace fpfuse {

using FeatureVec = std::map<std::string, double>;

struct MatchParams {
  int kappa = 5;
  int min_shared_wifi = 3;       // fingerprints sharing fewer APs are skipped
  double log_floor = -30.0;      // nats, per-feature floor
};

struct MatchEntry {
  std::size_t index = 0;          // fingerprint index inside the database
  double log_likelihood = 0.0;
  double zeta = 0.0;              // exp(ll - ll_max), positive by construction
  bool all_floored = false;       // every shared feature hit the floor
};

struct MatchResult {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  std::vector<MatchEntry> selected;  // sorted by descending zeta
  Modality modality = Modality::kWifi;
  bool region_fallback = false;      // constrained search fell back to whole db
};

struct SearchCircle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

// Thrown when no fingerprint inside the requested region can be scored; the
// caller widens the region.
struct EmptyRegionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gaussian log likelihood over features present in both the query and the
// fingerprint, with each feature term floored. Returns the number of shared
// features through `shared`.
double feature_log_likelihood(const FeatureVec& q, const Fingerprint& fp,
                              double log_floor, int* shared = nullptr,
                              bool* all_floored = nullptr);

// Product-form likelihood for small feature vectors (exp of the log sum).
// Zero when there is no shared feature.
double likelihood(const FeatureVec& q, const Fingerprint& fp,
                  double log_floor = -30.0);

// Top-kappa Gaussian matching with likelihood-weighted position averaging.
// With a region, only fingerprints inside the circle are considered and
// EmptyRegionError is thrown when none qualify.
MatchResult match(const FeatureVec& q, const FingerprintDatabase& db,
                  const MatchParams& params,
                  const std::optional<SearchCircle>& region = std::nullopt);

// Wireless-aided magnetic matching: the search circle sits at the wireless
// fix with a radius of three times the wireless accuracy. An empty circle
// falls back to an unconstrained match, flagged on the result.
MatchResult match_magnetic_constrained(const FeatureVec& profile_features,
                                       const FingerprintDatabase& db_mag,
                                       const Eigen::Vector2d& wifi_pos,
                                       double wifi_accuracy_m,
                                       const MatchParams& params);

}  // namespace fpfuse
