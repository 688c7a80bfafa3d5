#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "fpfuse/fingerprint_db.hpp"
#include "fpfuse/smoothing.hpp"
#include "fpfuse/trace.hpp"

namespace fpfuse {

// Leveled magnetic observation at one step: the magnetometer reading plus the
// accelerometer-derived horizontal angles at that instant.
struct LeveledMagSample {
  Eigen::Vector3d mag = Eigen::Vector3d::Zero();  // body frame, Gauss
  double roll = 0.0;
  double pitch = 0.0;
};

// Horizontal-magnitude and vertical-component gradients over a step window;
// every component starts at exactly zero by construction.
struct MagneticProfile {
  std::vector<double> horizontal;
  std::vector<double> vertical;

  // Feature naming used in databases and queries ("h01".."hNN", "v01"..).
  std::map<std::string, double> to_features() const;
};

// Throws when the window holds fewer than window_steps samples.
MagneticProfile extract_magnetic_profile(std::span<const LeveledMagSample> window,
                                         std::size_t window_steps = 10);

struct DatabaseBuildParams {
  GridSpec grid;
  int lambda_n1 = 5;               // below this, the cell is dropped
  int lambda_n2 = 20;              // below this, the default variance is used
  double default_var_rss = 25.0;   // (5 dBm)^2
  double default_var_mag = 9e-4;   // (0.03 Gauss)^2
  double min_var_rss = 0.25;       // numerical floor for dense cells
  double min_var_mag = 1e-6;
  double rss_cutoff_dbm = -95.0;   // weaker readings are treated as absent
  std::size_t profile_window_steps = 10;
};

// One georeferenced feature sample destined for a grid cell.
struct FeatureSample {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double sigma_sm = 0.0;
  std::map<std::string, double> features;
};

// Grid aggregation shared by both modalities: per-cell, per-feature mean and
// population variance, thresholded per the build parameters.
FingerprintDatabase build_database(std::span<const FeatureSample> samples,
                                   const DatabaseBuildParams& params,
                                   Modality modality);

// Feature samples for a smoothed segment: one per RSS observation.
std::vector<FeatureSample> wifi_samples_from_segment(const SensorTrace& trace,
                                                     const QualifiedSegment& segment,
                                                     double rss_cutoff_dbm);

// Feature samples for a smoothed segment: one sliding profile per step, located
// at the window-end position.
std::vector<FeatureSample> mag_samples_from_segment(const SensorTrace& trace,
                                                    const QualifiedSegment& segment,
                                                    std::size_t window_steps);

std::map<std::string, double> rss_to_features(const RssObservation& obs,
                                              double cutoff_dbm);

}  // namespace fpfuse
