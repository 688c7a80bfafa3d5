#pragma once

#include <Eigen/Dense>

#include <vector>

#include "fpfuse/dr_engine.hpp"
#include "fpfuse/trace.hpp"

namespace fpfuse {

struct SmoothedEpoch {
  double t = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Vector2d sigma = Eigen::Vector2d::Zero();  // per-axis
  double sigma_scalar = 0.0;  // sqrt((sx^2 + sy^2) / 2), per-axis equivalent
  double xi = 0.5;            // forward weight, averaged over axes
};

struct SmoothedTrack {
  std::vector<SmoothedEpoch> epochs;

  const SmoothedEpoch* nearest(double t, double tol = 0.1) const;
};

// Inverse-variance forward/backward blend of one component:
// x = xi x_f + (1 - xi) x_b with xi = (1/s_f^2) / (1/s_f^2 + 1/s_b^2).
struct SmoothedValue {
  double x = 0.0;
  double sigma = 0.0;
  double xi = 0.5;
};
SmoothedValue smoothed_value(double x_fwd, double sigma_fwd, double x_bwd,
                             double sigma_bwd);

// Epoch-wise smoothing of time-aligned tracks (nearest timestamps within
// align_tol; unmatched epochs are dropped). The backward track must already
// be expressed in forward time.
SmoothedTrack smooth(const DrTrack& fwd, const DrTrack& bwd, double align_tol = 0.1);

struct SegmentSelectionConfig {
  DrEngineConfig engine;
  double lambda_d_m = 20.0;  // end-point error threshold
  double min_duration_s = 5.0;
};

struct QualifiedSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double fwd_end_error_m = 0.0;
  double bwd_end_error_m = 0.0;
  SmoothedTrack track;
  std::vector<StepEvent> steps;  // forward-pass step events
};

// Anchor-bounded trajectory segments whose forward AND backward DR end-point
// errors stay within lambda_d qualify; each comes back smoothed.
std::vector<QualifiedSegment> select_segments(const SensorTrace& trace,
                                              const SegmentSelectionConfig& cfg);

// Pure qualification rule, exposed for direct testing.
bool segment_qualifies(const Eigen::Vector2d& fwd_end, const AnchorFix& end_anchor,
                       const Eigen::Vector2d& bwd_start, const AnchorFix& start_anchor,
                       double lambda_d, double* fwd_err = nullptr,
                       double* bwd_err = nullptr);

// Map a track produced on a reversed trace back to forward time.
DrTrack unreverse_track(const DrTrack& rev, double t_end);

}  // namespace fpfuse
