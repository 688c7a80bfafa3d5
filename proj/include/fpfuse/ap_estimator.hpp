#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "fpfuse/fingerprint_db.hpp"

namespace fpfuse {

struct ApObservation {
  Eigen::Vector2d device_p = Eigen::Vector2d::Zero();  // m, from DR
  double rssi = 0.0;                                   // dBm
};

struct ApEstimatorOptions {
  double rss_sigma_dbm = 2.0;
  int max_iterations = 50;
  double step_tol = 1e-4;
  int min_observations = 8;
};

// Iterated weighted least squares for [x y beta1 beta2] under the
// log-distance model r = -10 b1 log10(d) + b2. Initialized at the
// RSS-weighted centroid with b1 = 2 and b2 at the strongest reading;
// Gauss-Newton steps are halved whenever the residual norm would grow.
// Throws on too few observations, singular geometry, or non-convergence.
ApEstimate estimate_ap(std::span<const ApObservation> observations,
                       const ApEstimatorOptions& opts = {});

// Model prediction, shared with the estimator's tests.
double path_loss_rss(const Eigen::Vector2d& device_p, const Eigen::Vector2d& ap_p,
                     double beta1, double beta2);

}  // namespace fpfuse
