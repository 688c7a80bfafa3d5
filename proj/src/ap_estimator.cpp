#include "fpfuse/ap_estimator.hpp"

#include <cmath>
#include <stdexcept>

namespace fpfuse {

double path_loss_rss(const Eigen::Vector2d& device_p, const Eigen::Vector2d& ap_p,
                     double beta1, double beta2) {
  const double d = std::max(1e-3, (device_p - ap_p).norm());
  return -10.0 * beta1 * std::log10(d) + beta2;
}

namespace {

const double kLn10 = std::log(10.0);

Eigen::VectorXd residuals(std::span<const ApObservation> obs, const Eigen::Vector4d& x) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(obs.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    r[i] = o.rssi - path_loss_rss(o.device_p, {x[0], x[1]}, x[2], x[3]);
  }
  return r;
}

Eigen::MatrixXd jacobian(std::span<const ApObservation> obs, const Eigen::Vector4d& x) {
  Eigen::MatrixXd H(static_cast<Eigen::Index>(obs.size()), 4);
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    const Eigen::Vector2d d2 = Eigen::Vector2d(x[0], x[1]) - o.device_p;
    const double d = std::max(0.5, d2.norm());
    H(i, 0) = -10.0 * x[2] * d2.x() / (d * d * kLn10);
    H(i, 1) = -10.0 * x[2] * d2.y() / (d * d * kLn10);
    H(i, 2) = -10.0 * std::log10(d);
    H(i, 3) = 1.0;
  }
  return H;
}

}  // namespace

ApEstimate estimate_ap(std::span<const ApObservation> observations,
                       const ApEstimatorOptions& opts) {
  if (static_cast<int>(observations.size()) < opts.min_observations) {
    throw std::invalid_argument("estimate_ap: too few observations");
  }

  // RSS-weighted centroid start: weights ~ 1/d under an exponent-2 model.
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double wsum = 0.0;
  double strongest = -1e9;
  for (const auto& o : observations) {
    const double w = std::pow(10.0, o.rssi / 20.0);
    centroid += w * o.device_p;
    wsum += w;
    strongest = std::max(strongest, o.rssi);
  }
  if (wsum <= 0.0) {
    throw std::invalid_argument("estimate_ap: degenerate weights");
  }
  Eigen::Vector4d x(centroid.x() / wsum, centroid.y() / wsum, 2.0, strongest);

  const double inv_var = 1.0 / (opts.rss_sigma_dbm * opts.rss_sigma_dbm);
  Eigen::VectorXd r = residuals(observations, x);
  double cost = r.squaredNorm();
  Eigen::Matrix4d normal = Eigen::Matrix4d::Zero();

  bool converged = false;
  for (int iter = 0; iter < opts.max_iterations && !converged; ++iter) {
    const Eigen::MatrixXd H = jacobian(observations, x);
    normal = (H.transpose() * H * inv_var);
    Eigen::FullPivLU<Eigen::Matrix4d> lu(normal);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) {
      throw std::runtime_error("estimate_ap: singular geometry (collinear observations)");
    }
    Eigen::Vector4d step = lu.solve(H.transpose() * r * inv_var);

    // Halve the step until the residual norm stops growing.
    double scale = 1.0;
    Eigen::Vector4d x_new = x + step;
    Eigen::VectorXd r_new = residuals(observations, x_new);
    for (int halve = 0; halve < 8 && r_new.squaredNorm() > cost; ++halve) {
      scale *= 0.5;
      x_new = x + scale * step;
      r_new = residuals(observations, x_new);
    }
    if (r_new.squaredNorm() > cost) {
      // No descent direction left; treat the current point as final.
      converged = (step.norm() * scale) < 10.0 * opts.step_tol;
      break;
    }
    x_new[2] = std::clamp(x_new[2], 0.1, 10.0);
    converged = (scale * step.norm()) < opts.step_tol;
    x = x_new;
    r = r_new;
    cost = r.squaredNorm();
  }
  if (!converged) {
    throw std::runtime_error("estimate_ap: no convergence");
  }
  if (!(x[2] > 0.5 && x[2] < 6.0)) {
    throw std::runtime_error("estimate_ap: path-loss exponent out of range");
  }

  ApEstimate est;
  est.x = x[0];
  est.y = x[1];
  est.beta1 = x[2];
  est.beta2 = x[3];
  const Eigen::MatrixXd H = jacobian(observations, x);
  est.cov = (H.transpose() * H * inv_var).inverse();
  return est;
}

}  // namespace fpfuse
