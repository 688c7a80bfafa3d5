#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "fpfuse/nav.hpp"
#include "fpfuse/random.hpp"
#include "fpfuse/trace.hpp"

namespace fpfuse {

struct ApTruth {
  std::string id;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();  // m
  double beta1 = 2.0;                           // path-loss exponent
  double beta2 = -40.0;                         // dBm at 1 m
};

// Magnetic anomaly source: a point dipole below the walking plane.
struct Dipole {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();      // m, typically z < 0
  Eigen::Vector3d moment = Eigen::Vector3d::Zero(); // Gauss * m^3
};

struct WorldConfig {
  double width_m = 80.0;
  double height_m = 50.0;
  std::vector<ApTruth> aps;
  double rss_noise_dbm = 2.0;
  double rss_floor_dbm = -95.0;  // readings below this are not reported
  Eigen::Vector3d base_field_gauss = Eigen::Vector3d(0.0, 0.20, -0.45);
  std::vector<Dipole> dipoles;
  double mag_noise_gauss = 0.005;

  // Convenience generators for a randomized but seed-deterministic layout.
  static WorldConfig random_layout(int n_aps, int n_dipoles, RandomStream& rng,
                                   double width_m = 80.0, double height_m = 50.0,
                                   bool clustered_aps = false);
};

// Queryable synthetic environment. Deterministic given its config; all noise
// comes from the RandomStream the caller passes in.
class World {
 public:
  explicit World(WorldConfig cfg);

  const WorldConfig& config() const { return cfg_; }

  // Log-distance model without noise; distance is floored at 1 m.
  double rss_mean(const Eigen::Vector2d& p, const ApTruth& ap) const;

  // All APs above the floor, with additive Gaussian noise.
  RssObservation sample_rss(double t, const Eigen::Vector2d& p, RandomStream& rng) const;

  // Base field plus dipole contributions, in the local level frame.
  Eigen::Vector3d mag_field(const Eigen::Vector3d& p) const;

  bool contains(const Eigen::Vector2d& p) const;

 private:
  WorldConfig cfg_;
};

}  // namespace fpfuse
