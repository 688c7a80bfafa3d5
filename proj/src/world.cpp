#include "fpfuse/world.hpp"

#include <algorithm>
#include <cmath>

namespace fpfuse {

WorldConfig WorldConfig::random_layout(int n_aps, int n_dipoles, RandomStream& rng,
                                       double width_m, double height_m,
                                       bool clustered_aps) {
  WorldConfig cfg;
  cfg.width_m = width_m;
  cfg.height_m = height_m;
  for (int i = 0; i < n_aps; ++i) {
    ApTruth ap;
    ap.id = "ap" + std::to_string(i);
    // A clustered layout leaves one side of the map weakly covered, which
    // gives the accuracy indicators a spatial error gradient to track.
    const double x_hi = (clustered_aps && i >= n_aps / 4) ? 0.55 * width_m : width_m;
    ap.p << rng.uniform(0.05 * width_m, 0.95 * x_hi),
        rng.uniform(0.05 * height_m, 0.95 * height_m);
    ap.beta1 = rng.uniform(1.8, 2.4);
    ap.beta2 = rng.uniform(-44.0, -36.0);
    cfg.aps.push_back(ap);
  }
  for (int i = 0; i < n_dipoles; ++i) {
    Dipole d;
    d.p << rng.uniform(0.0, width_m), rng.uniform(0.0, height_m), -1.5;
    Eigen::Vector3d dir = rng.gaussian3();
    if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitZ();
    dir.normalize();
    d.moment = dir * rng.uniform(0.1, 0.4);
    cfg.dipoles.push_back(d);
  }
  return cfg;
}

World::World(WorldConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.width_m <= 0.0 || cfg_.height_m <= 0.0) {
    throw std::invalid_argument("World: area must be positive");
  }
}

double World::rss_mean(const Eigen::Vector2d& p, const ApTruth& ap) const {
  const double d = std::max(1.0, (p - ap.p).norm());
  return -10.0 * ap.beta1 * std::log10(d) + ap.beta2;
}

RssObservation World::sample_rss(double t, const Eigen::Vector2d& p,
                                 RandomStream& rng) const {
  RssObservation obs;
  obs.t = t;
  for (const auto& ap : cfg_.aps) {
    const double r = rss_mean(p, ap) + cfg_.rss_noise_dbm * rng.gaussian();
    if (r < cfg_.rss_floor_dbm) {
      continue;
    }
    obs.readings.push_back({ap.id, std::clamp(r, -100.0, 0.0)});
  }
  return obs;
}

Eigen::Vector3d World::mag_field(const Eigen::Vector3d& p) const {
  Eigen::Vector3d b = cfg_.base_field_gauss;
  for (const auto& d : cfg_.dipoles) {
    const Eigen::Vector3d r = p - d.p;
    const double dist = std::max(0.5, r.norm());
    const Eigen::Vector3d rhat = r / dist;
    b += (3.0 * rhat * (d.moment.dot(rhat)) - d.moment) / (dist * dist * dist);
  }
  return b;
}

bool World::contains(const Eigen::Vector2d& p) const {
  return p.x() >= 0.0 && p.x() <= cfg_.width_m && p.y() >= 0.0 && p.y() <= cfg_.height_m;
}

}  // namespace fpfuse
