#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace fpfuse {

// Seeded noise source for the synthetic world. mt19937-64 with a Box-Muller
// transform for normals; both are pinned here (rather than
// std::normal_distribution, whose output is implementation-defined) so a run
// is reproducible on any platform from the seed alone.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return std::generate_canonical<double, 53>(gen_);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Eigen::Vector3d gaussian3() {
    Eigen::Vector3d v;
    v << gaussian(), gaussian(), gaussian();
    return v;
  }

  Eigen::Vector2d gaussian2() {
    Eigen::Vector2d v;
    v << gaussian(), gaussian();
    return v;
  }

  // Uniform integer in [0, n).
  std::uint64_t integer(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Derive an independent stream, e.g. one per trace.
  RandomStream fork(std::uint64_t salt) {
    return RandomStream(gen_() ^ (salt * 0x9E3779B97F4A7C15ull));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fpfuse
