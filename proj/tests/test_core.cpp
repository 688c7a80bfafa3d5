#include <doctest.h>

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "fpfuse/math.hpp"
#include "fpfuse/stats.hpp"

using namespace fpfuse;

TEST_CASE("skew of zero is the zero matrix") {
  CHECK(skew(Eigen::Vector3d::Zero()).isZero(0.0));
}

TEST_CASE("skew matches the component pattern") {
  const Eigen::Vector3d v(1.0, 2.0, 3.0);
  Eigen::Matrix3d expected;
  expected << 0, -3, 2,
              3, 0, -1,
              -2, 1, 0;
  CHECK((skew(v) - expected).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("skew(v) * v vanishes") {
  const Eigen::Vector3d v(4.0, -1.0, 2.0);
  CHECK((skew(v) * v).norm() < 1e-12);
}

TEST_CASE("skew antisymmetry and cross-product identity over random triples") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d a(u(gen), u(gen), u(gen));
    const Eigen::Vector3d b(u(gen), u(gen), u(gen));
    CHECK((skew(a).transpose() + skew(a)).norm() < 1e-12);
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-9);
    CHECK((skew(a) * b + skew(b) * a).norm() < 1e-9);
  }
}

TEST_CASE("rotation_exp matches a closed-form z rotation") {
  const double angle = 0.7;
  const Eigen::Matrix3d r = rotation_exp(Eigen::Vector3d(0, 0, angle));
  CHECK(r(0, 0) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
  CHECK(r(1, 0) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
  CHECK(orthonormality_defect(r) < 1e-12);
}

TEST_CASE("euler round trip") {
  const Eigen::Matrix3d c = euler_to_dcm(0.1, -0.2, 2.0);
  const EulerRpy e = dcm_to_euler(c);
  CHECK(e.roll == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(e.pitch == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(e.yaw == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("error_stats on [3,4]") {
  const std::vector<double> e{3.0, 4.0};
  const ErrorStats s = error_stats(e);
  CHECK(s.mean_m == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(s.rms_m == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
  CHECK(s.max_m == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("error_stats on a constant series") {
  const std::vector<double> e{5.0, 5.0, 5.0, 5.0};
  const ErrorStats s = error_stats(e);
  CHECK(s.std_m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.mean_m == doctest::Approx(5.0));
  CHECK(s.rms_m == doctest::Approx(5.0));
  CHECK(s.p80_m == doctest::Approx(5.0));
  CHECK(s.p95_m == doctest::Approx(5.0));
  CHECK(s.max_m == doctest::Approx(5.0));
}

TEST_CASE("nearest-rank percentiles on the 1..100 grid") {
  // Oracle: enumerate sorted ranks directly. With n = 100 and values equal
  // to their rank, the ceil(q*n)-th smallest is q*100 exactly.
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i);
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  const auto oracle = [&](double q) {
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[rank - 1];
  };
  CHECK(oracle(0.80) == 80.0);
  CHECK(oracle(0.95) == 95.0);
  const ErrorStats s = error_stats(grid);
  CHECK(s.p80_m == 80.0);
  CHECK(s.p95_m == 95.0);
}

TEST_CASE("error_stats rejects bad input") {
  CHECK_THROWS_AS(error_stats(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(error_stats(std::vector<double>{1.0, -0.5}), std::invalid_argument);
}

TEST_CASE("error_stats invariants on random non-negative inputs") {
  std::mt19937 gen(11);
  std::exponential_distribution<double> ex(0.3);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> len(1, 200);
    std::vector<double> e;
    const int n = len(gen);
    for (int i = 0; i < n; ++i) e.push_back(ex(gen));
    const ErrorStats s = error_stats(e);
    CHECK(s.mean_m <= s.rms_m + 1e-12);
    CHECK(s.rms_m <= s.max_m + 1e-12);
    CHECK(s.p80_m <= s.p95_m + 1e-12);
    CHECK(s.p95_m <= s.max_m + 1e-12);
    CHECK(s.std_m >= 0.0);
  }
}

TEST_CASE("cdf curve is monotone and ends at one") {
  const std::vector<double> e{4.0, 1.0, 2.0, 2.0};
  const CdfCurve c = cdf_curve(e);
  REQUIRE(c.value_m.size() == 4);
  CHECK(std::is_sorted(c.value_m.begin(), c.value_m.end()));
  CHECK(std::is_sorted(c.prob.begin(), c.prob.end()));
  CHECK(c.prob.back() == 1.0);
}

TEST_CASE("correlation of identical series is one") {
  const std::vector<double> a{1.0, 2.0, 5.0, 3.0};
  const CorrelationResult r = correlation(a, a);
  CHECK_FALSE(r.degenerate);
  CHECK(r.coefficient == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlation against the negation is minus one") {
  const std::vector<double> a{1.0, 2.0, 5.0, 3.0};
  std::vector<double> b;
  for (double v : a) b.push_back(-v);
  CHECK(correlation(a, b).coefficient == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("constant predictor correlates at zero, flagged degenerate") {
  const std::vector<double> a{1.0, 2.0, 5.0, 3.0};
  const std::vector<double> ct{6.0, 6.0, 6.0, 6.0};
  const CorrelationResult r = correlation(a, ct);
  CHECK(r.degenerate);
  CHECK(r.coefficient == 0.0);
}

TEST_CASE("correlation is invariant under positive affine maps") {
  std::mt19937 gen(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a;
    std::vector<double> b;
    for (int i = 0; i < 40; ++i) {
      a.push_back(n(gen));
      b.push_back(n(gen) + 0.5 * a.back());
    }
    const double base = correlation(a, b).coefficient;
    std::vector<double> a2;
    for (double v : a) a2.push_back(3.7 * v + 11.0);
    std::vector<double> b2;
    for (double v : b) b2.push_back(0.02 * v - 4.0);
    CHECK(std::abs(correlation(a2, b).coefficient - base) < 1e-9);
    CHECK(std::abs(correlation(a, b2).coefficient - base) < 1e-9);
  }
}
