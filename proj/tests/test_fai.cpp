#include <doctest.h>

#include <cmath>
#include <random>

#include "fpfuse/fai.hpp"
#include "fpfuse/fingerprint_db.hpp"

using namespace fpfuse;

namespace {

std::map<std::string, ApEstimate> registry_one(double beta1, double beta2) {
  ApEstimate ap;
  ap.ap_id = "ap0";
  ap.beta1 = beta1;
  ap.beta2 = beta2;
  return {{"ap0", ap}};
}

Fingerprint fp_at(int ix, int iy, double x, double y,
                  std::map<std::string, std::pair<double, double>> feats,
                  double dsf = 0.0) {
  Fingerprint fp;
  fp.cell << ix, iy;
  fp.rp << x, y;
  fp.sample_count = 30;
  fp.dsf = dsf;
  for (const auto& [name, ms] : feats) {
    fp.features[name] = {ms.first, ms.second, 30};
  }
  return fp;
}

}  // namespace

TEST_CASE("wifi signal-strength FAI at one meter") {
  FaiConfig cfg;
  const FaiValue v = fai_ss_wifi({{"ap0", -40.0}}, registry_one(2.0, -40.0), cfg);
  CHECK_FALSE(v.sentinel);
  CHECK(v.value == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("wifi signal-strength FAI grows with implied distance") {
  FaiConfig cfg;
  const FaiValue v = fai_ss_wifi({{"ap0", -60.0}}, registry_one(2.0, -40.0), cfg);
  // -60 dBm under (2, -40) inverts to d = 10 m.
  CHECK(v.value == doctest::Approx(0.2 * 10.0).epsilon(1e-9));
}

TEST_CASE("wifi SS without registry parameters is the sentinel") {
  FaiConfig cfg;
  const FaiValue v = fai_ss_wifi({{"unknown", -50.0}}, {}, cfg);
  CHECK(v.sentinel);
  CHECK(v.value == cfg.sentinel_m);
}

TEST_CASE("magnetic signal-strength FAI follows the literal reciprocal rule") {
  FaiConfig cfg;
  FeatureVec q;
  for (int j = 1; j <= 5; ++j) {
    q["h0" + std::to_string(j)] = 0.02;
  }
  const FaiValue v = fai_ss_mag(q, cfg);
  // alpha * mean(1/|m|) with every gradient at 0.02 Gauss.
  CHECK(v.value == doctest::Approx(50.0 / 0.02).epsilon(1e-9));

  // Zero gradients are skipped; all-zero input falls to the sentinel.
  q.clear();
  q["h01"] = 0.0;
  const FaiValue s = fai_ss_mag(q, cfg);
  CHECK(s.sentinel);
}

TEST_CASE("four cardinal APs give unit DOP") {
  FaiConfig cfg;
  const Eigen::Vector2d device(10.0, 10.0);
  std::vector<Eigen::Vector2d> aps = {
      {10.0, 20.0}, {10.0, 0.0}, {20.0, 10.0}, {0.0, 10.0}};
  const FaiValue v = fai_sd_wifi(device, aps, cfg);
  CHECK_FALSE(v.sentinel);
  CHECK(v.value == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("orthogonal magnetic gradient rows give sqrt-two DOP") {
  FaiConfig cfg;
  const FeatureVec q{{"h01", 1.0}, {"v01", 0.0}, {"h02", 0.0}, {"v02", 1.0}};
  const FaiValue v = fai_sd_mag(q, cfg);
  CHECK_FALSE(v.sentinel);
  CHECK(v.value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("collinear AP geometry falls to the sentinel") {
  FaiConfig cfg;
  const Eigen::Vector2d device(0.0, 0.0);
  std::vector<Eigen::Vector2d> aps = {{5.0, 0.0}, {10.0, 0.0}, {-20.0, 0.0}};
  const FaiValue v = fai_sd_wifi(device, aps, cfg);
  CHECK(v.sentinel);
  CHECK(v.value == cfg.sentinel_m);
}

TEST_CASE("scaled DOP matches an independently coded inversion") {
  // Oracle: adjugate-based 2x2 inverse, written separately from the library.
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  std::uniform_int_distribution<int> napd(3, 8);
  FaiConfig cfg;
  cfg.alpha_sd_wifi = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = napd(gen);
    const Eigen::Vector2d device(5.0, 5.0);
    std::vector<Eigen::Vector2d> aps;
    double a = 0.0, b = 0.0, c = 0.0;  // normal matrix accumulators
    for (int i = 0; i < n; ++i) {
      const double ang = u(gen);
      aps.push_back(device - 10.0 * Eigen::Vector2d(std::cos(ang), std::sin(ang)));
      const double ux = std::cos(ang);
      const double uy = std::sin(ang);
      a += ux * ux;
      b += ux * uy;
      c += uy * uy;
    }
    const double det = a * c - b * b;
    if (det < 1e-6) continue;
    const double trace_inv = (c + a) / det;
    const double dop_oracle = std::sqrt(trace_inv);
    const FaiValue v = fai_sd_wifi(device, aps, cfg);
    CHECK(std::abs(v.value - dop_oracle) < 1e-9);
  }
}

TEST_CASE("dsf averages the distances of the most similar peers") {
  GridSpec grid;
  grid.cell_len = 1.0;
  FingerprintDatabase db(grid, Modality::kWifi);
  const std::map<std::string, std::pair<double, double>> base{
      {"a", {-50.0, 25.0}}, {"b", {-60.0, 25.0}}, {"c", {-70.0, 25.0}}};
  db.add(fp_at(0, 0, 0.0, 0.0, base));
  db.add(fp_at(3, 0, 3.0, 0.0, base));   // equally similar at 3 m
  db.add(fp_at(5, 0, 5.0, 0.0, base));   // equally similar at 5 m
  db.add(fp_at(9, 0, 9.0, 0.0,
               {{"a", {-90.0, 25.0}}, {"b", {-20.0, 25.0}}, {"c", {-95.0, 25.0}}}));
  const double d = dsf_for(db, 0, 2);
  CHECK(d == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("a duplicate fingerprint thirty meters away dominates dsf at kappa one") {
  GridSpec grid;
  FingerprintDatabase db(grid, Modality::kMagnetic);
  const std::map<std::string, std::pair<double, double>> feats{
      {"h01", {0.04, 1e-4}}, {"v01", {-0.02, 1e-4}}};
  db.add(fp_at(0, 0, 0.0, 0.0, feats));
  db.add(fp_at(10, 0, 30.0, 0.0, feats));
  db.add(fp_at(2, 0, 6.0, 0.0, {{"h01", {0.4, 1e-4}}, {"v01", {0.3, 1e-4}}}));
  CHECK(dsf_for(db, 0, 1) == doctest::Approx(30.0).epsilon(1e-9));
}

TEST_CASE("ambiguous fingerprints carry larger dsf than locally distinct ones") {
  // A feature field that varies smoothly with x makes likelihood-neighbors
  // geographic neighbors; planting a far twin breaks that for one cell.
  GridSpec grid;
  grid.cell_len = 3.0;
  FingerprintDatabase db(grid, Modality::kWifi);
  for (int i = 0; i < 12; ++i) {
    db.add(fp_at(i, 0, 3.0 * i, 0.0,
                 {{"a", {-40.0 - 2.0 * i, 9.0}},
                  {"b", {-70.0 + 2.0 * i, 9.0}},
                  {"c", {-55.0 + ((i % 2 == 0) ? 1.0 : -1.0), 9.0}}}));
  }
  // Twin of cell 1 far away.
  db.add(fp_at(0, 8, 1.0, 24.0,
               {{"a", {-42.0, 9.0}}, {"b", {-68.0, 9.0}}, {"c", {-56.0, 9.0}}}));
  compute_dsf(db, 2);
  const auto& fps = db.fingerprints();
  // Index of the twin and of a mid-map distinct cell.
  double dsf_twin = 0.0;
  double dsf_mid = 0.0;
  for (const auto& fp : fps) {
    if (fp.cell == Eigen::Vector2i(0, 8)) dsf_twin = fp.dsf;
    if (fp.cell == Eigen::Vector2i(6, 0)) dsf_mid = fp.dsf;
  }
  CHECK(dsf_mid >= 3.0);
  CHECK(dsf_mid <= 4.6);
  CHECK(dsf_twin > dsf_mid);
}

namespace {

MatchResult fake_match(const std::vector<std::pair<std::size_t, double>>& entries,
                       Modality modality) {
  MatchResult m;
  m.modality = modality;
  double best = -1e300;
  for (const auto& [idx, ll] : entries) best = std::max(best, ll);
  for (const auto& [idx, ll] : entries) {
    MatchEntry e;
    e.index = idx;
    e.log_likelihood = ll;
    e.zeta = std::exp(ll - best);
    m.selected.push_back(e);
  }
  return m;
}

FingerprintDatabase dsf_db(const std::vector<double>& dsf_values) {
  GridSpec grid;
  FingerprintDatabase db(grid, Modality::kWifi);
  for (std::size_t i = 0; i < dsf_values.size(); ++i) {
    db.add(fp_at(static_cast<int>(i), 0, 3.0 * static_cast<double>(i), 0.0,
                 {{"a", {-50.0, 25.0}}}, dsf_values[i]));
  }
  return db;
}

}  // namespace

TEST_CASE("weighted dsf with equal weights is the mean") {
  const FingerprintDatabase db = dsf_db({2.0, 4.0});
  FaiConfig cfg;
  const MatchResult m = fake_match({{0, -1.0}, {1, -1.0}}, Modality::kWifi);
  CHECK(fai_wd(m, db, cfg).value == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("weighted dsf follows the likelihood weights") {
  const FingerprintDatabase db = dsf_db({2.0, 6.0});
  FaiConfig cfg;
  // Weights 3:1.
  const MatchResult m =
      fake_match({{0, std::log(3.0)}, {1, std::log(1.0)}}, Modality::kWifi);
  CHECK(fai_wd(m, db, cfg).value == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("weighted dsf with a single selection returns its dsf") {
  const FingerprintDatabase db = dsf_db({2.5});
  FaiConfig cfg;
  const MatchResult m = fake_match({{0, -2.0}}, Modality::kWifi);
  CHECK(fai_wd(m, db, cfg).value == doctest::Approx(2.5));
}

TEST_CASE("weighted dsf is invariant under likelihood rescaling") {
  const FingerprintDatabase db = dsf_db({2.0, 6.0, 3.0});
  FaiConfig cfg;
  const MatchResult a =
      fake_match({{0, -1.0}, {1, -2.0}, {2, -4.0}}, Modality::kWifi);
  const MatchResult b =
      fake_match({{0, -1.0 + 17.0}, {1, -2.0 + 17.0}, {2, -4.0 + 17.0}},
                 Modality::kWifi);
  CHECK(fai_wd(a, db, cfg).value == doctest::Approx(fai_wd(b, db, cfg).value));
}

TEST_CASE("floored-out selections fall back to the unweighted mean") {
  const FingerprintDatabase db = dsf_db({2.0, 4.0, 9.0});
  FaiConfig cfg;
  MatchResult m = fake_match({{0, -90.0}, {1, -90.0}, {2, -90.0}}, Modality::kWifi);
  for (auto& e : m.selected) e.all_floored = true;
  CHECK(fai_wd(m, db, cfg).value == doctest::Approx(5.0));
}

TEST_CASE("rp uncertainty injection is a root sum of squares") {
  FaiValue v;
  v.value = 3.0;
  CHECK(inject_rp_uncertainty(v, 4.0).value == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(inject_rp_uncertainty(v, 0.0).value == doctest::Approx(3.0));
  CHECK_THROWS_AS(inject_rp_uncertainty(v, -1.0), std::invalid_argument);

  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int k = 0; k < 200; ++k) {
    FaiValue a;
    a.value = u(gen) + 0.01;
    const double s = u(gen);
    const double out = inject_rp_uncertainty(a, s).value;
    CHECK(out >= std::max(a.value, s) - 1e-12);
  }
}

TEST_CASE("train_mc recovers exact linear coefficients") {
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  std::vector<double> ss, sd, wd, actual;
  for (int i = 0; i < 100; ++i) {
    ss.push_back(u(gen));
    sd.push_back(u(gen));
    wd.push_back(u(gen));
    actual.push_back(0.2 * ss.back() + 0.3 * sd.back() + 0.5 * wd.back());
  }
  const McCoefficients rho = train_mc(ss, sd, wd, actual);
  CHECK(std::abs(rho.rho_ss - 0.2) < 1e-9);
  CHECK(std::abs(rho.rho_sd - 0.3) < 1e-9);
  CHECK(std::abs(rho.rho_wd - 0.5) < 1e-9);
}

TEST_CASE("train_mc on uncorrelated noise shrinks every coefficient") {
  std::mt19937 gen(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> ss, sd, wd, actual;
  for (int i = 0; i < 1000; ++i) {
    ss.push_back(5.0 + n(gen));
    sd.push_back(5.0 + n(gen));
    wd.push_back(5.0 + n(gen));
    actual.push_back(n(gen));
  }
  const McCoefficients rho = train_mc(ss, sd, wd, actual);
  CHECK(std::abs(rho.rho_ss) < 0.1);
  CHECK(std::abs(rho.rho_sd) < 0.1);
  CHECK(std::abs(rho.rho_wd) < 0.1);
  CHECK(rho.rho_ss >= 0.0);
  CHECK(rho.rho_sd >= 0.0);
  CHECK(rho.rho_wd >= 0.0);
}

TEST_CASE("train_mc rejects rank-deficient regressors and short series") {
  std::vector<double> ss, sd, wd, actual;
  for (int i = 0; i < 100; ++i) {
    ss.push_back(1.0);
    sd.push_back(2.0);  // sd = 2 ss: collinear
    wd.push_back(static_cast<double>(i % 7));
    actual.push_back(wd.back());
  }
  CHECK_THROWS(train_mc(ss, sd, wd, actual));
  std::vector<double> tiny(10, 1.0);
  CHECK_THROWS_AS(train_mc(tiny, tiny, tiny, tiny), std::invalid_argument);
}

TEST_CASE("mc is the trained linear combination, mcm the maximum") {
  FaiValue ss, sd, wd;
  ss.value = 3.0;
  sd.value = 5.0;
  wd.value = 4.0;
  CHECK(fai_mcm(ss, sd, wd).value == doctest::Approx(5.0));

  McCoefficients rho{0.2, 0.3, 0.5};
  ss.value = sd.value = wd.value = 2.0;
  CHECK(fai_mc(ss, sd, wd, rho).value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("mcm dominates every input and any sub-convex combination") {
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> u(0.1, 30.0);
  for (int k = 0; k < 300; ++k) {
    FaiValue ss, sd, wd;
    ss.value = u(gen);
    sd.value = u(gen);
    wd.value = u(gen);
    const double mcm = fai_mcm(ss, sd, wd).value;
    CHECK(mcm >= ss.value);
    CHECK(mcm >= sd.value);
    CHECK(mcm >= wd.value);
    McCoefficients rho{0.2, 0.3, 0.5};  // sums to one
    CHECK(mcm >= fai_mc(ss, sd, wd, rho).value - 1e-12);
  }
}
