#include "fpfuse/fai.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpfuse {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kCt: return "ct";
    case Strategy::kSs: return "ss";
    case Strategy::kSd: return "sd";
    case Strategy::kWd: return "wd";
    case Strategy::kMc: return "mc";
    case Strategy::kMcm: return "mcm";
  }
  return "ct";
}

Strategy strategy_from_string(const std::string& s) {
  for (Strategy st : kAllStrategies) {
    if (s == to_string(st)) return st;
  }
  throw std::invalid_argument("unknown strategy: " + s);
}

namespace {

FaiValue sentinel_value(Strategy s, Modality m, const FaiConfig& cfg) {
  FaiValue v;
  v.value = cfg.sentinel_m;
  v.strategy = s;
  v.modality = m;
  v.sentinel = true;
  return v;
}

}  // namespace

FaiValue fai_ss_wifi(const FeatureVec& query,
                     const std::map<std::string, ApEstimate>& ap_registry,
                     const FaiConfig& cfg) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [ap_id, rssi] : query) {
    auto it = ap_registry.find(ap_id);
    if (it == ap_registry.end()) {
      continue;
    }
    const ApEstimate& ap = it->second;
    // Estimated device-AP distance from the inverted path-loss model; a
    // weaker reading means a farther AP and a larger predicted error.
    const double c = std::pow(10.0, (ap.beta2 - rssi) / (10.0 * ap.beta1));
    sum += c;
    ++n;
  }
  if (n == 0) {
    return sentinel_value(Strategy::kSs, Modality::kWifi, cfg);
  }
  FaiValue v;
  v.value = cfg.alpha_ss_wifi * sum / n;
  v.strategy = Strategy::kSs;
  v.modality = Modality::kWifi;
  return v;
}

FaiValue fai_ss_mag(const FeatureVec& profile_features, const FaiConfig& cfg) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [name, value] : profile_features) {
    const double m = std::abs(value);
    if (m <= 0.0) {
      continue;  // zero gradients carry no signal-strength information
    }
    sum += 1.0 / m;
    ++n;
  }
  if (n == 0) {
    return sentinel_value(Strategy::kSs, Modality::kMagnetic, cfg);
  }
  FaiValue v;
  v.value = cfg.alpha_ss_mag * sum / n;
  v.strategy = Strategy::kSs;
  v.modality = Modality::kMagnetic;
  return v;
}

double dop_from_rows(const Eigen::MatrixX2d& rows, bool* singular) {
  if (singular) *singular = false;
  if (rows.rows() < 2) {
    if (singular) *singular = true;
    return 0.0;
  }
  const Eigen::Matrix2d normal = rows.transpose() * rows;
  const double det = normal.determinant();
  if (!(det > 1e-9 * std::max(1.0, normal.trace() * normal.trace()))) {
    if (singular) *singular = true;
    return 0.0;
  }
  const Eigen::Matrix2d m = normal.inverse();
  return std::sqrt(m(0, 0) + m(1, 1));
}

FaiValue fai_sd_wifi(const Eigen::Vector2d& device_p,
                     std::span<const Eigen::Vector2d> ap_positions,
                     const FaiConfig& cfg) {
  Eigen::MatrixX2d rows(static_cast<Eigen::Index>(ap_positions.size()), 2);
  Eigen::Index n = 0;
  for (const auto& ap : ap_positions) {
    const Eigen::Vector2d d = device_p - ap;
    const double dist = d.norm();
    if (dist < 1e-6) {
      continue;
    }
    rows.row(n++) = (d / dist).transpose();
  }
  rows.conservativeResize(n, 2);
  bool singular = false;
  const double dop = dop_from_rows(rows, &singular);
  if (singular) {
    return sentinel_value(Strategy::kSd, Modality::kWifi, cfg);
  }
  FaiValue v;
  v.value = cfg.alpha_sd_wifi * dop;
  v.strategy = Strategy::kSd;
  v.modality = Modality::kWifi;
  return v;
}

FaiValue fai_sd_mag(const FeatureVec& profile_features, const FaiConfig& cfg) {
  // Pair up h/v components by their feature index.
  std::map<std::string, std::pair<double, double>> pairs;
  for (const auto& [name, value] : profile_features) {
    if (name.size() < 2) continue;
    const std::string idx = name.substr(1);
    if (name[0] == 'h') {
      pairs[idx].first = value;
    } else if (name[0] == 'v') {
      pairs[idx].second = value;
    }
  }
  Eigen::MatrixX2d rows(static_cast<Eigen::Index>(pairs.size()), 2);
  Eigen::Index n = 0;
  for (const auto& [idx, hv] : pairs) {
    const double norm = std::hypot(hv.first, hv.second);
    if (norm < 1e-12) {
      continue;
    }
    rows.row(n++) = Eigen::RowVector2d(hv.first / norm, hv.second / norm);
  }
  rows.conservativeResize(n, 2);
  bool singular = false;
  const double dop = dop_from_rows(rows, &singular);
  if (singular) {
    return sentinel_value(Strategy::kSd, Modality::kMagnetic, cfg);
  }
  FaiValue v;
  v.value = cfg.alpha_sd_mag * dop;
  v.strategy = Strategy::kSd;
  v.modality = Modality::kMagnetic;
  return v;
}

double dsf_for(const FingerprintDatabase& db, std::size_t index, int kappa_d,
               double log_floor) {
  const auto& fps = db.fingerprints();
  if (fps.size() < 2 || kappa_d < 1) {
    return 0.0;
  }
  const Fingerprint& self = fps[index];
  FeatureVec means;
  for (const auto& [name, st] : self.features) {
    means[name] = st.mean;
  }
  struct Peer {
    std::size_t idx;
    double ll;
  };
  std::vector<Peer> peers;
  peers.reserve(fps.size() - 1);
  const int min_shared = db.modality() == Modality::kWifi ? 3 : 1;
  for (std::size_t k = 0; k < fps.size(); ++k) {
    if (k == index) continue;
    int shared = 0;
    // Similarity of peer k to this fingerprint: peer means scored under this
    // fingerprint's Gaussians.
    FeatureVec peer_means;
    for (const auto& [name, st] : fps[k].features) {
      peer_means[name] = st.mean;
    }
    const double ll = feature_log_likelihood(peer_means, self, log_floor, &shared);
    if (shared < min_shared) {
      continue;
    }
    peers.push_back({k, ll});
  }
  if (peers.empty()) {
    return 0.0;
  }
  std::sort(peers.begin(), peers.end(), [&](const Peer& a, const Peer& b) {
    if (a.ll != b.ll) return a.ll > b.ll;
    return cell_less(fps[a.idx].cell, fps[b.idx].cell);
  });
  const std::size_t k_use = std::min<std::size_t>(peers.size(),
                                                  static_cast<std::size_t>(kappa_d));
  double dist_sum = 0.0;
  for (std::size_t k = 0; k < k_use; ++k) {
    dist_sum += (fps[peers[k].idx].rp - self.rp).norm();
  }
  return dist_sum / static_cast<double>(k_use);
}

void compute_dsf(FingerprintDatabase& db, int kappa_d, double log_floor) {
  auto& fps = db.mutable_fingerprints();
  for (std::size_t i = 0; i < fps.size(); ++i) {
    fps[i].dsf = dsf_for(db, i, kappa_d, log_floor);
  }
}

FaiValue fai_wd(const MatchResult& match, const FingerprintDatabase& db,
                const FaiConfig& cfg) {
  if (match.selected.empty()) {
    return sentinel_value(Strategy::kWd, match.modality, cfg);
  }
  const auto& fps = db.fingerprints();
  bool every_floored = true;
  double wsum = 0.0;
  double acc = 0.0;
  for (const auto& e : match.selected) {
    every_floored = every_floored && e.all_floored;
    wsum += e.zeta;
    acc += e.zeta * fps[e.index].dsf;
  }
  FaiValue v;
  v.strategy = Strategy::kWd;
  v.modality = match.modality;
  if (every_floored || wsum <= 0.0) {
    double sum = 0.0;
    for (const auto& e : match.selected) {
      sum += fps[e.index].dsf;
    }
    v.value = sum / static_cast<double>(match.selected.size());
  } else {
    v.value = acc / wsum;
  }
  if (!(v.value > 0.0)) {
    // Databases whose DSF cache was never filled fall back to the sentinel.
    return sentinel_value(Strategy::kWd, match.modality, cfg);
  }
  return v;
}

FaiValue inject_rp_uncertainty(FaiValue fai, double sigma_sm) {
  if (sigma_sm < 0.0) {
    throw std::invalid_argument("inject_rp_uncertainty: negative sigma");
  }
  fai.value = std::sqrt(fai.value * fai.value + sigma_sm * sigma_sm);
  return fai;
}

McCoefficients train_mc(std::span<const double> ss, std::span<const double> sd,
                        std::span<const double> wd, std::span<const double> actual) {
  const std::size_t n = actual.size();
  if (ss.size() != n || sd.size() != n || wd.size() != n) {
    throw std::invalid_argument("train_mc: series lengths differ");
  }
  if (n < 30) {
    throw std::invalid_argument("train_mc: need at least 30 aligned epochs");
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = ss[i];
    X(static_cast<Eigen::Index>(i), 1) = sd[i];
    X(static_cast<Eigen::Index>(i), 2) = wd[i];
    y(static_cast<Eigen::Index>(i)) = actual[i];
  }

  std::array<bool, 3> active = {true, true, true};
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  for (int pass = 0; pass < 4; ++pass) {
    std::vector<int> idx;
    for (int j = 0; j < 3; ++j) {
      if (active[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    if (idx.empty()) {
      break;
    }
    Eigen::MatrixXd Xa(X.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Xa.col(static_cast<Eigen::Index>(j)) = X.col(idx[j]);
    }
    const Eigen::MatrixXd normal = Xa.transpose() * Xa;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    lu.setThreshold(1e-10);
    if (lu.rank() < normal.rows()) {
      throw std::runtime_error("train_mc: rank-deficient regressors");
    }
    const Eigen::VectorXd beta = lu.solve(Xa.transpose() * y);
    bool clamped = false;
    rho.setZero();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double b = beta(static_cast<Eigen::Index>(j));
      if (b < 0.0) {
        active[static_cast<std::size_t>(idx[j])] = false;
        clamped = true;
      } else {
        rho(idx[j]) = b;
      }
    }
    if (!clamped) {
      break;
    }
  }
  McCoefficients out;
  out.rho_ss = rho(0);
  out.rho_sd = rho(1);
  out.rho_wd = rho(2);
  return out;
}

FaiValue fai_mc(const FaiValue& ss, const FaiValue& sd, const FaiValue& wd,
                const McCoefficients& rho) {
  FaiValue v;
  v.strategy = Strategy::kMc;
  v.modality = ss.modality;
  v.value = rho.rho_ss * ss.value + rho.rho_sd * sd.value + rho.rho_wd * wd.value;
  v.sentinel = ss.sentinel && sd.sentinel && wd.sentinel;
  return v;
}

FaiValue fai_mcm(const FaiValue& ss, const FaiValue& sd, const FaiValue& wd) {
  FaiValue v;
  v.strategy = Strategy::kMcm;
  v.modality = ss.modality;
  v.value = std::max({ss.value, sd.value, wd.value});
  v.sentinel = ss.sentinel || sd.sentinel || wd.sentinel;
  return v;
}

double FaiBundle::by_strategy(Strategy s) const {
  switch (s) {
    case Strategy::kCt: return ct;
    case Strategy::kSs: return ss;
    case Strategy::kSd: return sd;
    case Strategy::kWd: return wd;
    case Strategy::kMc: return mc;
    case Strategy::kMcm: return mcm;
  }
  return ct;
}

FaiBundle compute_fai_bundle(const FeatureVec& query, const MatchResult& match,
                             const FingerprintDatabase& db, const FaiConfig& cfg,
                             const McCoefficients& rho, double ct_value) {
  FaiValue ss;
  FaiValue sd;
  if (db.modality() == Modality::kWifi) {
    ss = fai_ss_wifi(query, db.ap_registry(), cfg);
    std::vector<Eigen::Vector2d> ap_positions;
    for (const auto& [ap_id, rssi] : query) {
      auto it = db.ap_registry().find(ap_id);
      if (it != db.ap_registry().end()) {
        ap_positions.push_back(it->second.position());
      }
    }
    sd = fai_sd_wifi(match.position, ap_positions, cfg);
  } else {
    ss = fai_ss_mag(query, cfg);
    sd = fai_sd_mag(query, cfg);
  }
  FaiValue wd = fai_wd(match, db, cfg);

  // The crowdsourced RP uncertainty of the matched cells rides on every FAI.
  double sigma_sq = 0.0;
  double wsum = 0.0;
  for (const auto& e : match.selected) {
    const double s = db.fingerprints()[e.index].rp_sigma;
    sigma_sq += e.zeta * s * s;
    wsum += e.zeta;
  }
  const double sigma_sm = wsum > 0.0 ? std::sqrt(sigma_sq / wsum) : 0.0;
  ss = inject_rp_uncertainty(ss, sigma_sm);
  sd = inject_rp_uncertainty(sd, sigma_sm);
  wd = inject_rp_uncertainty(wd, sigma_sm);

  FaiBundle b;
  b.ct = ct_value;
  b.ss = ss.value;
  b.sd = sd.value;
  b.wd = wd.value;
  b.mc = fai_mc(ss, sd, wd, rho).value;
  b.mcm = fai_mcm(ss, sd, wd).value;
  return b;
}

}  // namespace fpfuse
