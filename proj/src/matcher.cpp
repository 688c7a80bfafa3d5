#include "fpfuse/matcher.hpp"

#include <algorithm>
#include <cmath>

namespace fpfuse {

double feature_log_likelihood(const FeatureVec& q, const Fingerprint& fp,
                              double log_floor, int* shared, bool* all_floored) {
  double ll = 0.0;
  int n = 0;
  bool floored_all = true;
  auto qi = q.begin();
  auto fi = fp.features.begin();
  while (qi != q.end() && fi != fp.features.end()) {
    if (qi->first < fi->first) {
      ++qi;
    } else if (fi->first < qi->first) {
      ++fi;
    } else {
      const FeatureStat& st = fi->second;
      const double var = std::max(1e-12, st.var);
      const double d = qi->second - st.mean;
      double term = -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
      if (term > log_floor) {
        floored_all = false;
      } else {
        term = log_floor;
      }
      ll += term;
      ++n;
      ++qi;
      ++fi;
    }
  }
  if (shared) *shared = n;
  if (all_floored) *all_floored = (n == 0) || floored_all;
  return n == 0 ? -std::numeric_limits<double>::infinity() : ll;
}

double likelihood(const FeatureVec& q, const Fingerprint& fp, double log_floor) {
  int shared = 0;
  const double ll = feature_log_likelihood(q, fp, log_floor, &shared);
  if (shared == 0) {
    return 0.0;  // no overlap sentinel
  }
  return std::exp(ll);
}

MatchResult match(const FeatureVec& q, const FingerprintDatabase& db,
                  const MatchParams& params,
                  const std::optional<SearchCircle>& region) {
  if (db.empty()) {
    throw std::invalid_argument("match: empty database");
  }
  if (params.kappa < 1) {
    throw std::invalid_argument("match: kappa must be >= 1");
  }
  const auto& fps = db.fingerprints();
  const int min_shared = db.modality() == Modality::kWifi ? params.min_shared_wifi : 1;

  std::vector<MatchEntry> scored;
  scored.reserve(fps.size());
  for (std::size_t i = 0; i < fps.size(); ++i) {
    if (region && (fps[i].rp - region->center).norm() > region->radius) {
      continue;
    }
    int shared = 0;
    bool all_floored = false;
    const double ll =
        feature_log_likelihood(q, fps[i], params.log_floor, &shared, &all_floored);
    if (shared < min_shared) {
      continue;
    }
    MatchEntry e;
    e.index = i;
    e.log_likelihood = ll;
    e.all_floored = all_floored;
    scored.push_back(e);
  }
  if (scored.empty()) {
    throw EmptyRegionError(region ? "match: no fingerprints in search region"
                                  : "match: no scorable fingerprints");
  }

  // Deterministic ranking: likelihood first, then the smaller cell index.
  std::sort(scored.begin(), scored.end(), [&](const MatchEntry& a, const MatchEntry& b) {
    if (a.log_likelihood != b.log_likelihood) {
      return a.log_likelihood > b.log_likelihood;
    }
    return cell_less(fps[a.index].cell, fps[b.index].cell);
  });
  const std::size_t k = std::min<std::size_t>(scored.size(),
                                              static_cast<std::size_t>(params.kappa));
  scored.resize(k);

  // Stable normalization: scale by the best likelihood before exponentiating.
  const double ll_max = scored.front().log_likelihood;
  double zeta_sum = 0.0;
  bool every_floored = true;
  for (auto& e : scored) {
    e.zeta = std::exp(e.log_likelihood - ll_max);
    zeta_sum += e.zeta;
    every_floored = every_floored && e.all_floored;
  }

  MatchResult res;
  res.modality = db.modality();
  res.selected = std::move(scored);
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  if (every_floored) {
    // Nothing discriminates; average the selected locations evenly.
    for (const auto& e : res.selected) {
      p += fps[e.index].rp;
    }
    p /= static_cast<double>(res.selected.size());
  } else {
    for (const auto& e : res.selected) {
      p += e.zeta * fps[e.index].rp;
    }
    p /= zeta_sum;
  }
  res.position = p;
  return res;
}

MatchResult match_magnetic_constrained(const FeatureVec& profile_features,
                                       const FingerprintDatabase& db_mag,
                                       const Eigen::Vector2d& wifi_pos,
                                       double wifi_accuracy_m,
                                       const MatchParams& params) {
  if (!(wifi_accuracy_m > 0.0)) {
    throw std::invalid_argument("match_magnetic_constrained: accuracy must be > 0");
  }
  SearchCircle circle{wifi_pos, 3.0 * wifi_accuracy_m};
  try {
    return match(profile_features, db_mag, params, circle);
  } catch (const EmptyRegionError&) {
    MatchResult res = match(profile_features, db_mag, params);
    res.region_fallback = true;
    return res;
  }
}

}  // namespace fpfuse
