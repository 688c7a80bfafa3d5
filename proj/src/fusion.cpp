#include "fpfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "fpfuse/db_builder.hpp"

namespace fpfuse {

const char* to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kDw: return "dw";
    case FusionMode::kDm: return "dm";
    case FusionMode::kDwm: return "dwm";
  }
  return "dwm";
}

FusionMode mode_from_string(const std::string& s) {
  if (s == "dw") return FusionMode::kDw;
  if (s == "dm") return FusionMode::kDm;
  if (s == "dwm") return FusionMode::kDwm;
  throw std::invalid_argument("unknown mode: " + s);
}

std::vector<double> FusionOutput::errors() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) {
    if (std::isfinite(e.err_m)) {
      out.push_back(e.err_m);
    }
  }
  return out;
}

PositionUpdateResult position_update(DrEngine& engine, const Eigen::Vector2d& p_meas,
                                     const FaiValue& fai, bool gate_enabled) {
  if (!(fai.value > 0.0)) {
    throw std::invalid_argument("position_update: FAI value must be positive");
  }
  return engine.mutable_filter().update_position(engine.mutable_nav(), p_meas,
                                                 fai.value, gate_enabled);
}

namespace {

struct WifiAid {
  double t = -1e18;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double accuracy = 0.0;
};

double truth_error(const GroundTruth* truth, double t, const Eigen::Vector2d& p) {
  if (!truth) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (p - truth->position_at(t)).norm();
}

}  // namespace

FusionOutput run_pipeline(const SensorTrace& trace, const FingerprintDatabase* db_wifi,
                          const FingerprintDatabase* db_mag, const PipelineConfig& cfg,
                          const GroundTruth* truth) {
  if (trace.imu.size() < 40) {
    throw std::invalid_argument("run_pipeline: trace too short");
  }
  const bool want_wifi =
      cfg.mode == FusionMode::kDw || cfg.mode == FusionMode::kDwm;
  const bool want_mag =
      cfg.mode == FusionMode::kDm || cfg.mode == FusionMode::kDwm;
  if (want_wifi && (!db_wifi || db_wifi->empty())) {
    throw std::invalid_argument("run_pipeline: wifi database required for this mode");
  }
  if (want_mag && (!db_mag || db_mag->empty())) {
    throw std::invalid_argument("run_pipeline: magnetic database required for this mode");
  }

  FusionOutput out;

  // --- initialization: first WiFi fix, unless a position is injected ---
  Eigen::Vector2d p0;
  double sigma0 = cfg.init_sigma_m;
  double t_init = trace.imu.front().t;
  if (cfg.init_position) {
    p0 = *cfg.init_position;
  } else {
    if (!db_wifi || db_wifi->empty()) {
      throw std::runtime_error("run_pipeline: initialization needs a wifi database");
    }
    bool found = false;
    for (const auto& obs : trace.rss) {
      if (obs.t - trace.imu.front().t > cfg.init_timeout_s) {
        break;
      }
      const FeatureVec q = rss_to_features(obs, cfg.rss_cutoff_dbm);
      if (q.empty()) continue;
      try {
        const MatchResult m = match(q, *db_wifi, cfg.match);
        p0 = m.position;
        sigma0 = cfg.strategy.ct_wifi_m;
        t_init = obs.t;
        found = true;
        break;
      } catch (const EmptyRegionError&) {
        continue;
      }
    }
    if (!found) {
      throw std::runtime_error("run_pipeline: no usable WiFi fix within the "
                               "initialization window");
    }
  }

  // --- alignment window: everything up to the init fix, at least 1 s ---
  const double align_until =
      std::max(trace.imu.front().t + cfg.dr.align_duration_s, t_init);
  std::size_t align_end = 0;
  while (align_end < trace.imu.size() && trace.imu[align_end].t <= align_until) {
    ++align_end;
  }
  align_end = std::clamp<std::size_t>(align_end, 2, trace.imu.size() - 1);

  DrEngine engine(cfg.dr);
  engine.initialize({trace.imu.data(), align_end}, p0, sigma0);

  for (std::size_t i = 0; i < align_end; ++i) {
    FusionEpoch e;
    e.t = trace.imu[i].t;
    e.p = engine.nav().p_n.head<2>();
    e.cov = engine.filter().P().topLeftCorner<2, 2>();
    e.err_m = truth_error(truth, e.t, e.p);
    out.epochs.push_back(e);
  }

  WifiAid wifi_aid;
  std::size_t rss_index = 0;
  while (rss_index < trace.rss.size() && trace.rss[rss_index].t <= trace.imu[align_end - 1].t) {
    ++rss_index;
  }

  std::deque<LeveledMagSample> mag_window;
  int steps_since_mag_match = 0;

  for (std::size_t i = align_end; i < trace.imu.size(); ++i) {
    const ImuSample& imu = trace.imu[i];
    const auto step = engine.process(imu);

    FusionEpoch epoch;
    epoch.t = imu.t;

    // --- WiFi position update at each RSS epoch ---
    while (rss_index < trace.rss.size() && trace.rss[rss_index].t <= imu.t) {
      const RssObservation& obs = trace.rss[rss_index++];
      if (!want_wifi || !db_wifi) {
        continue;
      }
      const FeatureVec q = rss_to_features(obs, cfg.rss_cutoff_dbm);
      if (q.empty()) {
        ++out.skipped_queries;
        continue;
      }
      MatchResult m;
      try {
        m = match(q, *db_wifi, cfg.match);
      } catch (const EmptyRegionError&) {
        ++out.skipped_queries;
        continue;
      }
      FixRecord fix;
      fix.t = obs.t;
      fix.modality = Modality::kWifi;
      fix.fix = m.position;
      fix.err_m = truth_error(truth, obs.t, m.position);
      fix.fai = compute_fai_bundle(q, m, *db_wifi, cfg.fai, cfg.rho,
                                   cfg.strategy.ct_wifi_m);
      FaiValue eta;
      eta.value = fix.fai.by_strategy(cfg.strategy.strategy);
      eta.strategy = cfg.strategy.strategy;
      eta.modality = Modality::kWifi;
      fix.eta_used_m = eta.value;
      const PositionUpdateResult res =
          position_update(engine, m.position, eta, cfg.innovation_gate);
      fix.applied = res.applied;
      fix.gated = res.gated;
      if (res.applied) {
        ++out.wifi_updates;
        epoch.eta_wifi = eta.value;
      } else if (res.gated) {
        ++out.gated_updates;
      }
      wifi_aid.t = obs.t;
      wifi_aid.p = m.position;
      wifi_aid.accuracy = eta.value;
      out.fixes.push_back(fix);
    }

    // --- magnetic profile bookkeeping and update at step events ---
    if (step && want_mag && db_mag) {
      LeveledMagSample ls;
      ls.mag = imu.mag;
      const EulerRpy rp = level_from_accel(imu.accel);
      ls.roll = rp.roll;
      ls.pitch = rp.pitch;
      mag_window.push_back(ls);
      while (mag_window.size() > cfg.profile_window_steps) {
        mag_window.pop_front();
      }
      ++steps_since_mag_match;
      if (mag_window.size() == cfg.profile_window_steps &&
          steps_since_mag_match >= cfg.mag_match_stride_steps) {
        steps_since_mag_match = 0;
        std::vector<LeveledMagSample> window(mag_window.begin(), mag_window.end());
        const MagneticProfile prof =
            extract_magnetic_profile(window, cfg.profile_window_steps);
        const FeatureVec q = prof.to_features();

        // Search circle: recent wireless fix if we have one, otherwise the
        // filter's own position uncertainty.
        Eigen::Vector2d center;
        double accuracy;
        if (want_wifi && imu.t - wifi_aid.t <= cfg.wifi_aid_timeout_s) {
          center = wifi_aid.p;
          accuracy = std::max(1.0, wifi_aid.accuracy);
        } else {
          center = engine.nav().p_n.head<2>();
          const auto& P = engine.filter().P();
          accuracy = std::clamp(std::sqrt(0.5 * (P(0, 0) + P(1, 1))), 2.0, 50.0);
        }
        MatchResult m;
        try {
          m = match_magnetic_constrained(q, *db_mag, center, accuracy, cfg.match);
        } catch (const EmptyRegionError&) {
          ++out.skipped_queries;
          m.selected.clear();
        }
        if (!m.selected.empty()) {
          FixRecord fix;
          fix.t = imu.t;
          fix.modality = Modality::kMagnetic;
          fix.fix = m.position;
          fix.err_m = truth_error(truth, imu.t, m.position);
          fix.region_fallback = m.region_fallback;
          fix.fai = compute_fai_bundle(q, m, *db_mag, cfg.fai, cfg.rho,
                                       cfg.strategy.ct_mag_m);
          FaiValue eta;
          eta.value = fix.fai.by_strategy(cfg.strategy.strategy);
          eta.strategy = cfg.strategy.strategy;
          eta.modality = Modality::kMagnetic;
          fix.eta_used_m = eta.value;
          const PositionUpdateResult res =
              position_update(engine, m.position, eta, cfg.innovation_gate);
          fix.applied = res.applied;
          fix.gated = res.gated;
          if (res.applied) {
            ++out.mag_updates;
            epoch.eta_mag = eta.value;
          } else if (res.gated) {
            ++out.gated_updates;
          }
          if (m.region_fallback) {
            ++out.mag_region_fallbacks;
          }
          out.fixes.push_back(fix);
        }
      }
    }

    epoch.p = engine.nav().p_n.head<2>();
    epoch.cov = engine.filter().P().topLeftCorner<2, 2>();
    epoch.err_m = truth_error(truth, epoch.t, epoch.p);
    out.epochs.push_back(epoch);
  }
  return out;
}

}  // namespace fpfuse
