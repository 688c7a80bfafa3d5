#include "fpfuse/db_builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "fpfuse/math.hpp"

namespace fpfuse {

namespace {

std::string feature_name(char prefix, std::size_t j) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%c%02zu", prefix, j);
  return buf;
}

}  // namespace

std::map<std::string, double> MagneticProfile::to_features() const {
  std::map<std::string, double> f;
  for (std::size_t j = 0; j < horizontal.size(); ++j) {
    f[feature_name('h', j)] = horizontal[j];
  }
  for (std::size_t j = 0; j < vertical.size(); ++j) {
    f[feature_name('v', j)] = vertical[j];
  }
  return f;
}

MagneticProfile extract_magnetic_profile(std::span<const LeveledMagSample> window,
                                         std::size_t window_steps) {
  if (window.size() < window_steps || window_steps < 2) {
    throw std::invalid_argument("extract_magnetic_profile: window too short");
  }
  MagneticProfile prof;
  prof.horizontal.reserve(window_steps);
  prof.vertical.reserve(window_steps);
  double h0 = 0.0;
  double v0 = 0.0;
  for (std::size_t j = 0; j < window_steps; ++j) {
    const auto& s = window[j];
    const Eigen::Vector3d m_lev = euler_to_dcm(s.roll, s.pitch, 0.0) * s.mag;
    const double h = m_lev.head<2>().norm();
    const double v = m_lev.z();
    if (j == 0) {
      h0 = h;
      v0 = v;
    }
    prof.horizontal.push_back(h - h0);
    prof.vertical.push_back(v - v0);
  }
  return prof;
}

std::map<std::string, double> rss_to_features(const RssObservation& obs,
                                              double cutoff_dbm) {
  std::map<std::string, double> f;
  for (const auto& r : obs.readings) {
    if (r.rssi >= cutoff_dbm) {
      f[r.ap_id] = r.rssi;
    }
  }
  return f;
}

FingerprintDatabase build_database(std::span<const FeatureSample> samples,
                                   const DatabaseBuildParams& params,
                                   Modality modality) {
  if (!(params.grid.cell_len > 0.0) || params.lambda_n1 > params.lambda_n2) {
    throw std::invalid_argument("build_database: bad parameters");
  }
  struct CellAccum {
    int count = 0;
    Eigen::Vector2d rp_sum = Eigen::Vector2d::Zero();
    double sigma_sq_sum = 0.0;
    std::map<std::string, std::vector<double>> values;
  };
  std::map<std::pair<int, int>, CellAccum> cells;
  for (const auto& s : samples) {
    const Eigen::Vector2i c = params.grid.cell_of(s.p);
    CellAccum& acc = cells[{c.x(), c.y()}];
    ++acc.count;
    acc.rp_sum += s.p;
    acc.sigma_sq_sum += s.sigma_sm * s.sigma_sm;
    for (const auto& [name, value] : s.features) {
      acc.values[name].push_back(value);
    }
  }

  const double default_var =
      modality == Modality::kWifi ? params.default_var_rss : params.default_var_mag;
  const double min_var =
      modality == Modality::kWifi ? params.min_var_rss : params.min_var_mag;

  FingerprintDatabase db(params.grid, modality);
  for (const auto& [key, acc] : cells) {
    if (acc.count < params.lambda_n1) {
      continue;
    }
    Fingerprint fp;
    fp.cell << key.first, key.second;
    fp.rp = acc.rp_sum / acc.count;
    fp.rp_sigma = std::sqrt(acc.sigma_sq_sum / acc.count);
    fp.sample_count = acc.count;
    for (const auto& [name, values] : acc.values) {
      FeatureStat st;
      st.count = static_cast<int>(values.size());
      double sum = 0.0;
      for (double v : values) sum += v;
      st.mean = sum / static_cast<double>(values.size());
      if (st.count < params.lambda_n2) {
        st.var = default_var;
      } else {
        double ss = 0.0;
        for (double v : values) {
          ss += (v - st.mean) * (v - st.mean);
        }
        st.var = std::max(min_var, ss / static_cast<double>(values.size()));
      }
      fp.features[name] = st;
    }
    if (!fp.features.empty()) {
      db.add(std::move(fp));
    }
  }
  return db;
}

std::vector<FeatureSample> wifi_samples_from_segment(const SensorTrace& trace,
                                                     const QualifiedSegment& segment,
                                                     double rss_cutoff_dbm) {
  std::vector<FeatureSample> out;
  for (const auto& obs : trace.rss) {
    if (obs.t < segment.t_start || obs.t > segment.t_end) {
      continue;
    }
    const SmoothedEpoch* e = segment.track.nearest(obs.t, 0.15);
    if (!e) {
      continue;
    }
    FeatureSample s;
    s.p = e->p;
    s.sigma_sm = e->sigma_scalar;
    s.features = rss_to_features(obs, rss_cutoff_dbm);
    if (!s.features.empty()) {
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<FeatureSample> mag_samples_from_segment(const SensorTrace& trace,
                                                    const QualifiedSegment& segment,
                                                    std::size_t window_steps) {
  std::vector<FeatureSample> out;
  if (segment.steps.size() < window_steps) {
    return out;
  }
  // One leveled magnetometer value per step event.
  std::vector<LeveledMagSample> per_step;
  std::vector<double> step_times;
  std::size_t ii = 0;
  for (const auto& st : segment.steps) {
    while (ii + 1 < trace.imu.size() && trace.imu[ii].t < st.t) {
      ++ii;
    }
    if (ii >= trace.imu.size()) break;
    const ImuSample& imu = trace.imu[ii];
    LeveledMagSample ls;
    ls.mag = imu.mag;
    const EulerRpy rp = level_from_accel(imu.accel);
    ls.roll = rp.roll;
    ls.pitch = rp.pitch;
    per_step.push_back(ls);
    step_times.push_back(st.t);
  }
  for (std::size_t end = window_steps; end <= per_step.size(); ++end) {
    const std::size_t begin = end - window_steps;
    const SmoothedEpoch* e = segment.track.nearest(step_times[end - 1], 0.3);
    if (!e) {
      continue;
    }
    MagneticProfile prof = extract_magnetic_profile(
        std::span<const LeveledMagSample>(per_step.data() + begin, window_steps),
        window_steps);
    FeatureSample s;
    s.p = e->p;
    s.sigma_sm = e->sigma_scalar;
    s.features = prof.to_features();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fpfuse
