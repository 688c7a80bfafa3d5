#include "fpfuse/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpfuse {

const SmoothedEpoch* SmoothedTrack::nearest(double t, double tol) const {
  if (epochs.empty()) return nullptr;
  auto it = std::lower_bound(epochs.begin(), epochs.end(), t,
                             [](const SmoothedEpoch& e, double tt) { return e.t < tt; });
  const SmoothedEpoch* best = nullptr;
  double best_dt = tol;
  if (it != epochs.end() && std::abs(it->t - t) <= best_dt) {
    best = &*it;
    best_dt = std::abs(it->t - t);
  }
  if (it != epochs.begin()) {
    auto prev = std::prev(it);
    if (std::abs(prev->t - t) <= best_dt) {
      best = &*prev;
    }
  }
  return best;
}

SmoothedValue smoothed_value(double x_fwd, double sigma_fwd, double x_bwd,
                             double sigma_bwd) {
  if (!(sigma_fwd > 0.0) || !(sigma_bwd > 0.0) ||
      !std::isfinite(sigma_fwd) || !std::isfinite(sigma_bwd)) {
    throw std::invalid_argument("smoothed_value: sigmas must be positive finite");
  }
  const double u_f = 1.0 / (sigma_fwd * sigma_fwd);
  const double u_b = 1.0 / (sigma_bwd * sigma_bwd);
  const double denom = u_f + u_b;
  if (!(denom > 0.0)) {
    throw std::invalid_argument("smoothed_value: zero combined weight");
  }
  SmoothedValue out;
  out.xi = u_f / denom;
  out.x = out.xi * x_fwd + (1.0 - out.xi) * x_bwd;
  out.sigma = std::sqrt(out.xi * out.xi * sigma_fwd * sigma_fwd +
                        (1.0 - out.xi) * (1.0 - out.xi) * sigma_bwd * sigma_bwd);
  return out;
}

SmoothedTrack smooth(const DrTrack& fwd, const DrTrack& bwd, double align_tol) {
  SmoothedTrack out;
  out.epochs.reserve(fwd.epochs.size());
  for (const auto& ef : fwd.epochs) {
    const DrEpoch* eb = bwd.nearest(ef.t, align_tol);
    if (!eb) {
      continue;
    }
    SmoothedEpoch se;
    se.t = ef.t;
    double xi_sum = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      const double sf = std::max(1e-6, ef.sigma_p[axis]);
      const double sb = std::max(1e-6, eb->sigma_p[axis]);
      const SmoothedValue v = smoothed_value(ef.p[axis], sf, eb->p[axis], sb);
      se.p[axis] = v.x;
      se.sigma[axis] = v.sigma;
      xi_sum += v.xi;
    }
    se.xi = 0.5 * xi_sum;
    se.sigma_scalar =
        std::sqrt(0.5 * (se.sigma.x() * se.sigma.x() + se.sigma.y() * se.sigma.y()));
    out.epochs.push_back(se);
  }
  return out;
}

bool segment_qualifies(const Eigen::Vector2d& fwd_end, const AnchorFix& end_anchor,
                       const Eigen::Vector2d& bwd_start, const AnchorFix& start_anchor,
                       double lambda_d, double* fwd_err, double* bwd_err) {
  const double ef = (fwd_end - end_anchor.p).norm();
  const double eb = (bwd_start - start_anchor.p).norm();
  if (fwd_err) *fwd_err = ef;
  if (bwd_err) *bwd_err = eb;
  return ef <= lambda_d && eb <= lambda_d;
}

DrTrack unreverse_track(const DrTrack& rev, double t_end) {
  DrTrack out;
  out.epochs.reserve(rev.epochs.size());
  for (auto it = rev.epochs.rbegin(); it != rev.epochs.rend(); ++it) {
    DrEpoch e = *it;
    e.t = t_end - e.t;
    e.v = -e.v;  // motion direction flips back
    out.epochs.push_back(e);
  }
  return out;
}

std::vector<QualifiedSegment> select_segments(const SensorTrace& trace,
                                              const SegmentSelectionConfig& cfg) {
  std::vector<QualifiedSegment> out;
  if (trace.anchors.size() < 2) {
    return out;  // condition: both ends must be anchored
  }
  for (std::size_t i = 0; i + 1 < trace.anchors.size(); ++i) {
    const AnchorFix& a0 = trace.anchors[i];
    const AnchorFix& a1 = trace.anchors[i + 1];
    if (a1.t - a0.t < cfg.min_duration_s) {
      continue;
    }
    SensorTrace seg = trace.slice(a0.t, a1.t);
    if (seg.imu.size() < 40) {
      continue;
    }

    DrTrack fwd = DrEngine::run_trace(seg, cfg.engine, a0.p, a0.sigma);

    DrEngineConfig bwd_cfg = cfg.engine;
    bwd_cfg.backward = true;
    const SensorTrace rev = reverse_trace(seg);
    DrTrack bwd_rev = DrEngine::run_trace(rev, bwd_cfg, a1.p, a1.sigma);
    DrTrack bwd = unreverse_track(bwd_rev, seg.end_time());

    QualifiedSegment q;
    q.t_start = a0.t;
    q.t_end = a1.t;
    const Eigen::Vector2d fwd_end = fwd.epochs.back().p.head<2>();
    const Eigen::Vector2d bwd_start = bwd.epochs.front().p.head<2>();
    if (!segment_qualifies(fwd_end, a1, bwd_start, a0, cfg.lambda_d_m,
                           &q.fwd_end_error_m, &q.bwd_end_error_m)) {
      continue;
    }
    q.track = smooth(fwd, bwd);
    q.steps = fwd.steps;
    if (!q.track.epochs.empty()) {
      out.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace fpfuse
