#include "fpfuse/trace.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace fpfuse {

using nlohmann::json;

double SensorTrace::start_time() const {
  double t = std::numeric_limits<double>::infinity();
  if (!imu.empty()) t = std::min(t, imu.front().t);
  if (!rss.empty()) t = std::min(t, rss.front().t);
  if (!anchors.empty()) t = std::min(t, anchors.front().t);
  return std::isfinite(t) ? t : 0.0;
}

double SensorTrace::end_time() const {
  double t = -std::numeric_limits<double>::infinity();
  if (!imu.empty()) t = std::max(t, imu.back().t);
  if (!rss.empty()) t = std::max(t, rss.back().t);
  if (!anchors.empty()) t = std::max(t, anchors.back().t);
  return std::isfinite(t) ? t : 0.0;
}

SensorTrace SensorTrace::slice(double t0, double t1) const {
  SensorTrace out;
  for (const auto& s : imu) {
    if (s.t >= t0 && s.t <= t1) out.imu.push_back(s);
  }
  for (const auto& s : rss) {
    if (s.t >= t0 && s.t <= t1) out.rss.push_back(s);
  }
  for (const auto& s : anchors) {
    if (s.t >= t0 && s.t <= t1) out.anchors.push_back(s);
  }
  return out;
}

namespace {

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d json_to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw std::runtime_error("trace: expected 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void SensorTrace::save_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("trace: cannot open for writing: " + path.string());
  }
  // Events are written time-ordered across streams so the file is appendable.
  std::size_t ii = 0;
  std::size_t ir = 0;
  std::size_t ia = 0;
  auto next_time = [&]() {
    double t = std::numeric_limits<double>::infinity();
    int which = -1;
    if (ii < imu.size() && imu[ii].t < t) { t = imu[ii].t; which = 0; }
    if (ir < rss.size() && rss[ir].t < t) { t = rss[ir].t; which = 1; }
    if (ia < anchors.size() && anchors[ia].t < t) { t = anchors[ia].t; which = 2; }
    return which;
  };
  for (int which = next_time(); which >= 0; which = next_time()) {
    if (which == 0) {
      const auto& s = imu[ii++];
      json jimu{{"t", s.t}, {"kind", "imu"}, {"gyro", vec3_to_json(s.gyro)},
                {"accel", vec3_to_json(s.accel)}};
      out << jimu.dump() << '\n';
      json jmag{{"t", s.t}, {"kind", "mag"}, {"mag", vec3_to_json(s.mag)}};
      out << jmag.dump() << '\n';
    } else if (which == 1) {
      const auto& s = rss[ir++];
      json readings = json::array();
      for (const auto& r : s.readings) {
        readings.push_back(json::array({r.ap_id, r.rssi}));
      }
      json j{{"t", s.t}, {"kind", "rss"}, {"readings", readings}};
      out << j.dump() << '\n';
    } else {
      const auto& s = anchors[ia++];
      json j{{"t", s.t}, {"kind", "anchor"}, {"p", json::array({s.p.x(), s.p.y()})},
             {"sigma", s.sigma}};
      out << j.dump() << '\n';
    }
  }
}

SensorTrace SensorTrace::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("trace: cannot open: " + path.string());
  }
  SensorTrace trace;
  std::vector<std::pair<double, Eigen::Vector3d>> mags;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string kind = j.at("kind").get<std::string>();
    const double t = j.at("t").get<double>();
    if (kind == "imu") {
      ImuSample s;
      s.t = t;
      s.gyro = json_to_vec3(j.at("gyro"));
      s.accel = json_to_vec3(j.at("accel"));
      if (!trace.imu.empty() && s.t <= trace.imu.back().t) {
        throw std::runtime_error("trace: non-increasing imu timestamps at line " +
                                 std::to_string(lineno));
      }
      trace.imu.push_back(s);
    } else if (kind == "mag") {
      mags.emplace_back(t, json_to_vec3(j.at("mag")));
    } else if (kind == "rss") {
      RssObservation s;
      s.t = t;
      for (const auto& r : j.at("readings")) {
        RssReading rr;
        rr.ap_id = r[0].get<std::string>();
        rr.rssi = std::clamp(r[1].get<double>(), -100.0, 0.0);
        s.readings.push_back(std::move(rr));
      }
      trace.rss.push_back(std::move(s));
    } else if (kind == "anchor") {
      AnchorFix a;
      a.t = t;
      a.p << j.at("p")[0].get<double>(), j.at("p")[1].get<double>();
      a.sigma = j.at("sigma").get<double>();
      if (a.sigma <= 0.0) {
        throw std::runtime_error("trace: anchor sigma must be > 0");
      }
      trace.anchors.push_back(a);
    } else {
      throw std::runtime_error("trace: unknown record kind '" + kind + "'");
    }
  }
  // Merge magnetometer records into the IMU stream by nearest timestamp.
  std::size_t im = 0;
  Eigen::Vector3d last_mag = Eigen::Vector3d::Zero();
  for (auto& s : trace.imu) {
    while (im + 1 < mags.size() &&
           std::abs(mags[im + 1].first - s.t) <= std::abs(mags[im].first - s.t)) {
      ++im;
    }
    if (im < mags.size() && std::abs(mags[im].first - s.t) <= 0.05) {
      last_mag = mags[im].second;
    }
    s.mag = last_mag;
  }
  return trace;
}

SensorTrace reverse_trace(const SensorTrace& trace) {
  const double t_end = trace.end_time();
  SensorTrace out;
  out.imu.reserve(trace.imu.size());
  for (auto it = trace.imu.rbegin(); it != trace.imu.rend(); ++it) {
    ImuSample s = *it;
    s.t = t_end - s.t;
    s.gyro = -s.gyro;
    out.imu.push_back(s);
  }
  out.rss.reserve(trace.rss.size());
  for (auto it = trace.rss.rbegin(); it != trace.rss.rend(); ++it) {
    RssObservation s = *it;
    s.t = t_end - s.t;
    out.rss.push_back(std::move(s));
  }
  out.anchors.reserve(trace.anchors.size());
  for (auto it = trace.anchors.rbegin(); it != trace.anchors.rend(); ++it) {
    AnchorFix a = *it;
    a.t = t_end - a.t;
    out.anchors.push_back(a);
  }
  return out;
}

}  // namespace fpfuse
