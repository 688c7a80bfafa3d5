#include "fpfuse/fingerprint_db.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fpfuse/ioutil.hpp"

namespace fpfuse {

using nlohmann::json;

const char* to_string(Modality m) {
  return m == Modality::kWifi ? "wifi" : "magnetic";
}

Modality modality_from_string(const std::string& s) {
  if (s == "wifi") return Modality::kWifi;
  if (s == "magnetic") return Modality::kMagnetic;
  throw std::runtime_error("unknown modality: " + s);
}

Eigen::Vector2i GridSpec::cell_of(const Eigen::Vector2d& p) const {
  return {static_cast<int>(std::floor((p.x() - origin.x()) / cell_len)),
          static_cast<int>(std::floor((p.y() - origin.y()) / cell_len))};
}

Eigen::Vector2d GridSpec::cell_center(const Eigen::Vector2i& c) const {
  return origin + cell_len * (c.cast<double>() + Eigen::Vector2d::Constant(0.5));
}

void FingerprintDatabase::add(Fingerprint fp) {
  auto it = std::lower_bound(fps_.begin(), fps_.end(), fp,
                             [](const Fingerprint& a, const Fingerprint& b) {
                               return cell_less(a.cell, b.cell);
                             });
  if (it != fps_.end() && it->cell == fp.cell) {
    throw std::invalid_argument("FingerprintDatabase: duplicate cell index");
  }
  fps_.insert(it, std::move(fp));
}

std::vector<std::size_t> FingerprintDatabase::in_circle(const Eigen::Vector2d& center,
                                                        double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < fps_.size(); ++i) {
    if ((fps_[i].rp - center).squaredNorm() <= r2) {
      out.push_back(i);
    }
  }
  return out;
}

std::string FingerprintDatabase::to_json_string() const {
  json j;
  j["format"] = "fpfuse-db-1";
  j["modality"] = to_string(modality_);
  j["grid"] = {{"origin", {grid_.origin.x(), grid_.origin.y()}},
               {"cell_len", grid_.cell_len}};
  json cells = json::array();
  for (const auto& fp : fps_) {
    json feats = json::object();
    for (const auto& [name, st] : fp.features) {
      feats[name] = {{"mean", st.mean}, {"var", st.var}, {"count", st.count}};
    }
    cells.push_back({{"cell", {fp.cell.x(), fp.cell.y()}},
                     {"rp", {fp.rp.x(), fp.rp.y()}},
                     {"rp_sigma", fp.rp_sigma},
                     {"count", fp.sample_count},
                     {"dsf", fp.dsf},
                     {"features", feats}});
  }
  j["cells"] = cells;
  json aps = json::object();
  for (const auto& [id, ap] : aps_) {
    json cov = json::array();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        cov.push_back(ap.cov(r, c));
      }
    }
    aps[id] = {{"x", ap.x}, {"y", ap.y}, {"beta1", ap.beta1}, {"beta2", ap.beta2},
               {"cov", cov}};
  }
  j["aps"] = aps;
  return j.dump(1) + "\n";
}

void FingerprintDatabase::save_json(const std::filesystem::path& path) const {
  atomic_write_file(path, to_json_string());
}

FingerprintDatabase FingerprintDatabase::load_json(const std::filesystem::path& path) {
  json j = json::parse(read_file(path));
  if (j.value("format", "") != "fpfuse-db-1") {
    throw std::runtime_error("unsupported database format in " + path.string());
  }
  GridSpec grid;
  grid.origin << j["grid"]["origin"][0].get<double>(),
      j["grid"]["origin"][1].get<double>();
  grid.cell_len = j["grid"]["cell_len"].get<double>();
  if (!(grid.cell_len > 0.0)) {
    throw std::runtime_error("database grid cell length must be positive");
  }
  FingerprintDatabase db(grid, modality_from_string(j["modality"].get<std::string>()));
  for (const auto& c : j["cells"]) {
    Fingerprint fp;
    fp.cell << c["cell"][0].get<int>(), c["cell"][1].get<int>();
    fp.rp << c["rp"][0].get<double>(), c["rp"][1].get<double>();
    fp.rp_sigma = c["rp_sigma"].get<double>();
    fp.sample_count = c["count"].get<int>();
    fp.dsf = c["dsf"].get<double>();
    for (auto it = c["features"].begin(); it != c["features"].end(); ++it) {
      FeatureStat st;
      st.mean = it.value()["mean"].get<double>();
      st.var = it.value()["var"].get<double>();
      st.count = it.value()["count"].get<int>();
      fp.features[it.key()] = st;
    }
    db.add(std::move(fp));
  }
  for (auto it = j["aps"].begin(); it != j["aps"].end(); ++it) {
    ApEstimate ap;
    ap.ap_id = it.key();
    ap.x = it.value()["x"].get<double>();
    ap.y = it.value()["y"].get<double>();
    ap.beta1 = it.value()["beta1"].get<double>();
    ap.beta2 = it.value()["beta2"].get<double>();
    const auto& cov = it.value()["cov"];
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        ap.cov(r, c) = cov[static_cast<std::size_t>(r * 4 + c)].get<double>();
      }
    }
    db.set_ap(ap);
  }
  return db;
}

}  // namespace fpfuse
