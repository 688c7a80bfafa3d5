#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fpfuse {

enum class Modality { kWifi, kMagnetic };

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct GridSpec {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double cell_len = 3.0;

  Eigen::Vector2i cell_of(const Eigen::Vector2d& p) const;
  Eigen::Vector2d cell_center(const Eigen::Vector2i& c) const;
};

// Lexicographic cell order; used for deterministic tie-breaking.
inline bool cell_less(const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
  return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
}

struct FeatureStat {
  double mean = 0.0;
  double var = 1.0;
  int count = 0;
};

// Per-grid-cell Gaussian feature model with its reference-point location and
// crowdsourced location uncertainty.
struct Fingerprint {
  Eigen::Vector2i cell = Eigen::Vector2i::Zero();
  Eigen::Vector2d rp = Eigen::Vector2d::Zero();
  double rp_sigma = 0.0;  // m, RMS of member smoothed-track sigmas
  int sample_count = 0;
  std::map<std::string, FeatureStat> features;
  double dsf = 0.0;  // m, mean distance to the most feature-similar peers
};

// AP position and path-loss parameters from least squares.
struct ApEstimate {
  std::string ap_id;
  double x = 0.0;
  double y = 0.0;
  double beta1 = 2.0;   // dimensionless, valid in (0.5, 6)
  double beta2 = -40.0; // dBm at 1 m
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();

  Eigen::Vector2d position() const { return {x, y}; }
};

class FingerprintDatabase {
 public:
  FingerprintDatabase() = default;
  FingerprintDatabase(GridSpec grid, Modality modality)
      : grid_(grid), modality_(modality) {}

  const GridSpec& grid() const { return grid_; }
  Modality modality() const { return modality_; }

  bool empty() const { return fps_.empty(); }
  std::size_t size() const { return fps_.size(); }
  const std::vector<Fingerprint>& fingerprints() const { return fps_; }
  std::vector<Fingerprint>& mutable_fingerprints() { return fps_; }

  // Rejects duplicate cell indices; keeps cells sorted.
  void add(Fingerprint fp);

  // Indices of fingerprints whose reference point lies in the circle.
  std::vector<std::size_t> in_circle(const Eigen::Vector2d& center, double radius) const;

  const std::map<std::string, ApEstimate>& ap_registry() const { return aps_; }
  void set_ap(const ApEstimate& ap) { aps_[ap.ap_id] = ap; }

  void save_json(const std::filesystem::path& path) const;
  std::string to_json_string() const;
  static FingerprintDatabase load_json(const std::filesystem::path& path);

 private:
  GridSpec grid_;
  Modality modality_ = Modality::kWifi;
  std::vector<Fingerprint> fps_;
  std::map<std::string, ApEstimate> aps_;
};

}  // namespace fpfuse
