#include "fpfuse/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fpfuse/ap_estimator.hpp"
#include "fpfuse/ioutil.hpp"

namespace fpfuse {

using nlohmann::json;

namespace {

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j, const Eigen::Vector3d& fallback) {
  if (!j.is_array() || j.size() != 3) return fallback;
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void get_if(const json& j, const char* key, T& v) {
  if (j.contains(key)) {
    v = j.at(key).get<T>();
  }
}

void get_vec3_if(const json& j, const char* key, Eigen::Vector3d& v) {
  if (j.contains(key)) {
    v = vec3_from(j.at(key), v);
  }
}

std::string csv_opt(double v) {
  return std::isfinite(v) ? format_double(v) : std::string();
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
      cells.push_back("");
    }
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

double cell_double(const std::vector<std::string>& row, int col) {
  if (col < 0 || col >= static_cast<int>(row.size()) || row[static_cast<std::size_t>(col)].empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::stod(row[static_cast<std::size_t>(col)]);
}

}  // namespace

// ---- AppConfig ------------------------------------------------------------

std::string AppConfig::to_json_string() const {
  json j;
  j["world"] = {{"width_m", world_width_m},
                {"height_m", world_height_m},
                {"aps", world_aps},
                {"clustered_aps", world_clustered_aps},
                {"dipoles", world_dipoles},
                {"rss_noise_dbm", rss_noise_dbm},
                {"rss_floor_dbm", rss_floor_dbm},
                {"mag_noise_gauss", mag_noise_gauss}};
  j["gen"] = {{"imu_rate_hz", imu_rate_hz},
              {"rss_rate_hz", rss_rate_hz},
              {"walk_speed_mps", walk_speed_mps},
              {"gait_hz", gait_hz},
              {"gait_amp_mps2", gait_amp_mps2},
              {"anchor_sigma_m", anchor_sigma_m},
              {"anchor_interval_s", anchor_interval_s},
              {"outlier_fraction", outlier_fraction},
              {"outlier_min_m", outlier_min_m},
              {"outlier_max_m", outlier_max_m},
              {"outlier_attenuation_db", outlier_attenuation_db}};
  j["imu_noise"] = {{"arw", imu_noise.arw},       {"vrw", imu_noise.vrw},
                    {"eps_g", imu_noise.eps_g},   {"eps_a", imu_noise.eps_a},
                    {"tau_bg", imu_noise.tau_bg}, {"tau_ba", imu_noise.tau_ba},
                    {"w_bg", imu_noise.w_bg},     {"w_ba", imu_noise.w_ba}};
  j["init_std"] = {{"pos_m", vec3(init_std.pos_m)},
                   {"vel_mps", vec3(init_std.vel_mps)},
                   {"att_rad", vec3(init_std.att_rad)},
                   {"bg_rps", vec3(init_std.bg_rps)},
                   {"ba_mps2", vec3(init_std.ba_mps2)}};
  j["update_noise"] = {{"sigma_f", update_noise.sigma_f},
                       {"sigma_m", update_noise.sigma_m},
                       {"sigma_v", update_noise.sigma_v},
                       {"sigma_w", update_noise.sigma_w},
                       {"gravity_gate_mps2", update_noise.gravity_gate_mps2},
                       {"mag_gate_frac", update_noise.mag_gate_frac}};
  j["step"] = {{"refractory_s", step.refractory_s},
               {"max_interval_s", step.max_interval_s},
               {"prominence_mps2", step.prominence_mps2},
               {"length_gain", step.length_gain},
               {"min_length_m", step.min_length_m},
               {"max_length_m", step.max_length_m}};
  j["dr"] = {{"earth_rate", earth_rate}, {"latitude_deg", latitude_deg}};
  j["crowdsourcing"] = {{"lambda_d_m", lambda_d_m},
                        {"segment_min_duration_s", segment_min_duration_s}};
  j["mapping"] = {{"grid_len_m", grid_len_m},
                  {"lambda_n1", lambda_n1},
                  {"lambda_n2", lambda_n2},
                  {"default_var_rss", default_var_rss},
                  {"default_var_mag", default_var_mag},
                  {"profile_window_steps", profile_window_steps}};
  j["fingerprinting"] = {{"kappa", kappa},
                         {"min_shared_wifi", min_shared_wifi},
                         {"log_floor", log_floor}};
  j["fai"] = {{"alpha_ss_wifi", fai.alpha_ss_wifi},
              {"alpha_ss_mag", fai.alpha_ss_mag},
              {"alpha_sd_wifi", fai.alpha_sd_wifi},
              {"alpha_sd_mag", fai.alpha_sd_mag},
              {"rho_ss", fai.rho_ss},
              {"rho_sd", fai.rho_sd},
              {"rho_wd", fai.rho_wd},
              {"kappa_d", fai.kappa_d},
              {"sentinel_m", fai.sentinel_m},
              {"ct_wifi_m", ct_wifi_m},
              {"ct_mag_m", ct_mag_m}};
  j["fusion"] = {{"innovation_gate", innovation_gate},
                 {"init_timeout_s", init_timeout_s},
                 {"wifi_aid_timeout_s", wifi_aid_timeout_s},
                 {"mag_match_stride_steps", mag_match_stride_steps}};
  return j.dump(1) + "\n";
}

AppConfig AppConfig::from_json_string(const std::string& text) {
  AppConfig c;
  const json j = json::parse(text);
  if (j.contains("world")) {
    const auto& w = j["world"];
    get_if(w, "width_m", c.world_width_m);
    get_if(w, "height_m", c.world_height_m);
    get_if(w, "aps", c.world_aps);
    get_if(w, "clustered_aps", c.world_clustered_aps);
    get_if(w, "dipoles", c.world_dipoles);
    get_if(w, "rss_noise_dbm", c.rss_noise_dbm);
    get_if(w, "rss_floor_dbm", c.rss_floor_dbm);
    get_if(w, "mag_noise_gauss", c.mag_noise_gauss);
  }
  if (j.contains("gen")) {
    const auto& g = j["gen"];
    get_if(g, "imu_rate_hz", c.imu_rate_hz);
    get_if(g, "rss_rate_hz", c.rss_rate_hz);
    get_if(g, "walk_speed_mps", c.walk_speed_mps);
    get_if(g, "gait_hz", c.gait_hz);
    get_if(g, "gait_amp_mps2", c.gait_amp_mps2);
    get_if(g, "anchor_sigma_m", c.anchor_sigma_m);
    get_if(g, "anchor_interval_s", c.anchor_interval_s);
    get_if(g, "outlier_fraction", c.outlier_fraction);
    get_if(g, "outlier_min_m", c.outlier_min_m);
    get_if(g, "outlier_max_m", c.outlier_max_m);
    get_if(g, "outlier_attenuation_db", c.outlier_attenuation_db);
  }
  if (j.contains("imu_noise")) {
    const auto& n = j["imu_noise"];
    get_if(n, "arw", c.imu_noise.arw);
    get_if(n, "vrw", c.imu_noise.vrw);
    get_if(n, "eps_g", c.imu_noise.eps_g);
    get_if(n, "eps_a", c.imu_noise.eps_a);
    get_if(n, "tau_bg", c.imu_noise.tau_bg);
    get_if(n, "tau_ba", c.imu_noise.tau_ba);
    get_if(n, "w_bg", c.imu_noise.w_bg);
    get_if(n, "w_ba", c.imu_noise.w_ba);
  }
  if (j.contains("init_std")) {
    const auto& s = j["init_std"];
    get_vec3_if(s, "pos_m", c.init_std.pos_m);
    get_vec3_if(s, "vel_mps", c.init_std.vel_mps);
    get_vec3_if(s, "att_rad", c.init_std.att_rad);
    get_vec3_if(s, "bg_rps", c.init_std.bg_rps);
    get_vec3_if(s, "ba_mps2", c.init_std.ba_mps2);
  }
  if (j.contains("update_noise")) {
    const auto& u = j["update_noise"];
    get_if(u, "sigma_f", c.update_noise.sigma_f);
    get_if(u, "sigma_m", c.update_noise.sigma_m);
    get_if(u, "sigma_v", c.update_noise.sigma_v);
    get_if(u, "sigma_w", c.update_noise.sigma_w);
    get_if(u, "gravity_gate_mps2", c.update_noise.gravity_gate_mps2);
    get_if(u, "mag_gate_frac", c.update_noise.mag_gate_frac);
  }
  if (j.contains("step")) {
    const auto& s = j["step"];
    get_if(s, "refractory_s", c.step.refractory_s);
    get_if(s, "max_interval_s", c.step.max_interval_s);
    get_if(s, "prominence_mps2", c.step.prominence_mps2);
    get_if(s, "length_gain", c.step.length_gain);
    get_if(s, "min_length_m", c.step.min_length_m);
    get_if(s, "max_length_m", c.step.max_length_m);
  }
  if (j.contains("dr")) {
    get_if(j["dr"], "earth_rate", c.earth_rate);
    get_if(j["dr"], "latitude_deg", c.latitude_deg);
  }
  if (j.contains("crowdsourcing")) {
    get_if(j["crowdsourcing"], "lambda_d_m", c.lambda_d_m);
    get_if(j["crowdsourcing"], "segment_min_duration_s", c.segment_min_duration_s);
  }
  if (j.contains("mapping")) {
    const auto& m = j["mapping"];
    get_if(m, "grid_len_m", c.grid_len_m);
    get_if(m, "lambda_n1", c.lambda_n1);
    get_if(m, "lambda_n2", c.lambda_n2);
    get_if(m, "default_var_rss", c.default_var_rss);
    get_if(m, "default_var_mag", c.default_var_mag);
    get_if(m, "profile_window_steps", c.profile_window_steps);
  }
  if (j.contains("fingerprinting")) {
    const auto& f = j["fingerprinting"];
    get_if(f, "kappa", c.kappa);
    get_if(f, "min_shared_wifi", c.min_shared_wifi);
    get_if(f, "log_floor", c.log_floor);
  }
  if (j.contains("fai")) {
    const auto& f = j["fai"];
    get_if(f, "alpha_ss_wifi", c.fai.alpha_ss_wifi);
    get_if(f, "alpha_ss_mag", c.fai.alpha_ss_mag);
    get_if(f, "alpha_sd_wifi", c.fai.alpha_sd_wifi);
    get_if(f, "alpha_sd_mag", c.fai.alpha_sd_mag);
    get_if(f, "rho_ss", c.fai.rho_ss);
    get_if(f, "rho_sd", c.fai.rho_sd);
    get_if(f, "rho_wd", c.fai.rho_wd);
    get_if(f, "kappa_d", c.fai.kappa_d);
    get_if(f, "sentinel_m", c.fai.sentinel_m);
    get_if(f, "ct_wifi_m", c.ct_wifi_m);
    get_if(f, "ct_mag_m", c.ct_mag_m);
  }
  if (j.contains("fusion")) {
    const auto& f = j["fusion"];
    get_if(f, "innovation_gate", c.innovation_gate);
    get_if(f, "init_timeout_s", c.init_timeout_s);
    get_if(f, "wifi_aid_timeout_s", c.wifi_aid_timeout_s);
    get_if(f, "mag_match_stride_steps", c.mag_match_stride_steps);
  }
  return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  return from_json_string(read_file(path));
}

void AppConfig::save(const std::filesystem::path& path) const {
  atomic_write_file(path, to_json_string());
}

DrEngineConfig AppConfig::dr_config() const {
  DrEngineConfig d;
  d.noise = imu_noise;
  d.init = init_std;
  d.update_noise = update_noise;
  d.step = step;
  d.earth_rate = earth_rate;
  d.latitude_deg = latitude_deg;
  return d;
}

MatchParams AppConfig::match_params() const {
  MatchParams p;
  p.kappa = kappa;
  p.min_shared_wifi = min_shared_wifi;
  p.log_floor = log_floor;
  return p;
}

DatabaseBuildParams AppConfig::build_params() const {
  DatabaseBuildParams b;
  b.grid.cell_len = grid_len_m;
  b.lambda_n1 = lambda_n1;
  b.lambda_n2 = lambda_n2;
  b.default_var_rss = default_var_rss;
  b.default_var_mag = default_var_mag;
  b.rss_cutoff_dbm = rss_floor_dbm;
  b.profile_window_steps = profile_window_steps;
  return b;
}

SegmentSelectionConfig AppConfig::segment_config() const {
  SegmentSelectionConfig s;
  s.engine = dr_config();
  s.lambda_d_m = lambda_d_m;
  s.min_duration_s = segment_min_duration_s;
  return s;
}

TraceGenConfig AppConfig::gen_config(bool with_outliers) const {
  TraceGenConfig g;
  g.imu_rate_hz = imu_rate_hz;
  g.rss_rate_hz = rss_rate_hz;
  g.imu_noise = imu_noise;
  g.anchor_sigma_m = anchor_sigma_m;
  g.anchor_interval_s = anchor_interval_s;
  if (with_outliers) {
    g.outliers.fraction = outlier_fraction;
    g.outliers.min_offset_m = outlier_min_m;
    g.outliers.max_offset_m = outlier_max_m;
    g.outliers.attenuation_db = outlier_attenuation_db;
  }
  return g;
}

PathSpec AppConfig::path_spec(std::vector<Eigen::Vector2d> waypoints) const {
  PathSpec p;
  p.waypoints = std::move(waypoints);
  p.speed_mps = walk_speed_mps;
  p.gait_hz = gait_hz;
  p.gait_amp_mps2 = gait_amp_mps2;
  return p;
}

PipelineConfig AppConfig::pipeline_config(Strategy strategy, FusionMode mode) const {
  PipelineConfig p;
  p.dr = dr_config();
  p.match = match_params();
  p.fai = fai;
  p.rho = {fai.rho_ss, fai.rho_sd, fai.rho_wd};
  p.strategy.strategy = strategy;
  p.strategy.ct_wifi_m = ct_wifi_m;
  p.strategy.ct_mag_m = ct_mag_m;
  p.mode = mode;
  p.innovation_gate = innovation_gate;
  p.init_timeout_s = init_timeout_s;
  p.wifi_aid_timeout_s = wifi_aid_timeout_s;
  p.profile_window_steps = profile_window_steps;
  p.mag_match_stride_steps = mag_match_stride_steps;
  p.rss_cutoff_dbm = rss_floor_dbm;
  return p;
}

// ---- RunManifest ----------------------------------------------------------

std::string RunManifest::to_json_string() const {
  json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["strategies"] = strategies;
  j["inputs"] = inputs;
  j["output_dir"] = output_dir;
  j["tool_version"] = tool_version;
  j["manifest_hash"] = hash();
  return j.dump(1) + "\n";
}

std::string RunManifest::hash() const {
  std::string blob = config_hash + "|" + std::to_string(seed) + "|";
  for (const auto& s : strategies) blob += s + ";";
  blob += "|";
  for (const auto& s : inputs) blob += s + ";";
  blob += "|" + output_dir + "|" + tool_version;
  return hex64(fnv1a(blob));
}

void RunManifest::save(const std::filesystem::path& dir) const {
  atomic_write_file(dir / "manifest.json", to_json_string());
}

// ---- deterministic world / paths -----------------------------------------

World make_world(const AppConfig& cfg, std::uint64_t seed) {
  RandomStream rng(seed ^ 0x57f3a1c9d24b8e61ull);
  WorldConfig wc = WorldConfig::random_layout(cfg.world_aps, cfg.world_dipoles, rng,
                                              cfg.world_width_m, cfg.world_height_m,
                                              cfg.world_clustered_aps);
  wc.rss_noise_dbm = cfg.rss_noise_dbm;
  wc.rss_floor_dbm = cfg.rss_floor_dbm;
  wc.mag_noise_gauss = cfg.mag_noise_gauss;
  return World(wc);
}

std::vector<Eigen::Vector2d> make_waypoints(const AppConfig& cfg, RandomStream& rng,
                                            int count) {
  std::vector<Eigen::Vector2d> wps;
  const double margin_x = 0.08 * cfg.world_width_m;
  const double margin_y = 0.08 * cfg.world_height_m;
  while (static_cast<int>(wps.size()) < count) {
    Eigen::Vector2d p(rng.uniform(margin_x, cfg.world_width_m - margin_x),
                      rng.uniform(margin_y, cfg.world_height_m - margin_y));
    if (!wps.empty() && (p - wps.back()).norm() < 8.0) {
      continue;  // keep legs long enough to settle between turns
    }
    wps.push_back(p);
  }
  return wps;
}

std::filesystem::path resolve_out_dir(const std::filesystem::path& requested) {
  if (const char* env = std::getenv("FPFUSE_OUT"); env && *env) {
    return std::filesystem::path(env);
  }
  return requested;
}

// ---- CSV emission ----------------------------------------------------------

void write_epochs_csv(const std::filesystem::path& path, const FusionOutput& out,
                      const std::string& manifest_hash) {
  std::ostringstream s;
  s << "# manifest " << manifest_hash << "\n";
  s << "t,x,y,eta_wifi,eta_mag,err\n";
  for (const auto& e : out.epochs) {
    s << format_double(e.t) << ',' << format_double(e.p.x()) << ','
      << format_double(e.p.y()) << ',' << csv_opt(e.eta_wifi) << ','
      << csv_opt(e.eta_mag) << ',' << csv_opt(e.err_m) << '\n';
  }
  atomic_write_file(path, s.str());
}

void write_fixes_csv(const std::filesystem::path& path, const FusionOutput& out,
                     const std::string& manifest_hash) {
  std::ostringstream s;
  s << "# manifest " << manifest_hash << "\n";
  s << "t,modality,x,y,err,ct,ss,sd,wd,mc,mcm,eta_used,applied,gated\n";
  for (const auto& f : out.fixes) {
    s << format_double(f.t) << ',' << to_string(f.modality) << ','
      << format_double(f.fix.x()) << ',' << format_double(f.fix.y()) << ','
      << csv_opt(f.err_m) << ',' << format_double(f.fai.ct) << ','
      << format_double(f.fai.ss) << ',' << format_double(f.fai.sd) << ','
      << format_double(f.fai.wd) << ',' << format_double(f.fai.mc) << ','
      << format_double(f.fai.mcm) << ',' << format_double(f.eta_used_m) << ','
      << (f.applied ? 1 : 0) << ',' << (f.gated ? 1 : 0) << '\n';
  }
  atomic_write_file(path, s.str());
}

void write_summary_csv(const std::filesystem::path& path, const FusionOutput& out,
                       Strategy strategy, FusionMode mode,
                       const std::string& manifest_hash) {
  std::ostringstream s;
  s << "# manifest " << manifest_hash << "\n";
  s << "strategy,mode,std,mean,rms,p80,p95,max,n_epochs,wifi_updates,mag_updates,"
       "gated\n";
  const std::vector<double> errs = out.errors();
  s << to_string(strategy) << ',' << to_string(mode) << ',';
  if (errs.empty()) {
    s << ",,,,,";
  } else {
    const ErrorStats st = error_stats(errs);
    s << format_double(st.std_m) << ',' << format_double(st.mean_m) << ','
      << format_double(st.rms_m) << ',' << format_double(st.p80_m) << ','
      << format_double(st.p95_m) << ',' << format_double(st.max_m);
  }
  s << ',' << out.epochs.size() << ',' << out.wifi_updates << ',' << out.mag_updates
    << ',' << out.gated_updates << '\n';
  atomic_write_file(path, s.str());
}

// ---- comparison ------------------------------------------------------------

ComparisonTables compare_strategies(const std::vector<StrategyRun>& runs) {
  ComparisonTables t;
  if (runs.empty()) {
    return t;
  }
  const std::size_t n0 = runs.front().output.epochs.size();
  for (const auto& r : runs) {
    if (!r.output.epochs.empty() && n0 != 0 && r.output.epochs.size() != n0) {
      throw std::invalid_argument("compare_strategies: misaligned epoch counts");
    }
  }

  const StrategyRun* ct_run = nullptr;
  for (const auto& r : runs) {
    if (r.strategy == Strategy::kCt) {
      ct_run = &r;
      break;
    }
  }

  for (const auto& r : runs) {
    const std::vector<double> errs = r.output.errors();
    if (!errs.empty()) {
      t.stats.emplace_back(r.strategy, error_stats(errs));
    }
  }

  // Correlations between each indicator series and the actual fingerprinting
  // errors, evaluated on the constant-noise run (neutral search aiding).
  const StrategyRun* corr_run = ct_run ? ct_run : &runs.front();
  for (Modality modality : {Modality::kWifi, Modality::kMagnetic}) {
    std::vector<double> err;
    std::array<std::vector<double>, 6> fai_series;
    for (const auto& f : corr_run->output.fixes) {
      if (f.modality != modality || !std::isfinite(f.err_m)) continue;
      err.push_back(f.err_m);
      for (std::size_t si = 0; si < kAllStrategies.size(); ++si) {
        fai_series[si].push_back(f.fai.by_strategy(kAllStrategies[si]));
      }
    }
    if (err.size() < 2) continue;
    for (std::size_t si = 0; si < kAllStrategies.size(); ++si) {
      const CorrelationResult c = correlation(err, fai_series[si]);
      t.correlations.emplace_back(modality, to_string(kAllStrategies[si]),
                                  c.coefficient);
    }
  }

  if (ct_run) {
    const std::vector<double> ct_errs = ct_run->output.errors();
    if (!ct_errs.empty()) {
      const ErrorStats ct_stats = error_stats(ct_errs);
      for (const auto& r : runs) {
        const std::vector<double> errs = r.output.errors();
        if (errs.empty()) continue;
        const ErrorStats st = error_stats(errs);
        const double rms_imp = 100.0 * (ct_stats.rms_m - st.rms_m) / ct_stats.rms_m;
        const double max_imp = 100.0 * (ct_stats.max_m - st.max_m) / ct_stats.max_m;
        t.improvements.emplace_back(r.strategy, rms_imp, max_imp);
      }
    }
  }
  return t;
}

void write_comparison_csv(const std::filesystem::path& dir, const ComparisonTables& t,
                          const std::string& manifest_hash) {
  {
    std::ostringstream s;
    s << "# manifest " << manifest_hash << "\n";
    s << "strategy,std,mean,rms,p80,p95,max\n";
    for (const auto& [strategy, st] : t.stats) {
      s << to_string(strategy) << ',' << format_double(st.std_m) << ','
        << format_double(st.mean_m) << ',' << format_double(st.rms_m) << ','
        << format_double(st.p80_m) << ',' << format_double(st.p95_m) << ','
        << format_double(st.max_m) << '\n';
    }
    atomic_write_file(dir / "strategy_stats.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "# manifest " << manifest_hash << "\n";
    s << "modality,fai,corr\n";
    for (const auto& [modality, name, corr] : t.correlations) {
      s << to_string(modality) << ',' << name << ',' << format_double(corr) << '\n';
    }
    atomic_write_file(dir / "correlations.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "# manifest " << manifest_hash << "\n";
    s << "strategy,rms_improvement_pct,max_improvement_pct\n";
    for (const auto& [strategy, rms_imp, max_imp] : t.improvements) {
      s << to_string(strategy) << ',' << format_double(rms_imp) << ','
        << format_double(max_imp) << '\n';
    }
    atomic_write_file(dir / "improvements.csv", s.str());
  }
}

// ---- subcommands -----------------------------------------------------------

namespace {

std::string config_hash_of(const AppConfig& cfg) {
  return hex64(fnv1a(cfg.to_json_string()));
}

GroundTruth load_truth_csv(const std::filesystem::path& path) {
  GroundTruth gt;
  const CsvTable t = read_csv(path);
  const int ct = t.column("t");
  const int cx = t.column("x");
  const int cy = t.column("y");
  const int cz = t.column("z");
  const int cvx = t.column("vx");
  const int cvy = t.column("vy");
  const int cvz = t.column("vz");
  const int cyaw = t.column("yaw");
  for (const auto& row : t.rows) {
    TruthEpoch e;
    e.t = cell_double(row, ct);
    e.p << cell_double(row, cx), cell_double(row, cy),
        cz >= 0 ? cell_double(row, cz) : 0.0;
    if (cvx >= 0) {
      e.v << cell_double(row, cvx), cell_double(row, cvy), cell_double(row, cvz);
    }
    if (cyaw >= 0) e.yaw = cell_double(row, cyaw);
    gt.epochs.push_back(e);
  }
  return gt;
}

struct SegmentData {
  SensorTrace trace;
  std::vector<QualifiedSegment> segments;
};

std::vector<SegmentData> collect_segments(const AppConfig& cfg,
                                          const std::vector<std::filesystem::path>& traces) {
  std::vector<SegmentData> out;
  const SegmentSelectionConfig scfg = cfg.segment_config();
  for (const auto& path : traces) {
    SegmentData sd;
    sd.trace = SensorTrace::load_jsonl(path);
    sd.segments = select_segments(sd.trace, scfg);
    out.push_back(std::move(sd));
  }
  return out;
}

}  // namespace

int cmd_simulate(const AppConfig& cfg, std::uint64_t seed, int n_traces,
                 bool with_outliers, const std::filesystem::path& out_dir_req) {
  const std::filesystem::path out_dir = resolve_out_dir(out_dir_req);
  std::filesystem::create_directories(out_dir);
  const World world = make_world(cfg, seed);
  RandomStream rng(seed);

  for (int k = 0; k < n_traces; ++k) {
    RandomStream trng = rng.fork(static_cast<std::uint64_t>(k) + 100);
    const auto wps = make_waypoints(cfg, trng, 8);
    const SyntheticTrace st =
        synthesize_trace(world, cfg.path_spec(wps), cfg.gen_config(with_outliers),
                         seed * 1000 + static_cast<std::uint64_t>(k));
    char name[64];
    std::snprintf(name, sizeof(name), "trace_%03d.jsonl", k);
    st.trace.save_jsonl(out_dir / name);
    std::snprintf(name, sizeof(name), "truth_%03d.csv", k);
    st.truth.save_csv(out_dir / name);
  }

  // Reference AP truth for debugging and the estimator checks.
  json aps = json::array();
  for (const auto& ap : world.config().aps) {
    aps.push_back({{"id", ap.id}, {"x", ap.p.x()}, {"y", ap.p.y()},
                   {"beta1", ap.beta1}, {"beta2", ap.beta2}});
  }
  atomic_write_file(out_dir / "world_aps.json", json(aps).dump(1) + "\n");

  RunManifest manifest;
  manifest.config_hash = config_hash_of(cfg);
  manifest.seed = seed;
  manifest.output_dir = out_dir.string();
  manifest.save(out_dir);
  cfg.save(out_dir / "config.json");
  return 0;
}

int cmd_build_db(const AppConfig& cfg, const std::vector<std::filesystem::path>& traces,
                 const std::filesystem::path& out_dir_req, std::uint64_t seed) {
  const std::filesystem::path out_dir = resolve_out_dir(out_dir_req);
  std::filesystem::create_directories(out_dir);
  const auto data = collect_segments(cfg, traces);

  std::vector<FeatureSample> wifi_samples;
  std::vector<FeatureSample> mag_samples;
  int n_segments = 0;
  for (const auto& sd : data) {
    for (const auto& seg : sd.segments) {
      ++n_segments;
      auto ws = wifi_samples_from_segment(sd.trace, seg, cfg.rss_floor_dbm);
      wifi_samples.insert(wifi_samples.end(), ws.begin(), ws.end());
      auto ms = mag_samples_from_segment(sd.trace, seg, cfg.profile_window_steps);
      mag_samples.insert(mag_samples.end(), ms.begin(), ms.end());
    }
  }
  std::cerr << "build-db: " << n_segments << " qualified segments, "
            << wifi_samples.size() << " wifi samples, " << mag_samples.size()
            << " magnetic samples\n";

  const DatabaseBuildParams params = cfg.build_params();
  FingerprintDatabase db_wifi = build_database(wifi_samples, params, Modality::kWifi);
  FingerprintDatabase db_mag = build_database(mag_samples, params, Modality::kMagnetic);
  compute_dsf(db_wifi, cfg.fai.kappa_d, cfg.log_floor);
  compute_dsf(db_mag, cfg.fai.kappa_d, cfg.log_floor);
  db_wifi.save_json(out_dir / "db_wifi.json");
  db_mag.save_json(out_dir / "db_mag.json");

  RunManifest manifest;
  manifest.config_hash = config_hash_of(cfg);
  manifest.seed = seed;
  for (const auto& p : traces) manifest.inputs.push_back(p.string());
  manifest.output_dir = out_dir.string();
  manifest.save(out_dir);
  cfg.save(out_dir / "config.json");
  if (db_wifi.empty() || db_mag.empty()) {
    std::cerr << "build-db: produced an empty database\n";
    return 1;
  }
  return 0;
}

int cmd_fit_aps(const AppConfig& cfg, const std::vector<std::filesystem::path>& traces,
                const std::filesystem::path& db_wifi_path, std::uint64_t seed) {
  (void)seed;
  FingerprintDatabase db = FingerprintDatabase::load_json(db_wifi_path);
  const auto data = collect_segments(cfg, traces);

  std::map<std::string, std::vector<ApObservation>> per_ap;
  for (const auto& sd : data) {
    for (const auto& seg : sd.segments) {
      for (const auto& obs : sd.trace.rss) {
        if (obs.t < seg.t_start || obs.t > seg.t_end) continue;
        const SmoothedEpoch* e = seg.track.nearest(obs.t, 0.15);
        if (!e) continue;
        for (const auto& r : obs.readings) {
          if (r.rssi < cfg.rss_floor_dbm) continue;
          per_ap[r.ap_id].push_back({e->p, r.rssi});
        }
      }
    }
  }

  ApEstimatorOptions opts;
  opts.rss_sigma_dbm = cfg.rss_noise_dbm;
  int fitted = 0;
  for (const auto& [ap_id, obs] : per_ap) {
    try {
      ApEstimate est = estimate_ap(obs, opts);
      est.ap_id = ap_id;
      db.set_ap(est);
      ++fitted;
    } catch (const std::exception& e) {
      std::cerr << "fit-aps: " << ap_id << ": " << e.what() << "\n";
    }
  }
  db.save_json(db_wifi_path);
  std::cerr << "fit-aps: " << fitted << "/" << per_ap.size() << " APs fitted\n";
  return fitted > 0 ? 0 : 1;
}

int cmd_train_mc(const AppConfig& cfg, const std::vector<std::filesystem::path>& traces,
                 const std::filesystem::path& db_wifi_path,
                 const std::filesystem::path& db_mag_path,
                 const std::filesystem::path& out_config_path, std::uint64_t seed) {
  (void)seed;
  const FingerprintDatabase db_wifi = FingerprintDatabase::load_json(db_wifi_path);
  const FingerprintDatabase db_mag = FingerprintDatabase::load_json(db_mag_path);
  const auto data = collect_segments(cfg, traces);
  const MatchParams mp = cfg.match_params();
  const McCoefficients unit{cfg.fai.rho_ss, cfg.fai.rho_sd, cfg.fai.rho_wd};

  std::vector<double> ss;
  std::vector<double> sd;
  std::vector<double> wd;
  std::vector<double> actual;

  for (const auto& sdata : data) {
    for (const auto& seg : sdata.segments) {
      // WiFi epochs against the smoothed reference.
      for (const auto& obs : sdata.trace.rss) {
        if (obs.t < seg.t_start || obs.t > seg.t_end) continue;
        const SmoothedEpoch* e = seg.track.nearest(obs.t, 0.15);
        if (!e) continue;
        const FeatureVec q = rss_to_features(obs, cfg.rss_floor_dbm);
        if (q.empty()) continue;
        try {
          const MatchResult m = match(q, db_wifi, mp);
          const FaiBundle b =
              compute_fai_bundle(q, m, db_wifi, cfg.fai, unit, cfg.ct_wifi_m);
          ss.push_back(b.ss);
          sd.push_back(b.sd);
          wd.push_back(b.wd);
          actual.push_back((m.position - e->p).norm());
        } catch (const EmptyRegionError&) {
        }
      }
      // Magnetic profiles against the smoothed reference, aided by it.
      const auto mag_samples =
          mag_samples_from_segment(sdata.trace, seg, cfg.profile_window_steps);
      for (const auto& s : mag_samples) {
        try {
          const MatchResult m =
              match_magnetic_constrained(s.features, db_mag, s.p, cfg.ct_mag_m, mp);
          const FaiBundle b =
              compute_fai_bundle(s.features, m, db_mag, cfg.fai, unit, cfg.ct_mag_m);
          ss.push_back(b.ss);
          sd.push_back(b.sd);
          wd.push_back(b.wd);
          actual.push_back((m.position - s.p).norm());
        } catch (const EmptyRegionError&) {
        }
      }
    }
  }

  const McCoefficients rho = train_mc(ss, sd, wd, actual);
  AppConfig trained = cfg;
  trained.fai.rho_ss = rho.rho_ss;
  trained.fai.rho_sd = rho.rho_sd;
  trained.fai.rho_wd = rho.rho_wd;
  trained.save(out_config_path);
  std::cerr << "train-mc: n=" << actual.size() << " rho=(" << rho.rho_ss << ", "
            << rho.rho_sd << ", " << rho.rho_wd << ")\n";
  return 0;
}

int cmd_run(const AppConfig& cfg, Strategy strategy, FusionMode mode,
            const std::filesystem::path& trace_path,
            const std::optional<std::filesystem::path>& truth_path,
            const std::filesystem::path& db_wifi_path,
            const std::filesystem::path& db_mag_path,
            const std::filesystem::path& out_dir_req, std::uint64_t seed) {
  const std::filesystem::path out_dir = resolve_out_dir(out_dir_req);
  std::filesystem::create_directories(out_dir);

  const SensorTrace trace = SensorTrace::load_jsonl(trace_path);
  FingerprintDatabase db_wifi;
  FingerprintDatabase db_mag;
  if (!db_wifi_path.empty()) {
    db_wifi = FingerprintDatabase::load_json(db_wifi_path);
  }
  if (!db_mag_path.empty()) {
    db_mag = FingerprintDatabase::load_json(db_mag_path);
  }
  GroundTruth truth;
  const bool have_truth = truth_path.has_value();
  if (have_truth) {
    truth = load_truth_csv(*truth_path);
  }

  const PipelineConfig pcfg = cfg.pipeline_config(strategy, mode);
  const FusionOutput out = run_pipeline(trace, db_wifi.empty() ? nullptr : &db_wifi,
                                        db_mag.empty() ? nullptr : &db_mag, pcfg,
                                        have_truth ? &truth : nullptr);

  RunManifest manifest;
  manifest.config_hash = config_hash_of(cfg);
  manifest.seed = seed;
  manifest.strategies = {to_string(strategy)};
  manifest.inputs = {trace_path.string(), db_wifi_path.string(), db_mag_path.string()};
  if (have_truth) manifest.inputs.push_back(truth_path->string());
  manifest.output_dir = out_dir.string();
  manifest.save(out_dir);
  cfg.save(out_dir / "config.json");

  const std::string h = manifest.hash();
  write_epochs_csv(out_dir / "epochs.csv", out, h);
  write_fixes_csv(out_dir / "fixes.csv", out, h);
  write_summary_csv(out_dir / "summary.csv", out, strategy, mode, h);
  return 0;
}

int cmd_eval(const std::vector<std::filesystem::path>& run_dirs,
             const std::filesystem::path& out_dir_req) {
  const std::filesystem::path out_dir = resolve_out_dir(out_dir_req);
  std::filesystem::create_directories(out_dir);

  std::vector<StrategyRun> runs;
  std::string blob;
  for (const auto& dir : run_dirs) {
    StrategyRun run;
    const CsvTable summary = read_csv(dir / "summary.csv");
    if (summary.rows.empty()) {
      throw std::runtime_error("eval: empty summary in " + dir.string());
    }
    run.strategy = strategy_from_string(summary.rows[0][0]);
    run.mode = mode_from_string(summary.rows[0][1]);

    const CsvTable epochs = read_csv(dir / "epochs.csv");
    const int cerr = epochs.column("err");
    const int ct = epochs.column("t");
    for (const auto& row : epochs.rows) {
      FusionEpoch e;
      e.t = cell_double(row, ct);
      e.err_m = cell_double(row, cerr);
      run.output.epochs.push_back(e);
    }

    const CsvTable fixes = read_csv(dir / "fixes.csv");
    const int ft = fixes.column("t");
    const int fmod = fixes.column("modality");
    const int ferr = fixes.column("err");
    const std::array<int, 6> fcols = {fixes.column("ct"), fixes.column("ss"),
                                      fixes.column("sd"), fixes.column("wd"),
                                      fixes.column("mc"), fixes.column("mcm")};
    for (const auto& row : fixes.rows) {
      FixRecord f;
      f.t = cell_double(row, ft);
      f.modality = modality_from_string(row[static_cast<std::size_t>(fmod)]);
      f.err_m = cell_double(row, ferr);
      f.fai.ct = cell_double(row, fcols[0]);
      f.fai.ss = cell_double(row, fcols[1]);
      f.fai.sd = cell_double(row, fcols[2]);
      f.fai.wd = cell_double(row, fcols[3]);
      f.fai.mc = cell_double(row, fcols[4]);
      f.fai.mcm = cell_double(row, fcols[5]);
      run.output.fixes.push_back(f);
    }
    runs.push_back(std::move(run));
    blob += dir.string() + ";";
  }

  const ComparisonTables tables = compare_strategies(runs);
  write_comparison_csv(out_dir, tables, hex64(fnv1a(blob)));
  return 0;
}

}  // namespace fpfuse
