#include "nvsim/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "nvsim/csv.hpp"
#include "nvsim/dsp.hpp"
#include "nvsim/svg.hpp"

namespace fs = std::filesystem;

namespace nvsim {

// ---------------------------------------------------------------------------
// errors, enum names
// ---------------------------------------------------------------------------

namespace {
std::string join_errors(const std::vector<std::string>& errors) {
  std::string s = "scenario validation failed:";
  for (const auto& e : errors) s += "\n  - " + e;
  return s;
}
}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Rabi: return "rabi";
    case ExperimentKind::T1: return "t1";
    case ExperimentKind::Correlation: return "correlation";
    case ExperimentKind::Casr: return "casr";
    case ExperimentKind::Sensitivity: return "sensitivity";
    case ExperimentKind::SignMap: return "signmap";
  }
  return "?";
}

namespace {

bool kind_from_string(const std::string& s, ExperimentKind& out) {
  if (s == "rabi") out = ExperimentKind::Rabi;
  else if (s == "t1") out = ExperimentKind::T1;
  else if (s == "correlation") out = ExperimentKind::Correlation;
  else if (s == "casr") out = ExperimentKind::Casr;
  else if (s == "sensitivity") out = ExperimentKind::Sensitivity;
  else if (s == "signmap") out = ExperimentKind::SignMap;
  else return false;
  return true;
}

// ---------------------------------------------------------------------------
// flat key = value parsing
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_kv(const std::string& text, const std::string& origin,
                                            std::vector<std::string>& errors) {
  std::map<std::string, std::string> raw;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      errors.push_back(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      errors.push_back(origin + ":" + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (raw.count(key)) {
      errors.push_back(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      continue;
    }
    raw[key] = value;
  }
  return raw;
}

/// Typed access to the raw key/value map with per-key error accumulation;
/// unconsumed keys are reported as unknown at the end.
class Reader {
 public:
  explicit Reader(std::map<std::string, std::string> raw) : raw_(std::move(raw)) {}

  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& def) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    return it == raw_.end() ? def : it->second;
  }

  double num(const std::string& key, double def) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return def;
    return parse_num(key, it->second, def);
  }

  long integer(const std::string& key, long def) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return def;
    const double v = parse_num(key, it->second, static_cast<double>(def));
    if (v != std::floor(v)) {
      errors.push_back(key + ": expected an integer, got '" + it->second + "'");
      return def;
    }
    return static_cast<long>(v);
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return def;
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected a non-negative integer, got '" + it->second + "'");
      return def;
    }
  }

  std::vector<double> num_list(const std::string& key, std::vector<double> def) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return def;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(parse_num(key, item, 0.0));
    }
    if (out.empty()) errors.push_back(key + ": expected a comma-separated number list");
    return out;
  }

  /// "offset:weight,offset:weight" pairs
  std::vector<std::pair<double, double>> pair_list(const std::string& key,
                                                   std::vector<std::pair<double, double>> def) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return def;
    std::vector<std::pair<double, double>> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        errors.push_back(key + ": expected 'offset:weight' pairs, got '" + item + "'");
        return def;
      }
      out.emplace_back(parse_num(key, trim(item.substr(0, colon)), 0.0),
                       parse_num(key, trim(item.substr(colon + 1)), 0.0));
    }
    if (out.empty()) {
      errors.push_back(key + ": expected at least one 'offset:weight' pair");
      return def;
    }
    return out;
  }

  void require(const std::string& key) {
    if (!has(key)) errors.push_back(key + ": required key is missing");
  }

  void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) errors.push_back(key + ": " + what);
  }

  void finish() {
    for (const auto& [key, value] : raw_) {
      (void)value;
      if (!consumed_.count(key)) errors.push_back(key + ": unknown key");
    }
  }

  std::vector<std::string> errors;

 private:
  double parse_num(const std::string& key, const std::string& text, double fallback) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected a number, got '" + text + "'");
      return fallback;
    }
  }

  std::map<std::string, std::string> raw_;
  std::set<std::string> consumed_;
};

Eigen::Vector3d parse_axis(Reader& r, const std::string& key) {
  const auto v = r.num_list(key, {0.0, 0.0, 1.0});
  if (v.size() != 3) {
    r.errors.push_back(key + ": expected three components");
    return Eigen::Vector3d::UnitZ();
  }
  Eigen::Vector3d axis{v[0], v[1], v[2]};
  const double n = axis.norm();
  if (!(n > 0)) {
    r.errors.push_back(key + ": axis must be nonzero");
    return Eigen::Vector3d::UnitZ();
  }
  return axis / n;
}

double default_b0_for(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Rabi:
    case ExperimentKind::T1: return 33e-3;
    case ExperimentKind::Correlation: return 31e-3;
    default: return 180e-3;
  }
}

long default_averages_for(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::T1: return 5000;
    case ExperimentKind::Correlation: return 10000L * 8L;
    case ExperimentKind::Casr: return 100;
    default: return 1000;
  }
}

void read_fid(Reader& r, FidScenario& fid) {
  fid.species = r.str("fid.species", fid.species);
  fid.larmor_hz = r.num("fid.larmor_hz", fid.larmor_hz);
  r.check(fid.larmor_hz >= 0, "fid.larmor_hz", "must be >= 0");
  fid.amplitude_t = r.num("fid.amplitude_t", fid.amplitude_t);
  r.check(fid.amplitude_t >= 0, "fid.amplitude_t", "must be >= 0");
  fid.t2star_s = r.num("fid.t2star_s", fid.t2star_s);
  r.check(fid.t2star_s > 0, "fid.t2star_s", "must be > 0");
  fid.phase0_rad = r.num("fid.phase0_rad", fid.phase0_rad);
  fid.lines = r.pair_list("fid.lines", fid.lines);
  double wsum = 0;
  bool ok = true;
  for (const auto& [off, w] : fid.lines) {
    (void)off;
    if (!(w > 0)) ok = false;
    wsum += w;
  }
  r.check(ok, "fid.lines", "weights must be > 0");
  r.check(std::abs(wsum - 1.0) <= 1e-9, "fid.lines", "weights must sum to 1");
}

void read_channel(Reader& r, ChannelGeometry& ch) {
  ch.length_um = r.num("geometry.channel.length_um", ch.length_um);
  ch.width_um = r.num("geometry.channel.width_um", ch.width_um);
  ch.height_um = r.num("geometry.channel.height_um", ch.height_um);
  ch.floor_offset_um = r.num("geometry.channel.floor_offset_um", ch.floor_offset_um);
  r.check(ch.length_um > 0, "geometry.channel.length_um", "must be > 0");
  r.check(ch.width_um > 0, "geometry.channel.width_um", "must be > 0");
  r.check(ch.height_um > 0, "geometry.channel.height_um", "must be > 0");
  r.check(ch.floor_offset_um >= 0, "geometry.channel.floor_offset_um", "must be >= 0");
}

}  // namespace

// ---------------------------------------------------------------------------
// parse
// ---------------------------------------------------------------------------

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& origin) {
  std::vector<std::string> syntax_errors;
  std::map<std::string, std::string> raw = parse_kv(text, origin, syntax_errors);
  if (!syntax_errors.empty()) throw ScenarioError(std::move(syntax_errors));

  // manifest files embed the resolved config under a config. prefix
  if (raw.count("config.experiment")) {
    std::map<std::string, std::string> stripped;
    for (const auto& [key, value] : raw) {
      if (key.rfind("config.", 0) == 0) stripped[key.substr(7)] = value;
      else if (key.rfind("manifest.", 0) != 0)
        throw ScenarioError({key + ": unknown key in manifest"});
    }
    raw = std::move(stripped);
  }

  Reader r(std::move(raw));
  ScenarioConfig cfg;

  r.require("experiment");
  const std::string kind_str = r.str("experiment", "rabi");
  if (!kind_from_string(kind_str, cfg.kind))
    r.errors.push_back("experiment: unknown experiment '" + kind_str +
                       "' (expected rabi|t1|correlation|casr|sensitivity|signmap)");

  cfg.seed = r.u64("seed", 1);

  cfg.constants.zero_field_splitting_d_hz =
      r.num("physics.zero_field_splitting_hz", cfg.constants.zero_field_splitting_d_hz);
  r.check(cfg.constants.zero_field_splitting_d_hz > 0, "physics.zero_field_splitting_hz",
          "must be > 0");
  cfg.constants.gamma_electron_hz_per_t =
      r.num("physics.gamma_electron_hz_per_t", cfg.constants.gamma_electron_hz_per_t);
  r.check(cfg.constants.gamma_electron_hz_per_t > 0, "physics.gamma_electron_hz_per_t",
          "must be > 0");
  cfg.constants.mu0_over_4pi = r.num("physics.mu0_over_4pi", cfg.constants.mu0_over_4pi);
  r.check(cfg.constants.mu0_over_4pi > 0, "physics.mu0_over_4pi", "must be > 0");
  cfg.bias.magnitude_t = r.num("physics.b0_t", default_b0_for(cfg.kind));
  r.check(cfg.bias.magnitude_t >= 0, "physics.b0_t", "must be >= 0");
  cfg.bias.axis = parse_axis(r, "physics.bias_axis");

  cfg.readout.contrast = r.num("readout.contrast", cfg.readout.contrast);
  r.check(cfg.readout.contrast > 0 && cfg.readout.contrast <= 1, "readout.contrast",
          "must be in (0, 1]");
  cfg.readout.baseline = r.num("readout.baseline", cfg.readout.baseline);
  r.check(cfg.readout.baseline > 0, "readout.baseline", "must be > 0");

  cfg.noise.sigma = r.num("noise.sigma", 0.0);
  r.check(cfg.noise.sigma >= 0, "noise.sigma", "must be >= 0");
  cfg.noise.averages = r.integer("noise.averages", default_averages_for(cfg.kind));
  r.check(cfg.noise.averages >= 1, "noise.averages", "must be >= 1");

  switch (cfg.kind) {
    case ExperimentKind::Rabi: {
      auto& p = cfg.rabi;
      p.omega_hz = r.num("rabi.omega_hz", p.omega_hz);
      r.check(p.omega_hz > 0, "rabi.omega_hz", "must be > 0");
      p.t_max_s = r.num("rabi.t_max_s", p.t_max_s);
      r.check(p.t_max_s > 0, "rabi.t_max_s", "must be > 0");
      p.n_points = static_cast<int>(r.integer("rabi.n_points", p.n_points));
      r.check(p.n_points >= 8, "rabi.n_points", "must be >= 8");
      p.drive_decay_s = r.num("rabi.drive_decay_s", p.drive_decay_s);
      r.check(p.drive_decay_s >= 0, "rabi.drive_decay_s", "must be >= 0 (0 disables)");
      break;
    }
    case ExperimentKind::T1: {
      auto& p = cfg.t1;
      p.tau_min_s = r.num("t1.tau_min_s", p.tau_min_s);
      p.tau_max_s = r.num("t1.tau_max_s", p.tau_max_s);
      r.check(p.tau_min_s > 0, "t1.tau_min_s", "must be > 0");
      r.check(p.tau_max_s > p.tau_min_s, "t1.tau_max_s", "must be > t1.tau_min_s");
      p.n_points = static_cast<int>(r.integer("t1.n_points", p.n_points));
      r.check(p.n_points >= 2, "t1.n_points", "must be >= 2");
      p.concentrations_mol_per_l =
          r.num_list("t1.concentrations_mol_per_l", p.concentrations_mol_per_l);
      for (double c : p.concentrations_mol_per_l)
        r.check(c >= 0, "t1.concentrations_mol_per_l", "concentrations must be >= 0");
      p.rate_constant_k = r.num("t1.rate_constant_k", p.rate_constant_k);
      r.check(p.rate_constant_k >= 0, "t1.rate_constant_k", "must be >= 0");
      p.intrinsic_gamma1 = r.num("t1.intrinsic_gamma1", p.intrinsic_gamma1);
      r.check(p.intrinsic_gamma1 >= 0, "t1.intrinsic_gamma1", "must be >= 0");
      p.weight_fast = r.num("t1.weight_fast", p.weight_fast);
      r.check(p.weight_fast >= 0 && p.weight_fast <= 1, "t1.weight_fast", "must be in [0, 1]");
      p.fast_rate_ratio = r.num("t1.fast_rate_ratio", p.fast_rate_ratio);
      r.check(p.fast_rate_ratio >= 1, "t1.fast_rate_ratio", "must be >= 1");
      break;
    }
    case ExperimentKind::Correlation: {
      auto& p = cfg.correlation;
      p.fid.species = "19F";
      p.fid.t2star_s = 200e-6;
      p.fid.amplitude_t = 100e-9;
      read_fid(r, p.fid);
      p.tcorr_min_s = r.num("correlation.tcorr_min_s", p.tcorr_min_s);
      p.tcorr_max_s = r.num("correlation.tcorr_max_s", p.tcorr_max_s);
      r.check(p.tcorr_min_s > 0, "correlation.tcorr_min_s", "must be > 0");
      r.check(p.tcorr_max_s > p.tcorr_min_s, "correlation.tcorr_max_s",
              "must be > correlation.tcorr_min_s");
      p.n_points = static_cast<int>(r.integer("correlation.n_points", p.n_points));
      r.check(p.n_points >= 2, "correlation.n_points", "must be >= 2");
      p.n_pulses = static_cast<int>(r.integer("correlation.n_pulses", p.n_pulses));
      r.check(p.n_pulses > 0 && p.n_pulses % 8 == 0, "correlation.n_pulses",
              "must be a positive multiple of 8");
      p.tau_interpulse_s = r.num("correlation.tau_interpulse_s", p.tau_interpulse_s);
      r.check(p.tau_interpulse_s >= 0, "correlation.tau_interpulse_s",
              "must be >= 0 (0 selects resonance)");
      p.phase_samples = static_cast<int>(r.integer("correlation.phase_samples", p.phase_samples));
      r.check(p.phase_samples >= 1, "correlation.phase_samples", "must be >= 1");
      break;
    }
    case ExperimentKind::Casr: {
      auto& p = cfg.casr;
      p.fid.species = "1H";
      p.fid.t2star_s = 1.0 / (M_PI * 5.0);
      p.fid.amplitude_t = 10e-9;
      read_fid(r, p.fid);
      p.record_s = r.num("casr.record_s", p.record_s);
      r.check(p.record_s > 0, "casr.record_s", "must be > 0");
      p.n_repetitions = static_cast<int>(r.integer("casr.n_repetitions", p.n_repetitions));
      r.check(p.n_repetitions >= 2, "casr.n_repetitions", "must be >= 2");
      p.subsequence_s = r.num("casr.subsequence_s", p.subsequence_s);
      r.check(p.subsequence_s >= 0, "casr.subsequence_s", "must be >= 0 (0 derives from record)");
      if (p.subsequence_s > 0 && p.n_repetitions >= 2 && p.record_s > 0) {
        const double implied = p.subsequence_s * p.n_repetitions;
        r.check(std::abs(implied - p.record_s) <= 1e-9 * p.record_s, "casr.subsequence_s",
                "inconsistent timing: subsequence_s * n_repetitions must equal record_s");
      }
      p.dnp_gain = r.num("casr.dnp_gain", p.dnp_gain);
      r.check(p.dnp_gain >= 1, "casr.dnp_gain", "must be >= 1");
      p.dnp_pump_hz = r.num("casr.dnp_pump_hz", p.dnp_pump_hz);
      r.check(p.dnp_pump_hz >= 0, "casr.dnp_pump_hz", "must be >= 0 (0 assumes resonant)");
      break;
    }
    case ExperimentKind::Sensitivity: {
      auto& p = cfg.sensitivity;
      read_channel(r, p.channel);
      p.sensor_diameter_um = r.num("geometry.sensor.diameter_um", p.sensor_diameter_um);
      r.check(p.sensor_diameter_um > 0, "geometry.sensor.diameter_um", "must be > 0");
      p.dnv_min_um = r.num("sensitivity.dnv_min_um", p.dnv_min_um);
      p.dnv_max_um = r.num("sensitivity.dnv_max_um", p.dnv_max_um);
      p.dnv_step_um = r.num("sensitivity.dnv_step_um", p.dnv_step_um);
      r.check(p.dnv_min_um > 0, "sensitivity.dnv_min_um", "must be > 0");
      r.check(p.dnv_max_um > p.dnv_min_um, "sensitivity.dnv_max_um",
              "must be > sensitivity.dnv_min_um");
      r.check(p.dnv_step_um > 0, "sensitivity.dnv_step_um", "must be > 0");
      p.n_nv_samples = static_cast<int>(r.integer("mc.n_nv_samples", p.n_nv_samples));
      p.n_spin_samples = static_cast<int>(r.integer("mc.n_spin_samples", p.n_spin_samples));
      p.n_averages = static_cast<int>(r.integer("mc.n_averages", p.n_averages));
      p.n_bootstrap = static_cast<int>(r.integer("mc.n_bootstrap", p.n_bootstrap));
      r.check(p.n_nv_samples >= 1, "mc.n_nv_samples", "must be >= 1");
      r.check(p.n_spin_samples >= 1, "mc.n_spin_samples", "must be >= 1");
      r.check(p.n_averages >= 2, "mc.n_averages", "must be >= 2");
      r.check(p.n_bootstrap >= 2, "mc.n_bootstrap", "must be >= 2");
      p.species = r.str("sensitivity.species", p.species);
      break;
    }
    case ExperimentKind::SignMap: {
      auto& p = cfg.signmap;
      read_channel(r, p.channel);
      p.sensor_diameter_um = r.num("geometry.sensor.diameter_um", p.sensor_diameter_um);
      p.sensor_depth_um = r.num("geometry.sensor.depth_um", p.sensor_depth_um);
      r.check(p.sensor_diameter_um > 0, "geometry.sensor.diameter_um", "must be > 0");
      r.check(p.sensor_depth_um > 0, "geometry.sensor.depth_um", "must be > 0");
      p.nx = static_cast<int>(r.integer("signmap.nx", p.nx));
      p.nz = static_cast<int>(r.integer("signmap.nz", p.nz));
      r.check(p.nx >= 2, "signmap.nx", "must be >= 2");
      r.check(p.nz >= 2, "signmap.nz", "must be >= 2");
      p.n_nv_samples = static_cast<int>(r.integer("signmap.n_nv_samples", p.n_nv_samples));
      r.check(p.n_nv_samples >= 1, "signmap.n_nv_samples", "must be >= 1");
      p.species = r.str("signmap.species", p.species);
      break;
    }
  }

  // species lookups, checked here so the error names the key
  try {
    if (cfg.kind == ExperimentKind::Correlation) {
      if (cfg.correlation.fid.larmor_hz == 0) cfg.constants.gamma_of(cfg.correlation.fid.species);
    } else if (cfg.kind == ExperimentKind::Casr) {
      if (cfg.casr.fid.larmor_hz == 0) cfg.constants.gamma_of(cfg.casr.fid.species);
    } else if (cfg.kind == ExperimentKind::Sensitivity) {
      cfg.constants.moment_of(cfg.sensitivity.species);
    } else if (cfg.kind == ExperimentKind::SignMap) {
      cfg.constants.moment_of(cfg.signmap.species);
    }
  } catch (const std::exception& e) {
    r.errors.push_back(std::string("fid.species: ") + e.what());
  }

  r.finish();
  if (!r.errors.empty()) throw ScenarioError(std::move(r.errors));
  return cfg;
}

ScenarioConfig parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({path + ": cannot open scenario file"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// serialize
// ---------------------------------------------------------------------------

namespace {

void emit(std::map<std::string, std::string>& kv, const std::string& key, double v) {
  kv[key] = format_double(v);
}
void emit(std::map<std::string, std::string>& kv, const std::string& key, const std::string& v) {
  kv[key] = v;
}

void emit_fid(std::map<std::string, std::string>& kv, const FidScenario& fid) {
  emit(kv, "fid.species", fid.species);
  emit(kv, "fid.larmor_hz", fid.larmor_hz);
  emit(kv, "fid.amplitude_t", fid.amplitude_t);
  emit(kv, "fid.t2star_s", fid.t2star_s);
  emit(kv, "fid.phase0_rad", fid.phase0_rad);
  std::string lines;
  for (const auto& [off, w] : fid.lines) {
    if (!lines.empty()) lines += ",";
    lines += format_double(off) + ":" + format_double(w);
  }
  emit(kv, "fid.lines", lines);
}

void emit_channel(std::map<std::string, std::string>& kv, const ChannelGeometry& ch) {
  emit(kv, "geometry.channel.length_um", ch.length_um);
  emit(kv, "geometry.channel.width_um", ch.width_um);
  emit(kv, "geometry.channel.height_um", ch.height_um);
  emit(kv, "geometry.channel.floor_offset_um", ch.floor_offset_um);
}

}  // namespace

std::string ScenarioConfig::serialize() const {
  std::map<std::string, std::string> kv;
  emit(kv, "experiment", to_string(kind));
  kv["seed"] = std::to_string(seed);
  emit(kv, "physics.zero_field_splitting_hz", constants.zero_field_splitting_d_hz);
  emit(kv, "physics.gamma_electron_hz_per_t", constants.gamma_electron_hz_per_t);
  emit(kv, "physics.mu0_over_4pi", constants.mu0_over_4pi);
  emit(kv, "physics.b0_t", bias.magnitude_t);
  kv["physics.bias_axis"] = format_double(bias.axis.x()) + "," + format_double(bias.axis.y()) +
                            "," + format_double(bias.axis.z());
  emit(kv, "readout.contrast", readout.contrast);
  emit(kv, "readout.baseline", readout.baseline);
  emit(kv, "noise.sigma", noise.sigma);
  kv["noise.averages"] = std::to_string(noise.averages);

  switch (kind) {
    case ExperimentKind::Rabi:
      emit(kv, "rabi.omega_hz", rabi.omega_hz);
      emit(kv, "rabi.t_max_s", rabi.t_max_s);
      kv["rabi.n_points"] = std::to_string(rabi.n_points);
      emit(kv, "rabi.drive_decay_s", rabi.drive_decay_s);
      break;
    case ExperimentKind::T1: {
      emit(kv, "t1.tau_min_s", t1.tau_min_s);
      emit(kv, "t1.tau_max_s", t1.tau_max_s);
      kv["t1.n_points"] = std::to_string(t1.n_points);
      std::string cs;
      for (double c : t1.concentrations_mol_per_l) {
        if (!cs.empty()) cs += ",";
        cs += format_double(c);
      }
      kv["t1.concentrations_mol_per_l"] = cs;
      emit(kv, "t1.rate_constant_k", t1.rate_constant_k);
      emit(kv, "t1.intrinsic_gamma1", t1.intrinsic_gamma1);
      emit(kv, "t1.weight_fast", t1.weight_fast);
      emit(kv, "t1.fast_rate_ratio", t1.fast_rate_ratio);
      break;
    }
    case ExperimentKind::Correlation:
      emit_fid(kv, correlation.fid);
      emit(kv, "correlation.tcorr_min_s", correlation.tcorr_min_s);
      emit(kv, "correlation.tcorr_max_s", correlation.tcorr_max_s);
      kv["correlation.n_points"] = std::to_string(correlation.n_points);
      kv["correlation.n_pulses"] = std::to_string(correlation.n_pulses);
      emit(kv, "correlation.tau_interpulse_s", correlation.tau_interpulse_s);
      kv["correlation.phase_samples"] = std::to_string(correlation.phase_samples);
      break;
    case ExperimentKind::Casr:
      emit_fid(kv, casr.fid);
      emit(kv, "casr.record_s", casr.record_s);
      kv["casr.n_repetitions"] = std::to_string(casr.n_repetitions);
      emit(kv, "casr.subsequence_s", casr.subsequence_s);
      emit(kv, "casr.dnp_gain", casr.dnp_gain);
      emit(kv, "casr.dnp_pump_hz", casr.dnp_pump_hz);
      break;
    case ExperimentKind::Sensitivity:
      emit_channel(kv, sensitivity.channel);
      emit(kv, "geometry.sensor.diameter_um", sensitivity.sensor_diameter_um);
      emit(kv, "sensitivity.dnv_min_um", sensitivity.dnv_min_um);
      emit(kv, "sensitivity.dnv_max_um", sensitivity.dnv_max_um);
      emit(kv, "sensitivity.dnv_step_um", sensitivity.dnv_step_um);
      kv["mc.n_nv_samples"] = std::to_string(sensitivity.n_nv_samples);
      kv["mc.n_spin_samples"] = std::to_string(sensitivity.n_spin_samples);
      kv["mc.n_averages"] = std::to_string(sensitivity.n_averages);
      kv["mc.n_bootstrap"] = std::to_string(sensitivity.n_bootstrap);
      emit(kv, "sensitivity.species", sensitivity.species);
      break;
    case ExperimentKind::SignMap:
      emit_channel(kv, signmap.channel);
      emit(kv, "geometry.sensor.diameter_um", signmap.sensor_diameter_um);
      emit(kv, "geometry.sensor.depth_um", signmap.sensor_depth_um);
      kv["signmap.nx"] = std::to_string(signmap.nx);
      kv["signmap.nz"] = std::to_string(signmap.nz);
      kv["signmap.n_nv_samples"] = std::to_string(signmap.n_nv_samples);
      emit(kv, "signmap.species", signmap.species);
      break;
  }

  std::string out;
  for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

FidModel FidScenario::resolve(const PhysicsConstants& constants, const MagneticBias& bias) const {
  FidModel fid;
  fid.larmor_hz =
      larmor_hz > 0 ? larmor_hz : larmor_frequency(constants.gamma_of(species), bias.magnitude_t);
  fid.line_splittings = lines;
  fid.decay_time_t2star_s = t2star_s;
  fid.amplitude_t = amplitude_t;
  fid.phase0_rad = phase0_rad;
  fid.validate();
  return fid;
}

double sensing_volume_pl(double spot_diameter_um, double channel_height_um) {
  if (spot_diameter_um < 0 || channel_height_um < 0)
    throw std::invalid_argument("sensing_volume: inputs must be >= 0");
  const double r = 0.5 * spot_diameter_um;
  return M_PI * r * r * channel_height_um * 1e-3;  // um^3 -> pL
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for digest: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed for: " + path);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

// ---------------------------------------------------------------------------
// run dispatch
// ---------------------------------------------------------------------------

namespace {

struct RunContext {
  const ScenarioConfig& cfg;
  const RunOptions& opts;
  std::vector<std::string> outputs;  // file names relative to out_dir

  std::string path(const std::string& name) const {
    return (fs::path(opts.out_dir) / name).string();
  }
  void log(const std::string& line) const {
    if (opts.log) *opts.log << line << "\n";
  }
  void write_trace(const std::string& name, const TimeTrace& tr) {
    std::vector<std::vector<double>> rows;
    rows.reserve(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) rows.push_back({tr.times[i], tr.values[i]});
    write_csv(path(name), {"time_s", "value"}, rows);
    outputs.push_back(name);
  }
  void write_spectrum(const std::string& name, const PowerSpectrum& ps) {
    std::vector<std::vector<double>> rows;
    rows.reserve(ps.size());
    for (std::size_t k = 0; k < ps.size(); ++k) rows.push_back({ps.frequency(k), ps.values[k]});
    write_csv(path(name), {"freq_hz", "power"}, rows);
    outputs.push_back(name);
  }
};

void run_rabi_scenario(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& p = cfg.rabi;
  std::vector<double> durations(static_cast<std::size_t>(p.n_points));
  const double dt = p.t_max_s / static_cast<double>(p.n_points - 1);
  for (int i = 0; i < p.n_points; ++i) durations[static_cast<std::size_t>(i)] = i * dt;
  const double decay =
      p.drive_decay_s > 0 ? p.drive_decay_s : std::numeric_limits<double>::infinity();
  const TimeTrace tr =
      run_rabi(p.omega_hz, durations, cfg.readout, decay, cfg.noise, cfg.seed);
  ctx.write_trace("rabi_trace.csv", tr);

  const FitResult fit = fit_decaying_sinusoid(tr);
  const double f = fit.param("frequency");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "rabi: fitted Omega = %.6g MHz, t_pi = %.4g ns%s", f * 1e-6,
                0.5e9 / f, fit.converged ? "" : " (fit did not converge)");
  ctx.log(buf);

  SvgSeries s;
  s.x = tr.times;
  s.y = tr.values;
  s.label = "simulated fluorescence";
  write_line_plot_svg(ctx.path("rabi_trace.svg"), "Rabi oscillation", "pulse duration (s)",
                      "normalized fluorescence", {s});
  ctx.outputs.push_back("rabi_trace.svg");
}

void run_t1_scenario(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& p = cfg.t1;
  const std::vector<double> taus = log_spaced(p.tau_min_s, p.tau_max_s, p.n_points);
  const T1DecayModel model{p.weight_fast, p.fast_rate_ratio};
  static const char* colors[] = {"#1f6fb2", "#d64541", "#2e8b57", "#8e44ad", "#e67e22"};
  std::vector<SvgSeries> series;
  for (std::size_t i = 0; i < p.concentrations_mol_per_l.size(); ++i) {
    const GdSample sample{p.concentrations_mol_per_l[i], p.rate_constant_k, p.intrinsic_gamma1};
    const TimeTrace tr = run_t1(taus, sample, cfg.readout, model, cfg.noise, cfg.seed + i);
    const std::string name = "t1_trace_" + std::to_string(i) + ".csv";
    ctx.write_trace(name, tr);

    const FitResult fit = fit_biexponential(tr);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "t1[%zu]: c = %.3g M, Gamma1(model) = %.6g /s, fit combined rate = %.6g /s%s", i,
                  p.concentrations_mol_per_l[i], gd_relaxation_rate(sample),
                  fit.param("combined_rate"),
                  fit.has_flag("rate_degenerate") ? " [single-exponential]" : "");
    ctx.log(buf);

    SvgSeries s;
    s.x = tr.times;
    s.y = tr.values;
    s.color = colors[i % 5];
    s.label = format_double(p.concentrations_mol_per_l[i] * 1e6) + " uM";
    series.push_back(std::move(s));
  }
  write_line_plot_svg(ctx.path("t1_curves.svg"), "T1 relaxation vs Gd3+ concentration",
                      "delay tau (s, log)", "normalized signal", series, /*log_x=*/true);
  ctx.outputs.push_back("t1_curves.svg");
}

void run_correlation_scenario(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& p = cfg.correlation;
  const FidModel fid = p.fid.resolve(cfg.constants, cfg.bias);
  CorrelationBlock block;
  block.n_pulses = p.n_pulses;
  block.tau_interpulse_s =
      p.tau_interpulse_s > 0 ? p.tau_interpulse_s : 1.0 / (2.0 * fid.larmor_hz);

  std::vector<double> grid(static_cast<std::size_t>(p.n_points));
  const double dt = (p.tcorr_max_s - p.tcorr_min_s) / static_cast<double>(p.n_points - 1);
  for (int i = 0; i < p.n_points; ++i)
    grid[static_cast<std::size_t>(i)] = p.tcorr_min_s + i * dt;

  const TimeTrace tr = run_correlation(grid, fid, block, cfg.constants.gamma_electron_hz_per_t,
                                       p.phase_samples, cfg.noise, cfg.seed);
  ctx.write_trace("correlation_trace.csv", tr);
  const PowerSpectrum ps = power_spectrum(tr);
  ctx.write_spectrum("correlation_spectrum.csv", ps);

  const double f_peak = ps.frequency(ps.peak_bin());
  const double f_alias = alias_frequency(fid.larmor_hz, 1.0 / dt);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "correlation: spectrum peak at %.6g MHz (alias prediction %.6g MHz)",
                f_peak * 1e-6, f_alias * 1e-6);
  ctx.log(buf);

  SvgSeries st{tr.times, tr.values, "#1f6fb2", "correlation signal"};
  write_line_plot_svg(ctx.path("correlation_trace.svg"), "Correlation spectroscopy time trace",
                      "t_corr (s)", "signal", {st});
  ctx.outputs.push_back("correlation_trace.svg");
  std::vector<double> freq(ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k) freq[k] = ps.frequency(k);
  SvgSeries ss{freq, ps.values, "#d64541", "power"};
  write_line_plot_svg(ctx.path("correlation_spectrum.svg"), "NMR power spectrum",
                      "frequency (Hz)", "power", {ss});
  ctx.outputs.push_back("correlation_spectrum.svg");
}

void run_casr_scenario(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& p = cfg.casr;
  const FidModel fid = p.fid.resolve(cfg.constants, cfg.bias);
  const double dt =
      p.subsequence_s > 0 ? p.subsequence_s : p.record_s / static_cast<double>(p.n_repetitions);

  DnpConfig dnp_cfg;
  dnp_cfg.gain = p.dnp_gain;
  dnp_cfg.pump_frequency_hz = p.dnp_pump_hz > 0
                                  ? p.dnp_pump_hz
                                  : cfg.constants.gamma_electron_hz_per_t * cfg.bias.magnitude_t;
  const DnpResult dnp = dnp_pump(dnp_cfg, cfg.constants, cfg.bias);
  if (!dnp.resonant) ctx.log("warning: " + dnp.message);

  const TimeTrace tr = run_casr(fid, dt, p.n_repetitions, cfg.constants.gamma_electron_hz_per_t,
                                dnp.gain, cfg.noise, cfg.seed, p.record_s);
  ctx.write_trace("casr_trace.csv", tr);
  const PowerSpectrum ps = power_spectrum(tr);
  ctx.write_spectrum("casr_spectrum.csv", ps);

  const int n_peaks = fid.line_splittings.size() >= 2 ? 2 : 1;
  // lines from one FID are phase coherent; fit the interference-aware shape
  const FitResult fit = fit_lorentzian(ps, n_peaks, LineModel::Coherent);
  if (n_peaks == 2) {
    const double split = fit.param("center_2") - fit.param("center_1");
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "casr: doublet splitting %.4g Hz, FWHM %.4g / %.4g Hz (%.3g ppm at %.6g MHz)",
                  split, fit.param("fwhm_1"), fit.param("fwhm_2"),
                  hz_to_ppm(fit.param("fwhm_1"), fid.larmor_hz), fid.larmor_hz * 1e-6);
    ctx.log(buf);
  } else {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "casr: line at %.6g Hz, FWHM %.4g Hz",
                  fit.param("center_1"), fit.param("fwhm_1"));
    ctx.log(buf);
  }

  SvgSeries st{tr.times, tr.values, "#1f6fb2", "CASR signal"};
  write_line_plot_svg(ctx.path("casr_trace.svg"), "CASR time trace", "time (s)", "signal", {st});
  ctx.outputs.push_back("casr_trace.svg");
  std::vector<double> freq(ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k) freq[k] = ps.frequency(k);
  SvgSeries ss{freq, ps.values, "#d64541", "power"};
  write_line_plot_svg(ctx.path("casr_spectrum.svg"), "CASR NMR power spectrum", "frequency (Hz)",
                      "power", {ss});
  ctx.outputs.push_back("casr_spectrum.svg");
}

void run_sensitivity_scenario(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  auto p = cfg.sensitivity;
  if (ctx.opts.paper_scale) {
    p.n_nv_samples = 40;
    p.n_spin_samples = 32000;
    p.n_averages = 10000;
  }
  std::vector<double> grid;
  for (double d = p.dnv_min_um; d <= p.dnv_max_um + 1e-9; d += p.dnv_step_um) grid.push_back(d);

  McParams mc{p.n_nv_samples, p.n_spin_samples, p.n_averages, cfg.seed};
  const SensitivityCurve curve =
      sensitivity_curve(grid, p.channel, p.sensor_diameter_um, mc, cfg.constants, cfg.bias.axis,
                        p.species, ctx.opts.n_workers, p.n_bootstrap);

  std::vector<std::vector<double>> rows;
  for (const auto& pt : curve.points) rows.push_back({pt.d_nv_um, pt.value, pt.stderr_});
  write_csv(ctx.path("sensitivity_curve.csv"), {"d_nv_um", "signal_norm", "stderr"}, rows);
  ctx.outputs.push_back("sensitivity_curve.csv");

  const auto& best = curve.points[curve.argmax()];
  char buf[160];
  std::snprintf(buf, sizeof(buf), "sensitivity: maximum at d_NV = %.4g um (value 1, stderr %.3g)",
                best.d_nv_um, best.stderr_);
  ctx.log(buf);

  SvgSeries s;
  for (const auto& pt : curve.points) {
    s.x.push_back(pt.d_nv_um);
    s.y.push_back(pt.value);
  }
  s.label = "normalized B*sqrt(d_NV)";
  write_line_plot_svg(ctx.path("sensitivity_curve.svg"), "NV layer thickness optimization",
                      "d_NV (um)", "normalized sensitivity", {s});
  ctx.outputs.push_back("sensitivity_curve.svg");
}

void run_signmap_scenario(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& p = cfg.signmap;
  SensorCylinder sensor;
  sensor.diameter_um = p.sensor_diameter_um;
  sensor.depth_um = p.sensor_depth_um;
  const SignMap map = sign_map(p.channel, sensor, p.nx, p.nz, p.n_nv_samples, cfg.seed,
                               cfg.constants, cfg.bias.axis, p.species);

  std::vector<std::vector<double>> rows;
  for (int j = 0; j < map.nz; ++j)
    for (int i = 0; i < map.nx; ++i)
      rows.push_back({map.x0_um + i * map.dx_um, map.z0_um + j * map.dz_um,
                      static_cast<double>(map.sign_at(i, j))});
  write_csv(ctx.path("sign_map.csv"), {"x_um", "z_um", "sign"}, rows);
  ctx.outputs.push_back("sign_map.csv");

  write_sign_map_svg(ctx.path("sign_map.svg"),
                     "Signal contribution sign over the channel cross-section", map.nx, map.nz,
                     map.signs);
  ctx.outputs.push_back("sign_map.svg");
}

}  // namespace

RunManifest run_scenario(const ScenarioConfig& config, const RunOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(opts.out_dir);

  RunContext ctx{config, opts, {}};
  switch (config.kind) {
    case ExperimentKind::Rabi: run_rabi_scenario(ctx); break;
    case ExperimentKind::T1: run_t1_scenario(ctx); break;
    case ExperimentKind::Correlation: run_correlation_scenario(ctx); break;
    case ExperimentKind::Casr: run_casr_scenario(ctx); break;
    case ExperimentKind::Sensitivity: run_sensitivity_scenario(ctx); break;
    case ExperimentKind::SignMap: run_signmap_scenario(ctx); break;
  }

  RunManifest manifest;
  manifest.toolkit_version = kToolkitVersion;
  manifest.seed = config.seed;
  manifest.config_text = config.serialize();
  for (const auto& name : ctx.outputs)
    manifest.output_sha256.emplace_back(name, sha256_file(ctx.path(name)));
  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  std::string text;
  text += "manifest.toolkit_version = " + manifest.toolkit_version + "\n";
  text += "manifest.seed = " + std::to_string(manifest.seed) + "\n";
  text += "manifest.wall_clock_s = " + format_double(manifest.wall_clock_s) + "\n";
  for (const auto& [name, digest] : manifest.output_sha256)
    text += "manifest.output." + name + ".sha256 = " + digest + "\n";
  {
    std::istringstream cfg_lines(manifest.config_text);
    std::string line;
    while (std::getline(cfg_lines, line)) text += "config." + line + "\n";
  }

  const std::string name = to_string(config.kind) + "_manifest.txt";
  manifest.manifest_path = ctx.path(name);
  const std::string tmp = manifest.manifest_path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write manifest: " + tmp);
    out << text;
  }
  fs::rename(tmp, manifest.manifest_path);
  return manifest;
}

}  // namespace nvsim
