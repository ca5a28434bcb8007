#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvsim/constants.hpp"
#include "nvsim/geometry.hpp"
#include "nvsim/protocols.hpp"

namespace nvsim {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Validation failure carrying one message per offending key.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

enum class ExperimentKind { Rabi, T1, Correlation, Casr, Sensitivity, SignMap };

std::string to_string(ExperimentKind kind);

struct RabiScenario {
  double omega_hz = 40e6;
  double t_max_s = 250e-9;
  int n_points = 251;
  double drive_decay_s = 0.0;  // 0 disables the envelope
};

struct T1Scenario {
  double tau_min_s = 200e-9;
  double tau_max_s = 5.5e-3;
  int n_points = 51;
  std::vector<double> concentrations_mol_per_l = {0.0, 1e-6, 10e-6};
  double rate_constant_k = 3e8;
  double intrinsic_gamma1 = 250.0;
  double weight_fast = 0.0;
  double fast_rate_ratio = 1.0;
};

/// FID description shared by the correlation and CASR scenarios. larmor_hz = 0
/// derives the frequency from (species, B0).
struct FidScenario {
  std::string species = "1H";
  double larmor_hz = 0.0;
  double amplitude_t = 100e-9;
  double t2star_s = 200e-6;
  double phase0_rad = 0.0;
  std::vector<std::pair<double, double>> lines = {{0.0, 1.0}};

  FidModel resolve(const PhysicsConstants& constants, const MagneticBias& bias) const;
};

struct CorrelationScenario {
  double tcorr_min_s = 2e-6;
  double tcorr_max_s = 502e-6;
  int n_points = 2501;
  int n_pulses = 32;             // XY8-4
  double tau_interpulse_s = 0.0; // 0 selects the resonant spacing 1/(2 f_L)
  int phase_samples = 128;
  FidScenario fid;
};

struct CasrScenario {
  double record_s = 1.0;
  int n_repetitions = 9470;
  double subsequence_s = 0.0;  // 0 derives record_s / n_repetitions
  double dnp_gain = 1.0;
  double dnp_pump_hz = 0.0;  // 0 skips the resonance check
  FidScenario fid;
};

struct SensitivityScenario {
  ChannelGeometry channel;
  double sensor_diameter_um = 45.0;
  double dnv_min_um = 5.0;
  double dnv_max_um = 150.0;
  double dnv_step_um = 5.0;
  int n_nv_samples = 32;
  int n_spin_samples = 2000;
  int n_averages = 120;
  int n_bootstrap = 200;
  std::string species = "1H";
};

struct SignMapScenario {
  ChannelGeometry channel;
  double sensor_diameter_um = 45.0;
  double sensor_depth_um = 50.0;
  int nx = 100;
  int nz = 16;
  int n_nv_samples = 1500;
  std::string species = "1H";
};

/// Declarative experiment description: one scenario per file, flat dotted
/// keys, '#' comments. Unknown keys are rejected; every value is validated
/// against the owning module's preconditions before dispatch.
struct ScenarioConfig {
  ExperimentKind kind = ExperimentKind::Rabi;
  std::uint64_t seed = 1;
  PhysicsConstants constants;
  MagneticBias bias;
  ReadoutParams readout;
  NoiseParams noise;

  RabiScenario rabi;
  T1Scenario t1;
  CorrelationScenario correlation;
  CasrScenario casr;
  SensitivityScenario sensitivity;
  SignMapScenario signmap;

  /// Resolved snapshot with every key explicit, sorted; parse(serialize(.))
  /// reproduces the config exactly.
  std::string serialize() const;
};

ScenarioConfig parse_scenario(const std::string& path);
ScenarioConfig parse_scenario_text(const std::string& text, const std::string& origin = "<text>");

struct RunOptions {
  std::string out_dir = ".";
  int n_workers = 1;
  bool paper_scale = false;  // restore the Methods Monte Carlo counts
  std::ostream* log = nullptr;
};

struct RunManifest {
  std::string toolkit_version;
  std::uint64_t seed = 0;
  double wall_clock_s = 0.0;
  std::vector<std::pair<std::string, std::string>> output_sha256;  // (file name, digest)
  std::string config_text;
  std::string manifest_path;
};

/// Dispatch a validated scenario, write CSV tables and SVG plots into
/// opts.out_dir, and finish with a manifest sufficient to reproduce the run.
RunManifest run_scenario(const ScenarioConfig& config, const RunOptions& opts = {});

/// Cylindrical detection volume pi*(d/2)^2*h in picoliters.
double sensing_volume_pl(double spot_diameter_um, double channel_height_um);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace nvsim
