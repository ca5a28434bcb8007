#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nvsim/constants.hpp"
#include "nvsim/pulse.hpp"
#include "nvsim/trace.hpp"

namespace nvsim {

/// Additive Gaussian readout noise; the per-point standard deviation is
/// sigma / sqrt(averages), matching shot-noise scaling of averaged shots.
struct NoiseParams {
  double sigma = 0.0;
  long averages = 1;

  double effective_sigma() const;
};

// ---------------------------------------------------------------------------
// Rabi
// ---------------------------------------------------------------------------

/// One sequence per pulse duration: LaserInit -> MicrowavePulse -> Readout.
std::vector<PulseSequence> build_rabi(double omega_hz, const std::vector<double>& durations_s);

/// Simulate the Rabi experiment on a uniformly spaced duration grid. An
/// optional exponential drive-decay envelope (infinite = none) damps the
/// oscillation toward the fully mixed state.
TimeTrace run_rabi(double omega_hz, const std::vector<double>& durations_s,
                   const ReadoutParams& readout,
                   double drive_decay_s = std::numeric_limits<double>::infinity(),
                   const NoiseParams& noise = {}, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// T1 relaxometry
// ---------------------------------------------------------------------------

/// Paramagnetic sample: relaxation enhancement linear in ion concentration.
struct GdSample {
  double concentration_mol_per_l = 0.0;
  double rate_constant_k = 0.0;  // 1/(s * mol/L)
  double intrinsic_gamma1 = 0.0;

  void validate() const;
};

/// Gamma1 = intrinsic + k * concentration.
double gd_relaxation_rate(const GdSample& sample);

/// Optional two-component longitudinal decay:
///   z(tau) = (1-w) exp(-Gamma1 tau) + w exp(-ratio * Gamma1 tau).
/// weight_fast = 0 reduces to a single exponential.
struct T1DecayModel {
  double weight_fast = 0.0;
  double fast_rate_ratio = 1.0;

  void validate() const;
};

/// Normalized T1 decay sampled at the given delays (positive, ascending,
/// typically the 51-point log grid from 200 ns to 5.5 ms).
TimeTrace run_t1(const std::vector<double>& taus_s, const GdSample& sample,
                 const ReadoutParams& readout, const T1DecayModel& model = {},
                 const NoiseParams& noise = {}, std::uint64_t seed = 0);

/// n logarithmically spaced points from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, int n);

// ---------------------------------------------------------------------------
// AC sensing (XY8 correlation spectroscopy, CASR)
// ---------------------------------------------------------------------------

/// Free-induction-decay signal at the NV: lines at larmor + offset with
/// weights summing to one, decaying with T2*, common initial phase.
struct FidModel {
  double larmor_hz = 0.0;
  std::vector<std::pair<double, double>> line_splittings = {{0.0, 1.0}};  // (offset, weight)
  double decay_time_t2star_s = 1.0;
  double amplitude_t = 0.0;
  double phase0_rad = 0.0;

  void validate() const;
};

/// Phase accumulated by the NV coherence under a pi-pulse train with spacing
/// tau (pulses at tau/2, 3tau/2, ...) in an AC field
/// b(t) = amplitude * cos(2 pi f t + phase0), integrated analytically from
/// start_time over n_pulses * tau. n_pulses must be a positive multiple of 8.
double xy8_accumulated_phase(double amplitude_t, double freq_hz, double phase0_rad,
                             double tau_interpulse_s, int n_pulses, double gamma_nv_hz_per_t,
                             double start_time_s = 0.0);

/// FidModel overload: sums the line contributions; the envelope is evaluated
/// once per block via amplitude_scale.
double xy8_accumulated_phase(const FidModel& fid, double tau_interpulse_s, int n_pulses,
                             double gamma_nv_hz_per_t, double start_time_s = 0.0,
                             double amplitude_scale = 1.0);

struct CorrelationBlock {
  double tau_interpulse_s = 0.0;
  int n_pulses = 32;  // XY8-4
};

/// Correlation spectroscopy: S(t_corr) = < sin(phi_1) sin(phi_2) > averaged
/// over the signal's initial phase (n_phase_samples deterministic samples).
/// The block-2 contribution decays with exp(-t_corr / T2*).
TimeTrace run_correlation(const std::vector<double>& t_corr_grid_s, const FidModel& fid,
                          const CorrelationBlock& block, double gamma_nv_hz_per_t,
                          int n_phase_samples = 128, const NoiseParams& noise = {},
                          std::uint64_t seed = 0);

/// Baseband alias of f_signal when sampled at f_sample: min(r, f_sample - r)
/// with r = f_signal mod f_sample. Result lies in [0, f_sample/2].
double alias_frequency(double f_signal_hz, double f_sample_hz);

/// Synchronized-readout NMR: n_repetitions back-to-back decoupling
/// subsequences of fixed duration; window k converts the instantaneous FID
/// value (scaled by dnp_gain and the resonant filter gain 2/pi) into an
/// accumulated phase, read out as sin(phase). The trace beats at the aliased
/// line frequencies.
TimeTrace run_casr(const FidModel& fid, double subsequence_duration_s, int n_repetitions,
                   double gamma_nv_hz_per_t, double dnp_gain = 1.0,
                   const NoiseParams& noise = {}, std::uint64_t seed = 0,
                   double total_time_s = 0.0);

// ---------------------------------------------------------------------------
// Overhauser DNP
// ---------------------------------------------------------------------------

struct DnpConfig {
  double gain = 1.0;
  double pump_frequency_hz = 0.0;
};

struct DnpResult {
  double gain = 1.0;
  double electron_resonance_hz = 0.0;
  bool resonant = true;  // pump within 5% of gamma_e * B0
  std::string message;
};

/// Validates the configured pump frequency against the free-electron
/// resonance gamma_e * B0; a >5% deviation is reported as a warning, not an
/// error. The gain itself is a scenario input.
DnpResult dnp_pump(const DnpConfig& config, const PhysicsConstants& constants,
                   const MagneticBias& bias);

}  // namespace nvsim
