#include "nvsim/protocols.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nvsim/rng.hpp"

namespace nvsim {

namespace {
constexpr std::uint64_t kNoiseDomain = 0x6e6f697365ULL;  // stream tag
}

double NoiseParams::effective_sigma() const {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
  if (averages < 1) throw std::invalid_argument("averages must be >= 1");
  return sigma / std::sqrt(static_cast<double>(averages));
}

// ---------------------------------------------------------------------------
// Rabi
// ---------------------------------------------------------------------------

std::vector<PulseSequence> build_rabi(double omega_hz, const std::vector<double>& durations_s) {
  if (!(omega_hz > 0)) throw std::invalid_argument("rabi frequency must be > 0");
  if (durations_s.empty()) throw std::invalid_argument("empty duration list");
  for (std::size_t i = 0; i < durations_s.size(); ++i) {
    if (durations_s[i] < 0) throw std::invalid_argument("durations must be >= 0");
    if (i > 0 && durations_s[i] < durations_s[i - 1])
      throw std::invalid_argument("durations must be sorted ascending");
  }
  std::vector<PulseSequence> seqs;
  seqs.reserve(durations_s.size());
  for (double d : durations_s) {
    PulseSequence seq;
    seq.elements.push_back(PulseElement::laser_init());
    if (d > 0) seq.elements.push_back(PulseElement::microwave(omega_hz, d));
    seq.elements.push_back(PulseElement::readout());
    seqs.push_back(std::move(seq));
  }
  return seqs;
}

TimeTrace run_rabi(double omega_hz, const std::vector<double>& durations_s,
                   const ReadoutParams& readout, double drive_decay_s, const NoiseParams& noise,
                   std::uint64_t seed) {
  const auto seqs = build_rabi(omega_hz, durations_s);
  if (durations_s.size() < 2) throw std::invalid_argument("need >= 2 durations for a trace");
  const double dt = durations_s[1] - durations_s[0];
  for (std::size_t i = 1; i < durations_s.size(); ++i)
    if (std::abs(durations_s[i] - durations_s[i - 1] - dt) > 1e-9 * dt)
      throw std::invalid_argument("duration grid must be uniform");

  const double sig = noise.effective_sigma();
  std::vector<double> values(durations_s.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    // run the driven rotation, then damp the whole vector toward the mixed
    // state with the drive-decay envelope
    SequenceResult res = run_sequence(seqs[i], RelaxationParams::none(), readout);
    double value = res.readouts.at(0);
    if (std::isfinite(drive_decay_s)) {
      if (!(drive_decay_s > 0)) throw std::invalid_argument("drive decay must be > 0");
      const double env = std::exp(-durations_s[i] / drive_decay_s);
      BlochState damped = res.final_state;
      damped.x *= env;
      damped.y *= env;
      damped.z *= env;
      value = readout_contrast(damped, readout.contrast, readout.baseline);
    }
    if (sig > 0) {
      RngStream stream(seed, {kNoiseDomain, 1, static_cast<std::uint64_t>(i)});
      value += sig * stream.normal();
    }
    values[i] = value;
  }
  TimeTrace tr = TimeTrace::uniform(durations_s.front(), dt, std::move(values));
  tr.metadata["experiment"] = "rabi";
  return tr;
}

// ---------------------------------------------------------------------------
// T1 relaxometry
// ---------------------------------------------------------------------------

void GdSample::validate() const {
  if (concentration_mol_per_l < 0 || rate_constant_k < 0 || intrinsic_gamma1 < 0)
    throw std::invalid_argument("GdSample fields must be >= 0");
}

double gd_relaxation_rate(const GdSample& sample) {
  sample.validate();
  return sample.intrinsic_gamma1 + sample.rate_constant_k * sample.concentration_mol_per_l;
}

void T1DecayModel::validate() const {
  if (weight_fast < 0 || weight_fast > 1)
    throw std::invalid_argument("weight_fast must be in [0, 1]");
  if (!(fast_rate_ratio >= 1.0))
    throw std::invalid_argument("fast_rate_ratio must be >= 1");
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0) || !(hi > lo)) throw std::invalid_argument("need 0 < lo < hi");
  if (n < 2) throw std::invalid_argument("need n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

TimeTrace run_t1(const std::vector<double>& taus_s, const GdSample& sample,
                 const ReadoutParams& readout, const T1DecayModel& model,
                 const NoiseParams& noise, std::uint64_t seed) {
  if (taus_s.size() < 2) throw std::invalid_argument("need >= 2 delays");
  for (double tau : taus_s)
    if (!(tau > 0)) throw std::invalid_argument("delays must be > 0");
  model.validate();
  const double gamma1 = gd_relaxation_rate(sample);
  const double sig = noise.effective_sigma();

  const BlochState init{0.0, 0.0, 1.0};
  RelaxationParams slow{gamma1, 0.5 * gamma1, 0.0};
  RelaxationParams fast{gamma1 * model.fast_rate_ratio, 0.5 * gamma1 * model.fast_rate_ratio, 0.0};
  const double f0 = readout_contrast(init, readout.contrast, readout.baseline);
  const double finf = readout_contrast(BlochState{0, 0, 0}, readout.contrast, readout.baseline);

  std::vector<double> values(taus_s.size());
  for (std::size_t i = 0; i < taus_s.size(); ++i) {
    const double zs = evolve_free(init, 0.0, taus_s[i], slow).z;
    const double zf = evolve_free(init, 0.0, taus_s[i], fast).z;
    const double z = (1.0 - model.weight_fast) * zs + model.weight_fast * zf;
    const double fl = readout_contrast(BlochState{0, 0, z}, readout.contrast, readout.baseline);
    double value = (fl - finf) / (f0 - finf);
    if (sig > 0) {
      RngStream stream(seed, {kNoiseDomain, 2, static_cast<std::uint64_t>(i)});
      value += sig * stream.normal();
    }
    values[i] = value;
  }
  TimeTrace tr = TimeTrace::sampled(taus_s, std::move(values));
  tr.metadata["experiment"] = "t1";
  return tr;
}

// ---------------------------------------------------------------------------
// AC sensing
// ---------------------------------------------------------------------------

void FidModel::validate() const {
  if (!(larmor_hz >= 0)) throw std::invalid_argument("larmor must be >= 0");
  if (!(decay_time_t2star_s > 0)) throw std::invalid_argument("T2* must be > 0");
  if (amplitude_t < 0) throw std::invalid_argument("amplitude must be >= 0");
  if (line_splittings.empty()) throw std::invalid_argument("need at least one line");
  double wsum = 0;
  for (const auto& [off, w] : line_splittings) {
    (void)off;
    if (!(w > 0)) throw std::invalid_argument("line weights must be > 0");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw std::invalid_argument("line weights must sum to 1");
}

double xy8_accumulated_phase(double amplitude_t, double freq_hz, double phase0_rad,
                             double tau_interpulse_s, int n_pulses, double gamma_nv_hz_per_t,
                             double start_time_s) {
  if (n_pulses <= 0 || n_pulses % 8 != 0)
    throw std::invalid_argument("n_pulses must be a positive multiple of 8");
  if (!(tau_interpulse_s > 0)) throw std::invalid_argument("tau_interpulse must be > 0");

  const double tau = tau_interpulse_s;
  const double w = 2.0 * M_PI * freq_hz;
  // segment boundaries: 0, tau/2, 3tau/2, ..., (n-1/2)tau, n*tau
  double integral = 0.0;
  double sign = 1.0;
  double t_lo = 0.0;
  for (int seg = 0; seg <= n_pulses; ++seg) {
    const double t_hi =
        (seg == n_pulses) ? static_cast<double>(n_pulses) * tau
                          : (static_cast<double>(seg) + 0.5) * tau;
    double piece;
    if (freq_hz == 0.0) {
      piece = std::cos(phase0_rad) * (t_hi - t_lo);
    } else {
      piece = (std::sin(w * (start_time_s + t_hi) + phase0_rad) -
               std::sin(w * (start_time_s + t_lo) + phase0_rad)) /
              w;
    }
    integral += sign * piece;
    sign = -sign;
    t_lo = t_hi;
  }
  return 2.0 * M_PI * gamma_nv_hz_per_t * amplitude_t * integral;
}

double xy8_accumulated_phase(const FidModel& fid, double tau_interpulse_s, int n_pulses,
                             double gamma_nv_hz_per_t, double start_time_s,
                             double amplitude_scale) {
  fid.validate();
  double phi = 0.0;
  for (const auto& [offset, weight] : fid.line_splittings) {
    phi += xy8_accumulated_phase(fid.amplitude_t * amplitude_scale * weight,
                                 fid.larmor_hz + offset, fid.phase0_rad, tau_interpulse_s,
                                 n_pulses, gamma_nv_hz_per_t, start_time_s);
  }
  return phi;
}

TimeTrace run_correlation(const std::vector<double>& t_corr_grid_s, const FidModel& fid,
                          const CorrelationBlock& block, double gamma_nv_hz_per_t,
                          int n_phase_samples, const NoiseParams& noise, std::uint64_t seed) {
  if (t_corr_grid_s.size() < 2) throw std::invalid_argument("t_corr grid needs >= 2 points");
  const double dt = t_corr_grid_s[1] - t_corr_grid_s[0];
  if (!(dt > 0)) throw std::invalid_argument("t_corr grid must ascend");
  for (std::size_t i = 1; i < t_corr_grid_s.size(); ++i)
    if (std::abs(t_corr_grid_s[i] - t_corr_grid_s[i - 1] - dt) > 1e-9 * dt)
      throw std::invalid_argument("t_corr grid must be uniform");
  if (n_phase_samples < 1) throw std::invalid_argument("need >= 1 phase sample");
  fid.validate();

  const double t_block = static_cast<double>(block.n_pulses) * block.tau_interpulse_s;
  const double sig = noise.effective_sigma();
  std::vector<double> values(t_corr_grid_s.size());

  for (std::size_t i = 0; i < t_corr_grid_s.size(); ++i) {
    const double t_corr = t_corr_grid_s[i];
    const double decay = std::exp(-t_corr / fid.decay_time_t2star_s);
    double acc = 0.0;
    for (int p = 0; p < n_phase_samples; ++p) {
      FidModel f = fid;
      f.phase0_rad = fid.phase0_rad +
                     2.0 * M_PI * static_cast<double>(p) / static_cast<double>(n_phase_samples);
      const double phi1 =
          xy8_accumulated_phase(f, block.tau_interpulse_s, block.n_pulses, gamma_nv_hz_per_t, 0.0);
      const double phi2 =
          xy8_accumulated_phase(f, block.tau_interpulse_s, block.n_pulses, gamma_nv_hz_per_t,
                                t_block + t_corr, decay);
      acc += std::sin(phi1) * std::sin(phi2);
    }
    double value = acc / static_cast<double>(n_phase_samples);
    if (sig > 0) {
      RngStream stream(seed, {kNoiseDomain, 3, static_cast<std::uint64_t>(i)});
      value += sig * stream.normal();
    }
    values[i] = value;
  }
  TimeTrace tr = TimeTrace::uniform(t_corr_grid_s.front(), dt, std::move(values));
  tr.metadata["experiment"] = "correlation";
  return tr;
}

double alias_frequency(double f_signal_hz, double f_sample_hz) {
  if (!(f_signal_hz > 0) || !(f_sample_hz > 0))
    throw std::invalid_argument("frequencies must be > 0");
  double r = std::fmod(f_signal_hz, f_sample_hz);
  if (r < 0) r += f_sample_hz;
  return std::min(r, f_sample_hz - r);
}

TimeTrace run_casr(const FidModel& fid, double subsequence_duration_s, int n_repetitions,
                   double gamma_nv_hz_per_t, double dnp_gain, const NoiseParams& noise,
                   std::uint64_t seed, double total_time_s) {
  fid.validate();
  if (!(subsequence_duration_s > 0)) throw std::invalid_argument("subsequence duration must be > 0");
  if (n_repetitions < 2) throw std::invalid_argument("need >= 2 repetitions");
  if (!(dnp_gain >= 1.0)) throw std::invalid_argument("dnp_gain must be >= 1");
  if (total_time_s > 0) {
    const double implied = subsequence_duration_s * static_cast<double>(n_repetitions);
    if (std::abs(implied - total_time_s) > 1e-9 * total_time_s)
      throw std::invalid_argument("inconsistent timing: subsequence * repetitions != total time");
  }

  const double dt = subsequence_duration_s;
  // resonant decoupling filter gain: mean of |cos| over a half period
  const double filter_gain = 2.0 / M_PI;
  const double sig = noise.effective_sigma();

  std::vector<double> values(static_cast<std::size_t>(n_repetitions));
  for (int k = 0; k < n_repetitions; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double env = std::exp(-t / fid.decay_time_t2star_s);
    double b_inst = 0.0;
    for (const auto& [offset, weight] : fid.line_splittings) {
      b_inst += fid.amplitude_t * weight * env *
                std::cos(2.0 * M_PI * (fid.larmor_hz + offset) * t + fid.phase0_rad);
    }
    const double phi = filter_gain * 2.0 * M_PI * gamma_nv_hz_per_t * dt * dnp_gain * b_inst;
    double value = std::sin(phi);
    if (sig > 0) {
      RngStream stream(seed, {kNoiseDomain, 4, static_cast<std::uint64_t>(k)});
      value += sig * stream.normal();
    }
    values[static_cast<std::size_t>(k)] = value;
  }
  TimeTrace tr = TimeTrace::uniform(0.0, dt, std::move(values));
  tr.metadata["experiment"] = "casr";
  return tr;
}

// ---------------------------------------------------------------------------
// DNP
// ---------------------------------------------------------------------------

DnpResult dnp_pump(const DnpConfig& config, const PhysicsConstants& constants,
                   const MagneticBias& bias) {
  if (!(config.gain >= 1.0)) throw std::invalid_argument("dnp gain must be >= 1");
  bias.validate();
  DnpResult res;
  res.gain = config.gain;
  res.electron_resonance_hz = constants.gamma_electron_hz_per_t * bias.magnitude_t;
  const double dev = std::abs(config.pump_frequency_hz - res.electron_resonance_hz);
  res.resonant = dev <= 0.05 * res.electron_resonance_hz;
  if (!res.resonant) {
    res.message = "dnp pump frequency deviates >5% from electron resonance (" +
                  std::to_string(res.electron_resonance_hz * 1e-9) + " GHz)";
  }
  return res;
}

}  // namespace nvsim
