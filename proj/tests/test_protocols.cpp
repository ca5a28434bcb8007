#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nvsim/dsp.hpp"
#include "nvsim/protocols.hpp"
#include "nvsim/rng.hpp"

using namespace nvsim;

namespace {

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return g;
}

/// numerical oracle for the decoupled phase integral: per-segment Simpson
/// quadrature of the field between pi pulses at tau/2, 3tau/2, ...
double xy8_phase_oracle(double b, double f, double phase0, double tau, int n_pulses, double gamma,
                        double t_start = 0.0) {
  auto field = [&](double t) { return b * std::cos(2 * M_PI * f * (t_start + t) + phase0); };
  auto simpson = [&](double lo, double hi) {
    const int n = 4096;
    const double h = (hi - lo) / n;
    double acc = field(lo) + field(hi);
    for (int i = 1; i < n; ++i) acc += field(lo + i * h) * ((i % 2) ? 4.0 : 2.0);
    return acc * h / 3.0;
  };
  double integral = 0.0;
  double sign = 1.0, t_lo = 0.0;
  for (int seg = 0; seg <= n_pulses; ++seg) {
    const double t_hi = (seg == n_pulses) ? n_pulses * tau : (seg + 0.5) * tau;
    integral += sign * simpson(t_lo, t_hi);
    sign = -sign;
    t_lo = t_hi;
  }
  return 2 * M_PI * gamma * integral;
}

}  // namespace

// ---------------------------------------------------------------------------
// Rabi
// ---------------------------------------------------------------------------

TEST_CASE("build_rabi structure and errors") {
  const auto seqs = build_rabi(40e6, {0.0, 12.5e-9, 25e-9});
  REQUIRE(seqs.size() == 3);
  CHECK(seqs[0].elements.size() == 2);  // zero-duration pulse omitted
  CHECK(seqs[1].elements.size() == 3);
  CHECK(seqs[1].elements[1].kind == PulseKind::MicrowavePulse);
  CHECK(seqs[1].elements[1].rabi_frequency_hz == 40e6);
  CHECK_THROWS_AS(build_rabi(40e6, {}), std::invalid_argument);
  CHECK_THROWS_AS(build_rabi(40e6, {2e-9, 1e-9}), std::invalid_argument);
  CHECK_THROWS_AS(build_rabi(0.0, {1e-9, 2e-9}), std::invalid_argument);
}

TEST_CASE("rabi trace: pi pulse darkest, full revolution bright") {
  const ReadoutParams ro;
  const auto durations = linear_grid(0.0, 25e-9, 201);
  const TimeTrace tr = run_rabi(40e6, durations, ro);
  CHECK(tr.values.front() == doctest::Approx(1.0));
  const std::size_t k_pi = 100;  // 12.5 ns
  CHECK(tr.times[k_pi] == doctest::Approx(12.5e-9));
  CHECK(tr.values[k_pi] == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(*std::min_element(tr.values.begin(), tr.values.end()) ==
        doctest::Approx(tr.values[k_pi]));
  CHECK(tr.values.back() == doctest::Approx(1.0).epsilon(1e-9));  // t = 1/Omega
}

TEST_CASE("rabi fit recovers Omega within 0.1% for 1..100 MHz") {
  const ReadoutParams ro;
  for (double omega : {1e6, 10e6, 40e6, 100e6}) {
    const double t_max = 10.0 / omega;
    const TimeTrace tr = run_rabi(omega, linear_grid(0.0, t_max, 251), ro);
    const FitResult fit = fit_decaying_sinusoid(tr);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.param("frequency") - omega) / omega < 1e-3);
  }
}

TEST_CASE("rabi drive-decay envelope round trip") {
  const ReadoutParams ro;
  const double tau_d = 120e-9;
  const TimeTrace tr = run_rabi(40e6, linear_grid(0.0, 400e-9, 401), ro, tau_d);
  const FitResult fit = fit_decaying_sinusoid(tr);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.param("decay_time") - tau_d) / tau_d < 0.02);
  CHECK(std::abs(fit.param("frequency") - 40e6) / 40e6 < 1e-3);
}

// ---------------------------------------------------------------------------
// T1
// ---------------------------------------------------------------------------

TEST_CASE("gd relaxation rate model") {
  CHECK(gd_relaxation_rate({0.0, 1e8, 250.0}) == 250.0);
  CHECK(gd_relaxation_rate({1e-6, 1e8, 250.0}) == doctest::Approx(350.0));
  const double r0 = gd_relaxation_rate({0.0, 3e8, 250.0});
  const double r1 = gd_relaxation_rate({1e-6, 3e8, 250.0});
  const double r10 = gd_relaxation_rate({10e-6, 3e8, 250.0});
  CHECK(r10 > r1);
  CHECK(r1 > r0);
  CHECK_THROWS(gd_relaxation_rate({-1e-6, 1e8, 250.0}));
}

TEST_CASE("log spaced methods grid") {
  const auto taus = log_spaced(200e-9, 5.5e-3, 51);
  REQUIRE(taus.size() == 51);
  CHECK(taus.front() == 200e-9);
  CHECK(taus.back() == 5.5e-3);
  const double ratio = taus[1] / taus[0];
  for (std::size_t i = 1; i + 1 < taus.size(); ++i)
    CHECK(taus[i + 1] / taus[i] == doctest::Approx(ratio).epsilon(1e-9));
}

TEST_CASE("t1 decay values and ordering") {
  const ReadoutParams ro;
  const GdSample s{0.0, 0.0, 1000.0};

  const TimeTrace tr = run_t1({1e-9, 1e-3}, s, ro);
  CHECK(tr.values.front() == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(tr.values.back() == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  const auto taus = log_spaced(200e-9, 5.5e-3, 51);
  const TimeTrace c0 = run_t1(taus, {0.0, 3e8, 250.0}, ro);
  const TimeTrace c1 = run_t1(taus, {1e-6, 3e8, 250.0}, ro);
  const TimeTrace c10 = run_t1(taus, {10e-6, 3e8, 250.0}, ro);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(c0.values[i] > c1.values[i]);
    CHECK(c1.values[i] > c10.values[i]);
    if (i > 0) {
      CHECK(c0.values[i] < c0.values[i - 1]);
      CHECK(c10.values[i] < c10.values[i - 1]);
    }
  }

  CHECK_THROWS_AS(run_t1({0.0, 1e-3}, s, ro), std::invalid_argument);
  CHECK_THROWS_AS(run_t1({-1e-3, 1e-3}, s, ro), std::invalid_argument);
}

TEST_CASE("t1 biexponential option feeds the fit") {
  const ReadoutParams ro;
  const GdSample s{1e-6, 3e8, 250.0};  // Gamma1 = 550
  const T1DecayModel model{0.5, 8.0};
  const TimeTrace tr = run_t1(log_spaced(200e-9, 5.5e-3, 51), s, ro, model);
  const FitResult fit = fit_biexponential(tr);
  REQUIRE(fit.converged);
  const double g1 = gd_relaxation_rate(s);
  CHECK(std::abs(fit.param("gamma_b") - g1) / g1 < 0.05);
  CHECK(std::abs(fit.param("gamma_a") - 8.0 * g1) / (8.0 * g1) < 0.05);
}

// ---------------------------------------------------------------------------
// XY8 phase
// ---------------------------------------------------------------------------

TEST_CASE("xy8 phase: zero field, resonance value, even harmonic") {
  const double gamma = 28.025e9;
  CHECK(xy8_accumulated_phase(0.0, 1e6, 0.0, 0.5e-6, 32, gamma) == 0.0);

  // resonance f = 1/(2 tau), matched phase: |phi| = (2/pi) * 2 pi gamma b T
  const double tau = 0.5e-6;
  const double b = 10e-9;
  const int n = 32;
  const double t_total = n * tau;
  const double expected = (2.0 / M_PI) * 2 * M_PI * gamma * b * t_total;
  const double phi = xy8_accumulated_phase(b, 1.0 / (2 * tau), 0.0, tau, n, gamma);
  CHECK(std::abs(std::abs(phi) - expected) / expected < 1e-12);
  CHECK(std::abs(std::abs(phi) - 1.79e-2) / 1.79e-2 < 5e-3);

  const double phi_even = xy8_accumulated_phase(b, 10.0 / (2 * tau), 0.0, tau, n, gamma);
  CHECK(std::abs(phi_even) < 1e-3 * expected);

  CHECK_THROWS_AS(xy8_accumulated_phase(b, 1e6, 0.0, tau, 12, gamma), std::invalid_argument);
  CHECK_THROWS_AS(xy8_accumulated_phase(b, 1e6, 0.0, 0.0, 32, gamma), std::invalid_argument);
}

TEST_CASE("xy8 phase matches numerical integration oracle") {
  const double gamma = 28.025e9;
  RngStream rng(55);
  for (int rep = 0; rep < 8; ++rep) {
    const double tau = rng.uniform(0.2e-6, 0.8e-6);
    const double f = rng.uniform(0.3e6, 3e6);
    const double phase0 = rng.uniform(0.0, 2 * M_PI);
    const double b = rng.uniform(1e-9, 100e-9);
    const double t_start = rng.uniform(0.0, 50e-6);
    const double phi = xy8_accumulated_phase(b, f, phase0, tau, 32, gamma, t_start);
    const double ref = xy8_phase_oracle(b, f, phase0, tau, 32, gamma, t_start);
    const double scale = std::max(std::abs(ref), 2 * M_PI * gamma * b * 32 * tau * 1e-3);
    CHECK(std::abs(phi - ref) / scale < 1e-6);
  }
}

TEST_CASE("xy8 phase linear in field amplitude") {
  const double gamma = 28.025e9;
  const double tau = 0.4027e-6;
  const double f = 1.0 / (2 * tau) * 1.03;
  const double phi1 = xy8_accumulated_phase(1e-9, f, 0.4, tau, 32, gamma);
  for (double scale : {1e1, 1e2, 1e3}) {
    const double phis = xy8_accumulated_phase(1e-9 * scale, f, 0.4, tau, 32, gamma);
    CHECK(std::abs(phis - scale * phi1) <= 1e-9 * std::abs(phis));
  }
}

TEST_CASE("fid model validation") {
  FidModel fid;
  fid.larmor_hz = 1e6;
  fid.amplitude_t = 1e-9;
  CHECK_NOTHROW(fid.validate());
  fid.line_splittings = {{-7.0, 0.5}, {7.0, 0.5}};
  CHECK_NOTHROW(fid.validate());
  fid.line_splittings = {{-7.0, 0.6}, {7.0, 0.5}};
  CHECK_THROWS(fid.validate());
  fid.line_splittings = {{0.0, -1.0}};
  CHECK_THROWS(fid.validate());
  fid.line_splittings = {{0.0, 1.0}};
  fid.decay_time_t2star_s = 0.0;
  CHECK_THROWS(fid.validate());
}

// ---------------------------------------------------------------------------
// correlation spectroscopy
// ---------------------------------------------------------------------------

namespace {
FidModel fluorine_fid(double amplitude = 100e-9, double t2 = 200e-6) {
  FidModel fid;
  fid.larmor_hz = 1.2416e6;
  fid.amplitude_t = amplitude;
  fid.decay_time_t2star_s = t2;
  return fid;
}
}  // namespace

TEST_CASE("correlation: zero amplitude gives a flat trace") {
  CorrelationBlock block{1.0 / (2 * 1.2416e6), 32};
  const TimeTrace tr =
      run_correlation(linear_grid(2e-6, 102e-6, 101), fluorine_fid(0.0), block, 28.025e9, 16);
  for (double v : tr.values) CHECK(v == 0.0);
}

TEST_CASE("correlation: spectrum peaks at the signal frequency") {
  const FidModel fid = fluorine_fid();
  CorrelationBlock block{1.0 / (2 * fid.larmor_hz), 32};
  const auto grid = linear_grid(2e-6, 202e-6, 1001);  // dt = 0.2 us
  const TimeTrace tr = run_correlation(grid, fid, block, 28.025e9, 64);
  const PowerSpectrum ps = power_spectrum(tr);
  const double f_peak = ps.frequency(ps.peak_bin());
  CHECK(std::abs(f_peak - fid.larmor_hz) <= ps.df);
}

TEST_CASE("correlation: deterministic phase average matches Monte Carlo oracle") {
  const FidModel fid = fluorine_fid();
  CorrelationBlock block{1.0 / (2 * fid.larmor_hz), 32};
  const auto grid = linear_grid(2e-6, 42e-6, 41);
  const TimeTrace tr = run_correlation(grid, fid, block, 28.025e9, 128);

  RngStream rng(99);
  const double t_block = block.n_pulses * block.tau_interpulse_s;
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    const int n_mc = 10000;
    const double decay = std::exp(-grid[i] / fid.decay_time_t2star_s);
    for (int p = 0; p < n_mc; ++p) {
      FidModel f = fid;
      f.phase0_rad = rng.uniform(0.0, 2 * M_PI);
      const double phi1 =
          xy8_accumulated_phase(f, block.tau_interpulse_s, block.n_pulses, 28.025e9, 0.0);
      const double phi2 = xy8_accumulated_phase(f, block.tau_interpulse_s, block.n_pulses,
                                                28.025e9, t_block + grid[i], decay);
      acc += std::sin(phi1) * std::sin(phi2);
    }
    worst = std::max(worst, std::abs(acc / n_mc - tr.values[i]));
    scale = std::max(scale, std::abs(tr.values[i]));
  }
  CHECK(worst < 0.05 * scale);

  // the phase-averaged signal follows a decaying cosine of t_corr
  const double phi_amp = (2.0 / M_PI) * 2 * M_PI * 28.025e9 * fid.amplitude_t * t_block;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double model = 0.5 * phi_amp * phi_amp * std::exp(-grid[i] / fid.decay_time_t2star_s) *
                         std::cos(2 * M_PI * fid.larmor_hz * (grid[i] + t_block));
    CHECK(std::abs(tr.values[i] - model) < 0.05 * 0.5 * phi_amp * phi_amp);
  }
}

TEST_CASE("correlation input validation") {
  CorrelationBlock block{0.4e-6, 32};
  CHECK_THROWS_AS(run_correlation({1e-6}, fluorine_fid(), block, 28e9), std::invalid_argument);
  CHECK_THROWS_AS(run_correlation({2e-6, 1e-6}, fluorine_fid(), block, 28e9),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// aliasing + CASR
// ---------------------------------------------------------------------------

TEST_CASE("alias frequency") {
  CHECK(alias_frequency(1000.0, 9470.0) == doctest::Approx(1000.0));
  CHECK(alias_frequency(9470.0, 9470.0) == doctest::Approx(0.0));
  CHECK(std::abs(alias_frequency(7.6639e6, 9470.0) - 2670.0) < 1.0);
  CHECK(alias_frequency(5000.0, 9470.0) == doctest::Approx(4470.0));
  CHECK_THROWS(alias_frequency(-1.0, 100.0));
}

TEST_CASE("casr: flat for zero amplitude, doublet aliases 14 Hz apart") {
  FidModel fid;
  fid.larmor_hz = 7.66386e6;
  fid.amplitude_t = 0.0;
  fid.decay_time_t2star_s = 1.0 / (M_PI * 5.0);
  const TimeTrace flat = run_casr(fid, 1.0 / 9470, 9470, 28.025e9);
  for (double v : flat.values) CHECK(v == 0.0);

  fid.amplitude_t = 10e-9;
  fid.line_splittings = {{-7.0, 0.5}, {7.0, 0.5}};
  const TimeTrace tr = run_casr(fid, 1.0 / 9470, 9470, 28.025e9);
  const PowerSpectrum ps = power_spectrum(tr);
  CHECK(ps.df == doctest::Approx(1.0).epsilon(1e-9));

  const double alias_lo = alias_frequency(fid.larmor_hz - 7.0, 9470.0);
  const double alias_hi = alias_frequency(fid.larmor_hz + 7.0, 9470.0);
  CHECK(std::abs(std::abs(alias_hi - alias_lo) - 14.0) < 1e-6);

  // coherent lines: the additive fit is pulled by tail interference, the
  // coherent doublet model recovers the spacing
  const FitResult fit = fit_lorentzian(ps, 2, LineModel::Coherent);
  REQUIRE(fit.converged);
  CHECK(std::abs((fit.param("center_2") - fit.param("center_1")) - 14.0) < 0.5);
  CHECK(std::abs(fit.param("fwhm_1") - 5.0) < 0.5);

  const FitResult additive = fit_lorentzian(ps, 2);
  CHECK(std::abs((additive.param("center_2") - additive.param("center_1")) - 14.0) > 0.5);
}

TEST_CASE("casr timing consistency check") {
  FidModel fid;
  fid.larmor_hz = 7.66386e6;
  fid.amplitude_t = 1e-9;
  fid.decay_time_t2star_s = 0.1;
  CHECK_THROWS_AS(run_casr(fid, 1.0 / 9470, 9470, 28.025e9, 1.0, {}, 0, 2.0),
                  std::invalid_argument);
  CHECK_NOTHROW(run_casr(fid, 1.0 / 9470, 9470, 28.025e9, 1.0, {}, 0, 1.0));
  CHECK_THROWS_AS(run_casr(fid, 1.0 / 9470, 9470, 28.025e9, 0.5), std::invalid_argument);
}

TEST_CASE("casr spectra peak at alias predictions for randomized pairs") {
  RngStream rng(421);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const double fs = rng.uniform(5e3, 20e3);
    const double f_sig = rng.uniform(0.5e6, 10e6);
    const double alias = alias_frequency(f_sig, fs);
    const int n = 2048;
    const double df = fs / n;
    if (alias < 3 * df || alias > fs / 2 - 3 * df) continue;  // skip degenerate folds
    FidModel fid;
    fid.larmor_hz = f_sig;
    fid.amplitude_t = 5e-9;
    fid.decay_time_t2star_s = 1e9;  // effectively undamped
    const TimeTrace tr = run_casr(fid, 1.0 / fs, n, 28.025e9);
    const PowerSpectrum ps = power_spectrum(tr);
    std::size_t peak = 1;
    for (std::size_t k = 1; k < ps.size(); ++k)
      if (ps.values[k] > ps.values[peak]) peak = k;
    CHECK(std::abs(ps.frequency(peak) - alias) <= ps.df);
    ++checked;
  }
  CHECK(checked >= 30);
}

// ---------------------------------------------------------------------------
// DNP
// ---------------------------------------------------------------------------

TEST_CASE("dnp pump resonance validation") {
  PhysicsConstants consts;
  MagneticBias bias{175e-3, Eigen::Vector3d::UnitZ()};

  const DnpResult res = dnp_pump({1.0, 4.9e9}, consts, bias);
  CHECK(res.gain == 1.0);
  CHECK(std::abs(res.electron_resonance_hz - 4.90e9) < 0.01e9);
  CHECK(res.resonant);

  const DnpResult bad = dnp_pump({50.0, 6.0e9}, consts, bias);
  CHECK_FALSE(bad.resonant);
  CHECK(!bad.message.empty());

  CHECK_THROWS_AS(dnp_pump({0.5, 4.9e9}, consts, bias), std::invalid_argument);
}

TEST_CASE("dnp gain scales the fid like a larger thermal amplitude") {
  FidModel fid;
  fid.larmor_hz = 7.66386e6;
  fid.amplitude_t = 0.1e-9;
  fid.decay_time_t2star_s = 0.2;
  const TimeTrace gained = run_casr(fid, 1.0 / 4000, 4000, 28.025e9, 100.0);
  FidModel fid_big = fid;
  fid_big.amplitude_t = 10e-9;
  const TimeTrace thermal = run_casr(fid_big, 1.0 / 4000, 4000, 28.025e9, 1.0);
  for (std::size_t i = 0; i < gained.size(); ++i)
    CHECK(gained.values[i] == doctest::Approx(thermal.values[i]).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// noise scaling
// ---------------------------------------------------------------------------

TEST_CASE("doubling averages shrinks noise by sqrt(2)") {
  const ReadoutParams ro;
  const auto durations = linear_grid(0.0, 250e-9, 64);
  const NoiseParams n1{0.05, 1000};
  const NoiseParams n2{0.05, 2000};

  double s1 = 0, s2 = 0;
  int count = 0;
  const TimeTrace clean = run_rabi(40e6, durations, ro);
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const TimeTrace a = run_rabi(40e6, durations, ro, INFINITY, n1, seed);
    const TimeTrace b = run_rabi(40e6, durations, ro, INFINITY, n2, seed + 1000);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double da = a.values[i] - clean.values[i];
      const double db = b.values[i] - clean.values[i];
      s1 += da * da;
      s2 += db * db;
      ++count;
    }
  }
  const double ratio = std::sqrt(s1 / count) / std::sqrt(s2 / count);
  CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.10));
}

TEST_CASE("noise is deterministic per seed and point") {
  const auto durations = linear_grid(0.0, 250e-9, 32);
  const NoiseParams np{0.05, 100};
  const TimeTrace a = run_rabi(40e6, durations, {}, INFINITY, np, 7);
  const TimeTrace b = run_rabi(40e6, durations, {}, INFINITY, np, 7);
  const TimeTrace c = run_rabi(40e6, durations, {}, INFINITY, np, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.values[i] == b.values[i]);
    any_diff |= (a.values[i] != c.values[i]);
  }
  CHECK(any_diff);
}
