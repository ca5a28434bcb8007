#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>

#include "nvsim/csv.hpp"
#include "nvsim/dsp.hpp"
#include "nvsim/fit_models.hpp"
#include "nvsim/rng.hpp"

using namespace nvsim;

namespace {

TimeTrace cosine_trace(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0,
                       double offset = 0.0) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k)
    v[k] = offset + amp * std::cos(2 * M_PI * f * static_cast<double>(k) / fs + phase);
  return TimeTrace::uniform(0.0, 1.0 / fs, std::move(v));
}

double sum_sq(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

TEST_CASE("power spectrum: tone at bin center") {
  // 64 Hz sampling, 128 samples, tone exactly on bin 16 (8 Hz)
  const TimeTrace tr = cosine_trace(8.0, 64.0, 128);
  const PowerSpectrum ps = power_spectrum(tr);
  CHECK(ps.df == doctest::Approx(0.5));
  const std::size_t peak = ps.peak_bin();
  CHECK(peak == 16);
  const double total = std::accumulate(ps.values.begin(), ps.values.end(), 0.0);
  CHECK(ps.values[peak] / total > 0.999);
}

TEST_CASE("power spectrum: constant trace concentrates at dc") {
  const TimeTrace tr = TimeTrace::uniform(0.0, 0.01, std::vector<double>(50, 3.0));
  const PowerSpectrum ps = power_spectrum(tr);
  CHECK(ps.peak_bin() == 0);
  const double total = std::accumulate(ps.values.begin(), ps.values.end(), 0.0);
  CHECK(ps.values[0] / total > 0.999999);
}

TEST_CASE("power spectrum: two tones 14 Hz apart resolve at df = 1 Hz") {
  const std::size_t n = 1000;
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / 1000.0;
    v[k] = std::cos(2 * M_PI * 100.0 * t) + std::cos(2 * M_PI * 114.0 * t);
  }
  const PowerSpectrum ps = power_spectrum(TimeTrace::uniform(0, 1e-3, std::move(v)));
  CHECK(ps.df == doctest::Approx(1.0));
  CHECK(ps.values[100] > 100 * ps.values[107]);
  CHECK(ps.values[114] > 100 * ps.values[107]);
}

TEST_CASE("parseval identity on random traces") {
  RngStream rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 16 + static_cast<std::size_t>(rng.uniform() * 500);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    const double ss = sum_sq(v);
    const PowerSpectrum ps = power_spectrum(TimeTrace::uniform(0, 1e-4, v));
    const double total = std::accumulate(ps.values.begin(), ps.values.end(), 0.0);
    CHECK(std::abs(total - ss) <= 1e-9 * ss);
  }
}

TEST_CASE("power spectrum preconditions") {
  CHECK_THROWS(TimeTrace::uniform(0, 0.1, {1.0}));  // <2 samples rejected at the type
  const TimeTrace nonuni = TimeTrace::sampled({0.0, 1.0, 3.0}, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(power_spectrum(nonuni), std::invalid_argument);
  CHECK_THROWS(TimeTrace::uniform(0, -0.1, {1.0, 2.0}));
  CHECK_THROWS(TimeTrace::sampled({0.0, 0.0}, {1.0, 2.0}));
}

TEST_CASE("hann window suppresses leakage sidelobes") {
  // tone between bins leaks without a window
  const TimeTrace tr = cosine_trace(8.25, 64.0, 128);
  const PowerSpectrum plain = power_spectrum(tr);
  const PowerSpectrum hann = power_spectrum(tr, Window::Hann);
  const std::size_t peak = hann.peak_bin();
  const double rel_plain = plain.values[peak + 4] / plain.values[plain.peak_bin()];
  const double rel_hann = hann.values[peak + 4] / hann.values[peak];
  CHECK(rel_hann < 0.1 * rel_plain);
}

TEST_CASE("hz_to_ppm") {
  CHECK(hz_to_ppm(0.0, 7.664e6) == 0.0);
  CHECK(hz_to_ppm(5.0, 7.664e6) == doctest::Approx(0.652).epsilon(1e-3));
  CHECK(hz_to_ppm(7.664, 7.664e6) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(hz_to_ppm(1.0, 0.0));
}

// ---------------------------------------------------------------------------
// decaying sinusoid fit
// ---------------------------------------------------------------------------

TEST_CASE("decaying sinusoid: noiseless round trip at 40 MHz") {
  const double f = 40e6, tau_d = 1e-6, A = 0.15, C = 0.85, phase = 0.0;
  const std::size_t n = 251;
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * 1e-9;
    v[k] = C + A * std::cos(2 * M_PI * f * t + phase) * std::exp(-t / tau_d);
  }
  const FitResult fit = fit_decaying_sinusoid(TimeTrace::uniform(0, 1e-9, std::move(v)));
  CHECK(fit.converged);
  CHECK(std::abs(fit.param("frequency") - f) / f < 5e-4);
  CHECK(std::abs(fit.param("decay_time") - tau_d) / tau_d < 1e-2);
  CHECK(fit.param("amplitude") == doctest::Approx(A).epsilon(1e-3));
  CHECK(fit.param("offset") == doctest::Approx(C).epsilon(1e-3));
}

TEST_CASE("decaying sinusoid: flat trace is flagged") {
  const FitResult fit =
      fit_decaying_sinusoid(TimeTrace::uniform(0, 1e-9, std::vector<double>(64, 0.85)));
  CHECK(fit.converged);
  CHECK(fit.param("amplitude") == doctest::Approx(0.0));
  CHECK(fit.has_flag("frequency_unconstrained"));
  CHECK(fit.param("offset") == doctest::Approx(0.85));
}

TEST_CASE("decaying sinusoid: 5% noise, 100 repetitions") {
  RngStream rng(31);
  const double f = 10e6;
  int failures = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(200);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double t = static_cast<double>(k) * 2e-9;
      v[k] = 0.85 + 0.15 * std::cos(2 * M_PI * f * t + 0.3) * std::exp(-t / 2e-7) +
             0.05 * 0.15 * rng.normal();
    }
    const FitResult fit = fit_decaying_sinusoid(TimeTrace::uniform(0, 2e-9, std::move(v)));
    if (!fit.converged || std::abs(fit.param("frequency") - f) / f > 5e-3) ++failures;
  }
  CHECK(failures == 0);
}

// ---------------------------------------------------------------------------
// biexponential fit
// ---------------------------------------------------------------------------

namespace {
std::vector<double> methods_grid() {
  std::vector<double> taus(51);
  for (int i = 0; i < 51; ++i)
    taus[static_cast<std::size_t>(i)] =
        200e-9 * std::pow(5.5e-3 / 200e-9, static_cast<double>(i) / 50.0);
  return taus;
}
}  // namespace

TEST_CASE("biexponential: two-rate round trip on the log grid") {
  const auto taus = methods_grid();
  std::vector<double> v(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i)
    v[i] = 0.5 * std::exp(-5000.0 * taus[i]) + 0.5 * std::exp(-200.0 * taus[i]) + 0.02;
  const FitResult fit = fit_biexponential(TimeTrace::sampled(taus, std::move(v)));
  CHECK(fit.converged);
  CHECK(!fit.has_flag("rate_degenerate"));
  CHECK(std::abs(fit.param("gamma_a") - 5000.0) / 5000.0 < 0.05);
  CHECK(std::abs(fit.param("gamma_b") - 200.0) / 200.0 < 0.05);
  CHECK(fit.param("gamma_a") >= fit.param("gamma_b"));
}

TEST_CASE("biexponential: single-exponential data reports degeneracy") {
  const auto taus = methods_grid();
  std::vector<double> v(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) v[i] = std::exp(-1000.0 * taus[i]) + 1e-4;
  const FitResult fit = fit_biexponential(TimeTrace::sampled(taus, std::move(v)));
  CHECK(fit.has_flag("rate_degenerate"));
  CHECK(std::abs(fit.param("combined_rate") - 1000.0) / 1000.0 < 0.01);
}

TEST_CASE("biexponential: flat trace") {
  const FitResult fit =
      fit_biexponential(TimeTrace::uniform(0, 1e-4, std::vector<double>(40, 0.5)));
  CHECK(fit.param("a1") == doctest::Approx(0.0));
  CHECK(fit.param("a2") == doctest::Approx(0.0));
  CHECK(fit.param("offset") == doctest::Approx(0.5));
  CHECK_THROWS(fit_biexponential(TimeTrace::uniform(0, 1e-4, {1.0, -0.5, 0.2, 0.1, 0.05})));
}

// ---------------------------------------------------------------------------
// Lorentzian fits
// ---------------------------------------------------------------------------

namespace {
PowerSpectrum synth_spectrum(const std::vector<std::array<double, 3>>& peaks, double baseline,
                             double df, std::size_t n, double noise = 0.0,
                             std::uint64_t seed = 0) {
  PowerSpectrum ps;
  ps.f0 = 0;
  ps.df = df;
  ps.values.resize(n);
  RngStream rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(k) * df;
    double v = baseline;
    for (const auto& [a, c, w] : peaks) {
      const double hw = 0.5 * w;
      v += a * hw * hw / ((f - c) * (f - c) + hw * hw);
    }
    if (noise > 0) v += noise * rng.normal();
    ps.values[k] = v;
  }
  return ps;
}
}  // namespace

TEST_CASE("lorentzian: single peak FWHM recovery") {
  const PowerSpectrum ps = synth_spectrum({{{2.0, 150.0, 5.0}}}, 0.05, 1.0, 400);
  const FitResult fit = fit_lorentzian(ps, 1);
  CHECK(fit.converged);
  CHECK(!fit.has_flag("peak_not_found"));
  CHECK(std::abs(fit.param("fwhm_1") - 5.0) / 5.0 < 0.05);
  CHECK(fit.param("center_1") == doctest::Approx(150.0).epsilon(1e-3));
}

TEST_CASE("lorentzian: symmetric doublet splitting") {
  const PowerSpectrum ps =
      synth_spectrum({{{1.0, 2663.0, 5.0}}, {{1.0, 2677.0, 5.0}}}, 0.01, 1.0, 4736);
  const FitResult fit = fit_lorentzian(ps, 2);
  CHECK(fit.converged);
  const double split = fit.param("center_2") - fit.param("center_1");
  CHECK(std::abs(split - 14.0) < 0.5);
}

TEST_CASE("lorentzian: white noise flags not-found") {
  RngStream rng(77);
  PowerSpectrum ps;
  ps.f0 = 0;
  ps.df = 1.0;
  ps.values.resize(1024);
  for (auto& v : ps.values) {
    const double g = rng.normal();
    v = g * g;
  }
  const FitResult fit = fit_lorentzian(ps, 1);
  CHECK(fit.has_flag("peak_not_found"));
  CHECK_THROWS(fit_lorentzian(ps, 3));
}

TEST_CASE("fit invariance under amplitude rescaling") {
  const PowerSpectrum ps = synth_spectrum({{{2.0, 150.0, 5.0}}}, 0.05, 1.0, 400);
  PowerSpectrum scaled = ps;
  for (auto& v : scaled.values) v *= 250.0;
  const FitResult a = fit_lorentzian(ps, 1);
  const FitResult b = fit_lorentzian(scaled, 1);
  CHECK(b.param("center_1") == doctest::Approx(a.param("center_1")).epsilon(1e-9));
  CHECK(b.param("fwhm_1") == doctest::Approx(a.param("fwhm_1")).epsilon(1e-6));
  CHECK(b.param("amplitude_1") == doctest::Approx(250.0 * a.param("amplitude_1")).epsilon(1e-6));
}

// ---------------------------------------------------------------------------
// analytic Jacobians vs central differences
// ---------------------------------------------------------------------------

namespace {
void check_jacobian(const LevMarModel& model, const Eigen::VectorXd& p, double tol) {
  Eigen::VectorXd r0;
  Eigen::MatrixXd J;
  model(p, r0, J);
  for (int j = 0; j < p.size(); ++j) {
    const double h = 1e-6 * std::max(std::abs(p[j]), 1e-3);
    Eigen::VectorXd pp = p, pm = p;
    pp[j] += h;
    pm[j] -= h;
    Eigen::VectorXd rp, rm;
    Eigen::MatrixXd scratch;
    model(pp, rp, scratch);
    model(pm, rm, scratch);
    const Eigen::VectorXd fd = (rp - rm) / (2 * h);
    const double scale = std::max(J.col(j).norm(), fd.norm());
    if (scale < 1e-12) continue;
    CHECK((J.col(j) - fd).norm() / scale < tol);
  }
}
}  // namespace

TEST_CASE("analytic jacobians match central differences") {
  RngStream rng(123);
  std::vector<double> t(60), y(60);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<double>(i) / 60.0;
    y[i] = rng.normal();
  }
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd p(5);
    p << rng.uniform(0.5, 2.0), rng.uniform(2.0, 12.0), rng.uniform(-3.0, 3.0),
        rng.uniform(0.0, 3.0), rng.uniform(-1.0, 1.0);
    check_jacobian(fitmodels::decaying_sinusoid(t, y), p, 1e-6);

    Eigen::VectorXd pb(5);
    pb << rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0), rng.uniform(-0.5, 0.5),
        rng.uniform(-1.0, 2.5), rng.uniform(-1.0, 2.5);
    check_jacobian(fitmodels::biexponential(t, y), pb, 1e-6);

    Eigen::VectorXd pl(7);
    pl << rng.uniform(0.5, 3.0), rng.uniform(0.2, 0.8), rng.uniform(0.01, 0.2),
        rng.uniform(0.5, 3.0), rng.uniform(0.2, 0.8), rng.uniform(0.01, 0.2),
        rng.uniform(-0.2, 0.2);
    check_jacobian(fitmodels::lorentzian_sum(t, y, 2), pl, 1e-6);

    Eigen::VectorXd pc(8);
    pc << rng.uniform(0.5, 3.0), rng.uniform(0.2, 0.5), rng.uniform(0.01, 0.2),
        rng.uniform(0.5, 3.0), rng.uniform(0.5, 0.8), rng.uniform(0.01, 0.2),
        rng.uniform(-3.0, 3.0), rng.uniform(-0.2, 0.2);
    check_jacobian(fitmodels::coherent_doublet(t, y), pc, 1e-6);
  }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

TEST_CASE("trace csv round trip") {
  const std::string path = "test_trace_io.csv";
  std::vector<std::vector<double>> rows;
  std::vector<double> times, values;
  for (int i = 0; i < 20; ++i) {
    times.push_back(1e-4 * i + 2e-6);
    values.push_back(std::sin(0.3 * i) / 3.0);
    rows.push_back({times.back(), values.back()});
  }
  write_csv(path, {"time_s", "value"}, rows);
  const TimeTrace tr = read_trace_csv(path);
  REQUIRE(tr.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(tr.times[i] == times[i]);  // full round-trip precision
    CHECK(tr.values[i] == values[i]);
  }
  CHECK_THROWS(read_trace_csv("does_not_exist.csv"));
  std::remove(path.c_str());
}
