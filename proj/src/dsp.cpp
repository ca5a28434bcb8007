#include "nvsim/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace nvsim {

namespace {
// FFTW planning mutates global state; execution on a private plan does not.
std::mutex g_fftw_mutex;
}  // namespace

PowerSpectrum power_spectrum(const TimeTrace& trace, Window window) {
  if (trace.size() < 2) throw std::invalid_argument("power_spectrum needs >= 2 samples");
  if (!trace.is_uniform())
    throw std::invalid_argument("power_spectrum requires uniform sampling");
  const std::size_t n = trace.size();
  const double dt = trace.dt();

  std::vector<double> in(trace.values);
  if (window == Window::Hann) {
    for (std::size_t k = 0; k < n; ++k) {
      const double w =
          0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n - 1)));
      in[k] *= w;
    }
  }

  const std::size_t n_bins = n / 2 + 1;
  std::vector<fftw_complex> out(n_bins);
  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE);
  }
  if (!plan) throw std::runtime_error("fftw plan creation failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
  }

  PowerSpectrum ps;
  ps.f0 = 0.0;
  ps.df = 1.0 / (static_cast<double>(n) * dt);
  ps.values.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    // double-count interior bins so the one-sided sum preserves Parseval
    const bool self_conjugate = (k == 0) || (n % 2 == 0 && k == n / 2);
    ps.values[k] = (self_conjugate ? 1.0 : 2.0) * mag2 / static_cast<double>(n);
  }
  return ps;
}

double hz_to_ppm(double delta_f_hz, double reference_hz) {
  if (!(reference_hz > 0)) throw std::invalid_argument("reference frequency must be > 0");
  return 1.0e6 * delta_f_hz / reference_hz;
}

bool FitResult::has_flag(std::string_view f) const {
  for (const auto& s : flags)
    if (s == f) return true;
  return false;
}

double FitResult::param(const std::string& name) const {
  auto it = parameters.find(name);
  if (it == parameters.end()) throw std::out_of_range("no fit parameter: " + name);
  return it->second;
}

}  // namespace nvsim
