#pragma once

#include <map>
#include <string>
#include <vector>

namespace nvsim {

/// Sampled real-valued signal. Most traces are uniform (t_k = t0 + k*dt); the
/// T1 protocol produces log-spaced delay grids, so the time axis is stored
/// explicitly and uniformity is a queryable property rather than an assumption.
struct TimeTrace {
  std::vector<double> times;
  std::vector<double> values;
  std::map<std::string, std::string> metadata;

  static TimeTrace uniform(double t0, double dt, std::vector<double> values);
  static TimeTrace sampled(std::vector<double> times, std::vector<double> values);

  std::size_t size() const { return values.size(); }
  double t0() const { return times.front(); }
  bool is_uniform(double rel_tol = 1e-9) const;
  /// Sample spacing of a uniform trace; throws for non-uniform grids.
  double dt() const;
};

/// One-sided power spectrum: bin k holds the power at f0 + k*df.
/// For an unwindowed transform the bins sum to the trace's sum of squares.
struct PowerSpectrum {
  double f0 = 0.0;
  double df = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double frequency(std::size_t k) const { return f0 + static_cast<double>(k) * df; }
  /// Index of the strongest bin.
  std::size_t peak_bin() const;
};

}  // namespace nvsim
