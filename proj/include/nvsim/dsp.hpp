#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nvsim/trace.hpp"

namespace nvsim {

enum class Window { None, Hann };

/// Squared-magnitude DFT of a uniformly sampled trace, one-sided.
/// With Window::None the bins sum to the trace's sum of squares (Parseval).
PowerSpectrum power_spectrum(const TimeTrace& trace, Window window = Window::None);

/// 1e6 * delta_f / reference.
double hz_to_ppm(double delta_f_hz, double reference_hz);

struct FitResult {
  std::map<std::string, double> parameters;
  std::map<std::string, double> uncertainties;
  double residual_norm = 0.0;
  bool converged = false;
  /// Diagnostic conditions, e.g. "frequency_unconstrained", "rate_degenerate",
  /// "peak_not_found".
  std::vector<std::string> flags;

  bool has_flag(std::string_view f) const;
  double param(const std::string& name) const;
};

/// Least-squares fit of A*cos(2*pi*f*t + phi)*exp(-t/tau_d) + C.
/// Parameters: amplitude, frequency, phase, decay_time, offset.
/// A trace with no resolvable oscillation converges with amplitude ~ 0 and the
/// "frequency_unconstrained" flag set.
FitResult fit_decaying_sinusoid(const TimeTrace& trace);

/// Least-squares fit of A1*exp(-Gamma_a*t) + A2*exp(-Gamma_b*t) + C with
/// Gamma_a >= Gamma_b >= 0 by ordering convention. Parameters: a1, gamma_a,
/// a2, gamma_b, offset, combined_rate. Single-exponential data is reported
/// with the "rate_degenerate" flag; combined_rate stays meaningful.
FitResult fit_biexponential(const TimeTrace& trace);

/// Lineshape model for multi-peak spectra. Additive sums power Lorentzians;
/// Coherent fits |sum of complex Lorentzians|^2, which captures the
/// tail-interference of phase-coherent lines (a doublet from one FID pulls
/// the apparent additive-fit centers apart by over 1 Hz at 14 Hz splitting
/// and 5 Hz width).
enum class LineModel { Additive, Coherent };

/// Least-squares fit of n_peaks Lorentzians plus a constant baseline:
///   L_j(f) = a_j * (w_j/2)^2 / ((f - f0_j)^2 + (w_j/2)^2)
/// Parameters: center_1, fwhm_1, amplitude_1, [center_2, fwhm_2, amplitude_2,]
/// baseline (and rel_phase for the coherent doublet). Centers are ordered
/// ascending for n_peaks = 2. A fit whose peak amplitude is consistent with
/// the baseline noise sets "peak_not_found".
FitResult fit_lorentzian(const PowerSpectrum& spectrum, int n_peaks,
                         LineModel model = LineModel::Additive);

}  // namespace nvsim
