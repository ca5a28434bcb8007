#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nvsim {

/// Physical constants of the NV sensing model. All values SI; frequencies and
/// gyromagnetic ratios use the linear-frequency convention (Hz, Hz/T), not
/// angular.
struct PhysicsConstants {
  /// NV ground-state zero-field splitting D (Hz).
  double zero_field_splitting_d_hz = 2.87e9;
  /// Electron-spin gyromagnetic ratio of the NV center (Hz/T).
  double gamma_electron_hz_per_t = 2.8025e10;
  /// mu0 / 4pi (T·m^3 per J/T): scales a point-dipole field.
  double mu0_over_4pi = 1.0e-7;
  /// Nuclear gyromagnetic ratios by species tag (Hz/T).
  std::map<std::string, double> gamma_hz_per_t = {
      {"1H", 42.577e6},
      {"19F", 40.053e6},
      {"31P", 17.2515e6},
  };
  /// Nuclear magnetic moments by species tag (J/T).
  std::map<std::string, double> nuclear_moment_j_per_t = {
      {"1H", 1.41060679736e-26},
      {"19F", 1.32778e-26},
      {"31P", 5.7155e-27},
  };

  double gamma_of(const std::string& species) const {
    auto it = gamma_hz_per_t.find(species);
    if (it == gamma_hz_per_t.end())
      throw std::invalid_argument("unknown nuclear species: " + species);
    return it->second;
  }

  double moment_of(const std::string& species) const {
    auto it = nuclear_moment_j_per_t.find(species);
    if (it == nuclear_moment_j_per_t.end())
      throw std::invalid_argument("unknown nuclear species: " + species);
    return it->second;
  }

  void validate() const {
    if (!(zero_field_splitting_d_hz > 0))
      throw std::invalid_argument("zero_field_splitting_d_hz must be > 0");
    if (!(gamma_electron_hz_per_t > 0))
      throw std::invalid_argument("gamma_electron_hz_per_t must be > 0");
    if (!(mu0_over_4pi > 0))
      throw std::invalid_argument("mu0_over_4pi must be > 0");
    for (const auto& [k, v] : gamma_hz_per_t)
      if (!(v > 0)) throw std::invalid_argument("gamma for " + k + " must be > 0");
    for (const auto& [k, v] : nuclear_moment_j_per_t)
      if (!(v > 0)) throw std::invalid_argument("moment for " + k + " must be > 0");
  }
};

/// Static bias field applied along the NV <111> axis.
struct MagneticBias {
  double magnitude_t = 0.0;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();

  void validate() const {
    if (magnitude_t < 0) throw std::invalid_argument("bias magnitude must be >= 0");
    if (std::abs(axis.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("bias axis must be a unit vector");
  }
};

}  // namespace nvsim
