#pragma once

#include <Eigen/Dense>

#include "nvsim/constants.hpp"

namespace nvsim {

/// Spin state of the driven |0>,|-1> subspace as a Bloch vector.
/// z = +1 is the bright |0> state, z = -1 the dark |-1> state.
struct BlochState {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static BlochState from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  double norm() const { return vec().norm(); }
};

/// Longitudinal/transverse relaxation of the two-level subspace.
/// gamma1 = 1/T1, gamma2 = 1/T2; physical maps require gamma2 >= gamma1/2.
struct RelaxationParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double equilibrium_z = 0.0;

  static RelaxationParams none() { return {0.0, 0.0, 0.0}; }

  void validate() const {
    if (gamma1 < 0 || gamma2 < 0)
      throw std::invalid_argument("relaxation rates must be >= 0");
    if (gamma2 < 0.5 * gamma1)
      throw std::invalid_argument("gamma2 must be >= gamma1/2");
    if (equilibrium_z < -1.0 || equilibrium_z > 1.0)
      throw std::invalid_argument("equilibrium_z must be in [-1, 1]");
  }
};

/// Frequency of the driven |0> -> |-1> transition, D - gamma_e * B0, for a
/// bias field aligned with the NV axis. Rejects fields at or beyond the
/// ground-state level anticrossing (B0 >= D/gamma_e).
double nv_transition_frequency(const PhysicsConstants& constants, const MagneticBias& bias);

/// Larmor frequency gamma * B0 of a nuclear species.
double larmor_frequency(double gamma_hz_per_t, double b0_t);

/// Rotate a Bloch vector by `angle` about `axis` (right-hand rule).
/// `axis` must be unit length to 1e-9; it is renormalized internally so the
/// rotation preserves the state norm to 1e-12.
BlochState apply_rotation(const BlochState& state, const Eigen::Vector3d& axis, double angle);

/// Free evolution for `tau` seconds in the rotating frame: the transverse
/// components precess by 2*pi*detuning*tau about +z and decay with gamma2,
/// while z relaxes toward equilibrium_z with gamma1.
BlochState evolve_free(const BlochState& state, double detuning_hz, double tau_s,
                       const RelaxationParams& relax);

/// Spin-state dependent fluorescence: baseline * (1 - c * (1 - z)/2).
/// Monotone increasing in z; z = +1 reads the full baseline.
double readout_contrast(const BlochState& state, double contrast_c, double baseline);

}  // namespace nvsim
