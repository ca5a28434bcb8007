#include "nvsim/bloch.hpp"

#include <cmath>
#include <stdexcept>

namespace nvsim {

double nv_transition_frequency(const PhysicsConstants& constants, const MagneticBias& bias) {
  constants.validate();
  bias.validate();
  const double d = constants.zero_field_splitting_d_hz;
  const double ge = constants.gamma_electron_hz_per_t;
  if (bias.magnitude_t >= d / ge)
    throw std::invalid_argument("bias field at or beyond the level anticrossing (B0 >= D/gamma_e)");
  return d - ge * bias.magnitude_t;
}

double larmor_frequency(double gamma_hz_per_t, double b0_t) {
  if (!(gamma_hz_per_t > 0)) throw std::invalid_argument("gamma must be > 0");
  if (b0_t < 0) throw std::invalid_argument("B0 must be >= 0");
  return gamma_hz_per_t * b0_t;
}

BlochState apply_rotation(const BlochState& state, const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (std::abs(n - 1.0) > 1e-9)
    throw std::invalid_argument("rotation axis must be a unit vector");
  const Eigen::Vector3d k = axis / n;
  const Eigen::Vector3d v = state.vec();
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  // Rodrigues: v' = v c + (k x v) s + k (k.v)(1 - c)
  const Eigen::Vector3d out = v * c + k.cross(v) * s + k * (k.dot(v)) * (1.0 - c);
  return BlochState::from_vec(out);
}

BlochState evolve_free(const BlochState& state, double detuning_hz, double tau_s,
                       const RelaxationParams& relax) {
  if (tau_s < 0) throw std::invalid_argument("tau must be >= 0");
  relax.validate();
  const double phase = 2.0 * M_PI * detuning_hz * tau_s;
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  const double et = std::exp(-relax.gamma2 * tau_s);
  const double el = std::exp(-relax.gamma1 * tau_s);
  BlochState out;
  out.x = (state.x * c - state.y * s) * et;
  out.y = (state.x * s + state.y * c) * et;
  out.z = relax.equilibrium_z + (state.z - relax.equilibrium_z) * el;
  return out;
}

double readout_contrast(const BlochState& state, double contrast_c, double baseline) {
  if (!(contrast_c > 0.0) || contrast_c > 1.0)
    throw std::invalid_argument("contrast must be in (0, 1]");
  return baseline * (1.0 - contrast_c * (1.0 - state.z) / 2.0);
}

}  // namespace nvsim
