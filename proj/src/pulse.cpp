#include "nvsim/pulse.hpp"

#include <cmath>
#include <stdexcept>

namespace nvsim {

PulseElement PulseElement::laser_init(double duration_s) {
  return {PulseKind::LaserInit, duration_s, 0.0, 0.0, 0.0};
}

PulseElement PulseElement::microwave(double rabi_hz, double duration_s, double phase_rad,
                                     double detuning_hz) {
  return {PulseKind::MicrowavePulse, duration_s, rabi_hz, phase_rad, detuning_hz};
}

PulseElement PulseElement::wait(double duration_s, double detuning_hz) {
  return {PulseKind::Wait, duration_s, 0.0, 0.0, detuning_hz};
}

PulseElement PulseElement::readout(double duration_s) {
  return {PulseKind::Readout, duration_s, 0.0, 0.0, 0.0};
}

void PulseSequence::validate() const {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (elements.empty()) throw std::invalid_argument("empty pulse sequence");
  if (elements.front().kind != PulseKind::LaserInit)
    throw std::invalid_argument("sequence must begin with LaserInit");
  if (elements.back().kind != PulseKind::Readout)
    throw std::invalid_argument("sequence must end with Readout");
  for (const auto& el : elements) {
    if (el.duration_s < 0) throw std::invalid_argument("element duration must be >= 0");
    if (el.kind == PulseKind::MicrowavePulse && !(el.rabi_frequency_hz > 0))
      throw std::invalid_argument("microwave pulse needs rabi frequency > 0");
  }
}

double PulseSequence::duration_s() const {
  double d = 0;
  for (const auto& el : elements) d += el.duration_s;
  return d * repetitions;
}

SequenceResult run_sequence(const PulseSequence& seq, const RelaxationParams& relax,
                            const ReadoutParams& readout) {
  seq.validate();
  SequenceResult res;
  BlochState state;
  for (int rep = 0; rep < seq.repetitions; ++rep) {
    for (const auto& el : seq.elements) {
      switch (el.kind) {
        case PulseKind::LaserInit:
          state = BlochState{0.0, 0.0, 1.0};
          break;
        case PulseKind::MicrowavePulse: {
          const double omega = el.rabi_frequency_hz;
          const double det = el.detuning_hz;
          const double omega_eff = std::hypot(omega, det);
          const Eigen::Vector3d axis{omega * std::cos(el.phase_rad) / omega_eff,
                                     omega * std::sin(el.phase_rad) / omega_eff,
                                     det / omega_eff};
          state = apply_rotation(state, axis, 2.0 * M_PI * omega_eff * el.duration_s);
          break;
        }
        case PulseKind::Wait:
          state = evolve_free(state, el.detuning_hz, el.duration_s, relax);
          break;
        case PulseKind::Readout:
          res.readouts.push_back(readout_contrast(state, readout.contrast, readout.baseline));
          break;
        case PulseKind::NuclearPiHalf:
        case PulseKind::DnpPump:
          // timing markers for the sample spins; the NV state is untouched
          break;
      }
    }
  }
  res.final_state = state;
  return res;
}

}  // namespace nvsim
