#pragma once

#include <vector>

#include "nvsim/bloch.hpp"

namespace nvsim {

enum class PulseKind { LaserInit, MicrowavePulse, Wait, Readout, NuclearPiHalf, DnpPump };

/// One timing element of a protocol. The microwave fields are meaningful only
/// for kind == MicrowavePulse; detuning_hz also drives free precession during
/// Wait elements.
struct PulseElement {
  PulseKind kind = PulseKind::Wait;
  double duration_s = 0.0;
  double rabi_frequency_hz = 0.0;
  double phase_rad = 0.0;
  double detuning_hz = 0.0;

  static PulseElement laser_init(double duration_s = 3e-6);
  static PulseElement microwave(double rabi_hz, double duration_s, double phase_rad = 0.0,
                                double detuning_hz = 0.0);
  static PulseElement wait(double duration_s, double detuning_hz = 0.0);
  static PulseElement readout(double duration_s = 0.0);
};

struct PulseSequence {
  std::vector<PulseElement> elements;
  int repetitions = 1;

  /// Checks element-level constraints and that each repetition unit starts
  /// with laser initialization and ends with a readout.
  void validate() const;
  double duration_s() const;
};

struct ReadoutParams {
  double contrast = 0.3;
  double baseline = 1.0;
};

struct SequenceResult {
  std::vector<double> readouts;
  BlochState final_state;
};

/// Execute a pulse sequence on the Bloch model. Microwave pulses rotate about
/// the effective field axis (relaxation during the ns-scale pulses is
/// neglected); Wait elements precess and relax; each Readout appends one
/// fluorescence value.
SequenceResult run_sequence(const PulseSequence& seq, const RelaxationParams& relax,
                            const ReadoutParams& readout);

}  // namespace nvsim
