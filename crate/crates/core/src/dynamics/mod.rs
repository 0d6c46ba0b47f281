//! Pulse-level and gate-level evolution of the four-qubit register.

pub mod evolve;
pub mod frame;
pub mod gate;
mod nelder_mead;
pub mod params;
pub mod protocol;
pub mod pulse;
pub mod ramsey;

pub use evolve::{evolve_lindblad, evolve_unitary, hamiltonian_at, EvolutionResult, DEFAULT_DT, MAX_DT};
pub use frame::{
    equatorial_rotation, frame_unitary, from_primed, primed_basis, primed_pauli, to_primed, track_frames, wrap_phase,
    z_rotation, FrameReference, FrameTracker, PrimedAxis,
};
pub use gate::{gate_level_backend, ideal_ghz, GateOp};
pub use params::{DeviceParams, NoiseParams};
pub use protocol::{
    best_common_offset, calibrate_protocol, calibrate_t2eff, entangled_target, entangling_fidelity, ghz_sequence,
    optimize_phase_adjustments, primed_fidelity, run_ghz, tune_interaction_time, CalibratedProtocol, GhzProtocol, GhzRun,
    InteractionTuning, PhaseCalibration, PulseBackend, PulseRun, RegisterState, T2Calibration,
};
pub use pulse::{gaussian_amplitude, gaussian_envelope, FrequencyProfile, Pulse, PulseRecord, PulseSequence, PulseVariant};
pub use ramsey::{fit_envelope, ramsey, EnvelopeFit, RamseyResult};
