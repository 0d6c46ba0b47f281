//! Per-qubit frame bookkeeping and the primed axes.
//!
//! The primed frame of a qubit with azimuth `phi` has `z'` on the equator at
//! azimuth `phi`, `x'` on the equator at `phi + pi/2`, and `y'` along the
//! physical z axis. Its basis map `W` has columns
//! `|0'> = (|0> + e^{i phi}|1>)/sqrt2` and `|1'> = -i(|0> - e^{i phi}|1>)/sqrt2`,
//! so `W X W^dagger = X'`, `W Y W^dagger = Y' = Z`, `W Z W^dagger = Z'`.

use super::params::DeviceParams;
use super::pulse::{FrequencyProfile, PulseSequence, PulseVariant};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HilbertSpace, Operator, PureState, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameReference {
    /// Axes of a frame rotating at the interaction frequency.
    Interaction,
    /// Per-qubit primed axes.
    Primed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTracker {
    /// Azimuth of each qubit's z' axis in its own frame, in (-pi, pi].
    pub phi: Vec<f64>,
    pub reference: FrameReference,
}

impl FrameTracker {
    pub fn new(phi: Vec<f64>, reference: FrameReference) -> Self {
        Self { phi: phi.into_iter().map(wrap_phase).collect(), reference }
    }

    pub fn zeros(qubits: usize) -> Self {
        Self::new(vec![0.0; qubits], FrameReference::Primed)
    }

    /// Frame shifted by per-qubit offsets.
    pub fn shifted(&self, offsets: &[f64]) -> Self {
        Self::new(self.phi.iter().zip(offsets).map(|(p, d)| p + d).collect(), self.reference)
    }

    pub fn num_qubits(&self) -> usize {
        self.phi.len()
    }
}

/// Maps an angle to (-pi, pi], keeping +pi at the branch point.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    if y <= -PI {
        y += two_pi;
    }
    y
}

/// Single-qubit basis map `W(phi)`.
pub fn primed_basis(phi: f64) -> DMatrix<C64> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let e = C64::from_polar(FRAC_1_SQRT_2, phi);
    let mi = C64::new(0.0, -1.0);
    DMatrix::from_row_slice(2, 2, &[s, mi * s, e, -mi * e])
}

/// `W = W(phi_1) x ... x W(phi_n)`.
pub fn frame_unitary(frame: &FrameTracker) -> DMatrix<C64> {
    frame
        .phi
        .iter()
        .fold(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)), |acc, &p| acc.kronecker(&primed_basis(p)))
}

/// Coordinates of a physical-frame density matrix in the primed basis.
pub fn to_primed(rho: &DensityMatrix, frame: &FrameTracker) -> Result<DensityMatrix> {
    let w = frame_unitary(frame);
    if w.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: w.nrows() });
    }
    Ok(DensityMatrix::from_parts(rho.space().clone(), hermitize(w.adjoint() * rho.matrix() * &w)))
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Physical-frame state whose primed coordinates are `psi_primed`.
pub fn from_primed(psi_primed: &PureState, frame: &FrameTracker) -> Result<PureState> {
    let w = frame_unitary(frame);
    if w.nrows() != psi_primed.amplitudes().len() {
        return Err(Error::DimensionMismatch { expected: psi_primed.amplitudes().len(), found: w.nrows() });
    }
    PureState::normalized(psi_primed.space().clone(), (w * psi_primed.amplitudes()).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimedAxis {
    X,
    Y,
    Z,
}

/// Physical matrix of the primed Pauli along `axis` for azimuth `phi`.
pub fn primed_pauli(axis: PrimedAxis, phi: f64) -> Operator {
    let (c, s) = (phi.cos(), phi.sin());
    let x = Operator::pauli_x();
    let y = Operator::pauli_y();
    let m = match axis {
        PrimedAxis::Z => x.matrix() * C64::new(c, 0.0) + y.matrix() * C64::new(s, 0.0),
        PrimedAxis::X => x.matrix() * C64::new(-s, 0.0) + y.matrix() * C64::new(c, 0.0),
        PrimedAxis::Y => Operator::pauli_z().into_matrix(),
    };
    Operator::new(HilbertSpace::qubits(1), m).expect("2x2")
}

/// `exp(-i angle (cos a X + sin a Y) / 2)`: rotation about the equatorial axis at azimuth `a`.
pub fn equatorial_rotation(azimuth: f64, angle: f64) -> DMatrix<C64> {
    let c = (angle / 2.0).cos();
    let s = (angle / 2.0).sin();
    let off = C64::new(0.0, -s) * C64::from_polar(1.0, -azimuth);
    let off_t = C64::new(0.0, -s) * C64::from_polar(1.0, azimuth);
    DMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), off, off_t, C64::new(c, 0.0)])
}

/// `exp(-i angle Z / 2)`.
pub fn z_rotation(angle: f64) -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -angle / 2.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, angle / 2.0)],
    )
}

fn is_interaction_target(params: &DeviceParams, target: f64) -> bool {
    (target - params.omega_int()).abs() <= 1e-9 * params.omega_r.abs().max(1.0)
}

/// Azimuth of each qubit's z' axis in that qubit's frame.
///
/// Drive phases are referenced to frames that follow each qubit from t = 0,
/// while the entangling dynamics is symmetric in the frame rotating at the
/// interaction frequency. The two differ on qubit `j` by
/// `phi_j = integral of (f_j - omega_int)` over the time spent away from the
/// interaction point before it is reached; once it is reached the integrand
/// vanishes. Qubits with no excursion to the interaction point accumulate
/// over the whole sequence.
pub fn track_frames(params: &DeviceParams, sequence: &PulseSequence) -> FrameTracker {
    let n = params.num_qubits();
    let mut phi = Vec::with_capacity(n);
    for j in 0..n {
        let profile = FrequencyProfile::new(params, sequence, j);
        let t_ref = sequence
            .pulses()
            .iter()
            .filter_map(|p| match p.variant {
                PulseVariant::SquareDetune { qubit, target_frequency, rise_time, .. }
                    if qubit == j && is_interaction_target(params, target_frequency) =>
                {
                    Some(p.start_time + rise_time)
                }
                _ => None,
            })
            .next_back()
            .unwrap_or_else(|| sequence.total_duration());
        phi.push(profile.frame_phase(t_ref) - params.delta_int * t_ref);
    }
    FrameTracker::new(phi, FrameReference::Primed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::pulse::Pulse;
    use crate::hilbert::{expectation, tensor_product};
    use proptest::prelude::*;

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn wrap_keeps_pi() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn basis_map_conjugates_paulis() {
        for phi in [0.0, 0.4, -2.2, PI] {
            let w = primed_basis(phi);
            assert!(close(&(w.adjoint() * &w), &DMatrix::identity(2, 2), 1e-14));
            let pairs = [
                (Operator::pauli_x(), PrimedAxis::X),
                (Operator::pauli_y(), PrimedAxis::Y),
                (Operator::pauli_z(), PrimedAxis::Z),
            ];
            for (p, axis) in pairs {
                let mapped = &w * p.matrix() * w.adjoint();
                assert!(close(&mapped, primed_pauli(axis, phi).matrix(), 1e-14));
            }
        }
    }

    #[test]
    fn rotation_about_z_prime_mixes_y_prime_and_x_prime() {
        // R^dagger Y' R = cos(gamma) Y' + sin(gamma) X' for R = exp(-i gamma Z'/2)
        let phi = 0.7;
        let gamma = 0.3;
        let r = equatorial_rotation(phi, gamma);
        let y = primed_pauli(PrimedAxis::Y, phi);
        let x = primed_pauli(PrimedAxis::X, phi);
        let lhs = r.adjoint() * y.matrix() * &r;
        let rhs = y.matrix() * C64::new(gamma.cos(), 0.0) + x.matrix() * C64::new(gamma.sin(), 0.0);
        assert!(close(&lhs, &rhs, 1e-14));
    }

    #[test]
    fn untouched_qubit_has_zero_phase() {
        let mut p = DeviceParams::default();
        p.omega_idle[1] = p.omega_int();
        let seq = PulseSequence::new(vec![Pulse::gaussian(0, 0.0, 5e-9, 1.0, 0.0)]).unwrap();
        let f = track_frames(&p, &seq);
        assert!(f.phi[1].abs() < 1e-12);
    }

    #[test]
    fn constant_excursion_accumulates_linearly() {
        let p = DeviceParams::default();
        let t = 37e-9;
        let seq = PulseSequence::new(vec![Pulse::gaussian(0, 0.0, t / 4.0, 0.0, 0.0)]).unwrap();
        let f = track_frames(&p, &seq);
        for j in 0..4 {
            let dw = p.idle_detuning(j) + p.idle_dressing(j) - p.delta_int;
            assert!((f.phi[j] - wrap_phase(dw * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_stops_at_interaction() {
        let p = DeviceParams::default();
        let seq = PulseSequence::new(vec![Pulse::detune(0, 20e-9, p.omega_int(), 50e-9, 0.0)]).unwrap();
        let longer = seq.extended(&[Pulse::gaussian(1, 60e-9, 10e-9, 0.0, 0.0)]).unwrap();
        let a = track_frames(&p, &seq);
        let b = track_frames(&p, &longer);
        assert!((a.phi[0] - b.phi[0]).abs() < 1e-12);
        let dw = p.idle_detuning(0) + p.idle_dressing(0) - p.delta_int;
        assert!((a.phi[0] - wrap_phase(dw * 20e-9)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn correlation_closed_form_via_primed_state(gamma in 0.0f64..PI, phase in -PI..PI, frame in -PI..PI) {
            let tracker = FrameTracker::new(vec![frame, -frame, 0.5 * frame, 1.0], FrameReference::Primed);
            let psi = from_primed(&PureState::ghz_with_phase(4, phase), &tracker).unwrap();
            let factors: Vec<Operator> = tracker
                .phi
                .iter()
                .map(|&p| {
                    let m = primed_pauli(PrimedAxis::Y, p).matrix() * C64::new(gamma.cos(), 0.0)
                        + primed_pauli(PrimedAxis::X, p).matrix() * C64::new(gamma.sin(), 0.0);
                    Operator::new(HilbertSpace::qubits(1), m).unwrap()
                })
                .collect();
            let refs: Vec<&Operator> = factors.iter().collect();
            let p_op = tensor_product(&refs).unwrap();
            let v = expectation(&p_op, &psi).unwrap();
            prop_assert!((v - (4.0 * gamma + phase).cos()).abs() < 1e-9);
        }
    }
}
