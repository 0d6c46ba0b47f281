//! Ideal instantaneous rotations, used as the oracle for pulse-level runs.
//!
//! Primed axes are taken with azimuth 0, so `Z' = X`, `X' = Y`, `Y' = Z`.
//! The pi rotations `Z'` and `X'` act as the bare Pauli operators.

use super::frame::{equatorial_rotation, primed_basis};
use crate::error::{Error, Result};
use crate::hilbert::{embed, HilbertSpace, Operator, PureState, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    /// Replace the register with the ideal GHZ state of the primed frame.
    PrepareGhz,
    /// Physical pi/2 rotation about x.
    XHalf(usize),
    XPrime(usize),
    ZPrime(usize),
    /// `exp(-i pi/4 Z')`.
    ZHalf(usize),
    /// `exp(+i pi/4 Z')`.
    ZHalfInverse(usize),
    /// `exp(-i gamma Z'/2)`.
    RotateZPrime(usize, f64),
    /// Simultaneous X' on every qubit.
    Loop,
}

impl GateOp {
    /// Parses labels such as `ghz`, `loop`, `X/2:0`, `X':1`, `Z':2`, `Z'/2:0`,
    /// `-Z'/2:0` and `Rz'(0.25):3`.
    pub fn parse(label: &str) -> Result<Self> {
        let s = label.trim();
        match s.to_ascii_lowercase().as_str() {
            "ghz" => return Ok(GateOp::PrepareGhz),
            "loop" | "c_loop" => return Ok(GateOp::Loop),
            _ => {}
        }
        let unknown = || Error::UnknownGate(label.to_string());
        let (name, qubit) = s.rsplit_once(':').ok_or_else(unknown)?;
        let q: usize = qubit.trim().parse().map_err(|_| unknown())?;
        let name = name.trim();
        let op = match name {
            "X/2" => GateOp::XHalf(q),
            "X'" => GateOp::XPrime(q),
            "Z'" => GateOp::ZPrime(q),
            "Z'/2" => GateOp::ZHalf(q),
            "-Z'/2" => GateOp::ZHalfInverse(q),
            _ => {
                let arg = name.strip_prefix("Rz'(").and_then(|r| r.strip_suffix(')')).ok_or_else(unknown)?;
                GateOp::RotateZPrime(q, arg.trim().parse().map_err(|_| unknown())?)
            }
        };
        Ok(op)
    }

    pub fn qubit(&self) -> Option<usize> {
        match *self {
            GateOp::XHalf(q)
            | GateOp::XPrime(q)
            | GateOp::ZPrime(q)
            | GateOp::ZHalf(q)
            | GateOp::ZHalfInverse(q)
            | GateOp::RotateZPrime(q, _) => Some(q),
            GateOp::PrepareGhz | GateOp::Loop => None,
        }
    }

    /// Single-qubit matrix in primed coordinates of azimuth `phi`.
    pub(crate) fn single_qubit_matrix(&self, phi: f64) -> Option<DMatrix<C64>> {
        let m = match *self {
            GateOp::XHalf(_) => equatorial_rotation(0.0, FRAC_PI_2),
            GateOp::XPrime(_) => pauli_on_axis(phi + FRAC_PI_2),
            GateOp::ZPrime(_) => pauli_on_axis(phi),
            GateOp::ZHalf(_) => equatorial_rotation(phi, FRAC_PI_2),
            GateOp::ZHalfInverse(_) => equatorial_rotation(phi, -FRAC_PI_2),
            GateOp::RotateZPrime(_, g) => equatorial_rotation(phi, g),
            GateOp::PrepareGhz | GateOp::Loop => return None,
        };
        Some(m)
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GateOp::PrepareGhz => write!(f, "ghz"),
            GateOp::Loop => write!(f, "loop"),
            GateOp::XHalf(q) => write!(f, "X/2:{q}"),
            GateOp::XPrime(q) => write!(f, "X':{q}"),
            GateOp::ZPrime(q) => write!(f, "Z':{q}"),
            GateOp::ZHalf(q) => write!(f, "Z'/2:{q}"),
            GateOp::ZHalfInverse(q) => write!(f, "-Z'/2:{q}"),
            GateOp::RotateZPrime(q, g) => write!(f, "Rz'({g}):{q}"),
        }
    }
}

/// `cos(a) X + sin(a) Y`.
fn pauli_on_axis(azimuth: f64) -> DMatrix<C64> {
    let e = C64::from_polar(1.0, azimuth);
    DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), e.conj(), e, C64::new(0.0, 0.0)])
}

/// Ideal GHZ state `(|0'...0'> + |1'...1'>)/sqrt2` written in physical coordinates
/// for primed azimuths `phi`.
pub fn ideal_ghz(phi: &[f64]) -> Result<PureState> {
    let n = phi.len();
    let primed = PureState::ghz(n);
    let mut w = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for &p in phi {
        w = w.kronecker(&primed_basis(p));
    }
    Ok(PureState::from_parts(HilbertSpace::qubits(n), w * primed.amplitudes()))
}

/// Applies `ops` in order to `initial`, which must be a register of qubits.
pub fn gate_level_backend(ops: &[GateOp], initial: &PureState) -> Result<PureState> {
    let space = initial.space().clone();
    if space.factor_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidInput("gate backend acts on qubit registers only".into()));
    }
    let n = space.num_factors();
    let mut state = initial.clone();
    for op in ops {
        state = match *op {
            GateOp::PrepareGhz => ideal_ghz(&vec![0.0; n])?,
            GateOp::Loop => {
                let y = Operator::new(HilbertSpace::qubits(1), pauli_on_axis(FRAC_PI_2))?;
                let mut s = state;
                for q in 0..n {
                    s = embed(&y, &[q], &space)?.apply(&s)?;
                }
                s
            }
            _ => {
                let q = op.qubit().unwrap_or(0);
                if q >= n {
                    return Err(Error::IndexOutOfRange { index: q, len: n });
                }
                let m = op.single_qubit_matrix(0.0).unwrap_or_else(|| DMatrix::identity(2, 2));
                let u = Operator::new(HilbertSpace::qubits(1), m)?;
                embed(&u, &[q], &space)?.apply(&state)?
            }
        };
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground4() -> PureState {
        PureState::basis(&HilbertSpace::qubits(4), 0).unwrap()
    }

    fn psi_e() -> PureState {
        gate_level_backend(&[GateOp::PrepareGhz, GateOp::ZPrime(0)], &ground4()).unwrap()
    }

    #[test]
    fn ghz_prep_is_exact() {
        let g = gate_level_backend(&[GateOp::PrepareGhz], &ground4()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // in the primed basis: amplitudes 1/sqrt2 on 0000 and 1111
        let w0 = primed_basis(0.0);
        let mut w = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for _ in 0..4 {
            w = w.kronecker(&w0);
        }
        let primed = w.adjoint() * g.amplitudes();
        for (k, a) in primed.iter().enumerate() {
            let expect = if k == 0 || k == 15 { s } else { 0.0 };
            assert!((a - C64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn z_prime_gives_psi_e() {
        let e = psi_e();
        let g = ideal_ghz(&[0.0; 4]).unwrap();
        assert!(e.inner(&g).unwrap().norm() < 1e-12);
        let expected = {
            let mut v = PureState::ghz(4).amplitudes().clone();
            v[15] = -v[15];
            let mut w = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
            for _ in 0..4 {
                w = w.kronecker(&primed_basis(0.0));
            }
            w * v
        };
        assert!((e.amplitudes() - expected).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn loop_phases() {
        let g = ideal_ghz(&[0.0; 4]).unwrap();
        let a = gate_level_backend(&[GateOp::Loop], &g).unwrap();
        assert!((a.inner(&g).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        let b = gate_level_backend(&[GateOp::ZPrime(0), GateOp::Loop, GateOp::ZPrime(0)], &g).unwrap();
        assert!((g.inner(&b).unwrap() - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn half_filled_ends_in_psi_e() {
        let ops = [GateOp::PrepareGhz, GateOp::ZHalf(0), GateOp::Loop, GateOp::ZHalfInverse(0)];
        let out = gate_level_backend(&ops, &ground4()).unwrap();
        assert!((out.inner(&psi_e()).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn labels_round_trip() {
        for op in [
            GateOp::PrepareGhz,
            GateOp::Loop,
            GateOp::XHalf(2),
            GateOp::XPrime(1),
            GateOp::ZPrime(0),
            GateOp::ZHalf(3),
            GateOp::ZHalfInverse(0),
            GateOp::RotateZPrime(1, 0.25),
        ] {
            assert_eq!(GateOp::parse(&op.to_string()).unwrap(), op);
        }
        assert!(matches!(GateOp::parse("H:0"), Err(Error::UnknownGate(_))));
        assert!(matches!(GateOp::parse("Z'"), Err(Error::UnknownGate(_))));
    }

    #[test]
    fn x_half_is_physical() {
        let out = gate_level_backend(&[GateOp::XHalf(0)], &PureState::basis(&HilbertSpace::qubits(1), 0).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitudes()[1] - C64::new(0.0, -s)).norm() < 1e-12);
    }

    #[test]
    fn out_of_range_qubit() {
        assert!(gate_level_backend(&[GateOp::ZPrime(4)], &ground4()).is_err());
    }
}
