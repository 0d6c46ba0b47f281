//! Toric-code stabilizers on the four-qubit minimal cell and on small tori.
//!
//! Qubits are numbered from 0 here; the ket label `|i1 i2 i3 i4>` of the
//! minimal cell puts qubit 0 leftmost. Torus edges are indexed
//! `h(x, y) = 2(yL + x)` for the horizontal edge leaving vertex `(x, y)` in
//! the +x direction and `v(x, y) = 2(yL + x) + 1` for the +y edge.

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Operator, PureState, QuantumState, C64};
use crate::tolerance;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Largest qubit count handled with dense matrices.
pub const MAX_DENSE_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    MinimalCell,
    Torus(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub kind: LatticeKind,
    pub qubit_count: usize,
    /// Qubits on the edges meeting at each vertex.
    pub stars: Vec<Vec<usize>>,
    /// Qubits on the boundary of each face.
    pub faces: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

pub fn build_lattice(kind: LatticeKind) -> Result<Lattice> {
    match kind {
        LatticeKind::MinimalCell => Ok(Lattice {
            kind,
            qubit_count: 4,
            stars: vec![vec![0, 1, 2, 3]],
            faces: vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
        }),
        LatticeKind::Torus(l) => {
            if l < 2 {
                return Err(Error::InvalidInput(format!("torus size {l} < 2")));
            }
            let h = |x: usize, y: usize| 2 * ((y % l) * l + (x % l));
            let v = |x: usize, y: usize| h(x, y) + 1;
            let mut stars = Vec::with_capacity(l * l);
            let mut faces = Vec::with_capacity(l * l);
            for y in 0..l {
                for x in 0..l {
                    stars.push(vec![h(x, y), h(x + l - 1, y), v(x, y), v(x, y + l - 1)]);
                    faces.push(vec![h(x, y), h(x, y + 1), v(x, y), v(x + 1, y)]);
                }
            }
            Ok(Lattice { kind, qubit_count: 2 * l * l, stars, faces })
        }
    }
}

impl Lattice {
    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::qubits(self.qubit_count)
    }

    fn ensure_dense(&self) -> Result<()> {
        if self.qubit_count > MAX_DENSE_QUBITS {
            return Err(Error::LatticeTooLarge { qubits: self.qubit_count });
        }
        Ok(())
    }
}

/// Pauli string on `n` qubits; unlisted qubits carry the identity.
pub fn pauli_string(n: usize, factors: &[(usize, Pauli)]) -> Result<Operator> {
    if n > MAX_DENSE_QUBITS {
        return Err(Error::LatticeTooLarge { qubits: n });
    }
    let mut x_mask = 0usize;
    let mut z_mask = 0usize;
    let mut y_count = 0u32;
    for (k, &(q, p)) in factors.iter().enumerate() {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, len: n });
        }
        if factors[..k].iter().any(|&(r, _)| r == q) {
            return Err(Error::InvalidInput(format!("qubit {q} repeated in Pauli string")));
        }
        let bit = 1 << (n - 1 - q);
        match p {
            Pauli::I => {}
            Pauli::X => x_mask |= bit,
            Pauli::Z => z_mask |= bit,
            Pauli::Y => {
                x_mask |= bit;
                z_mask |= bit;
                y_count += 1;
            }
        }
    }
    // Y = i X Z, so the string equals i^{#Y} X^x Z^z
    let prefactor = C64::new(0.0, 1.0).powu(y_count);
    let d = 1usize << n;
    let mut m = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for col in 0..d {
        let sign = if (col & z_mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        m[(col ^ x_mask, col)] = prefactor * sign;
    }
    Operator::new(HilbertSpace::qubits(n), m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerSet {
    pub vertex_ops: Vec<Operator>,
    pub face_ops: Vec<Operator>,
}

impl StabilizerSet {
    pub fn all(&self) -> impl Iterator<Item = &Operator> {
        self.vertex_ops.iter().chain(self.face_ops.iter())
    }
}

pub fn build_stabilizers(lattice: &Lattice) -> Result<StabilizerSet> {
    lattice.ensure_dense()?;
    let n = lattice.qubit_count;
    let string = |set: &Vec<usize>, p: Pauli| {
        let f: Vec<(usize, Pauli)> = set.iter().map(|&q| (q, p)).collect();
        pauli_string(n, &f)
    };
    Ok(StabilizerSet {
        vertex_ops: lattice.stars.iter().map(|s| string(s, Pauli::X)).collect::<Result<_>>()?,
        face_ops: lattice.faces.iter().map(|s| string(s, Pauli::Z)).collect::<Result<_>>()?,
    })
}

/// `H = -sum_v A_v - sum_f B_f`.
pub fn hamiltonian(lattice: &Lattice) -> Result<Operator> {
    let stabs = build_stabilizers(lattice)?;
    let space = lattice.space();
    let mut m = DMatrix::from_element(space.total_dim(), space.total_dim(), C64::new(0.0, 0.0));
    for s in stabs.all() {
        m -= s.matrix();
    }
    Operator::new(space, m)
}

/// A ground state: the GHZ state for the minimal cell, or the stabilizer
/// projector applied to `|0...0>` on a torus.
pub fn ground_state(lattice: &Lattice) -> Result<PureState> {
    lattice.ensure_dense()?;
    if lattice.kind == LatticeKind::MinimalCell {
        return Ok(PureState::ghz(4));
    }
    let stabs = build_stabilizers(lattice)?;
    let space = lattice.space();
    // |0...0> is already a +1 eigenstate of every Z-type face operator
    let mut psi = PureState::basis(&space, 0)?.amplitudes().clone();
    for a in &stabs.vertex_ops {
        psi = (&psi + a.matrix() * &psi) * C64::new(0.5, 0.0);
    }
    for b in &stabs.face_ops {
        psi = (&psi + b.matrix() * &psi) * C64::new(0.5, 0.0);
    }
    PureState::normalized(space, psi.iter().copied().collect())
}

/// Number of eigenvalues of the lattice Hamiltonian within `1e-8` of its minimum.
pub fn ground_space_degeneracy(lattice: &Lattice) -> Result<usize> {
    let ev = hamiltonian(lattice)?.eigenvalues()?;
    let min = ev[0];
    Ok(ev.iter().filter(|&&e| e - min < 1e-8).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnyonKind {
    /// Z on one edge: a pair of vertex excitations.
    E,
    /// X on one edge: a pair of face excitations.
    M,
}

pub fn apply_anyon_op(state: &PureState, qubit: usize, kind: AnyonKind) -> Result<PureState> {
    let n = state.space().num_factors();
    if state.space().factor_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidInput("anyon operators act on qubit registers only".into()));
    }
    let p = match kind {
        AnyonKind::E => Pauli::Z,
        AnyonKind::M => Pauli::X,
    };
    pauli_string(n, &[(qubit, p)])?.apply(state)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syndrome {
    #[serde(rename = "vertices")]
    pub vertex_eigenvalues: Vec<i8>,
    #[serde(rename = "faces")]
    pub face_eigenvalues: Vec<i8>,
}

impl Syndrome {
    /// Vertices hosting an e particle.
    pub fn e_sites(&self) -> Vec<usize> {
        self.vertex_eigenvalues.iter().enumerate().filter(|(_, &s)| s < 0).map(|(k, _)| k).collect()
    }

    /// Faces hosting an m particle.
    pub fn m_sites(&self) -> Vec<usize> {
        self.face_eigenvalues.iter().enumerate().filter(|(_, &s)| s < 0).map(|(k, _)| k).collect()
    }
}

pub fn measure_syndrome(state: &PureState, stabilizers: &StabilizerSet) -> Result<Syndrome> {
    let read = |ops: &[Operator], offset: usize| -> Result<Vec<i8>> {
        ops.iter()
            .enumerate()
            .map(|(k, op)| {
                if op.space() != state.space() {
                    return Err(Error::DimensionMismatch { expected: op.dim(), found: state.space().total_dim() });
                }
                let v = state.expectation_complex(op).re;
                if (v - 1.0).abs() <= tolerance::SYNDROME {
                    Ok(1)
                } else if (v + 1.0).abs() <= tolerance::SYNDROME {
                    Ok(-1)
                } else {
                    Err(Error::IndeterminateSyndrome { index: offset + k, value: v })
                }
            })
            .collect()
    };
    Ok(Syndrome {
        vertex_eigenvalues: read(&stabilizers.vertex_ops, 0)?,
        face_eigenvalues: read(&stabilizers.face_ops, stabilizers.vertex_ops.len())?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopKind {
    XType,
    ZType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopOperator {
    pub qubit_sequence: Vec<usize>,
    pub pauli_kind: LoopKind,
}

impl LoopOperator {
    pub fn new(path: &[usize], kind: LoopKind) -> Result<Self> {
        for (k, q) in path.iter().enumerate() {
            if path[..k].contains(q) {
                return Err(Error::InvalidInput(format!("qubit {q} repeated in loop path")));
            }
        }
        Ok(Self { qubit_sequence: path.to_vec(), pauli_kind: kind })
    }

    pub fn to_operator(&self, qubits: usize) -> Result<Operator> {
        let p = match self.pauli_kind {
            LoopKind::XType => Pauli::X,
            LoopKind::ZType => Pauli::Z,
        };
        let f: Vec<(usize, Pauli)> = self.qubit_sequence.iter().map(|&q| (q, p)).collect();
        pauli_string(qubits, &f)
    }
}

pub fn loop_operator(lattice: &Lattice, path: &[usize], kind: LoopKind) -> Result<Operator> {
    lattice.ensure_dense()?;
    LoopOperator::new(path, kind)?.to_operator(lattice.qubit_count)
}

/// Applies `pre_ops`, then `loop_op`, then `post_ops` (each list in order) and
/// returns the unit-modulus overlap with the input.
pub fn braid_phase(state: &PureState, pre_ops: &[Operator], loop_op: &Operator, post_ops: &[Operator]) -> Result<C64> {
    let mut out = state.clone();
    for op in pre_ops.iter().chain(std::iter::once(loop_op)).chain(post_ops) {
        out = op.apply(&out)?;
    }
    let overlap = state.inner(&out)?;
    let modulus = overlap.norm();
    if (modulus - 1.0).abs() > 1e-6 {
        return Err(Error::NonCyclic(modulus));
    }
    Ok(overlap / modulus)
}
