use super::{HilbertSpace, Operator, C64, ZERO};
use crate::error::{Error, Result};
use crate::tolerance;
use nalgebra::{DMatrix, DVector};

/// Anything an observable can be averaged over.
pub trait QuantumState {
    fn space(&self) -> &HilbertSpace;
    /// `<psi|O|psi>` or `Tr(rho O)` without Hermiticity checks.
    fn expectation_complex(&self, op: &Operator) -> C64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    space: HilbertSpace,
    amplitudes: DVector<C64>,
}

impl PureState {
    pub fn from_amplitudes(space: HilbertSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), found: amplitudes.len() });
        }
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > tolerance::CONSTRUCTION {
            return Err(Error::InvalidInput(format!("state norm {norm:.12} differs from 1")));
        }
        Ok(Self { space, amplitudes: v })
    }

    /// Scales a nonzero vector to unit norm.
    pub fn normalized(space: HilbertSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), found: amplitudes.len() });
        }
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Self { space, amplitudes: v / C64::new(norm, 0.0) })
    }

    pub(crate) fn from_parts(space: HilbertSpace, amplitudes: DVector<C64>) -> Self {
        Self { space, amplitudes }
    }

    pub fn basis(space: &HilbertSpace, index: usize) -> Result<Self> {
        let d = space.total_dim();
        if index >= d {
            return Err(Error::IndexOutOfRange { index, len: d });
        }
        let mut v = DVector::from_element(d, ZERO);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { space: space.clone(), amplitudes: v })
    }

    /// Qubit product state from a ket label such as `"0110"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let space = HilbertSpace::qubits(bits.len());
        let mut index = 0;
        for c in bits.chars() {
            index = index * 2
                + match c {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(Error::InvalidInput(format!("bad ket character {other:?}"))),
                };
        }
        if bits.is_empty() {
            return Err(Error::InvalidInput("empty ket label".into()));
        }
        Self::basis(&space, index)
    }

    /// `(|0..0> + e^{i phase}|1..1>)/sqrt(2)` on `n` qubits.
    pub fn ghz_with_phase(n: usize, phase: f64) -> Self {
        let space = HilbertSpace::qubits(n);
        let d = space.total_dim();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = DVector::from_element(d, ZERO);
        v[0] = C64::new(s, 0.0);
        v[d - 1] = C64::from_polar(s, phase);
        Self { space, amplitudes: v }
    }

    pub fn ghz(n: usize) -> Self {
        Self::ghz_with_phase(n, 0.0)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { space: self.space.clone(), matrix: &self.amplitudes * self.amplitudes.adjoint() }
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            space: self.space.concat(&other.space),
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn with_global_phase(&self, phase: f64) -> PureState {
        PureState { space: self.space.clone(), amplitudes: &self.amplitudes * C64::from_polar(1.0, phase) }
    }
}

impl QuantumState for PureState {
    fn space(&self) -> &HilbertSpace {
        PureState::space(self)
    }
    fn expectation_complex(&self, op: &Operator) -> C64 {
        self.amplitudes.dotc(&(op.matrix() * &self.amplitudes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        let rho = Self { space, matrix };
        rho.validate(tolerance::CONSTRUCTION)?;
        Ok(rho)
    }

    pub(crate) fn from_parts(space: HilbertSpace, matrix: DMatrix<C64>) -> Self {
        Self { space, matrix }
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        let matrix = DMatrix::identity(d, d) / C64::new(d as f64, 0.0);
        Self { space, matrix }
    }

    /// Verifies the density-matrix invariants with `tol` for Hermiticity and trace.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!("density matrix trace {tr:.12} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -tolerance::PSD_SLACK {
            return Err(Error::InvalidInput(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `0.5 * ||a - b||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let diff = &self.matrix - &other.matrix;
        let h = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * h.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Largest |Im| among the entries.
    pub fn max_imaginary(&self) -> f64 {
        self.matrix.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, u: &DMatrix<C64>) -> DensityMatrix {
        DensityMatrix { space: self.space.clone(), matrix: u * &self.matrix * u.adjoint() }
    }

    /// Nearest PSD unit-trace matrix obtained by clipping negative eigenvalues.
    pub fn clip_to_physical(&self) -> (DensityMatrix, f64) {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let removed = eig.eigenvalues.iter().map(|v| (-v).max(0.0)).sum::<f64>();
        let n = self.dim();
        let v = &eig.eigenvectors;
        let mut out = DMatrix::from_element(n, n, ZERO);
        for (k, &lam) in clipped.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let col = v.column(k);
            out += col * col.adjoint() * C64::new(lam / total, 0.0);
        }
        (DensityMatrix { space: self.space.clone(), matrix: out }, removed)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { space: self.space.concat(&other.space), matrix: self.matrix.kronecker(&other.matrix) }
    }

    /// Same matrix on a relabelled space with equal total dimension.
    pub fn with_space(&self, space: HilbertSpace) -> Result<DensityMatrix> {
        if space.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: space.total_dim() });
        }
        Ok(DensityMatrix { space, matrix: self.matrix.clone() })
    }
}

impl QuantumState for DensityMatrix {
    fn space(&self) -> &HilbertSpace {
        DensityMatrix::space(self)
    }
    fn expectation_complex(&self, op: &Operator) -> C64 {
        let a = &self.matrix;
        let b = op.matrix();
        let n = a.nrows();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += a[(i, j)] * b[(j, i)];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, fidelity, partial_trace};
    use proptest::prelude::*;

    fn random_density(vals: &[f64], n: usize) -> DensityMatrix {
        let a = DMatrix::from_fn(n, n, |i, j| C64::new(vals[(i * n + j) % vals.len()], vals[(i + 3 * j + 1) % vals.len()]));
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(HilbertSpace::qubits(n.trailing_zeros() as usize), m / tr).unwrap()
    }

    #[test]
    fn construction_checks() {
        let s = HilbertSpace::qubits(1);
        assert!(PureState::from_amplitudes(s.clone(), vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0), ZERO, ZERO]);
        assert!(DensityMatrix::new(s.clone(), bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[C64::new(1.5, 0.0), ZERO, ZERO, C64::new(-0.5, 0.0)]);
        assert!(DensityMatrix::new(s, neg).is_err());
        assert!(PureState::from_bits("012").is_err());
    }

    #[test]
    fn clip_removes_negative_weight() {
        let s = HilbertSpace::qubits(1);
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(1.1, 0.0), ZERO, ZERO, C64::new(-0.1, 0.0)]);
        let (rho, removed) = DensityMatrix::from_parts(s, m).clip_to_physical();
        assert!((removed - 0.1).abs() < 1e-12);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.min_eigenvalue() >= 0.0);
    }

    proptest! {
        #[test]
        fn fidelity_ignores_global_phase(phase in -10.0f64..10.0, p in 0.0f64..6.3) {
            let target = PureState::ghz_with_phase(4, p);
            let rho = PureState::ghz(4).to_density();
            let a = fidelity(&rho, &target).unwrap();
            let b = fidelity(&rho, &target.with_global_phase(phase)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn partial_trace_preserves_trace(vals in prop::collection::vec(-1.0f64..1.0, 17), keep in 0usize..3) {
            let rho = random_density(&vals, 8);
            let red = partial_trace(&rho, &[keep]).unwrap();
            prop_assert!((red.trace() - 1.0).abs() < 1e-10);
            let all = partial_trace(&rho, &[0, 1, 2]).unwrap();
            prop_assert_eq!(all.matrix(), rho.matrix());
        }

        #[test]
        fn hermitian_expectations_are_real(vals in prop::collection::vec(-1.0f64..1.0, 17), which in 0usize..3) {
            let rho = random_density(&vals, 2);
            let ops = [Operator::pauli_x(), Operator::pauli_y(), Operator::pauli_z()];
            let v = rho.expectation_complex(&ops[which]);
            prop_assert!(v.im.abs() < 1e-9);
            prop_assert!((expectation(&ops[which], &rho).unwrap() - v.re).abs() < 1e-15);
        }
    }
}
