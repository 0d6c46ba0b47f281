use super::{HilbertSpace, PureState, C64, I, ONE, ZERO};
use crate::error::{Error, Result};
use crate::tolerance;
use nalgebra::DMatrix;
use std::ops::{Add, Mul, Sub};

/// Square complex matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { space, matrix })
    }

    /// Single-factor operator from row-major entries.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("operator rows must form a square matrix".into()));
        }
        let space = HilbertSpace::new(vec![n])?;
        Ok(Self { space, matrix: DMatrix::from_fn(n, n, |i, j| rows[i][j]) })
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { space: space.clone(), matrix: DMatrix::identity(d, d) }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { space: space.clone(), matrix: DMatrix::from_element(d, d, ZERO) }
    }

    fn qubit(m: [[C64; 2]; 2]) -> Self {
        Self {
            space: HilbertSpace::qubits(1),
            matrix: DMatrix::from_fn(2, 2, |i, j| m[i][j]),
        }
    }

    pub fn pauli_x() -> Self {
        Self::qubit([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_y() -> Self {
        Self::qubit([[ZERO, -I], [I, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Self::qubit([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `|0><1|`, lowering the excited state `|1>` to the ground state `|0>`.
    pub fn sigma_minus() -> Self {
        Self::qubit([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// `|1><1|`.
    pub fn excited_projector() -> Self {
        Self::qubit([[ZERO, ZERO], [ZERO, ONE]])
    }

    /// Truncated bosonic annihilation operator on `n` levels.
    pub fn annihilation(n: usize) -> Result<Self> {
        let space = HilbertSpace::new(vec![n])?;
        let mut m = DMatrix::from_element(n, n, ZERO);
        for k in 1..n {
            m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        Ok(Self { space, matrix: m })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * c }
    }

    /// Max-abs entry of `A - A^dagger`.
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

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= tolerance::CONSTRUCTION
    }

    /// Max-abs entry of `U^dagger U - I`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.matrix.adjoint() * &self.matrix;
        max_abs_diff(&p, &DMatrix::identity(self.dim(), self.dim()))
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_error() <= tolerance::CONSTRUCTION
    }

    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        if psi.space() != &self.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.space().total_dim() });
        }
        Ok(PureState::from_parts(self.space.clone(), &self.matrix * psi.amplitudes()))
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.try_mul(other)? - other.try_mul(self)? 
    }

    pub fn try_mul(&self, rhs: &Operator) -> Result<Operator> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Operator { space: self.space.clone(), matrix: sparse_aware_mul(&self.matrix, &rhs.matrix) })
    }

    /// `exp(-i H t)` for Hermitian `H`.
    pub fn propagator(&self, t: f64) -> Result<Operator> {
        let herm = self.hermiticity_error();
        if herm > tolerance::CONSTRUCTION {
            return Err(Error::NotHermitian(herm));
        }
        if t == 0.0 {
            return Ok(Operator::identity(&self.space));
        }
        let eig = self.matrix.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let n = self.dim();
        let mut scaled = v.clone();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let ph = C64::from_polar(1.0, -lam * t);
            for r in 0..n {
                scaled[(r, k)] *= ph;
            }
        }
        Ok(Operator { space: self.space.clone(), matrix: scaled * v.adjoint() })
    }

    /// Eigenvalues of a Hermitian operator in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let herm = self.hermiticity_error();
        if herm > tolerance::CONSTRUCTION {
            return Err(Error::NotHermitian(herm));
        }
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Dense product that skips zero entries of the left factor; Pauli strings
/// and embedded single-site operators are mostly zeros.
fn sparse_aware_mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let nnz = a.iter().filter(|v| **v != ZERO).count();
    if nnz * 4 > n * n {
        return a * b;
    }
    let m = b.ncols();
    let mut out = DMatrix::from_element(n, m, ZERO);
    for k in 0..a.ncols() {
        for i in 0..n {
            let v = a[(i, k)];
            if v == ZERO {
                continue;
            }
            for j in 0..m {
                let w = b[(k, j)];
                if w != ZERO {
                    out[(i, j)] += v * w;
                }
            }
        }
    }
    out
}

impl Mul for &Operator {
    type Output = Operator;
    /// Panics on mismatched spaces; use [`Operator::try_mul`] for a checked product.
    fn mul(self, rhs: &Operator) -> Operator {
        self.try_mul(rhs).expect("operator spaces differ")
    }
}

impl Add for Operator {
    type Output = Result<Operator>;
    fn add(self, rhs: Operator) -> Result<Operator> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Operator { space: self.space, matrix: self.matrix + rhs.matrix })
    }
}

impl Sub for Operator {
    type Output = Result<Operator>;
    fn sub(self, rhs: Operator) -> Result<Operator> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Operator { space: self.space, matrix: self.matrix - rhs.matrix })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::tensor_product;
    use proptest::prelude::*;

    fn random_hermitian(seed: &[f64], n: usize) -> DMatrix<C64> {
        let mut k = 0;
        let mut next = || {
            let v = seed[k % seed.len()] * (1.0 + k as f64 * 0.37).sin();
            k += 1;
            v
        };
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Scaling-and-squaring Taylor exponential, independent of the eigen route.
    fn expm_taylor(a: &DMatrix<C64>) -> DMatrix<C64> {
        let norm = a.iter().map(|v| v.norm()).sum::<f64>();
        let s = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scaled = a / C64::new(2f64.powi(s), 0.0);
        let n = a.nrows();
        let mut term = DMatrix::<C64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn pauli_algebra() {
        let x = Operator::pauli_x();
        let y = Operator::pauli_y();
        let z = Operator::pauli_z();
        let xy = &x * &y;
        assert!(max_abs_diff(xy.matrix(), z.scale(I).matrix()) < 1e-15);
        for p in [&x, &y, &z] {
            assert!(p.is_hermitian() && p.is_unitary());
            assert!(max_abs_diff((p * p).matrix(), Operator::identity(p.space()).matrix()) < 1e-15);
        }
    }

    #[test]
    fn ladder_commutator() {
        let a = Operator::annihilation(4).unwrap();
        let c = a.commutator(&a.dagger()).unwrap();
        // [a, a^dagger] = 1 except the truncation corner
        for k in 0..3 {
            assert!((c.matrix()[(k, k)] - ONE).norm() < 1e-14);
        }
        assert!((c.matrix()[(3, 3)] + C64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn propagator_matches_taylor_on_48_dims() {
        let space = HilbertSpace::new(vec![2, 2, 2, 2, 3]).unwrap();
        let seed = [0.3, -1.1, 0.7, 0.05, 2.2, -0.4, 0.9];
        let h = Operator::new(space, random_hermitian(&seed, 48)).unwrap();
        let t = 0.8;
        let u = h.propagator(t).unwrap();
        let oracle = expm_taylor(&(h.matrix() * C64::new(0.0, -t)));
        assert!(max_abs_diff(u.matrix(), &oracle) < 1e-9);
        assert!(u.unitarity_error() < 1e-9);
    }

    #[test]
    fn new_rejects_wrong_shape() {
        let m = DMatrix::from_element(3, 3, ZERO);
        assert!(Operator::new(HilbertSpace::qubits(1), m).is_err());
    }

    proptest! {
        #[test]
        fn propagators_are_unitary(vals in prop::collection::vec(-3.0f64..3.0, 8), t in -5.0f64..5.0) {
            let h = Operator::new(HilbertSpace::qubits(2), random_hermitian(&vals, 4)).unwrap();
            prop_assert!(h.propagator(t).unwrap().unitarity_error() < 1e-9);
        }

        #[test]
        fn tensor_product_is_associative(a in 0usize..3, b in 0usize..3, c in 0usize..3) {
            let ps = [Operator::pauli_x(), Operator::pauli_y(), Operator::pauli_z()];
            let ab = tensor_product(&[&ps[a], &ps[b]]).unwrap();
            let bc = tensor_product(&[&ps[b], &ps[c]]).unwrap();
            let left = tensor_product(&[&ab, &ps[c]]).unwrap();
            let right = tensor_product(&[&ps[a], &bc]).unwrap();
            prop_assert_eq!(left.matrix(), right.matrix());
        }
    }
}
