//! Dense complex linear algebra over small composite Hilbert spaces.
//!
//! Factor 0 is the leftmost label of a ket: `|i1 i2 i3 i4>` has `i1` on
//! factor 0. Basis index `k` of a space with dims `[d0, d1, ..]` is the
//! mixed-radix number with `d0` as the most significant digit.

mod json;
mod operator;
mod state;

pub use json::StateJson;
pub use operator::Operator;
pub use state::{DensityMatrix, PureState, QuantumState};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    factor_dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidInput("a Hilbert space needs at least one factor".into()));
        }
        if let Some(d) = factor_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidInput(format!("factor dimension {d} < 2")));
        }
        Ok(Self { factor_dims })
    }

    /// `n` two-level factors.
    pub fn qubits(n: usize) -> Self {
        Self { factor_dims: vec![2; n.max(1)] }
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    pub fn concat(&self, other: &HilbertSpace) -> HilbertSpace {
        let mut dims = self.factor_dims.clone();
        dims.extend_from_slice(&other.factor_dims);
        HilbertSpace { factor_dims: dims }
    }

    /// Space made of the listed factors, in the listed order.
    pub fn select(&self, factors: &[usize]) -> Result<HilbertSpace> {
        let dims = factors
            .iter()
            .map(|&f| {
                self.factor_dims
                    .get(f)
                    .copied()
                    .ok_or(Error::IndexOutOfRange { index: f, len: self.num_factors() })
            })
            .collect::<Result<Vec<_>>>()?;
        HilbertSpace::new(dims)
    }

    /// Mixed-radix digits of a basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factor_dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.factor_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factor_dims)
            .fold(0, |acc, (&x, &d)| acc * d + x)
    }

    /// Index stride of factor `f` in the flattened basis.
    pub fn stride(&self, f: usize) -> usize {
        self.factor_dims[f + 1..].iter().product()
    }

    fn check_factors(&self, factors: &[usize]) -> Result<()> {
        for (k, &f) in factors.iter().enumerate() {
            if f >= self.num_factors() {
                return Err(Error::IndexOutOfRange { index: f, len: self.num_factors() });
            }
            if factors[..k].contains(&f) {
                return Err(Error::InvalidInput(format!("factor {f} listed twice")));
            }
        }
        Ok(())
    }
}

/// Kronecker product in the given factor order.
pub fn tensor_product(ops: &[&Operator]) -> Result<Operator> {
    let Some((first, rest)) = ops.split_first() else {
        return Err(Error::InvalidInput("empty operand list".into()));
    };
    let mut space = first.space().clone();
    let mut matrix = first.matrix().clone();
    if matrix.nrows() == 0 {
        return Err(Error::InvalidInput("dimension-zero operand".into()));
    }
    for op in rest {
        if op.dim() == 0 {
            return Err(Error::InvalidInput("dimension-zero operand".into()));
        }
        matrix = matrix.kronecker(op.matrix());
        space = space.concat(op.space());
    }
    Operator::new(space, matrix)
}

/// Lift `op` onto `space`, acting on `target_factors` (op factor k acts on
/// space factor `target_factors[k]`) and as identity elsewhere.
pub fn embed(op: &Operator, target_factors: &[usize], space: &HilbertSpace) -> Result<Operator> {
    space.check_factors(target_factors)?;
    let sub = space.select(target_factors)?;
    if sub.total_dim() != op.dim() {
        return Err(Error::DimensionMismatch { expected: sub.total_dim(), found: op.dim() });
    }
    let dim = space.total_dim();
    let strides: Vec<usize> = target_factors.iter().map(|&f| space.stride(f)).collect();
    let mut out = nalgebra::DMatrix::from_element(dim, dim, ZERO);
    let m = op.matrix();
    for col in 0..dim {
        let digits = space.digits(col);
        let sub_digits: Vec<usize> = target_factors.iter().map(|&f| digits[f]).collect();
        let c_sub = sub.index_of(&sub_digits);
        // base index with target digits zeroed
        let base = col - sub_digits.iter().zip(&strides).map(|(d, s)| d * s).sum::<usize>();
        for r_sub in 0..op.dim() {
            let v = m[(r_sub, c_sub)];
            if v == ZERO {
                continue;
            }
            let rd = sub.digits(r_sub);
            let row = base + rd.iter().zip(&strides).map(|(d, s)| d * s).sum::<usize>();
            out[(row, col)] = v;
        }
    }
    Operator::new(space.clone(), out)
}

/// `<psi|O|psi>` or `Tr(rho O)` for Hermitian `O`.
pub fn expectation<S: QuantumState>(op: &Operator, state: &S) -> Result<f64> {
    if op.space() != state.space() {
        return Err(Error::DimensionMismatch { expected: state.space().total_dim(), found: op.dim() });
    }
    let herm = op.hermiticity_error();
    if herm > crate::tolerance::CONSTRUCTION {
        return Err(Error::NotHermitian(herm));
    }
    let v = state.expectation_complex(op);
    if v.im.abs() > crate::tolerance::PROPAGATION {
        return Err(Error::InvalidInput(format!("expectation has imaginary residue {:.3e}", v.im)));
    }
    Ok(v.re)
}

/// `<target|rho|target>`.
pub fn fidelity(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.space().total_dim() != target.space().total_dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.space().total_dim(),
            found: target.space().total_dim(),
        });
    }
    let v = target.amplitudes();
    let m = rho.matrix();
    let mut acc = ZERO;
    for i in 0..v.len() {
        let mut row = ZERO;
        for j in 0..v.len() {
            row += m[(i, j)] * v[j];
        }
        acc += v[i].conj() * row;
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

/// Reduced density matrix on `keep_factors` (in the listed order).
pub fn partial_trace(rho: &DensityMatrix, keep_factors: &[usize]) -> Result<DensityMatrix> {
    if keep_factors.is_empty() {
        return Err(Error::InvalidInput("partial trace needs at least one kept factor".into()));
    }
    let space = rho.space();
    space.check_factors(keep_factors)?;
    let kept = space.select(keep_factors)?;
    let traced: Vec<usize> = (0..space.num_factors()).filter(|f| !keep_factors.contains(f)).collect();
    let dim = space.total_dim();
    let kd = kept.total_dim();
    // (kept index, traced index) of every full basis index
    let split: Vec<(usize, usize)> = (0..dim)
        .map(|i| {
            let d = space.digits(i);
            let k = keep_factors.iter().fold(0, |a, &f| a * space.factor_dims()[f] + d[f]);
            let t = traced.iter().fold(0, |a, &f| a * space.factor_dims()[f] + d[f]);
            (k, t)
        })
        .collect();
    let td: usize = traced.iter().map(|&f| space.factor_dims()[f]).product();
    let mut by_traced: Vec<Vec<usize>> = vec![Vec::new(); td];
    for (i, &(_, t)) in split.iter().enumerate() {
        by_traced[t].push(i);
    }
    let m = rho.matrix();
    let mut out = nalgebra::DMatrix::from_element(kd, kd, ZERO);
    for group in &by_traced {
        for &i in group {
            for &j in group {
                out[(split[i].0, split[j].0)] += m[(i, j)];
            }
        }
    }
    Ok(DensityMatrix::from_parts(kept, out))
}

/// States that `exp(-iHt)` can act on.
pub trait Evolvable: Sized {
    fn conjugate_by(&self, u: &nalgebra::DMatrix<C64>) -> Self;
    fn state_space(&self) -> &HilbertSpace;
}

impl Evolvable for PureState {
    fn conjugate_by(&self, u: &nalgebra::DMatrix<C64>) -> Self {
        PureState::from_parts(self.space().clone(), u * self.amplitudes())
    }
    fn state_space(&self) -> &HilbertSpace {
        self.space()
    }
}

impl Evolvable for DensityMatrix {
    fn conjugate_by(&self, u: &nalgebra::DMatrix<C64>) -> Self {
        DensityMatrix::from_parts(self.space().clone(), u * self.matrix() * u.adjoint())
    }
    fn state_space(&self) -> &HilbertSpace {
        self.space()
    }
}

/// Applies `exp(-i H t)` through the eigendecomposition of Hermitian `H`.
pub fn matrix_exponential_apply<S: Evolvable>(h: &Operator, t: f64, state: &S) -> Result<S> {
    if h.space() != state.state_space() {
        return Err(Error::DimensionMismatch { expected: state.state_space().total_dim(), found: h.dim() });
    }
    let u = h.propagator(t)?;
    Ok(state.conjugate_by(u.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bell() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_amplitudes(
            HilbertSpace::qubits(2),
            vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn identity_tensor_identity() {
        let i2 = Operator::identity(&HilbertSpace::qubits(1));
        let i4 = tensor_product(&[&i2, &i2]).unwrap();
        assert_eq!(i4.matrix(), Operator::identity(&HilbertSpace::qubits(2)).matrix());
        assert_eq!(i4.space().factor_dims(), &[2, 2]);
    }

    #[test]
    fn xx_fixes_bell_state() {
        let x = Operator::pauli_x();
        let xx = tensor_product(&[&x, &x]).unwrap();
        let out = xx.apply(&bell()).unwrap();
        assert_abs_diff_eq!(out.inner(&bell()).unwrap().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn xxxx_flips_all() {
        let x = Operator::pauli_x();
        let x4 = tensor_product(&[&x, &x, &x, &x]).unwrap();
        let out = x4.apply(&PureState::from_bits("0000").unwrap()).unwrap();
        let want = PureState::from_bits("1111").unwrap();
        assert_abs_diff_eq!(out.inner(&want).unwrap().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn embed_z_and_x() {
        let space = HilbertSpace::qubits(4);
        let z0 = embed(&Operator::pauli_z(), &[0], &space).unwrap();
        let zero = PureState::from_bits("0000").unwrap();
        let one = PureState::from_bits("1111").unwrap();
        assert_abs_diff_eq!(z0.apply(&zero).unwrap().inner(&zero).unwrap().re, 1.0);
        assert_abs_diff_eq!(z0.apply(&one).unwrap().inner(&one).unwrap().re, -1.0);
        let x2 = embed(&Operator::pauli_x(), &[2], &space).unwrap();
        let flipped = x2.apply(&zero).unwrap();
        let want = PureState::from_bits("0010").unwrap();
        assert_abs_diff_eq!(flipped.inner(&want).unwrap().re, 1.0);
    }

    #[test]
    fn embed_rejects_bad_targets() {
        let space = HilbertSpace::qubits(2);
        assert!(matches!(
            embed(&Operator::pauli_x(), &[2], &space),
            Err(Error::IndexOutOfRange { .. })
        ));
        let xx = tensor_product(&[&Operator::pauli_x(), &Operator::pauli_x()]).unwrap();
        assert!(matches!(embed(&xx, &[0], &space), Err(Error::DimensionMismatch { .. })));
        assert!(embed(&xx, &[1, 1], &space).is_err());
    }

    #[test]
    fn embed_respects_target_order() {
        // |01> under (sigma^+ on f1) x (sigma^- on f0)...; simpler: CNOT-like ordering check
        let space = HilbertSpace::qubits(3);
        let xz = tensor_product(&[&Operator::pauli_x(), &Operator::pauli_z()]).unwrap();
        let op = embed(&xz, &[2, 0], &space).unwrap();
        // X on factor 2, Z on factor 0: |100> -> -|101>
        let out = op.apply(&PureState::from_bits("100").unwrap()).unwrap();
        let want = PureState::from_bits("101").unwrap();
        assert_abs_diff_eq!(out.inner(&want).unwrap().re, -1.0);
    }

    #[test]
    fn expectation_values() {
        let zero = PureState::from_bits("0").unwrap();
        assert_abs_diff_eq!(expectation(&Operator::pauli_z(), &zero).unwrap(), 1.0);
        assert_abs_diff_eq!(expectation(&Operator::pauli_x(), &zero).unwrap(), 0.0);
        let y = Operator::pauli_y();
        let y4 = tensor_product(&[&y, &y, &y, &y]).unwrap();
        let ghz = PureState::ghz(4);
        assert_abs_diff_eq!(expectation(&y4, &ghz).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expectation(&y4, &ghz.to_density()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let lowering = Operator::sigma_minus();
        let zero = PureState::from_bits("0").unwrap();
        assert!(matches!(expectation(&lowering, &zero), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn partial_trace_of_bell_is_mixed() {
        let red = partial_trace(&bell().to_density(), &[0]).unwrap();
        assert_abs_diff_eq!(red.matrix()[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(red.matrix()[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(red.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_keep_all_is_identity() {
        let rho = bell().to_density();
        let same = partial_trace(&rho, &[0, 1]).unwrap();
        assert_eq!(same.matrix(), rho.matrix());
        assert!(partial_trace(&rho, &[]).is_err());
    }

    #[test]
    fn partial_trace_drops_vacuum_resonator() {
        let space = HilbertSpace::new(vec![2, 3]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // (|0>+i|1>)/sqrt2 (x) |0>_ph
        let mut amps = vec![ZERO; 6];
        amps[0] = C64::new(s, 0.0);
        amps[3] = C64::new(0.0, s);
        let psi = PureState::from_amplitudes(space, amps).unwrap();
        let red = partial_trace(&psi.to_density(), &[0]).unwrap();
        let q = PureState::from_amplitudes(HilbertSpace::qubits(1), vec![C64::new(s, 0.0), C64::new(0.0, s)])
            .unwrap();
        assert_abs_diff_eq!(fidelity(&red, &q).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let g = PureState::ghz(4);
        assert_abs_diff_eq!(fidelity(&g.to_density(), &g).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = DensityMatrix::maximally_mixed(HilbertSpace::qubits(4));
        assert_abs_diff_eq!(fidelity(&mixed, &g).unwrap(), 1.0 / 16.0, epsilon = 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut e = vec![ZERO; 16];
        e[0] = C64::new(s, 0.0);
        e[15] = C64::new(-s, 0.0);
        let psi_e = PureState::from_amplitudes(HilbertSpace::qubits(4), e).unwrap();
        // oracle: direct inner product
        let overlap: C64 = psi_e.amplitudes().iter().zip(g.amplitudes().iter()).map(|(a, b)| a.conj() * b).sum();
        assert_abs_diff_eq!(overlap.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(&psi_e.to_density(), &g).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_zero_time_and_larmor() {
        let plus = PureState::from_amplitudes(
            HilbertSpace::qubits(1),
            vec![C64::new(0.5f64.sqrt(), 0.0), C64::new(0.5f64.sqrt(), 0.0)],
        )
        .unwrap();
        let omega = 2.0 * std::f64::consts::PI * 1e6;
        let h = Operator::pauli_z().scale(C64::new(omega / 2.0, 0.0));
        let same = matrix_exponential_apply(&h, 0.0, &plus).unwrap();
        assert_abs_diff_eq!(same.inner(&plus).unwrap().re, 1.0, epsilon = 1e-12);
        let out = matrix_exponential_apply(&h, std::f64::consts::PI / omega, &plus).unwrap();
        let minus = PureState::from_amplitudes(
            HilbertSpace::qubits(1),
            vec![C64::new(0.5f64.sqrt(), 0.0), C64::new(-(0.5f64.sqrt()), 0.0)],
        )
        .unwrap();
        assert_abs_diff_eq!(out.inner(&minus).unwrap().norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn exponential_rejects_non_hermitian() {
        let psi = PureState::from_bits("0").unwrap();
        assert!(matrix_exponential_apply(&Operator::sigma_minus(), 1.0, &psi).is_err());
    }
}
