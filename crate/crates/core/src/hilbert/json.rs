use super::{DensityMatrix, HilbertSpace, PureState, C64};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Wire format shared by states and density matrices: row-major real and
/// imaginary parts plus the factor dimensions. A pure state stores a
/// `total_dim`-long vector; a density matrix stores `total_dim^2` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl StateJson {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dims: rho.space().factor_dims().to_vec(), re, im }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        Self {
            dims: psi.space().factor_dims().to_vec(),
            re: v.iter().map(|c| c.re).collect(),
            im: v.iter().map(|c| c.im).collect(),
        }
    }

    fn entries(&self, expected: usize) -> Result<Vec<C64>> {
        if self.re.len() != expected || self.im.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: self.re.len().max(self.im.len()) });
        }
        Ok(self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect())
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        let space = HilbertSpace::new(self.dims.clone())?;
        let n = space.total_dim();
        let e = self.entries(n * n)?;
        DensityMatrix::new(space, DMatrix::from_row_slice(n, n, &e))
    }

    pub fn to_pure(&self) -> Result<PureState> {
        let space = HilbertSpace::new(self.dims.clone())?;
        let n = space.total_dim();
        let e = self.entries(n)?;
        PureState::from_amplitudes(space, DVector::from_vec(e).iter().copied().collect())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_round_trip() {
        let rho = PureState::ghz_with_phase(4, 0.7).to_density();
        let text = StateJson::from_density(&rho).to_json_string().unwrap();
        let back = StateJson::from_json_str(&text).unwrap().to_density().unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        assert_eq!(back.space(), rho.space());
    }

    #[test]
    fn pure_round_trip_and_layout() {
        let psi = PureState::ghz_with_phase(2, std::f64::consts::FRAC_PI_2);
        let j = StateJson::from_pure(&psi);
        assert_eq!(j.dims, vec![2, 2]);
        assert!((j.im[3] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(j.to_pure().unwrap(), psi);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let j = StateJson { dims: vec![2], re: vec![1.0, 0.0, 0.0], im: vec![0.0; 3] };
        assert!(j.to_density().is_err());
    }
}
