use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub(crate) const TWO_PI: f64 = 2.0 * PI;

/// Circuit parameters in SI units (rad/s, s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega_r: f64,
    /// Absolute idle frequency of each qubit.
    pub omega_idle: Vec<f64>,
    pub g: f64,
    /// Interaction-point detuning from the resonator.
    pub delta_int: f64,
    /// Resonator truncation (number of Fock levels kept).
    pub n_ph: usize,
    /// Cosine edge length of detuning pulses; 0 gives a square pulse.
    pub ramp_time: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        let omega_r = TWO_PI * 6.2e9;
        Self {
            omega_r,
            omega_idle: [500e6, 550e6, 600e6, 650e6].iter().map(|d| omega_r - TWO_PI * d).collect(),
            g: TWO_PI * 15.5e6,
            delta_int: -TWO_PI * 57e6,
            n_ph: 3,
            ramp_time: 10e-9,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        if self.omega_idle.is_empty() {
            return Err(Error::InvalidInput("at least one qubit is required".into()));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidInput("coupling g must be positive".into()));
        }
        if self.delta_int.abs() <= 2.0 * self.g {
            return Err(Error::InvalidInput(format!(
                "|delta_int| = {:.4e} must exceed 2g = {:.4e}",
                self.delta_int.abs(),
                2.0 * self.g
            )));
        }
        if self.n_ph < 2 {
            return Err(Error::InvalidInput(format!("n_ph = {} < 2", self.n_ph)));
        }
        for (j, &w) in self.omega_idle.iter().enumerate() {
            if (w - self.omega_r).abs() <= 2.0 * self.g {
                return Err(Error::InvalidInput(format!("qubit {j} idles within 2g of the resonator")));
            }
        }
        if !(self.ramp_time >= 0.0) {
            return Err(Error::InvalidInput("ramp_time must be non-negative".into()));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.omega_idle.len()
    }

    pub fn omega_int(&self) -> f64 {
        self.omega_r + self.delta_int
    }

    /// Idle detuning of qubit `j` from the resonator.
    pub fn idle_detuning(&self, j: usize) -> f64 {
        self.omega_idle[j] - self.omega_r
    }

    /// Dispersive shift `g^2/delta` tracked by the frame of an idle qubit.
    /// A qubit parked at the interaction point is tracked at its bare frequency.
    pub fn idle_dressing(&self, j: usize) -> f64 {
        let d = self.idle_detuning(j);
        if (d - self.delta_int).abs() <= 1e-9 * self.omega_r.abs().max(1.0) {
            return 0.0;
        }
        self.g * self.g / d
    }

    /// `pi |Delta| / (2 g^2)`.
    pub fn nominal_interaction_time(&self) -> f64 {
        PI * self.delta_int.abs() / (2.0 * self.g * self.g)
    }

    /// Copy restricted to qubit `j`.
    pub fn single_qubit(&self, j: usize) -> Result<DeviceParams> {
        let w = *self
            .omega_idle
            .get(j)
            .ok_or(Error::IndexOutOfRange { index: j, len: self.num_qubits() })?;
        Ok(DeviceParams { omega_idle: vec![w], ..self.clone() })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![2; self.num_qubits()];
        d.push(self.n_ph);
        d
    }
}

/// Markovian decoherence per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub t1: Vec<f64>,
    pub t2eff: Vec<f64>,
    #[serde(default)]
    pub resonator_kappa: f64,
}

impl NoiseParams {
    pub fn uniform(qubits: usize, t1: f64, t2eff: f64) -> Self {
        Self { t1: vec![t1; qubits], t2eff: vec![t2eff; qubits], resonator_kappa: 0.0 }
    }

    pub fn validate(&self, qubits: usize) -> Result<()> {
        if self.t1.len() != qubits || self.t2eff.len() != qubits {
            return Err(Error::DimensionMismatch { expected: qubits, found: self.t1.len().min(self.t2eff.len()) });
        }
        for j in 0..qubits {
            if !(self.t1[j] > 0.0) || !(self.t2eff[j] > 0.0) {
                return Err(Error::InvalidInput(format!("qubit {j}: coherence times must be positive")));
            }
            // small relative slack so t2eff = 2 t1 read back from text is accepted
            if self.t2eff[j] > 2.0 * self.t1[j] * (1.0 + 1e-12) {
                return Err(Error::UnphysicalNoise { qubit: j, t2eff: self.t2eff[j], two_t1: 2.0 * self.t1[j] });
            }
        }
        if self.resonator_kappa < 0.0 {
            return Err(Error::InvalidInput("resonator_kappa must be non-negative".into()));
        }
        Ok(())
    }

    /// Pure-dephasing rate `1/T_phi = 1/T2eff - 1/(2 T1)`.
    pub fn dephasing_rate(&self, j: usize) -> f64 {
        (1.0 / self.t2eff[j] - 0.5 / self.t1[j]).max(0.0)
    }

    pub fn single_qubit(&self, j: usize) -> Result<NoiseParams> {
        if j >= self.t1.len() {
            return Err(Error::IndexOutOfRange { index: j, len: self.t1.len() });
        }
        Ok(NoiseParams { t1: vec![self.t1[j]], t2eff: vec![self.t2eff[j]], resonator_kappa: self.resonator_kappa })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_dispersive() {
        let p = DeviceParams::default();
        p.validate().unwrap();
        assert_eq!(p.dims(), vec![2, 2, 2, 2, 3]);
        // 57 MHz > 2 * 15.5 MHz
        assert!(p.delta_int.abs() > 2.0 * p.g);
    }

    #[test]
    fn nominal_time_is_59_3_ns() {
        let p = DeviceParams::default();
        let oracle = PI * (TWO_PI * 57e6) / (2.0 * (TWO_PI * 15.5e6).powi(2));
        assert!((p.nominal_interaction_time() - oracle).abs() < 1e-18);
        assert!((p.nominal_interaction_time() * 1e9 - 59.3).abs() < 0.1);
    }

    #[test]
    fn invalid_params() {
        let mut p = DeviceParams::default();
        p.n_ph = 1;
        assert!(p.validate().is_err());
        let mut p = DeviceParams::default();
        p.delta_int = -TWO_PI * 20e6;
        assert!(p.validate().is_err());
    }

    #[test]
    fn unphysical_noise() {
        let n = NoiseParams::uniform(4, 600e-9, 1.3e-6);
        assert!(matches!(n.validate(4), Err(Error::UnphysicalNoise { qubit: 0, .. })));
        let ok = NoiseParams::uniform(4, 600e-9, 1.2e-6);
        ok.validate(4).unwrap();
        assert_eq!(ok.dephasing_rate(0), 0.0);
        let n = NoiseParams::uniform(1, 600e-9, 300e-9);
        assert!((n.dephasing_rate(0) - (1.0 / 300e-9 - 1.0 / 1200e-9)).abs() < 1e-3);
    }
}
