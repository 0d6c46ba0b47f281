//! Flat TOML run configuration. Frequencies are in GHz (cycles, not
//! radians), times in ns; everything is converted to SI rad/s and s on use.
//!
//! ```toml
//! omega_r_ghz = 6.2
//! omega_idle_ghz = [5.7, 5.65, 5.6, 5.55]
//! g_ghz = 0.0155
//! delta_int_ghz = -0.057
//! n_ph = 3
//! ramp_time_ns = 10.0
//! dt_ns = 0.01
//! t1_ns = 600.0
//! t2eff_ns = 532.0
//! shots = 3000
//! seed = 1
//! gammas = 21
//! ```

use crate::error::{CliError, CliResult};
use anyon_core::dynamics::{DeviceParams, GhzProtocol, NoiseParams, DEFAULT_DT};
use anyon_core::tomo::Method;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

const GHZ: f64 = 2.0 * PI * 1e9;
const NS: f64 = 1e-9;

pub const DEFAULT_SHOTS: u64 = 3000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_GAMMAS: usize = 21;
pub const DEFAULT_T1_NS: f64 = 600.0;
pub const DEFAULT_TARGET: f64 = 0.574;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Gate,
    Pulse,
}

/// A single value for every qubit or one value per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerQubit {
    All(f64),
    Each(Vec<f64>),
}

impl PerQubit {
    fn expand(&self, n: usize, key: &str) -> CliResult<Vec<f64>> {
        match self {
            PerQubit::All(v) => Ok(vec![*v; n]),
            PerQubit::Each(v) if v.len() == n => Ok(v.clone()),
            PerQubit::Each(v) => Err(CliError::Config(format!("{key}: expected {n} values, found {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega_r_ghz: Option<f64>,
    pub omega_idle_ghz: Option<Vec<f64>>,
    pub g_ghz: Option<f64>,
    pub delta_int_ghz: Option<f64>,
    pub n_ph: Option<usize>,
    pub ramp_time_ns: Option<f64>,
    pub dt_ns: Option<f64>,

    /// Skips the interaction-time tuning when set.
    pub interaction_time_ns: Option<f64>,
    pub frame_corrections_rad: Option<Vec<f64>>,
    pub theta_z_rad: Option<PerQubit>,

    pub t1_ns: Option<PerQubit>,
    pub t2eff_ns: Option<PerQubit>,
    pub resonator_kappa_per_ns: Option<f64>,

    pub backend: Option<Backend>,
    /// Shots per tomography setting or gamma point; 0 uses exact probabilities.
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub gammas: Option<usize>,
    pub tomography: Option<bool>,
    pub reconstruction: Option<Method>,
    pub mle_max_iters: Option<usize>,
    pub mle_tol: Option<f64>,
    /// Per-qubit `[P(0|0), P(1|1)]`; identity when absent.
    pub assignment_fidelity: Option<Vec<[f64; 2]>>,

    pub ramsey_qubit: Option<usize>,
    pub ramsey_t_max_ns: Option<f64>,
    pub ramsey_points: Option<usize>,
    pub ramsey_t2_star_ns: Option<f64>,
    pub ramsey_nodes: Option<usize>,

    pub target_fidelity: Option<f64>,
}

/// Line of the first `key = ...` assignment in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| l.trim_start().strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))).map(|i| i + 1)
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check_ranges().map_err(|(key, msg)| match line_of(text, key) {
            Some(line) => CliError::Config(format!("line {line}: {key}: {msg}")),
            None => CliError::Config(format!("{key}: {msg}")),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks that do not need the device model.
    fn check_ranges(&self) -> Result<(), (&'static str, String)> {
        if self.gammas.is_some_and(|g| g < 2) {
            return Err(("gammas", "at least two points are needed".into()));
        }
        if self.dt_ns.is_some_and(|d| !(d > 0.0)) {
            return Err(("dt_ns", "must be positive".into()));
        }
        if let Some(t) = self.target_fidelity {
            if !(t > 0.0 && t < 1.0) {
                return Err(("target_fidelity", format!("{t} outside (0, 1)")));
            }
        }
        if let Some(a) = &self.assignment_fidelity {
            if a.iter().flatten().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(("assignment_fidelity", "entries must lie in [0, 1]".into()));
            }
        }
        if self.ramsey_points.is_some_and(|p| p < 4) {
            return Err(("ramsey_points", "at least four delays are needed".into()));
        }
        Ok(())
    }

    pub fn shots(&self) -> u64 {
        self.shots.unwrap_or(DEFAULT_SHOTS)
    }

    /// `None` means exact probabilities.
    pub fn sampled_shots(&self) -> Option<u64> {
        Some(self.shots()).filter(|&s| s > 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn backend(&self) -> Backend {
        self.backend.unwrap_or(Backend::Gate)
    }

    pub fn gammas(&self) -> usize {
        self.gammas.unwrap_or(DEFAULT_GAMMAS)
    }

    pub fn dt(&self) -> f64 {
        self.dt_ns.map(|d| d * NS).unwrap_or(DEFAULT_DT)
    }

    pub fn device_params(&self) -> CliResult<DeviceParams> {
        let d = DeviceParams::default();
        let p = DeviceParams {
            omega_r: self.omega_r_ghz.map(|v| v * GHZ).unwrap_or(d.omega_r),
            omega_idle: self.omega_idle_ghz.as_ref().map(|v| v.iter().map(|w| w * GHZ).collect()).unwrap_or(d.omega_idle),
            g: self.g_ghz.map(|v| v * GHZ).unwrap_or(d.g),
            delta_int: self.delta_int_ghz.map(|v| v * GHZ).unwrap_or(d.delta_int),
            n_ph: self.n_ph.unwrap_or(d.n_ph),
            ramp_time: self.ramp_time_ns.map(|v| v * NS).unwrap_or(d.ramp_time),
        };
        p.validate().map_err(|e| CliError::Config(format!("device parameters: {e}")))?;
        Ok(p)
    }

    /// Noise from `t1_ns`/`t2eff_ns`; `None` unless `t2eff_ns` is given.
    pub fn noise(&self, qubits: usize) -> CliResult<Option<NoiseParams>> {
        let Some(t2) = &self.t2eff_ns else {
            return Ok(None);
        };
        let t1 = self.t1(qubits)?;
        let noise = NoiseParams {
            t1,
            t2eff: t2.expand(qubits, "t2eff_ns")?.iter().map(|v| v * NS).collect(),
            resonator_kappa: self.resonator_kappa_per_ns.unwrap_or(0.0) / NS,
        };
        noise.validate(qubits).map_err(|e| CliError::Config(format!("noise parameters: {e}")))?;
        Ok(Some(noise))
    }

    pub fn t1(&self, qubits: usize) -> CliResult<Vec<f64>> {
        Ok(self.t1_ns.clone().unwrap_or(PerQubit::All(DEFAULT_T1_NS)).expand(qubits, "t1_ns")?.iter().map(|v| v * NS).collect())
    }

    /// Protocol fixed by the config, if it names an interaction time.
    pub fn protocol(&self, params: &DeviceParams) -> CliResult<Option<GhzProtocol>> {
        let Some(tau) = self.interaction_time_ns else {
            return Ok(None);
        };
        let n = params.num_qubits();
        let mut p = GhzProtocol::nominal(params).with_interaction_time(tau * NS);
        if let Some(c) = &self.frame_corrections_rad {
            if c.len() != n {
                return Err(CliError::Config(format!("frame_corrections_rad: expected {n} values, found {}", c.len())));
            }
            p = p.with_corrections(c);
        }
        if let Some(t) = &self.theta_z_rad {
            p.theta_z = t.expand(n, "theta_z_rad")?;
        }
        Ok(Some(p))
    }

    pub fn assignment(&self, qubits: usize) -> CliResult<Option<Vec<(f64, f64)>>> {
        match &self.assignment_fidelity {
            None => Ok(None),
            Some(a) if a.len() == qubits => Ok(Some(a.iter().map(|f| (f[0], f[1])).collect())),
            Some(a) => Err(CliError::Config(format!("assignment_fidelity: expected {qubits} pairs, found {}", a.len()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.device_params().unwrap(), DeviceParams::default());
        assert_eq!(c.noise(4).unwrap(), None);
        assert_eq!((c.shots(), c.seed(), c.gammas(), c.backend()), (3000, 1, 21, Backend::Gate));
    }

    #[test]
    fn units_are_converted() {
        let c = RunConfig::parse("omega_r_ghz = 6.2\ng_ghz = 0.0155\nt1_ns = 600\nt2eff_ns = [500, 510, 520, 530]\ndt_ns = 0.02").unwrap();
        let p = c.device_params().unwrap();
        assert!((p.g - 2.0 * PI * 15.5e6).abs() < 1e-3);
        let n = c.noise(4).unwrap().unwrap();
        assert!((n.t1[2] - 600e-9).abs() < 1e-20 && (n.t2eff[3] - 530e-9).abs() < 1e-20);
        assert!((c.dt() - 0.02e-9).abs() < 1e-24);
    }

    #[test]
    fn errors_carry_lines() {
        let e = RunConfig::parse("shots = 10\n\ngammas = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = RunConfig::parse("shots = 10\nbogus = 2\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = RunConfig::parse("shots = \"many\"\n").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn device_errors_only_on_use() {
        let c = RunConfig::parse("g_ghz = -1.0").unwrap();
        assert!(c.device_params().is_err());
    }

    #[test]
    fn unphysical_noise_is_a_config_error() {
        let c = RunConfig::parse("t1_ns = 100\nt2eff_ns = 300").unwrap();
        assert!(matches!(c.noise(4), Err(CliError::Config(_))));
    }
}
