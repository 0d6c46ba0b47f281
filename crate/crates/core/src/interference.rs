//! Parity-oscillation (correlation) measurements and the loop experiments.
//!
//! `P(gamma)` is the product over qubits of `cos(gamma) Y' + sin(gamma) X'`.
//! It is read out by rotating every qubit by `gamma` about `z'` and measuring
//! all qubits along the physical z axis (which is `y'`), then taking the
//! parity of the outcomes.

use crate::dynamics::{frame::wrap_phase, gate_level_backend, primed_pauli, FrameTracker, GateOp, PrimedAxis, PulseBackend};
use crate::error::{Error, Result};
use crate::hilbert::{tensor_product, DensityMatrix, HilbertSpace, Operator, PureState, C64};
use crate::tomo::{joint_readout, sample_counts, seeded_rng, CountTable, MeasurementSetting, ProbabilityTable};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

/// Oscillation frequency of the four-qubit parity in `gamma`.
pub const PARITY_FREQUENCY: f64 = 4.0;

/// Minimum number of scan points accepted by the fits.
pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BraidScenario {
    /// Loop around an empty vertex.
    EmptyVertex,
    /// Create an e particle with `Z'`, loop around it, annihilate it again.
    EVertex,
    /// `Z'/2`, loop, `-Z'/2`.
    HalfFilled,
    /// The GHZ state itself, no loop.
    Ground,
    /// `Z'` on the first qubit, no loop.
    Excited,
}

impl BraidScenario {
    /// The three loop experiments.
    pub const BRAIDS: [BraidScenario; 3] = [BraidScenario::EmptyVertex, BraidScenario::EVertex, BraidScenario::HalfFilled];

    pub fn label(&self) -> &'static str {
        match self {
            BraidScenario::EmptyVertex => "empty_vertex",
            BraidScenario::EVertex => "e_vertex",
            BraidScenario::HalfFilled => "half_filled",
            BraidScenario::Ground => "ground",
            BraidScenario::Excited => "excited",
        }
    }

    /// Rotations applied after the GHZ preparation.
    pub fn ops(&self) -> Vec<GateOp> {
        match self {
            BraidScenario::EmptyVertex => vec![GateOp::Loop],
            BraidScenario::EVertex => vec![GateOp::ZPrime(0), GateOp::Loop, GateOp::ZPrime(0)],
            BraidScenario::HalfFilled => vec![GateOp::ZHalf(0), GateOp::Loop, GateOp::ZHalfInverse(0)],
            BraidScenario::Ground => vec![],
            BraidScenario::Excited => vec![GateOp::ZPrime(0)],
        }
    }

    /// Ideal phase of the scan.
    pub fn ideal_phase(&self) -> f64 {
        match self {
            BraidScenario::EmptyVertex | BraidScenario::EVertex | BraidScenario::Ground => 0.0,
            BraidScenario::HalfFilled | BraidScenario::Excited => PI,
        }
    }
}

impl fmt::Display for BraidScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BraidScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            BraidScenario::EmptyVertex,
            BraidScenario::EVertex,
            BraidScenario::HalfFilled,
            BraidScenario::Ground,
            BraidScenario::Excited,
        ]
        .into_iter()
        .find(|b| b.label() == s)
        .ok_or_else(|| Error::InvalidInput(format!("unknown scenario {s:?}")))
    }
}

/// Physical matrix of `P(gamma)` for the primed axes in `frame`.
pub fn correlation_operator(gamma: f64, frame: &FrameTracker) -> Result<Operator> {
    if frame.num_qubits() == 0 {
        return Err(Error::InvalidInput("empty frame".into()));
    }
    let (c, s) = (C64::new(gamma.cos(), 0.0), C64::new(gamma.sin(), 0.0));
    let factors: Vec<Operator> = frame
        .phi
        .iter()
        .map(|&phi| {
            let m = primed_pauli(PrimedAxis::Y, phi).matrix() * c + primed_pauli(PrimedAxis::X, phi).matrix() * s;
            Operator::new(HilbertSpace::qubits(1), m)
        })
        .collect::<Result<_>>()?;
    tensor_product(&factors.iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityEstimate {
    pub value: f64,
    pub std_error: f64,
}

fn parity_sign(outcome: usize) -> f64 {
    if outcome.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Parity of exact outcome probabilities.
pub fn parity_from_probabilities(table: &ProbabilityTable) -> f64 {
    table.p.iter().enumerate().map(|(k, p)| parity_sign(k) * p).sum()
}

/// Parity-weighted frequency with its binomial standard error `sqrt((1 - v^2) / N)`.
pub fn parity_from_counts(counts: &CountTable) -> Result<ParityEstimate> {
    if counts.shots == 0 {
        return Err(Error::InvalidInput("count table with zero shots".into()));
    }
    let n = counts.shots as f64;
    let value: f64 = counts.counts.iter().enumerate().map(|(k, &c)| parity_sign(k) * c as f64).sum::<f64>() / n;
    Ok(ParityEstimate { value, std_error: ((1.0 - value * value).max(0.0) / n).sqrt() })
}

/// How a scan executes the rotations.
#[derive(Debug, Clone, Copy)]
pub enum ScanBackend<'a> {
    /// Ideal instantaneous rotations on a four-qubit register.
    Gate,
    Pulse(&'a PulseBackend),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationScan {
    pub scenario: BraidScenario,
    pub gammas: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard error per point; zero for exact probabilities.
    pub errors: Vec<f64>,
    /// Shots per point; `None` for exact probabilities.
    pub shots: Option<u64>,
}

impl CorrelationScan {
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Columns `gamma_rad, parity, parity_stderr, shots` (shots is 0 for exact).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma_rad,parity,parity_stderr,shots\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{:.12},{:.12},{:.12},{}\n",
                self.gammas[k],
                self.values[k],
                self.errors[k],
                self.shots.unwrap_or(0)
            ));
        }
        out
    }
}

/// `n` uniform points on `[0, pi]`.
pub fn gamma_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("a gamma grid needs at least two points".into()));
    }
    Ok((0..n).map(|k| PI * k as f64 / (n - 1) as f64).collect())
}

fn validate_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::InvalidInput("no gamma points".into()));
    }
    if gammas.iter().any(|g| !g.is_finite()) || gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("gammas must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn rotations(n: usize, gamma: f64) -> Vec<GateOp> {
    (0..n).map(|q| GateOp::RotateZPrime(q, gamma)).collect()
}

/// Scenario state on the gate backend, before the gamma rotation.
pub fn gate_scenario_state(scenario: BraidScenario, qubits: usize) -> Result<PureState> {
    let mut ops = vec![GateOp::PrepareGhz];
    ops.extend(scenario.ops());
    gate_level_backend(&ops, &PureState::basis(&HilbertSpace::qubits(qubits), 0)?)
}

/// Prepares the GHZ state, applies the scenario, then for each gamma rotates
/// every qubit about `z'`, reads all qubits out jointly and forms the parity.
/// With `shots = None` the exact parity is recorded; otherwise counts are
/// sampled with a generator seeded from `seed` and the point's index.
pub fn run_scan(
    scenario: BraidScenario,
    gammas: &[f64],
    shots: Option<u64>,
    backend: ScanBackend<'_>,
    seed: u64,
) -> Result<CorrelationScan> {
    validate_gammas(gammas)?;
    if shots == Some(0) {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    let at = |index: usize| move |e: Error| Error::AtGamma { index, source: Box::new(e) };
    let readouts: Vec<ProbabilityTable> = match backend {
        ScanBackend::Gate => {
            let base = gate_scenario_state(scenario, 4)?;
            let n = base.space().num_factors();
            gammas
                .iter()
                .enumerate()
                .map(|(k, &g)| {
                    let out = gate_level_backend(&rotations(n, g), &base).map_err(at(k))?;
                    joint_readout(&out.to_density(), &MeasurementSetting::identity(n)).map_err(at(k))
                })
                .collect::<Result<_>>()?
        }
        ScanBackend::Pulse(pulse) => {
            let prepared = pulse.prepare_ghz()?;
            let base = pulse.apply(&prepared, &scenario.ops())?;
            let n = pulse.params.num_qubits();
            gammas
                .iter()
                .enumerate()
                .map(|(k, &g)| {
                    let run = pulse.apply(&base, &rotations(n, g)).map_err(at(k))?;
                    let rho: DensityMatrix = run.qubit_state().map_err(at(k))?;
                    joint_readout(&rho, &MeasurementSetting::identity(n)).map_err(at(k))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut values = Vec::with_capacity(gammas.len());
    let mut errors = Vec::with_capacity(gammas.len());
    for (k, table) in readouts.iter().enumerate() {
        match shots {
            None => {
                values.push(parity_from_probabilities(table));
                errors.push(0.0);
            }
            Some(s) => {
                let mut rng = seeded_rng(seed);
                rng.set_stream(k as u64);
                let est = parity_from_counts(&sample_counts(table, s, &mut rng).map_err(at(k))?)?;
                values.push(est.value);
                errors.push(est.std_error);
            }
        }
    }
    Ok(CorrelationScan { scenario, gammas: gammas.to_vec(), values, errors, shots })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    /// In (-pi, pi].
    #[serde(rename = "phi_rad")]
    pub phi: f64,
    #[serde(rename = "phi_err")]
    pub phi_error: f64,
    pub contrast: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

struct LinearCosine {
    coeffs: Vector3<f64>,
    cov: Matrix3<f64>,
    rss: f64,
}

/// Least squares for `a cos(k g) - b sin(k g) + c`, weighted by `1/err^2`
/// when every point carries a positive error.
fn linear_cosine(scan: &CorrelationScan, k: f64) -> Result<LinearCosine> {
    let weighted = scan.errors.iter().all(|&e| e > 0.0);
    let w = |i: usize| if weighted { 1.0 / (scan.errors[i] * scan.errors[i]) } else { 1.0 };
    let row = |g: f64| Vector3::new((k * g).cos(), -(k * g).sin(), 1.0);
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (i, (&g, &v)) in scan.gammas.iter().zip(&scan.values).enumerate() {
        let x = row(g);
        normal += x * x.transpose() * w(i);
        rhs += x * (v * w(i));
    }
    let eig = normal.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if hi <= 0.0 || lo <= 1e-10 * hi {
        return Err(Error::Degenerate("scan points do not resolve the cosine (all gammas equal modulo the period)".into()));
    }
    let inv = normal.try_inverse().ok_or_else(|| Error::Degenerate("singular normal matrix".into()))?;
    let coeffs = inv * rhs;
    let rss: f64 = scan
        .gammas
        .iter()
        .zip(&scan.values)
        .enumerate()
        .map(|(i, (&g, &v))| w(i) * (v - row(g).dot(&coeffs)).powi(2))
        .sum();
    let dof = scan.len().saturating_sub(3).max(1) as f64;
    // with known errors the covariance is the inverse normal matrix; otherwise scale by the residual variance
    let cov = if weighted { inv } else { inv * (rss / dof) };
    Ok(LinearCosine { coeffs, cov, rss })
}

fn check_fit_input(scan: &CorrelationScan, period: f64) -> Result<()> {
    if scan.values.len() != scan.len() || scan.errors.len() != scan.len() {
        return Err(Error::DimensionMismatch { expected: scan.len(), found: scan.values.len().min(scan.errors.len()) });
    }
    if scan.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidInput(format!("a fit needs at least {MIN_FIT_POINTS} points, got {}", scan.len())));
    }
    let span = scan.gammas[scan.len() - 1] - scan.gammas[0];
    if span < period - 1e-9 {
        return Err(Error::InvalidInput(format!("gamma span {span:.4} is shorter than one period {period:.4}")));
    }
    Ok(())
}

fn cosine_from(scan: &CorrelationScan, k: f64, lin: &LinearCosine) -> CosineFit {
    let (a, b, c) = (lin.coeffs[0], lin.coeffs[1], lin.coeffs[2]);
    let amp2 = a * a + b * b;
    let grad = Vector3::new(-b / amp2, a / amp2, 0.0);
    let phi_var = (grad.transpose() * lin.cov * grad)[(0, 0)];
    let residual: f64 = scan
        .gammas
        .iter()
        .zip(&scan.values)
        .map(|(&g, &v)| (v - (a * (k * g).cos() - b * (k * g).sin() + c)).powi(2))
        .sum();
    CosineFit {
        phi: wrap_phase(b.atan2(a)),
        phi_error: phi_var.max(0.0).sqrt(),
        contrast: amp2.sqrt(),
        offset: c,
        residual_rms: (residual / scan.len() as f64).sqrt(),
    }
}

/// Fits `A cos(4 gamma + phi) + c` with contrast and offset free.
pub fn fit_cosine(scan: &CorrelationScan) -> Result<CosineFit> {
    check_fit_input(scan, FRAC_PI_2)?;
    let lin = linear_cosine(scan, PARITY_FREQUENCY)?;
    Ok(cosine_from(scan, PARITY_FREQUENCY, &lin))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFit {
    pub frequency: f64,
    pub fit: CosineFit,
}

/// Diagnostic fit that also floats the frequency, searched on `[1, 8]`.
pub fn fit_free_frequency(scan: &CorrelationScan) -> Result<FrequencyFit> {
    check_fit_input(scan, FRAC_PI_2)?;
    let cost = |k: f64| linear_cosine(scan, k).map(|l| l.rss).unwrap_or(f64::INFINITY);
    let grid: Vec<f64> = (0..=700).map(|i| 1.0 + 0.01 * i as f64).collect();
    let best = grid.iter().copied().min_by(|a, b| cost(*a).total_cmp(&cost(*b))).expect("non-empty grid");
    // golden-section refinement inside the neighbouring grid cells
    let (mut lo, mut hi) = ((best - 0.01).max(1.0), (best + 0.01).min(8.0));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-9 {
        let m1 = hi - r * (hi - lo);
        let m2 = lo + r * (hi - lo);
        if cost(m1) <= cost(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let k = 0.5 * (lo + hi);
    let lin = linear_cosine(scan, k)?;
    Ok(FrequencyFit { frequency: k, fit: cosine_from(scan, k, &lin) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDifference {
    /// `phi_b - phi_a` in (-pi, pi].
    pub delta_phi: f64,
    pub error: f64,
}

pub fn braiding_phase_difference(scan_a: &CorrelationScan, scan_b: &CorrelationScan) -> Result<PhaseDifference> {
    let a = fit_cosine(scan_a)?;
    let b = fit_cosine(scan_b)?;
    Ok(PhaseDifference { delta_phi: wrap_phase(b.phi - a.phi), error: a.phi_error.hypot(b.phi_error) })
}
