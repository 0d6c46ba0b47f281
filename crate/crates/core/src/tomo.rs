//! Joint readout, shot sampling, state tomography and the GHZ witness.
//!
//! Readout is along the physical z axis. A setting assigns each qubit one of
//! three pre-rotations: `I` (measure Z), `X` (an X/2 pulse, so Z after it
//! measures Y) or `Y` (a Y/2 pulse, so Z after it measures -X).

use crate::dynamics::equatorial_rotation;
use crate::error::{Error, Result};
use crate::hilbert::{fidelity, DensityMatrix, HilbertSpace, PureState, C64};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreRotation {
    I,
    X,
    Y,
}

impl PreRotation {
    fn matrix(self) -> DMatrix<C64> {
        match self {
            PreRotation::I => DMatrix::identity(2, 2),
            PreRotation::X => equatorial_rotation(0.0, FRAC_PI_2),
            PreRotation::Y => equatorial_rotation(FRAC_PI_2, FRAC_PI_2),
        }
    }

    fn label(self) -> char {
        match self {
            PreRotation::I => 'I',
            PreRotation::X => 'X',
            PreRotation::Y => 'Y',
        }
    }
}

/// Pauli axis read out by a pre-rotation, with its sign.
fn measured_axis(r: PreRotation) -> (Pauli1, f64) {
    match r {
        PreRotation::I => (Pauli1::Z, 1.0),
        PreRotation::X => (Pauli1::Y, 1.0),
        PreRotation::Y => (Pauli1::X, -1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pauli1 {
    I,
    X,
    Y,
    Z,
}

impl Pauli1 {
    fn matrix(self) -> DMatrix<C64> {
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli1::I => DMatrix::identity(2, 2),
            Pauli1::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli1::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
            Pauli1::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    pub pre_rotation: Vec<PreRotation>,
}

impl MeasurementSetting {
    pub fn identity(n: usize) -> Self {
        Self { pre_rotation: vec![PreRotation::I; n] }
    }

    pub fn num_qubits(&self) -> usize {
        self.pre_rotation.len()
    }

    pub fn parse(label: &str) -> Result<Self> {
        let pre_rotation = label
            .chars()
            .map(|c| match c {
                'I' => Ok(PreRotation::I),
                'X' => Ok(PreRotation::X),
                'Y' => Ok(PreRotation::Y),
                other => Err(Error::InvalidInput(format!("bad setting character {other:?} in {label:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if pre_rotation.is_empty() {
            return Err(Error::InvalidInput("empty setting label".into()));
        }
        Ok(Self { pre_rotation })
    }

    /// Product of the per-qubit pre-rotations.
    pub fn unitary(&self) -> DMatrix<C64> {
        self.pre_rotation.iter().fold(DMatrix::from_element(1, 1, ONE), |acc, r| acc.kronecker(&r.matrix()))
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.pre_rotation.iter().try_for_each(|r| write!(f, "{}", r.label()))
    }
}

impl Serialize for MeasurementSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MeasurementSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MeasurementSetting::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The `3^n` settings over {I, X, Y}; the all-identity setting comes first.
pub fn qst_settings_for(n: usize) -> Vec<MeasurementSetting> {
    let choices = [PreRotation::I, PreRotation::X, PreRotation::Y];
    (0..3usize.pow(n as u32))
        .map(|mut k| {
            let mut v = vec![PreRotation::I; n];
            for slot in v.iter_mut().rev() {
                *slot = choices[k % 3];
                k /= 3;
            }
            MeasurementSetting { pre_rotation: v }
        })
        .collect()
}

/// The 81 four-qubit settings.
pub fn qst_settings() -> Vec<MeasurementSetting> {
    qst_settings_for(4)
}

/// Outcome probabilities indexed by the bit string `i_1 i_2 ... i_n` (qubit 1 leftmost).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl CountTable {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let shots = counts.iter().sum();
        if shots == 0 {
            return Err(Error::InvalidInput("count table with zero shots".into()));
        }
        Ok(Self { counts, shots })
    }

    pub fn frequencies(&self) -> ProbabilityTable {
        ProbabilityTable { p: self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect() }
    }
}

fn check_qubits(rho: &DensityMatrix, n: usize) -> Result<()> {
    if rho.space() != &HilbertSpace::qubits(n) {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: rho.dim() });
    }
    Ok(())
}

/// Probabilities of the `2^n` outcomes after the setting's pre-rotations.
pub fn joint_readout(state: &DensityMatrix, setting: &MeasurementSetting) -> Result<ProbabilityTable> {
    check_qubits(state, setting.num_qubits())?;
    let u = setting.unitary();
    let rotated = &u * state.matrix() * u.adjoint();
    let mut p: Vec<f64> = rotated.diagonal().iter().map(|z| z.re.max(0.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(ProbabilityTable { p })
}

/// Per-qubit assignment fidelities `(P(0|0), P(1|1))` applied to a table.
pub fn apply_readout_error(table: &ProbabilityTable, assignment: &[(f64, f64)]) -> Result<ProbabilityTable> {
    let n = assignment.len();
    if table.p.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: table.p.len() });
    }
    let mut p = table.p.clone();
    for (j, &(f0, f1)) in assignment.iter().enumerate() {
        if !(0.0..=1.0).contains(&f0) || !(0.0..=1.0).contains(&f1) {
            return Err(Error::InvalidInput(format!("assignment fidelity of qubit {j} outside [0, 1]")));
        }
        let bit = 1 << (n - 1 - j);
        let mut next = vec![0.0; p.len()];
        for (k, &v) in p.iter().enumerate() {
            let (stay, flip) = if k & bit == 0 { (f0, 1.0 - f0) } else { (f1, 1.0 - f1) };
            next[k] += stay * v;
            next[k ^ bit] += flip * v;
        }
        p = next;
    }
    Ok(ProbabilityTable { p })
}

/// Multinomial draw of `shots` outcomes.
pub fn sample_counts(table: &ProbabilityTable, shots: u64, rng: &mut ChaCha8Rng) -> Result<CountTable> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    let mut counts = vec![0u64; table.p.len()];
    let mut left = shots;
    let mut mass = 1.0f64;
    for (k, &p) in table.p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == table.p.len() {
            counts[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(left, q).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng);
        counts[k] = c;
        left -= c;
        mass -= p;
    }
    Ok(CountTable { counts, shots })
}

/// Seeded generator used for every sampling routine.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One setting of a tomography data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub setting: MeasurementSetting,
    pub counts: Vec<u64>,
}

impl TomographyRecord {
    pub fn count_table(&self) -> Result<CountTable> {
        CountTable::new(self.counts.clone())
    }
}

/// Exact probabilities for every setting.
pub fn exact_tomography(rho: &DensityMatrix) -> Result<Vec<(MeasurementSetting, ProbabilityTable)>> {
    let n = rho.space().num_factors();
    qst_settings_for(n).into_iter().map(|s| joint_readout(rho, &s).map(|p| (s, p))).collect()
}

/// Finite-shot data for every setting.
pub fn sample_tomography(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Vec<TomographyRecord>> {
    sample_tables(&exact_tomography(rho)?, shots, seed)
}

/// Draws `shots` outcomes from each table in order, from one generator seeded with `seed`.
pub fn sample_tables(tables: &[(MeasurementSetting, ProbabilityTable)], shots: u64, seed: u64) -> Result<Vec<TomographyRecord>> {
    let mut rng = seeded_rng(seed);
    tables
        .iter()
        .map(|(setting, p)| Ok(TomographyRecord { setting: setting.clone(), counts: sample_counts(p, shots, &mut rng)?.counts }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
}

#[derive(Debug, Clone)]
pub struct ReconstructedState {
    pub rho: DensityMatrix,
    pub method: Method,
    pub settings_used: usize,
    /// Log-likelihood of the final iterate (maximum-likelihood only).
    pub log_likelihood: Option<f64>,
    /// Trace distance to the nearest physical state (linear inversion only).
    pub psd_distance: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted step.
    pub likelihood_trace: Vec<f64>,
}

fn require_complete(settings: &[&MeasurementSetting], n: usize) -> Result<()> {
    for s in qst_settings_for(n) {
        if !settings.iter().any(|t| **t == s) {
            return Err(Error::MissingSetting(s.to_string()));
        }
    }
    Ok(())
}

fn pauli_string(labels: &[Pauli1]) -> DMatrix<C64> {
    labels.iter().fold(DMatrix::from_element(1, 1, ONE), |acc, p| acc.kronecker(&p.matrix()))
}

/// Inversion `rho = 2^{-n} sum_P <P> P`, each Pauli expectation averaged over
/// all settings that measure it.
pub fn reconstruct_linear(data: &[(MeasurementSetting, ProbabilityTable)]) -> Result<ReconstructedState> {
    let n = data.first().ok_or_else(|| Error::MissingSetting("any".into()))?.0.num_qubits();
    require_complete(&data.iter().map(|(s, _)| s).collect::<Vec<_>>(), n)?;
    for (s, p) in data {
        if s.num_qubits() != n || p.p.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, found: p.p.len() });
        }
    }
    let d = 1usize << n;
    let all = [Pauli1::I, Pauli1::X, Pauli1::Y, Pauli1::Z];
    let mut rho = DMatrix::from_element(d, d, ZERO);
    for code in 0..4usize.pow(n as u32) {
        let mut labels = vec![Pauli1::I; n];
        let mut c = code;
        for slot in labels.iter_mut().rev() {
            *slot = all[c % 4];
            c /= 4;
        }
        let mut sum = 0.0;
        let mut used = 0usize;
        for (s, p) in data {
            let mut sign = 1.0;
            let mut mask = 0usize;
            let compatible = labels.iter().zip(&s.pre_rotation).enumerate().all(|(j, (&l, &r))| {
                if l == Pauli1::I {
                    return true;
                }
                let (axis, sg) = measured_axis(r);
                if axis == l {
                    sign *= sg;
                    mask |= 1 << (n - 1 - j);
                    true
                } else {
                    false
                }
            });
            if !compatible {
                continue;
            }
            let e: f64 = p.p.iter().enumerate().map(|(k, &v)| if (k & mask).count_ones().is_multiple_of(2) { v } else { -v }).sum();
            sum += sign * e;
            used += 1;
        }
        let expectation = sum / used as f64;
        if expectation != 0.0 {
            rho += pauli_string(&labels) * C64::new(expectation / d as f64, 0.0);
        }
    }
    // Hermitian with unit trace by construction; positivity is not enforced
    let raw = DensityMatrix::from_parts(HilbertSpace::qubits(n), (&rho + rho.adjoint()) * C64::new(0.5, 0.0));
    let (physical, _) = raw.clip_to_physical();
    let psd_distance = raw.trace_distance(&physical)?;
    Ok(ReconstructedState {
        rho: raw,
        method: Method::Linear,
        settings_used: data.len(),
        log_likelihood: None,
        psd_distance: Some(psd_distance),
        iterations: 0,
        converged: true,
        likelihood_trace: Vec::new(),
    })
}

/// Linear inversion of count data.
pub fn reconstruct_linear_counts(data: &[TomographyRecord]) -> Result<ReconstructedState> {
    let tables = data.iter().map(|r| Ok((r.setting.clone(), r.count_table()?.frequencies()))).collect::<Result<Vec<_>>>()?;
    reconstruct_linear(&tables)
}

struct Likelihood {
    rotations: Vec<DMatrix<C64>>,
    counts: Vec<Vec<f64>>,
    total: f64,
}

impl Likelihood {
    fn probabilities(&self, rho: &DMatrix<C64>, k: usize) -> Vec<f64> {
        let u = &self.rotations[k];
        (u * rho * u.adjoint()).diagonal().iter().map(|z| z.re.max(1e-300)).collect()
    }

    fn value(&self, rho: &DMatrix<C64>) -> f64 {
        (0..self.rotations.len())
            .map(|k| {
                let p = self.probabilities(rho, k);
                self.counts[k].iter().zip(&p).filter(|(c, _)| **c > 0.0).map(|(c, p)| c * p.ln()).sum::<f64>()
            })
            .sum()
    }

    /// Maximizer `beta >= 1` of the (concave) log-likelihood along `rho + beta delta`,
    /// shrunk towards 1 until the point is PSD. `None` when no extension helps.
    fn best_extension(&self, rho: &DMatrix<C64>, delta: &DMatrix<C64>) -> Option<f64> {
        let mut terms = Vec::new();
        for k in 0..self.rotations.len() {
            let u = &self.rotations[k];
            let p0 = (u * rho * u.adjoint()).diagonal();
            let dp = (u * delta * u.adjoint()).diagonal();
            for ((c, a), b) in self.counts[k].iter().zip(p0.iter()).zip(dp.iter()) {
                terms.push((*c, a.re, b.re));
            }
        }
        let mut upper = 1e6f64;
        for &(_, a, b) in &terms {
            if b < 0.0 {
                upper = upper.min(-a / b);
            }
        }
        let upper = 1.0 + 0.99 * (upper - 1.0);
        let slope = |beta: f64| -> (f64, f64) {
            terms.iter().filter(|t| t.0 > 0.0).fold((0.0, 0.0), |(g, h), &(c, a, b)| {
                let p = a + beta * b;
                (g + c * b / p, h - c * b * b / (p * p))
            })
        };
        if upper <= 1.0 || slope(1.0).0 <= 0.0 {
            return None;
        }
        let mut beta = 1.0;
        for _ in 0..50 {
            let (g, h) = slope(beta);
            let step = if h < 0.0 { -g / h } else { upper - beta };
            let nb = (beta + step).clamp(1.0, upper);
            if (nb - beta).abs() < 1e-9 * beta {
                beta = nb;
                break;
            }
            beta = nb;
        }
        while beta > 1.0 + 1e-9 {
            let cand = rho + delta * C64::new(beta, 0.0);
            let cand = (&cand + cand.adjoint()) * C64::new(0.5, 0.0);
            if cand.symmetric_eigenvalues().min() >= 0.0 {
                return Some(beta);
            }
            beta = 1.0 + 0.5 * (beta - 1.0);
        }
        None
    }

    /// `R = N^{-1} sum_k n_k / p_k Pi_k`.
    fn r_operator(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = rho.nrows();
        let mut r = DMatrix::from_element(d, d, ZERO);
        for (k, u) in self.rotations.iter().enumerate() {
            let p = self.probabilities(rho, k);
            let diag = nalgebra::DVector::from_iterator(
                d,
                self.counts[k].iter().zip(&p).map(|(c, p)| C64::new(c / p / self.total, 0.0)),
            );
            let scaled = DMatrix::from_diagonal(&diag) * u;
            r += u.adjoint() * scaled;
        }
        r
    }
}

/// Iterative maximum-likelihood reconstruction. Each step applies
/// `rho -> (I + e R) rho (I + e R)`, renormalized, with `e` reduced until the
/// log-likelihood does not decrease. `tol` applies to the gain per shot.
pub fn reconstruct_mle(data: &[TomographyRecord], max_iters: usize, tol: f64) -> Result<ReconstructedState> {
    let n = data.first().ok_or_else(|| Error::MissingSetting("any".into()))?.setting.num_qubits();
    require_complete(&data.iter().map(|r| &r.setting).collect::<Vec<_>>(), n)?;
    let d = 1usize << n;
    let mut counts = Vec::with_capacity(data.len());
    for r in data {
        if r.counts.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: r.counts.len() });
        }
        r.count_table()?;
        counts.push(r.counts.iter().map(|&c| c as f64).collect::<Vec<f64>>());
    }
    let like = Likelihood {
        rotations: data.iter().map(|r| r.setting.unitary()).collect(),
        total: counts.iter().flatten().sum(),
        counts,
    };
    let id = DMatrix::<C64>::identity(d, d);
    let mut rho = id.clone() * C64::new(1.0 / d as f64, 0.0);
    let mut l = like.value(&rho);
    let mut trace = vec![l];
    let mut eps = 1e9;
    let mut converged = false;
    let mut iterations = 0;
    // diluted RrhoR step, accepted only if it does not lose likelihood
    let step = |base: &DMatrix<C64>, eps: f64, floor: f64| -> Option<(DMatrix<C64>, f64, f64)> {
        let r = like.r_operator(base);
        let mut e = eps;
        while e > 1e-12 {
            let a = &id + &r * C64::new(e, 0.0);
            let mut next = &a * base * a.adjoint();
            let tr = next.trace().re;
            next /= C64::new(tr, 0.0);
            next = (&next + next.adjoint()) * C64::new(0.5, 0.0);
            let ln = like.value(&next);
            if ln >= floor {
                return Some((next, ln, e));
            }
            e *= 0.5;
        }
        None
    };
    while iterations < max_iters {
        iterations += 1;
        let accepted = step(&rho, eps, l);
        let Some((mut next, mut ln, e)) = accepted else {
            converged = true;
            break;
        };
        // exact line search along the accepted step, kept inside the PSD cone
        let delta = &next - &rho;
        if let Some(beta) = like.best_extension(&rho, &delta) {
            let cand = &rho + &delta * C64::new(beta, 0.0);
            let mut cand = (&cand + cand.adjoint()) * C64::new(0.5, 0.0);
            let tr = cand.trace().re;
            cand /= C64::new(tr, 0.0);
            let lc = like.value(&cand);
            if lc > ln && cand.clone().symmetric_eigenvalues().min() >= 0.0 {
                next = cand;
                ln = lc;
            }
        }
        let gain = (ln - l) / like.total;
        rho = next;
        l = ln;
        trace.push(l);
        eps = (e * 2.0).min(1e9);
        if gain < tol {
            converged = true;
            break;
        }
    }
    Ok(ReconstructedState {
        rho: DensityMatrix::new(HilbertSpace::qubits(n), rho)?,
        method: Method::Mle,
        settings_used: data.len(),
        log_likelihood: Some(l),
        psd_distance: None,
        iterations,
        converged,
        likelihood_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub fidelity: f64,
    pub std_error: f64,
    /// Fidelity strictly above 1/2.
    pub passes: bool,
    /// `(fidelity - 1/2) / std_error`; `None` without an error estimate.
    pub sigma_margin: Option<f64>,
}

/// Witness verdict from a fidelity and its standard error.
pub fn witness_from(fidelity: f64, std_error: f64) -> WitnessReport {
    WitnessReport {
        fidelity,
        std_error,
        passes: fidelity > 0.5,
        sigma_margin: (std_error > 0.0).then(|| (fidelity - 0.5) / std_error),
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Fidelity of `rho` to `target` with a bootstrap error bar when the
/// underlying counts are supplied. Resampled data sets are inverted linearly.
pub fn ghz_witness(
    rho: &DensityMatrix,
    target: &PureState,
    counts: Option<&[TomographyRecord]>,
    seed: u64,
) -> Result<WitnessReport> {
    let f = fidelity(rho, target)?;
    let Some(data) = counts else {
        return Ok(witness_from(f, 0.0));
    };
    let mut rng = seeded_rng(seed);
    let mut samples = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let resampled = data
            .iter()
            .map(|r| {
                let t = r.count_table()?;
                Ok(TomographyRecord { setting: r.setting.clone(), counts: sample_counts(&t.frequencies(), t.shots, &mut rng)?.counts })
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(fidelity(&reconstruct_linear_counts(&resampled)?.rho, target)?);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    // pure stabilizer states give deterministic parities; keep rounding noise out of the margin
    let sd = var.sqrt();
    Ok(witness_from(f, if sd < 1e-12 { 0.0 } else { sd }))
}
