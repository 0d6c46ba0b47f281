//! One-step GHZ preparation, its calibration loops, and pulse-level versions
//! of the abstract rotations.

use super::evolve::{density_from_rows, pure_from_vec, rows_from_density, EvolutionResult, Model, Propagator};
use super::evolve::{evolve_lindblad, evolve_unitary};
use super::frame::{to_primed, track_frames, FrameTracker};
use super::gate::GateOp;
use super::nelder_mead;
use super::params::{DeviceParams, NoiseParams};
use super::pulse::{Pulse, PulseSequence};
use crate::error::{Error, Result};
use crate::hilbert::{fidelity, partial_trace, DensityMatrix, HilbertSpace, PureState, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub const X_HALF_FWHM: f64 = 5e-9;
pub const THETA_FWHM: f64 = 4e-9;
pub const Z_PRIME_FWHM: f64 = 10e-9;
pub const X_PRIME_FWHM: f64 = 5e-9;
/// Default per-qubit phase-adjustment angle; four of them give the -pi/2 that
/// turns `(|0'..> + i|1'..>)` into `(|0'..> + |1'..>)`.
pub const THETA_Z_DEFAULT: f64 = -PI / 8.0;

const WINDOW_PER_FWHM: f64 = 4.0;
const MAX_NM_EVALUATIONS: usize = 2000;

/// Timing and phase choices of the GHZ preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzProtocol {
    /// Time at the interaction frequency, measured between ramp midpoints.
    pub interaction_time: f64,
    /// Rotation angle of each phase-adjustment pulse.
    pub theta_z: Vec<f64>,
    /// Per-qubit corrections added to the tracked frame azimuths.
    pub frame_corrections: Vec<f64>,
}

impl GhzProtocol {
    pub fn nominal(params: &DeviceParams) -> Self {
        let n = params.num_qubits();
        Self {
            interaction_time: params.nominal_interaction_time(),
            theta_z: vec![THETA_Z_DEFAULT; n],
            frame_corrections: vec![0.0; n],
        }
    }

    pub fn with_interaction_time(&self, tau: f64) -> Self {
        Self { interaction_time: tau, ..self.clone() }
    }

    pub fn with_corrections(&self, corrections: &[f64]) -> Self {
        Self { frame_corrections: corrections.to_vec(), ..self.clone() }
    }

    fn check(&self, params: &DeviceParams) -> Result<()> {
        let n = params.num_qubits();
        if self.theta_z.len() != n || self.frame_corrections.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.theta_z.len().min(self.frame_corrections.len()) });
        }
        if !(self.interaction_time > params.ramp_time) {
            return Err(Error::InvalidInput(format!(
                "interaction time {:.3e} s must exceed the ramp time {:.3e} s",
                self.interaction_time, params.ramp_time
            )));
        }
        Ok(())
    }

    fn detune_start() -> f64 {
        WINDOW_PER_FWHM * X_HALF_FWHM
    }

    /// Start of the phase-adjustment pulses.
    pub fn theta_start(&self, params: &DeviceParams) -> f64 {
        Self::detune_start() + self.interaction_time + params.ramp_time
    }

    pub fn duration(&self, params: &DeviceParams) -> f64 {
        self.theta_start(params) + WINDOW_PER_FWHM * THETA_FWHM
    }

    fn detunes(&self, params: &DeviceParams) -> Vec<Pulse> {
        (0..params.num_qubits())
            .map(|j| Pulse::detune(j, Self::detune_start(), params.omega_int(), self.interaction_time, params.ramp_time))
            .collect()
    }

    /// Primed azimuths from the frequency trajectory alone.
    pub fn bare_frame(&self, params: &DeviceParams) -> Result<FrameTracker> {
        self.check(params)?;
        Ok(track_frames(params, &PulseSequence::new(self.detunes(params))?))
    }

    /// Primed azimuths including the calibrated corrections.
    pub fn frame(&self, params: &DeviceParams) -> Result<FrameTracker> {
        Ok(self.bare_frame(params)?.shifted(&self.frame_corrections))
    }

    /// X/2 pulses and the excursion to the interaction frequency.
    ///
    /// Each X/2 is phased with the qubit's azimuth at the start of the flat
    /// top, so all qubits point the same way in the interaction frame when
    /// the exchange begins.
    pub fn entangling_sequence(&self, params: &DeviceParams) -> Result<PulseSequence> {
        let bare = self.bare_frame(params)?;
        let mut pulses: Vec<Pulse> =
            bare.phi.iter().enumerate().map(|(j, &phi)| Pulse::gaussian(j, 0.0, X_HALF_FWHM, FRAC_PI_2, phi)).collect();
        pulses.extend(self.detunes(params));
        PulseSequence::new(pulses)
    }

    /// Full preparation including the phase-adjustment pulses about z'.
    pub fn sequence(&self, params: &DeviceParams) -> Result<PulseSequence> {
        let frame = self.frame(params)?;
        let t = self.theta_start(params);
        let theta: Vec<Pulse> =
            (0..params.num_qubits()).map(|j| Pulse::gaussian(j, t, THETA_FWHM, self.theta_z[j], frame.phi[j])).collect();
        self.entangling_sequence(params)?.extended(&theta)
    }
}

/// Nominal preparation sequence.
pub fn ghz_sequence(params: &DeviceParams) -> Result<PulseSequence> {
    GhzProtocol::nominal(params).sequence(params)
}

/// `(|0'...0'> + i|1'...1'>)/sqrt2`: the register right after the exchange.
pub fn entangled_target(n: usize) -> PureState {
    PureState::ghz_with_phase(n, FRAC_PI_2)
}

fn register_ground(params: &DeviceParams) -> Result<PureState> {
    PureState::basis(&HilbertSpace::new(params.dims())?, 0)
}

fn qubit_factors(params: &DeviceParams) -> Vec<usize> {
    (0..params.num_qubits()).collect()
}

/// Fidelity of a qubit state to a primed-coordinate target.
pub fn primed_fidelity(qubit_state: &DensityMatrix, frame: &FrameTracker, target: &PureState) -> Result<f64> {
    fidelity(&to_primed(qubit_state, frame)?, target)
}

/// Best common offset added to every azimuth, and the fidelity it reaches.
pub fn best_common_offset(qubit_state: &DensityMatrix, frame: &FrameTracker, target: &PureState) -> Result<(f64, f64)> {
    let n = frame.num_qubits();
    let f = |a: f64| primed_fidelity(qubit_state, &frame.shifted(&vec![a; n]), target);
    let grid = 180;
    let step = 2.0 * PI / grid as f64;
    let mut best = (0.0, f(0.0)?);
    for k in 1..grid {
        let a = k as f64 * step;
        let v = f(a)?;
        if v > best.1 {
            best = (a, v);
        }
    }
    let (a, v) = golden_max(f, best.0 - step, best.0 + step, 1e-7)?;
    Ok(if v > best.1 { (crate::dynamics::frame::wrap_phase(a), v) } else { best })
}

fn golden_max<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Result of a full preparation run.
#[derive(Debug, Clone)]
pub struct GhzRun {
    pub evolution: EvolutionResult,
    /// Qubit state in primed coordinates.
    pub primed_state: DensityMatrix,
    /// Fidelity to `(|0'...0'> + |1'...1'>)/sqrt2`.
    pub fidelity: f64,
}

/// Simulates the preparation, unitary when `noise` is `None`.
pub fn run_ghz(params: &DeviceParams, noise: Option<&NoiseParams>, protocol: &GhzProtocol, dt: f64) -> Result<GhzRun> {
    let seq = protocol.sequence(params)?;
    let psi0 = register_ground(params)?;
    let mut evolution = match noise {
        None => evolve_unitary(params, &seq, &psi0, dt)?,
        Some(n) => evolve_lindblad(params, n, &seq, &psi0.to_density(), dt)?,
    };
    evolution.frame = protocol.frame(params)?;
    let primed_state = to_primed(&evolution.qubit_state, &evolution.frame)?;
    let fidelity = fidelity(&primed_state, &PureState::ghz(params.num_qubits()))?;
    Ok(GhzRun { evolution, primed_state, fidelity })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTuning {
    pub interaction_time: f64,
    /// Fidelity of the pre-adjustment state to `(|0'..> + i|1'..>)/sqrt2`.
    pub fidelity: f64,
    pub common_offset: f64,
    /// (interaction time, fidelity) pairs of the coarse scan.
    pub scan: Vec<(f64, f64)>,
}

/// Noiseless fidelity of the entangled state versus interaction time,
/// maximized over a common frame offset.
pub fn entangling_fidelity(params: &DeviceParams, tau: f64, dt: f64) -> Result<(f64, f64)> {
    let p = GhzProtocol::nominal(params).with_interaction_time(tau);
    let seq = p.entangling_sequence(params)?;
    let r = evolve_unitary(params, &seq, &register_ground(params)?, dt)?;
    let (offset, f) = best_common_offset(&r.qubit_state, &p.bare_frame(params)?, &entangled_target(params.num_qubits()))?;
    Ok((f, offset))
}

/// Scans the interaction time over [0.8, 1.4] of the nominal value and
/// refines the best point by golden-section search.
pub fn tune_interaction_time(params: &DeviceParams, dt: f64) -> Result<InteractionTuning> {
    let tau0 = params.nominal_interaction_time();
    let step = 0.0125 * tau0;
    let mut scan = Vec::new();
    for k in 0..=48 {
        let tau = 0.8 * tau0 + k as f64 * step;
        if tau <= params.ramp_time {
            continue;
        }
        scan.push((tau, entangling_fidelity(params, tau, dt)?.0));
    }
    let &(tau_best, _) = scan
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidInput("ramp time exceeds every scanned interaction time".into()))?;
    let lo = (tau_best - step).max(params.ramp_time * 1.0001);
    let (tau, _) = golden_max(|t| Ok(entangling_fidelity(params, t, dt)?.0), lo, tau_best + step, 0.02e-9)?;
    let (fid, offset) = entangling_fidelity(params, tau, dt)?;
    Ok(InteractionTuning { interaction_time: tau, fidelity: fid, common_offset: offset, scan })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCalibration {
    pub frame_corrections: Vec<f64>,
    pub theta_z: Vec<f64>,
    pub fidelity: f64,
    pub evaluations: usize,
    /// False when the evaluation cap was hit; the best point is still returned.
    pub converged: bool,
}

/// State of the register at the start of the adjustment pulses.
enum Cached {
    Pure(Vec<C64>),
    Mixed(Vec<C64>),
}

/// Searches the per-qubit frame corrections that maximize the fidelity to
/// `target` (primed coordinates) after the adjustment pulses.
///
/// Only the sum of the adjustment angles is fixed by the target, so the
/// angles stay at their protocol values and the search runs over the
/// azimuths that define both the adjustment axes and the primed frame.
pub fn optimize_phase_adjustments(
    params: &DeviceParams,
    noise: Option<&NoiseParams>,
    protocol: &GhzProtocol,
    target: &PureState,
    dt: f64,
) -> Result<PhaseCalibration> {
    let n = params.num_qubits();
    if target.space() != &HilbertSpace::qubits(n) {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: target.space().total_dim() });
    }
    let space = HilbertSpace::new(params.dims())?;
    let pre = protocol.entangling_sequence(params)?;
    let psi0 = register_ground(params)?;
    let cached = match noise {
        None => Cached::Pure(evolve_unitary(params, &pre, &psi0, dt)?.final_pure.expect("unitary run").amplitudes().iter().copied().collect()),
        Some(nz) => Cached::Mixed(rows_from_density(&evolve_lindblad(params, nz, &pre, &psi0.to_density(), dt)?.final_state)),
    };
    let t0 = protocol.theta_start(params);
    let bare = protocol.bare_frame(params)?;
    let base = protocol.frame_corrections.clone();
    let mut objective = |delta: &[f64]| -> Result<f64> {
        let p = protocol.with_corrections(delta);
        let seq = p.sequence(params)?;
        let prop = Propagator::new(Model::new(params, &seq)?, noise, dt)?;
        let t1 = seq.total_duration();
        let full = match &cached {
            Cached::Pure(v) => {
                let mut psi = v.clone();
                prop.advance_pure(&mut psi, t0, t1);
                pure_from_vec(&space, psi).to_density()
            }
            Cached::Mixed(r) => {
                let mut rho = r.clone();
                prop.advance_density(&mut rho, t0, t1, &mut Vec::new())?;
                density_from_rows(&space, &rho)
            }
        };
        let q = partial_trace(&full, &qubit_factors(params))?;
        Ok(1.0 - primed_fidelity(&q, &bare.shifted(delta), target)?)
    };
    let mut evaluations = 0;
    let mut start = (base.clone(), objective(&base)?);
    evaluations += 1;
    for k in 1..24 {
        let c = k as f64 * 2.0 * PI / 24.0;
        let d: Vec<f64> = base.iter().map(|b| b + c).collect();
        let v = objective(&d)?;
        evaluations += 1;
        if v < start.1 {
            start = (d, v);
        }
    }
    let m = nelder_mead::minimize(&mut objective, &start.0, 0.1, 1e-5, 1e-12, MAX_NM_EVALUATIONS - evaluations)?;
    Ok(PhaseCalibration {
        frame_corrections: m.x,
        theta_z: protocol.theta_z.clone(),
        fidelity: 1.0 - m.value,
        evaluations: evaluations + m.evaluations,
        converged: m.converged,
    })
}

/// Tuned interaction time followed by the noiseless phase calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedProtocol {
    pub protocol: GhzProtocol,
    pub tuning: InteractionTuning,
    pub phases: PhaseCalibration,
}

pub fn calibrate_protocol(params: &DeviceParams, dt: f64) -> Result<CalibratedProtocol> {
    let tuning = tune_interaction_time(params, dt)?;
    let n = params.num_qubits();
    let start = GhzProtocol::nominal(params)
        .with_interaction_time(tuning.interaction_time)
        .with_corrections(&vec![tuning.common_offset; n]);
    let phases = optimize_phase_adjustments(params, None, &start, &PureState::ghz(n), dt)?;
    let protocol = start.with_corrections(&phases.frame_corrections);
    Ok(CalibratedProtocol { protocol, tuning, phases })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Calibration {
    pub t2eff: f64,
    pub fidelity: f64,
    pub target: f64,
    /// Set when the target is at or above the fidelity of the upper bracket.
    pub at_upper_bracket: bool,
    pub bracket: (f64, f64),
    /// (t2eff, fidelity) of every probe, in evaluation order.
    pub probes: Vec<(f64, f64)>,
}

pub const T2_BRACKET_LOW: f64 = 50e-9;
pub const T2_BRACKET_HIGH: f64 = 10e-6;
const T2_TOLERANCE: f64 = 1e-3;

/// Bisects a common t2eff (t1 taken from `base`) until the simulated GHZ
/// fidelity matches `target_fidelity`.
pub fn calibrate_t2eff(
    params: &DeviceParams,
    base: &NoiseParams,
    protocol: &GhzProtocol,
    target_fidelity: f64,
    dt: f64,
) -> Result<T2Calibration> {
    let n = params.num_qubits();
    if !(target_fidelity > 1.0 / 16.0 && target_fidelity < 1.0) {
        return Err(Error::InvalidInput(format!("target fidelity {target_fidelity} outside (1/16, 1)")));
    }
    let min_t1 = base.t1.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = T2_BRACKET_LOW;
    let mut hi = T2_BRACKET_HIGH.min(2.0 * min_t1);
    if hi <= lo {
        return Err(Error::InvalidInput("t1 too short for the calibration bracket".into()));
    }
    let mut probes = Vec::new();
    let probe = |t2: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let noise = NoiseParams { t2eff: vec![t2; n], ..base.clone() };
        let f = run_ghz(params, Some(&noise), protocol, dt)?.fidelity;
        probes.push((t2, f));
        Ok(f)
    };
    let mut f_hi = probe(hi, &mut probes)?;
    let bracket = (lo, hi);
    if target_fidelity >= f_hi {
        return Ok(T2Calibration { t2eff: hi, fidelity: f_hi, target: target_fidelity, at_upper_bracket: true, bracket, probes });
    }
    let mut f_lo = probe(lo, &mut probes)?;
    if f_lo >= f_hi {
        return Err(Error::NonMonotone(format!("F({lo:.3e}) = {f_lo:.5} >= F({hi:.3e}) = {f_hi:.5}")));
    }
    if target_fidelity < f_lo {
        return Err(Error::Unreachable { target: target_fidelity, low: f_lo, high: f_hi });
    }
    let mut best = if (f_lo - target_fidelity).abs() < (f_hi - target_fidelity).abs() { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        let f = probe(mid, &mut probes)?;
        if f < f_lo - 1e-9 || f > f_hi + 1e-9 {
            return Err(Error::NonMonotone(format!(
                "F({mid:.3e}) = {f:.5} outside [{f_lo:.5}, {f_hi:.5}] of its bracket"
            )));
        }
        if (f - target_fidelity).abs() < (best.1 - target_fidelity).abs() {
            best = (mid, f);
        }
        if (f - target_fidelity).abs() < T2_TOLERANCE {
            break;
        }
        if f < target_fidelity {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
        if hi / lo - 1.0 < 1e-6 {
            break;
        }
    }
    Ok(T2Calibration { t2eff: best.0, fidelity: best.1, target: target_fidelity, at_upper_bracket: false, bracket, probes })
}

/// Register state of a pulse-level run.
#[derive(Debug, Clone)]
pub enum RegisterState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

/// A pulse-level run paused at `time`.
#[derive(Debug, Clone)]
pub struct PulseRun {
    pub state: RegisterState,
    pub sequence: PulseSequence,
    pub time: f64,
    pub frame: FrameTracker,
    pub warnings: Vec<String>,
}

impl PulseRun {
    pub fn register_density(&self) -> DensityMatrix {
        match &self.state {
            RegisterState::Pure(p) => p.to_density(),
            RegisterState::Mixed(r) => r.clone(),
        }
    }

    /// Qubit state with the resonator traced out (physical coordinates).
    pub fn qubit_state(&self) -> Result<DensityMatrix> {
        let rho = self.register_density();
        let n = rho.space().num_factors() - 1;
        partial_trace(&rho, &(0..n).collect::<Vec<_>>())
    }

    pub fn primed_qubit_state(&self) -> Result<DensityMatrix> {
        to_primed(&self.qubit_state()?, &self.frame)
    }
}

/// Executes abstract rotations as drive pulses after a pulse-level GHZ
/// preparation.
#[derive(Debug, Clone)]
pub struct PulseBackend {
    pub params: DeviceParams,
    pub noise: Option<NoiseParams>,
    pub protocol: GhzProtocol,
    pub dt: f64,
}

impl PulseBackend {
    pub fn prepare_ghz(&self) -> Result<PulseRun> {
        let seq = self.protocol.sequence(&self.params)?;
        let psi0 = register_ground(&self.params)?;
        let (state, warnings) = match &self.noise {
            None => {
                let r = evolve_unitary(&self.params, &seq, &psi0, self.dt)?;
                (RegisterState::Pure(r.final_pure.expect("unitary run")), r.warnings)
            }
            Some(n) => {
                let r = evolve_lindblad(&self.params, n, &seq, &psi0.to_density(), self.dt)?;
                (RegisterState::Mixed(r.final_state), r.warnings)
            }
        };
        Ok(PulseRun { state, time: seq.total_duration(), sequence: seq, frame: self.protocol.frame(&self.params)?, warnings })
    }

    /// Pulses realizing `ops` with as-soon-as-possible scheduling per qubit;
    /// the loop waits for every qubit.
    pub fn schedule(&self, ops: &[GateOp], frame: &FrameTracker, start: f64) -> Result<Vec<Pulse>> {
        let n = self.params.num_qubits();
        let mut ready = vec![start; n];
        let mut pulses = Vec::new();
        let check = |q: usize| if q < n { Ok(q) } else { Err(Error::IndexOutOfRange { index: q, len: n }) };
        for op in ops {
            match *op {
                GateOp::PrepareGhz => {
                    return Err(Error::InvalidInput("GHZ preparation must come first and is done by prepare_ghz".into()))
                }
                GateOp::Loop => {
                    let t = ready.iter().copied().fold(start, f64::max);
                    for (j, r) in ready.iter_mut().enumerate() {
                        pulses.push(Pulse::gaussian(j, t, X_PRIME_FWHM, PI, frame.phi[j] + FRAC_PI_2));
                        *r = t + WINDOW_PER_FWHM * X_PRIME_FWHM;
                    }
                }
                _ => {
                    let q = check(op.qubit().expect("single-qubit op"))?;
                    let phi = frame.phi[q];
                    let (fwhm, angle, phase) = match *op {
                        GateOp::XHalf(_) => (X_HALF_FWHM, FRAC_PI_2, 0.0),
                        GateOp::XPrime(_) => (X_PRIME_FWHM, PI, phi + FRAC_PI_2),
                        GateOp::ZPrime(_) => (Z_PRIME_FWHM, PI, phi),
                        GateOp::ZHalf(_) => (Z_PRIME_FWHM, FRAC_PI_2, phi),
                        GateOp::ZHalfInverse(_) => (Z_PRIME_FWHM, -FRAC_PI_2, phi),
                        GateOp::RotateZPrime(_, g) => (Z_PRIME_FWHM, g, phi),
                        GateOp::PrepareGhz | GateOp::Loop => unreachable!(),
                    };
                    pulses.push(Pulse::gaussian(q, ready[q], fwhm, angle, phase));
                    ready[q] += WINDOW_PER_FWHM * fwhm;
                }
            }
        }
        pulses.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        Ok(pulses)
    }

    /// Continues `run` through the pulses for `ops`.
    pub fn apply(&self, run: &PulseRun, ops: &[GateOp]) -> Result<PulseRun> {
        let pulses = self.schedule(ops, &run.frame, run.time)?;
        if pulses.is_empty() {
            return Ok(run.clone());
        }
        let seq = run.sequence.extended(&pulses)?;
        let t1 = seq.total_duration();
        let prop = Propagator::new(Model::new(&self.params, &seq)?, self.noise.as_ref(), self.dt)?;
        let mut warnings = run.warnings.clone();
        let state = match &run.state {
            RegisterState::Pure(p) => {
                let mut v: Vec<C64> = p.amplitudes().iter().copied().collect();
                prop.advance_pure(&mut v, run.time, t1);
                RegisterState::Pure(pure_from_vec(p.space(), v))
            }
            RegisterState::Mixed(r) => {
                let mut rows = rows_from_density(r);
                prop.advance_density(&mut rows, run.time, t1, &mut warnings)?;
                RegisterState::Mixed(density_from_rows(r.space(), &rows))
            }
        };
        Ok(PulseRun { state, sequence: seq, time: t1, frame: run.frame.clone(), warnings })
    }
}
