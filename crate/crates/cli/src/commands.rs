//! The five experiments behind the subcommands.

use crate::artifacts::ArtifactSet;
use crate::config::{Backend, RunConfig, DEFAULT_TARGET};
use crate::error::{CliError, CliResult};
use crate::svg;
use crate::{Cli, Command, RunManifest};
use anyon_core::dynamics::{
    calibrate_protocol, calibrate_t2eff, from_primed, gate_level_backend, ramsey, to_primed, DeviceParams, FrameTracker,
    GateOp, GhzProtocol, NoiseParams, PulseBackend, PulseSequence,
};
use anyon_core::hilbert::{fidelity, DensityMatrix, HilbertSpace, PureState, StateJson};
use anyon_core::interference::{
    braiding_phase_difference, fit_cosine, gamma_grid, run_scan, BraidScenario, CorrelationScan, CosineFit, PhaseDifference,
    ScanBackend, PARITY_FREQUENCY,
};
use anyon_core::tomo::{
    apply_readout_error, exact_tomography, ghz_witness, reconstruct_linear, reconstruct_linear_counts, reconstruct_mle,
    sample_tables, witness_from, Method, ReconstructedState, WitnessReport,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write;
use std::path::Path;
use std::time::Instant;

/// Gate-level experiments always use four qubits and never build device parameters.
const GATE_QUBITS: usize = 4;
const NS: f64 = 1e-9;
const DEFAULT_RAMSEY_POINTS: usize = 31;
const DEFAULT_RAMSEY_NODES: usize = 16;
const DEFAULT_MLE_ITERS: usize = 2000;
const DEFAULT_MLE_TOL: f64 = 1e-10;

/// Noise/calibration file consumed by `--noise PATH` and written by `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFile {
    pub t1_ns: Vec<f64>,
    pub t2eff_ns: Vec<f64>,
    #[serde(default)]
    pub resonator_kappa_per_ns: f64,
    #[serde(default)]
    pub protocol: Option<ProtocolFile>,
    #[serde(default)]
    pub calibration: Option<CalibrationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub interaction_time_ns: f64,
    pub theta_z_rad: Vec<f64>,
    pub frame_corrections_rad: Vec<f64>,
}

impl ProtocolFile {
    fn from_protocol(p: &GhzProtocol) -> Self {
        Self {
            interaction_time_ns: p.interaction_time / NS,
            theta_z_rad: p.theta_z.clone(),
            frame_corrections_rad: p.frame_corrections.clone(),
        }
    }

    fn to_protocol(&self, params: &DeviceParams) -> CliResult<GhzProtocol> {
        let n = params.num_qubits();
        if self.theta_z_rad.len() != n || self.frame_corrections_rad.len() != n {
            return Err(CliError::Config(format!("protocol in noise file does not describe {n} qubits")));
        }
        let mut p = GhzProtocol::nominal(params).with_interaction_time(self.interaction_time_ns * NS);
        p.theta_z = self.theta_z_rad.clone();
        Ok(p.with_corrections(&self.frame_corrections_rad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub target_fidelity: f64,
    pub fidelity: f64,
    pub at_upper_bracket: bool,
    pub bracket_ns: [f64; 2],
    /// `[t2eff_ns, fidelity]` per probe in evaluation order.
    pub probes: Vec<[f64; 2]>,
}

impl NoiseFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn noise(&self, qubits: usize) -> CliResult<NoiseParams> {
        let n = NoiseParams {
            t1: self.t1_ns.iter().map(|v| v * NS).collect(),
            t2eff: self.t2eff_ns.iter().map(|v| v * NS).collect(),
            resonator_kappa: self.resonator_kappa_per_ns / NS,
        };
        n.validate(qubits).map_err(|e| CliError::Config(format!("noise file: {e}")))?;
        Ok(n)
    }
}

enum NoiseChoice {
    Off,
    Config,
    File(Box<NoiseFile>),
}

struct Context {
    cfg: RunConfig,
    noise: NoiseChoice,
    noise_label: String,
    out: std::path::PathBuf,
    artifacts: ArtifactSet,
}

impl Context {
    fn new(cli: &Cli) -> CliResult<Self> {
        let mut cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if cli.backend.is_some() {
            cfg.backend = cli.backend;
        }
        if cli.shots.is_some() {
            cfg.shots = cli.shots;
        }
        if cli.seed.is_some() {
            cfg.seed = cli.seed;
        }
        if let Some(g) = cli.gammas {
            if g < 2 {
                return Err(CliError::Config("--gammas needs at least two points".into()));
            }
            cfg.gammas = Some(g);
        }
        let (noise, noise_label) = match cli.noise.as_deref() {
            Some("off") => (NoiseChoice::Off, "off".to_string()),
            Some(path) => (NoiseChoice::File(Box::new(NoiseFile::load(Path::new(path))?)), path.to_string()),
            None if cfg.t2eff_ns.is_some() => (NoiseChoice::Config, "config".to_string()),
            None => (NoiseChoice::Off, "off".to_string()),
        };
        Ok(Self { cfg, noise, noise_label, out: cli.out.clone(), artifacts: ArtifactSet::new() })
    }

    fn backend(&self, default: Backend) -> Backend {
        self.cfg.backend.unwrap_or(default)
    }

    fn has_noise(&self) -> bool {
        !matches!(self.noise, NoiseChoice::Off)
    }

    fn noise(&self, qubits: usize) -> CliResult<Option<NoiseParams>> {
        match &self.noise {
            NoiseChoice::Off => Ok(None),
            NoiseChoice::Config => self.cfg.noise(qubits),
            NoiseChoice::File(f) => f.noise(qubits).map(Some),
        }
    }

    fn warn(&mut self, w: impl Into<String>) {
        self.artifacts.warnings.push(w.into());
    }

    /// Protocol from the noise file, then the config, then a fresh noiseless calibration.
    fn protocol(&mut self, params: &DeviceParams) -> CliResult<GhzProtocol> {
        if let NoiseChoice::File(f) = &self.noise {
            if let Some(p) = &f.protocol {
                return p.to_protocol(params);
            }
        }
        if let Some(p) = self.cfg.protocol(params)? {
            return Ok(p);
        }
        self.warn("no interaction_time_ns configured; calibrating the preparation protocol");
        let c = calibrate_protocol(params, self.cfg.dt())?;
        if !c.phases.converged {
            self.warn("phase-adjustment search hit its evaluation cap");
        }
        Ok(c.protocol)
    }

    fn pulse_backend(&mut self) -> CliResult<PulseBackend> {
        let params = self.cfg.device_params()?;
        let noise = self.noise(params.num_qubits())?;
        let protocol = self.protocol(&params)?;
        Ok(PulseBackend { params, noise, protocol, dt: self.cfg.dt() })
    }

    fn finish(self, command: &str, started: Instant) -> CliResult<RunManifest> {
        let config = serde_json::json!({ "settings": self.cfg, "noise": self.noise_label });
        self.artifacts.write(&self.out, command, config, started.elapsed())
    }
}

pub fn run(cli: &Cli) -> CliResult<RunManifest> {
    let started = Instant::now();
    let mut ctx = Context::new(cli)?;
    match cli.command {
        Command::Ghz => cmd_state(&mut ctx, StateKind::Ghz)?,
        Command::EAnyon => cmd_state(&mut ctx, StateKind::EAnyon)?,
        Command::Braid => cmd_braid(&mut ctx)?,
        Command::Ramsey => cmd_ramsey(&mut ctx)?,
        Command::Calibrate { target } => cmd_calibrate(&mut ctx, target)?,
    }
    ctx.finish(cli.command.name(), started)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum StateKind {
    Ghz,
    EAnyon,
}

#[derive(Debug, Serialize)]
struct NoiseSummary {
    t1_ns: Vec<f64>,
    t2eff_ns: Vec<f64>,
}

fn noise_summary(n: &NoiseParams) -> NoiseSummary {
    NoiseSummary { t1_ns: n.t1.iter().map(|v| v / NS).collect(), t2eff_ns: n.t2eff.iter().map(|v| v / NS).collect() }
}

#[derive(Debug, Serialize)]
struct TomographySummary {
    method: Method,
    /// Shots per setting; 0 for exact probabilities.
    shots: u64,
    settings: usize,
    iterations: usize,
    converged: bool,
    log_likelihood: Option<f64>,
    psd_distance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct StateReport {
    experiment: StateKind,
    backend: Backend,
    /// Fidelity of the reported (reconstructed when tomography is on) state.
    fidelity: f64,
    /// Fidelity of the simulated state itself.
    exact_fidelity: f64,
    max_imaginary: f64,
    witness: WitnessReport,
    tomography: Option<TomographySummary>,
    frame_phi_rad: Vec<f64>,
    noise: Option<NoiseSummary>,
    seed: u64,
}

fn pulse_artifacts(ctx: &mut Context, protocol: &GhzProtocol, sequence: &PulseSequence) -> CliResult<()> {
    ctx.artifacts.add_json("protocol.json", &ProtocolFile::from_protocol(protocol))?;
    let mut seq = sequence.to_json()?;
    seq.push('\n');
    ctx.artifacts.add_text("sequence.json", seq);
    Ok(())
}

fn cmd_state(ctx: &mut Context, kind: StateKind) -> CliResult<()> {
    let extra: Vec<GateOp> = match kind {
        StateKind::Ghz => vec![],
        StateKind::EAnyon => vec![GateOp::ZPrime(0)],
    };
    let backend = ctx.backend(Backend::Gate);
    let (rho, frame, noise) = match backend {
        Backend::Gate => {
            if ctx.has_noise() {
                ctx.warn("the gate backend is noiseless; the noise model is ignored");
            }
            let mut ops = vec![GateOp::PrepareGhz];
            ops.extend(&extra);
            let psi = gate_level_backend(&ops, &PureState::basis(&HilbertSpace::qubits(GATE_QUBITS), 0)?)?;
            (psi.to_density(), FrameTracker::zeros(GATE_QUBITS), None)
        }
        Backend::Pulse => {
            let pb = ctx.pulse_backend()?;
            let run = pb.apply(&pb.prepare_ghz()?, &extra)?;
            for w in &run.warnings {
                ctx.warn(w.clone());
            }
            pulse_artifacts(ctx, &pb.protocol, &run.sequence)?;
            (run.qubit_state()?, run.frame.clone(), pb.noise.as_ref().map(noise_summary))
        }
    };
    let n = frame.num_qubits();
    let target = match kind {
        StateKind::Ghz => PureState::ghz(n),
        StateKind::EAnyon => PureState::ghz_with_phase(n, PI),
    };
    let primed_exact = to_primed(&rho, &frame)?;
    let exact_fidelity = fidelity(&primed_exact, &target)?;
    let seed = ctx.cfg.seed();
    let (reported, witness, tomography) = if ctx.cfg.tomography.unwrap_or(true) {
        let (rec, witness, shots) = tomography(ctx, &rho, &from_primed(&target, &frame)?, seed)?;
        let summary = TomographySummary {
            method: rec.method,
            shots,
            settings: rec.settings_used,
            iterations: rec.iterations,
            converged: rec.converged,
            log_likelihood: rec.log_likelihood,
            psd_distance: rec.psd_distance,
        };
        if !rec.converged {
            ctx.warn(format!("maximum-likelihood reconstruction stopped after {} iterations", rec.iterations));
        }
        (to_primed(&rec.rho, &frame)?, witness, Some(summary))
    } else {
        (primed_exact.clone(), witness_from(exact_fidelity, 0.0), None)
    };
    let report = StateReport {
        experiment: kind,
        backend,
        fidelity: fidelity(&reported, &target)?,
        exact_fidelity,
        max_imaginary: reported.max_imaginary(),
        witness,
        tomography,
        frame_phi_rad: frame.phi.clone(),
        noise,
        seed,
    };
    let a = &mut ctx.artifacts;
    a.add_json("report.json", &report)?;
    a.add_json("rho.json", &StateJson::from_density(&reported))?;
    a.add_json("rho_exact.json", &StateJson::from_density(&primed_exact))?;
    a.add_text("rho_bars.csv", density_csv(&reported));
    let title = match kind {
        StateKind::Ghz => "Re(ρ), GHZ state, primed basis",
        StateKind::EAnyon => "Re(ρ), e-anyon state, primed basis",
    };
    a.add_text("rho.svg", svg::density_plot(&reported, title));
    Ok(())
}

/// Simulated tomography of the physical state `rho`; the witness compares
/// with `target` given in the same physical coordinates.
fn tomography(
    ctx: &mut Context,
    rho: &DensityMatrix,
    target: &PureState,
    seed: u64,
) -> CliResult<(ReconstructedState, WitnessReport, u64)> {
    let n = rho.space().num_factors();
    let mut tables = exact_tomography(rho)?;
    if let Some(a) = ctx.cfg.assignment(n)? {
        for (_, t) in tables.iter_mut() {
            *t = apply_readout_error(t, &a)?;
        }
    }
    let method = ctx.cfg.reconstruction.unwrap_or(Method::Mle);
    match ctx.cfg.sampled_shots() {
        None => {
            let rec = reconstruct_linear(&tables)?;
            let w = ghz_witness(&rec.rho, target, None, seed)?;
            Ok((rec, w, 0))
        }
        Some(shots) => {
            let records = sample_tables(&tables, shots, seed)?;
            ctx.artifacts.add_json("tomography.json", &records)?;
            let rec = match method {
                Method::Linear => reconstruct_linear_counts(&records)?,
                Method::Mle => reconstruct_mle(
                    &records,
                    ctx.cfg.mle_max_iters.unwrap_or(DEFAULT_MLE_ITERS),
                    ctx.cfg.mle_tol.unwrap_or(DEFAULT_MLE_TOL),
                )?,
            };
            let w = ghz_witness(&rec.rho, target, Some(&records), seed.wrapping_add(1))?;
            Ok((rec, w, shots))
        }
    }
}

fn density_csv(rho: &DensityMatrix) -> String {
    let n = rho.space().num_factors();
    let label = |k: usize| -> String { (0..n).map(|b| if k >> (n - 1 - b) & 1 == 1 { '1' } else { '0' }).collect() };
    let mut s = String::from("row,col,ket_row,ket_col,re,im\n");
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            let z = rho.matrix()[(i, j)];
            let _ = writeln!(s, "{i},{j},{},{},{:.12},{:.12}", label(i), label(j), z.re, z.im);
        }
    }
    s
}

#[derive(Debug, Serialize)]
struct FitReport {
    scenario: BraidScenario,
    #[serde(flatten)]
    fit: CosineFit,
    phi_over_pi: f64,
}

#[derive(Debug, Serialize)]
struct BraidReport {
    backend: Backend,
    shots: u64,
    seed: u64,
    fits: Vec<FitReport>,
    /// half_filled relative to empty_vertex.
    braiding_phase: PhaseDifference,
    /// e_vertex relative to empty_vertex.
    e_vertex_phase: PhaseDifference,
    noise: Option<NoiseSummary>,
}

fn cmd_braid(ctx: &mut Context) -> CliResult<()> {
    let grid = gamma_grid(ctx.cfg.gammas())?;
    let shots = ctx.cfg.sampled_shots();
    let seed = ctx.cfg.seed();
    let backend = ctx.backend(Backend::Gate);
    let pulse = match backend {
        Backend::Gate => {
            if ctx.has_noise() {
                ctx.warn("the gate backend is noiseless; the noise model is ignored");
            }
            None
        }
        Backend::Pulse => Some(ctx.pulse_backend()?),
    };
    let scan_backend = match &pulse {
        None => ScanBackend::Gate,
        Some(pb) => ScanBackend::Pulse(pb),
    };
    let mut scans: Vec<(CorrelationScan, CosineFit)> = Vec::new();
    for (i, s) in BraidScenario::BRAIDS.into_iter().enumerate() {
        let scan = run_scan(s, &grid, shots, scan_backend, seed.wrapping_add(i as u64))?;
        let fit = fit_cosine(&scan)?;
        scans.push((scan, fit));
    }
    let report = BraidReport {
        backend,
        shots: shots.unwrap_or(0),
        seed,
        fits: scans
            .iter()
            .map(|(s, f)| FitReport { scenario: s.scenario, fit: *f, phi_over_pi: f.phi / PI })
            .collect(),
        braiding_phase: braiding_phase_difference(&scans[0].0, &scans[2].0)?,
        e_vertex_phase: braiding_phase_difference(&scans[0].0, &scans[1].0)?,
        noise: pulse.as_ref().and_then(|p| p.noise.as_ref()).map(noise_summary),
    };
    let a = &mut ctx.artifacts;
    for (scan, fit) in &scans {
        a.add_text(&format!("scan_{}.csv", scan.scenario), scan.to_csv());
        a.add_json(&format!("fit_{}.json", scan.scenario), fit)?;
    }
    a.add_json("braid_report.json", &report)?;
    let mut curves = String::from("gamma_rad");
    for (scan, _) in &scans {
        let _ = write!(curves, ",{}", scan.scenario);
    }
    curves.push('\n');
    for k in 0..=200 {
        let g = PI * k as f64 / 200.0;
        let _ = write!(curves, "{g:.12}");
        for (_, f) in &scans {
            let _ = write!(curves, ",{:.12}", f.contrast * (PARITY_FREQUENCY * g + f.phi).cos() + f.offset);
        }
        curves.push('\n');
    }
    a.add_text("braid_fits.csv", curves);
    let series: Vec<(&str, &CorrelationScan, Option<&CosineFit>)> =
        scans.iter().map(|(s, f)| (s.scenario.label(), s, Some(f))).collect();
    a.add_text("braid.svg", svg::parity_plot(&series));
    if let Some(pb) = &pulse {
        let seq = pb.protocol.sequence(&pb.params)?;
        pulse_artifacts(ctx, &pb.protocol.clone(), &seq)?;
    }
    Ok(())
}

fn require_pulse(ctx: &Context, what: &str) -> CliResult<()> {
    if ctx.backend(Backend::Pulse) == Backend::Gate {
        return Err(CliError::Config(format!("{what} simulates the pulse level; use --backend pulse")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RamseyReport {
    qubit: usize,
    t1_ns: f64,
    t2eff_ns: f64,
    t2_star_ns: Option<f64>,
    t_exp_ns: Option<f64>,
    t_gauss_ns: Option<f64>,
    amplitude: f64,
    residual_rms: f64,
}

fn cmd_ramsey(ctx: &mut Context) -> CliResult<()> {
    require_pulse(ctx, "ramsey")?;
    let params = ctx.cfg.device_params()?;
    let noise = ctx.noise(params.num_qubits())?.ok_or_else(|| {
        CliError::Config("ramsey needs a noise model (t2eff_ns in the config or --noise PATH)".into())
    })?;
    let q = ctx.cfg.ramsey_qubit.unwrap_or(0);
    if q >= params.num_qubits() {
        return Err(CliError::Config(format!("ramsey_qubit {q} out of range")));
    }
    let t_max = ctx.cfg.ramsey_t_max_ns.map(|v| v * NS).unwrap_or(3.0 * noise.t2eff[q]);
    let points = ctx.cfg.ramsey_points.unwrap_or(DEFAULT_RAMSEY_POINTS);
    let taus: Vec<f64> = (0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect();
    let t2_star = ctx.cfg.ramsey_t2_star_ns.map(|v| v * NS);
    let nodes = ctx.cfg.ramsey_nodes.unwrap_or(DEFAULT_RAMSEY_NODES);
    let r = ramsey(&params, q, &noise, t2_star, &taus, nodes, ctx.cfg.dt())?;
    let mut csv = String::from("tau_ns,envelope\n");
    for (t, e) in r.taus.iter().zip(&r.envelope) {
        let _ = writeln!(csv, "{:.6},{:.12}", t / NS, e);
    }
    let report = RamseyReport {
        qubit: q,
        t1_ns: noise.t1[q] / NS,
        t2eff_ns: noise.t2eff[q] / NS,
        t2_star_ns: t2_star.map(|v| v / NS),
        t_exp_ns: r.fit.t_exp.map(|v| v / NS),
        t_gauss_ns: r.fit.t_gauss.map(|v| v / NS),
        amplitude: r.fit.amplitude,
        residual_rms: r.fit.residual_rms,
    };
    ctx.artifacts.add_text("ramsey.csv", csv);
    ctx.artifacts.add_json("ramsey_fit.json", &report)?;
    Ok(())
}

fn cmd_calibrate(ctx: &mut Context, target: Option<f64>) -> CliResult<()> {
    require_pulse(ctx, "calibrate")?;
    let target = target.or(ctx.cfg.target_fidelity).unwrap_or(DEFAULT_TARGET);
    if !(target > 0.0 && target < 1.0) {
        return Err(CliError::Config(format!("target fidelity {target} outside (0, 1)")));
    }
    let params = ctx.cfg.device_params()?;
    let n = params.num_qubits();
    let t1 = match &ctx.noise {
        NoiseChoice::File(f) => f.noise(n)?.t1,
        _ => ctx.cfg.t1(n)?,
    };
    let kappa = ctx.cfg.resonator_kappa_per_ns.unwrap_or(0.0) / NS;
    let base = NoiseParams { t2eff: t1.iter().map(|t| 2.0 * t).collect(), t1, resonator_kappa: kappa };
    base.validate(n).map_err(|e| CliError::Config(e.to_string()))?;
    let protocol = ctx.protocol(&params)?;
    let cal = calibrate_t2eff(&params, &base, &protocol, target, ctx.cfg.dt())?;
    if cal.at_upper_bracket {
        ctx.warn(format!(
            "target {target} is at or above the fidelity {:.4} reached at the upper bracket; t2eff set to {:.1} ns",
            cal.fidelity,
            cal.t2eff / NS
        ));
    }
    let file = NoiseFile {
        t1_ns: base.t1.iter().map(|v| v / NS).collect(),
        t2eff_ns: vec![cal.t2eff / NS; n],
        resonator_kappa_per_ns: kappa * NS,
        protocol: Some(ProtocolFile::from_protocol(&protocol)),
        calibration: Some(CalibrationSummary {
            target_fidelity: target,
            fidelity: cal.fidelity,
            at_upper_bracket: cal.at_upper_bracket,
            bracket_ns: [cal.bracket.0 / NS, cal.bracket.1 / NS],
            probes: cal.probes.iter().map(|&(t, f)| [t / NS, f]).collect(),
        }),
    };
    ctx.artifacts.add_json("calibrated.json", &file)?;
    Ok(())
}
