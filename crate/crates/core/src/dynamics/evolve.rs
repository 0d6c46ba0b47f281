//! Time evolution of the qubit-resonator register.
//!
//! States are propagated in each qubit's own frame (the frame rotating at
//! `omega_r + f_j(t)` with `f_j` from [`FrequencyProfile`]); the resonator
//! stays in the frame rotating at `omega_r`. In these coordinates the
//! Hamiltonian reads
//!
//! `H = sum_j r_j(t) n_j + g sum_j (e^{i F_j(t)} s_j^+ a + h.c.) + sum_j (W_j(t) s_j^+ + h.c.)`
//!
//! with `r_j` the commanded-minus-frame detuning, `F_j` the integrated frame
//! detuning and `W_j = Omega_j(t)/2 e^{i phase}` the drive. All terms are
//! small or slowly varying, so a fixed step resolves them comfortably.

use super::frame::{track_frames, z_rotation, FrameTracker};
use super::params::{DeviceParams, NoiseParams};
use super::pulse::{gaussian_envelope, FrequencyProfile, PulseSequence, PulseVariant};
use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, DensityMatrix, HilbertSpace, Operator, PureState, C64};
use nalgebra::{DMatrix, DVector};

/// Default integration step.
pub const DEFAULT_DT: f64 = 0.01e-9;
/// Largest accepted integration step.
pub const MAX_DT: f64 = 0.05e-9;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy)]
struct Drive {
    start: f64,
    fwhm: f64,
    angle: f64,
    phase: f64,
    end: f64,
}

/// Hamiltonian with a fixed sparsity pattern whose values depend on time.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    nq: usize,
    n_ph: usize,
    dim: usize,
    g: f64,
    profiles: Vec<FrequencyProfile>,
    extra: Vec<f64>,
    drives: Vec<Vec<Drive>>,
    /// (time, qubit, angle) of instantaneous Z rotations.
    virtual_z: Vec<(f64, usize, f64)>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    excitation_mask: Vec<usize>,
    /// Per qubit: (entry index, sqrt(n)) for `s^+ a`; the Hermitian partner follows at index + 1.
    coupling: Vec<Vec<(usize, f64)>>,
    /// Per qubit: entry index of `s^+`; partner at index + 1.
    driving: Vec<Vec<usize>>,
    breakpoints: Vec<f64>,
    duration: f64,
}

impl Model {
    pub(crate) fn new(params: &DeviceParams, sequence: &PulseSequence) -> Result<Self> {
        params.validate()?;
        let nq = params.num_qubits();
        if let Some(q) = sequence.max_qubit() {
            if q >= nq {
                return Err(Error::IndexOutOfRange { index: q, len: nq });
            }
        }
        let n_ph = params.n_ph;
        let dim = (1usize << nq) * n_ph;
        let profiles: Vec<FrequencyProfile> = (0..nq).map(|j| FrequencyProfile::new(params, sequence, j)).collect();
        let mut drives = vec![Vec::new(); nq];
        let mut virtual_z = Vec::new();
        let mut breakpoints = vec![0.0, sequence.total_duration()];
        for p in sequence.pulses() {
            breakpoints.push(p.start_time);
            breakpoints.push(p.end_time());
            match p.variant {
                PulseVariant::GaussianDrive { qubit, fwhm, rotation_angle, drive_phase } => drives[qubit].push(Drive {
                    start: p.start_time,
                    fwhm,
                    angle: rotation_angle,
                    phase: drive_phase,
                    end: p.end_time(),
                }),
                PulseVariant::VirtualZ { qubit, angle } => virtual_z.push((p.start_time, qubit, angle)),
                PulseVariant::SquareDetune { .. } => {}
            }
        }
        for prof in &profiles {
            breakpoints.extend(prof.breakpoints());
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let bit = |j: usize| 1usize << (nq - 1 - j);
        let mut rows: Vec<usize> = (0..dim).collect();
        let mut cols: Vec<usize> = (0..dim).collect();
        let excitation_mask: Vec<usize> = (0..dim).map(|k| k / n_ph).collect();
        let mut coupling = vec![Vec::new(); nq];
        let mut driving = vec![Vec::new(); nq];
        for j in 0..nq {
            for col in 0..dim {
                let (q, n) = (col / n_ph, col % n_ph);
                if q & bit(j) != 0 {
                    continue;
                }
                let raised = (q | bit(j)) * n_ph;
                if n >= 1 {
                    let row = raised + n - 1;
                    coupling[j].push((rows.len(), (n as f64).sqrt()));
                    rows.extend([row, col]);
                    cols.extend([col, row]);
                }
                let row = raised + n;
                driving[j].push(rows.len());
                rows.extend([row, col]);
                cols.extend([col, row]);
            }
        }
        Ok(Self {
            nq,
            n_ph,
            dim,
            g: params.g,
            profiles,
            extra: vec![0.0; nq],
            drives,
            virtual_z,
            rows,
            cols,
            excitation_mask,
            coupling,
            driving,
            breakpoints,
            duration: sequence.total_duration(),
        })
    }

    pub(crate) fn with_extra_detuning(mut self, extra: Vec<f64>) -> Self {
        self.extra = extra;
        self
    }

    fn nnz(&self) -> usize {
        self.rows.len()
    }

    fn drive_amplitude(&self, j: usize, t: f64) -> C64 {
        self.drives[j]
            .iter()
            .filter(|d| t >= d.start && t <= d.end)
            .map(|d| C64::from_polar(0.5 * gaussian_envelope(d.start, d.fwhm, d.angle, t), d.phase))
            .sum()
    }

    fn fill(&self, t: f64, out: &mut [C64]) {
        let mut resid = [0.0f64; 16];
        for j in 0..self.nq {
            resid[j] = self.profiles[j].residual(t) + self.extra[j];
        }
        for k in 0..self.dim {
            let m = self.excitation_mask[k];
            let mut e = 0.0;
            for (j, r) in resid.iter().enumerate().take(self.nq) {
                if m & (1 << (self.nq - 1 - j)) != 0 {
                    e += r;
                }
            }
            out[k] = C64::new(e, 0.0);
        }
        for j in 0..self.nq {
            let ph = C64::from_polar(self.g, self.profiles[j].frame_phase(t));
            for &(k, s) in &self.coupling[j] {
                out[k] = ph * s;
                out[k + 1] = ph.conj() * s;
            }
            let w = self.drive_amplitude(j, t);
            for &k in &self.driving[j] {
                out[k] = w;
                out[k + 1] = w.conj();
            }
        }
    }

    fn matvec_acc(&self, vals: &[C64], x: &[C64], y: &mut [C64], scale: C64) {
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(vals) {
            if v != ZERO {
                y[r] += scale * v * x[c];
            }
        }
    }

    fn virtual_z_matrix(&self, qubit: usize, angle: f64) -> Vec<C64> {
        // diagonal of exp(-i angle Z_q / 2) on the full register
        let rz = z_rotation(angle);
        (0..self.dim)
            .map(|k| {
                let excited = self.excitation_mask[k] & (1 << (self.nq - 1 - qubit)) != 0;
                if excited {
                    rz[(1, 1)]
                } else {
                    rz[(0, 0)]
                }
            })
            .collect()
    }

    fn segments(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = self.breakpoints.iter().copied().filter(|&b| b > t0 && b < t1).collect();
        cuts.insert(0, t0);
        cuts.push(t1);
        cuts.windows(2).filter(|w| w[1] - w[0] > 1e-18).map(|w| (w[0], w[1])).collect()
    }
}

/// Frame Hamiltonian expressed in the frame rotating at `omega_r`:
/// `sum_j (omega_j(t) - omega_r) n_j + g sum_j (s_j^+ a + h.c.)` plus, for each
/// active drive, `(Omega/2)(cos(theta) X_j + sin(theta) Y_j)` with
/// `theta = drive_phase - F_j(t)` so that the drive is resonant with the
/// qubit's tracked frame.
pub fn hamiltonian_at(params: &DeviceParams, sequence: &PulseSequence, t: f64) -> Result<Operator> {
    let model = Model::new(params, sequence)?;
    if t < 0.0 || (t > model.duration && model.duration > 0.0) {
        return Err(Error::InvalidInput(format!("t = {t:.3e} s outside the sequence span")));
    }
    let nq = model.nq;
    let dim = model.dim;
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for k in 0..dim {
        let mask = model.excitation_mask[k];
        let mut e = 0.0;
        for j in 0..nq {
            if mask & (1 << (nq - 1 - j)) != 0 {
                e += model.profiles[j].detuning(t);
            }
        }
        m[(k, k)] = C64::new(e, 0.0);
    }
    for j in 0..nq {
        let w = model.drive_amplitude(j, t) * C64::from_polar(1.0, -model.profiles[j].frame_phase(t));
        for &(k, s) in &model.coupling[j] {
            let (r, c) = (model.rows[k], model.cols[k]);
            m[(r, c)] += C64::new(model.g * s, 0.0);
            m[(c, r)] += C64::new(model.g * s, 0.0);
        }
        for &k in &model.driving[j] {
            let (r, c) = (model.rows[k], model.cols[k]);
            m[(r, c)] += w;
            m[(c, r)] += w.conj();
        }
    }
    Operator::new(HilbertSpace::new(params.dims())?, m)
}

const CFM_C1: f64 = 0.5 - 0.288_675_134_594_812_9;
const CFM_C2: f64 = 0.5 + 0.288_675_134_594_812_9;
const CFM_A1: f64 = 0.25 + 0.288_675_134_594_812_9;
const CFM_A2: f64 = 0.25 - 0.288_675_134_594_812_9;

/// Fixed-step propagator over one model.
#[derive(Debug, Clone)]
pub(crate) struct Propagator {
    model: Model,
    dt: f64,
    lindblad: Option<Dissipator>,
}

#[derive(Debug, Clone)]
struct Dissipator {
    /// Real decay rate of each density-matrix entry (row-major).
    decay: Vec<f64>,
    /// Feeding terms `drho[target] += rate * rho[source]`.
    jumps: Vec<(usize, usize, f64)>,
}

impl Dissipator {
    fn new(model: &Model, noise: &NoiseParams) -> Self {
        let (nq, n_ph, dim) = (model.nq, model.n_ph, model.dim);
        let bit = |j: usize| 1usize << (nq - 1 - j);
        let mut decay = vec![0.0; dim * dim];
        let mut jumps = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                let (qa, na) = (a / n_ph, a % n_ph);
                let (qb, nb) = (b / n_ph, b % n_ph);
                let mut r = 0.0;
                for j in 0..nq {
                    let g1 = 1.0 / noise.t1[j];
                    let ea = (qa & bit(j) != 0) as u8 as f64;
                    let eb = (qb & bit(j) != 0) as u8 as f64;
                    r -= 0.5 * g1 * (ea + eb);
                    if (qa ^ qb) & bit(j) != 0 {
                        r -= noise.dephasing_rate(j);
                    }
                    if qa & bit(j) == 0 && qb & bit(j) == 0 {
                        let src = ((qa | bit(j)) * n_ph + na) * dim + (qb | bit(j)) * n_ph + nb;
                        jumps.push((a * dim + b, src, g1));
                    }
                }
                let kappa = noise.resonator_kappa;
                if kappa > 0.0 {
                    r -= 0.5 * kappa * (na + nb) as f64;
                    if na + 1 < n_ph && nb + 1 < n_ph {
                        let src = (qa * n_ph + na + 1) * dim + qb * n_ph + nb + 1;
                        jumps.push((a * dim + b, src, kappa * (((na + 1) * (nb + 1)) as f64).sqrt()));
                    }
                }
                decay[a * dim + b] = r;
            }
        }
        Dissipator { decay, jumps }
    }
}

impl Propagator {
    pub(crate) fn new(model: Model, noise: Option<&NoiseParams>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || dt > MAX_DT * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, limit: MAX_DT });
        }
        let lindblad = match noise {
            Some(n) => {
                n.validate(model.nq)?;
                Some(Dissipator::new(&model, n))
            }
            None => None,
        };
        Ok(Self { model, dt, lindblad })
    }

    pub(crate) fn model(&self) -> &Model {
        &self.model
    }

    fn steps(&self, t0: f64, t1: f64) -> (usize, f64) {
        let n = (((t1 - t0) / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, (t1 - t0) / n as f64)
    }

    /// `psi <- exp(-i h A) psi` by a Taylor series on the vector.
    fn exp_apply(&self, vals: &[C64], h: f64, psi: &mut Vec<C64>, term: &mut Vec<C64>, next: &mut Vec<C64>) {
        term.copy_from_slice(psi);
        let scale = C64::new(0.0, -h);
        for k in 1..40 {
            next.iter_mut().for_each(|v| *v = ZERO);
            self.model.matvec_acc(vals, term, next, scale / k as f64);
            let mut mx = 0.0f64;
            for (p, &v) in psi.iter_mut().zip(next.iter()) {
                *p += v;
                mx = mx.max(v.norm_sqr());
            }
            std::mem::swap(term, next);
            if mx < 1e-34 {
                break;
            }
        }
    }

    /// Pure-state propagation from `t0` to `t1` with a fourth-order
    /// commutator-free Magnus scheme.
    pub(crate) fn advance_pure(&self, psi: &mut Vec<C64>, t0: f64, t1: f64) {
        let nnz = self.model.nnz();
        let mut h1 = vec![ZERO; nnz];
        let mut h2 = vec![ZERO; nnz];
        let mut a = vec![ZERO; nnz];
        let mut term = vec![ZERO; psi.len()];
        let mut next = vec![ZERO; psi.len()];
        for (s0, s1) in self.model.segments(t0, t1) {
            self.apply_events_pure(psi, s0, t0);
            let (n, h) = self.steps(s0, s1);
            for k in 0..n {
                let t = s0 + k as f64 * h;
                self.model.fill(t + CFM_C1 * h, &mut h1);
                self.model.fill(t + CFM_C2 * h, &mut h2);
                for i in 0..nnz {
                    a[i] = h1[i] * CFM_A1 + h2[i] * CFM_A2;
                }
                self.exp_apply(&a, h, psi, &mut term, &mut next);
                for i in 0..nnz {
                    a[i] = h1[i] * CFM_A2 + h2[i] * CFM_A1;
                }
                self.exp_apply(&a, h, psi, &mut term, &mut next);
            }
        }
        if t1 > t0 {
            self.apply_events_pure(psi, t1, t0);
        } else {
            self.apply_events_pure(psi, t0, t0);
        }
    }

    /// Diagonal factors for the instantaneous rotations at exactly `at`
    /// that belong to the interval `(t0, t1]` (or start at 0 when `t0 == 0`).
    fn events_at(&self, at: f64, t0: f64) -> Vec<Vec<C64>> {
        let tol = 1e-18;
        self.model
            .virtual_z
            .iter()
            .filter(|(t, _, _)| (t - at).abs() <= tol && (*t > t0 + tol || (t0 == 0.0 && *t == 0.0)))
            .map(|&(_, q, angle)| self.model.virtual_z_matrix(q, angle))
            .collect()
    }

    fn apply_events_pure(&self, psi: &mut [C64], at: f64, t0: f64) {
        for d in self.events_at(at, t0) {
            psi.iter_mut().zip(&d).for_each(|(p, f)| *p *= f);
        }
    }

    fn apply_events_density(&self, rho: &mut [C64], at: f64, t0: f64) {
        let dim = self.model.dim;
        for d in self.events_at(at, t0) {
            for a in 0..dim {
                for b in 0..dim {
                    rho[a * dim + b] *= d[a] * d[b].conj();
                }
            }
        }
    }

    fn lindblad_rhs(&self, vals: &[C64], rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let dim = self.model.dim;
        scratch.iter_mut().for_each(|v| *v = ZERO);
        for ((&r, &c), &v) in self.model.rows.iter().zip(&self.model.cols).zip(vals) {
            if v == ZERO {
                continue;
            }
            let src = &rho[c * dim..(c + 1) * dim];
            let dst = &mut scratch[r * dim..(r + 1) * dim];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += v * s;
            }
        }
        // -i [H, rho] = -i (M - M^dagger) with M = H rho
        for a in 0..dim {
            for b in 0..dim {
                let m = scratch[a * dim + b] - scratch[b * dim + a].conj();
                out[a * dim + b] = C64::new(m.im, -m.re);
            }
        }
        if let Some(d) = &self.lindblad {
            for (o, (&r, &x)) in out.iter_mut().zip(d.decay.iter().zip(rho)) {
                *o += x * r;
            }
            for &(tgt, src, rate) in &d.jumps {
                out[tgt] += rho[src] * rate;
            }
        }
    }

    /// Density-matrix propagation from `t0` to `t1` (fixed-step RK4).
    pub(crate) fn advance_density(&self, rho: &mut Vec<C64>, t0: f64, t1: f64, warnings: &mut Vec<String>) -> Result<()> {
        let dim = self.model.dim;
        let nnz = self.model.nnz();
        let len = dim * dim;
        let mut v0 = vec![ZERO; nnz];
        let mut vm = vec![ZERO; nnz];
        let mut v1 = vec![ZERO; nnz];
        let mut k = vec![ZERO; len];
        let mut acc = vec![ZERO; len];
        let mut tmp = vec![ZERO; len];
        let mut scratch = vec![ZERO; len];
        let segments = self.model.segments(t0, t1);
        for &(s0, s1) in &segments {
            self.apply_events_density(rho, s0, t0);
            let (n, h) = self.steps(s0, s1);
            self.model.fill(s0, &mut v0);
            for step in 0..n {
                let t = s0 + step as f64 * h;
                self.model.fill(t + 0.5 * h, &mut vm);
                self.model.fill(t + h, &mut v1);
                // k1
                self.lindblad_rhs(&v0, rho, &mut k, &mut scratch);
                for i in 0..len {
                    acc[i] = k[i];
                    tmp[i] = rho[i] + k[i] * (0.5 * h);
                }
                // k2
                self.lindblad_rhs(&vm, &tmp, &mut k, &mut scratch);
                for i in 0..len {
                    acc[i] += k[i] * 2.0;
                    tmp[i] = rho[i] + k[i] * (0.5 * h);
                }
                // k3
                self.lindblad_rhs(&vm, &tmp, &mut k, &mut scratch);
                for i in 0..len {
                    acc[i] += k[i] * 2.0;
                    tmp[i] = rho[i] + k[i] * h;
                }
                // k4
                self.lindblad_rhs(&v1, &tmp, &mut k, &mut scratch);
                for i in 0..len {
                    rho[i] += (acc[i] + k[i]) * (h / 6.0);
                }
                std::mem::swap(&mut v0, &mut v1);
            }
            self.check_density(rho, s1, warnings)?;
        }
        if t1 > t0 {
            self.apply_events_density(rho, t1, t0);
        } else {
            self.apply_events_density(rho, t0, t0);
        }
        Ok(())
    }

    fn check_density(&self, rho: &mut Vec<C64>, t: f64, warnings: &mut Vec<String>) -> Result<()> {
        let dim = self.model.dim;
        let tr: f64 = (0..dim).map(|i| rho[i * dim + i].re).sum();
        if (tr - 1.0).abs() > 1e-4 || !tr.is_finite() {
            return Err(Error::TraceDrift((tr - 1.0).abs()));
        }
        let m = DMatrix::from_row_slice(dim, dim, rho);
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-6 {
            return Err(Error::InvalidInput(format!("positivity lost: eigenvalue {min:.3e} at t = {:.3} ns", t * 1e9)));
        }
        if min < -1e-12 {
            let (clipped, removed) = DensityMatrix::from_parts(HilbertSpace::new(vec![dim])?, herm).clip_to_physical();
            warnings.push(format!("clipped negative weight {removed:.2e} at t = {:.3} ns", t * 1e9));
            let c = clipped.matrix();
            for a in 0..dim {
                for b in 0..dim {
                    rho[a * dim + b] = c[(a, b)];
                }
            }
        }
        Ok(())
    }
}

/// Output of a pulse-level run.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Register state (qubits and resonator) in the qubit frames.
    pub final_state: DensityMatrix,
    /// Four-qubit (or n-qubit) state with the resonator traced out.
    pub qubit_state: DensityMatrix,
    /// Final pure state when the evolution was unitary.
    pub final_pure: Option<PureState>,
    pub frame: FrameTracker,
    /// Simulated length of each integration segment.
    pub wall_times: Vec<f64>,
    pub warnings: Vec<String>,
}

fn qubit_factors(params: &DeviceParams) -> Vec<usize> {
    (0..params.num_qubits()).collect()
}

fn segment_lengths(model: &Model) -> Vec<f64> {
    model.segments(0.0, model.duration).iter().map(|(a, b)| b - a).collect()
}

/// Unitary evolution of a pure register state through `sequence`.
pub fn evolve_unitary(params: &DeviceParams, sequence: &PulseSequence, initial: &PureState, dt: f64) -> Result<EvolutionResult> {
    let space = HilbertSpace::new(params.dims())?;
    if initial.space() != &space {
        return Err(Error::DimensionMismatch { expected: space.total_dim(), found: initial.space().total_dim() });
    }
    let prop = Propagator::new(Model::new(params, sequence)?, None, dt)?;
    let mut psi: Vec<C64> = initial.amplitudes().iter().copied().collect();
    prop.advance_pure(&mut psi, 0.0, sequence.total_duration());
    let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut warnings = Vec::new();
    if (norm - 1.0).abs() > 1e-7 {
        warnings.push(format!("norm drifted by {:.2e}", (norm - 1.0).abs()));
    }
    let out = PureState::normalized(space, psi)?;
    let full = out.to_density();
    Ok(EvolutionResult {
        qubit_state: partial_trace(&full, &qubit_factors(params))?,
        final_state: full,
        final_pure: Some(out),
        frame: track_frames(params, sequence),
        wall_times: segment_lengths(prop.model()),
        warnings,
    })
}

/// Markovian master-equation evolution through `sequence`.
pub fn evolve_lindblad(
    params: &DeviceParams,
    noise: &NoiseParams,
    sequence: &PulseSequence,
    initial: &DensityMatrix,
    dt: f64,
) -> Result<EvolutionResult> {
    let space = HilbertSpace::new(params.dims())?;
    if initial.space() != &space {
        return Err(Error::DimensionMismatch { expected: space.total_dim(), found: initial.space().total_dim() });
    }
    let prop = Propagator::new(Model::new(params, sequence)?, Some(noise), dt)?;
    let mut rho: Vec<C64> = initial.matrix().transpose().iter().copied().collect();
    let mut warnings = Vec::new();
    prop.advance_density(&mut rho, 0.0, sequence.total_duration(), &mut warnings)?;
    let full = density_from_rows(&space, &rho);
    Ok(EvolutionResult {
        qubit_state: partial_trace(&full, &qubit_factors(params))?,
        final_state: full,
        final_pure: None,
        frame: track_frames(params, sequence),
        wall_times: segment_lengths(prop.model()),
        warnings,
    })
}

pub(crate) fn density_from_rows(space: &HilbertSpace, rows: &[C64]) -> DensityMatrix {
    let d = space.total_dim();
    let m = DMatrix::from_row_slice(d, d, rows);
    DensityMatrix::from_parts(space.clone(), (&m + m.adjoint()) * C64::new(0.5, 0.0))
}

pub(crate) fn rows_from_density(rho: &DensityMatrix) -> Vec<C64> {
    rho.matrix().transpose().iter().copied().collect()
}

pub(crate) fn pure_from_vec(space: &HilbertSpace, v: Vec<C64>) -> PureState {
    PureState::from_parts(space.clone(), DVector::from_vec(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::pulse::Pulse;
    use crate::hilbert::{embed, fidelity, QuantumState};
    use std::f64::consts::PI;

    fn far_params() -> DeviceParams {
        // one qubit 800 MHz below the resonator with weak coupling
        let mut p = DeviceParams::default();
        p.omega_idle = vec![p.omega_r - 2.0 * PI * 800e6];
        p.g = 2.0 * PI * 0.5e6;
        p.delta_int = -2.0 * PI * 57e6;
        p
    }

    fn ground(params: &DeviceParams) -> PureState {
        PureState::basis(&HilbertSpace::new(params.dims()).unwrap(), 0).unwrap()
    }

    #[test]
    fn empty_sequence_is_identity() {
        let p = DeviceParams::default();
        let psi = ground(&p);
        let r = evolve_unitary(&p, &PulseSequence::empty(), &psi, DEFAULT_DT).unwrap();
        assert!((fidelity(&r.final_state, &psi).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn step_limit() {
        let p = DeviceParams::default();
        let r = evolve_unitary(&p, &PulseSequence::empty(), &ground(&p), 0.1e-9);
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }

    /// Two-level Rabi oracle: RK4 on the 2x2 Schrodinger equation with the same envelope.
    fn rabi_oracle(fwhm: f64, angle: f64, phase: f64) -> [C64; 2] {
        let n = 200_000;
        let t_end = 4.0 * fwhm;
        let h = t_end / n as f64;
        let mut psi = [C64::new(1.0, 0.0), ZERO];
        let rhs = |t: f64, s: [C64; 2]| {
            let w = C64::from_polar(0.5 * gaussian_envelope(0.0, fwhm, angle, t), phase);
            let mi = C64::new(0.0, -1.0);
            [mi * w.conj() * s[1], mi * w * s[0]]
        };
        for k in 0..n {
            let t = k as f64 * h;
            let k1 = rhs(t, psi);
            let k2 = rhs(t + h / 2.0, [psi[0] + k1[0] * (h / 2.0), psi[1] + k1[1] * (h / 2.0)]);
            let k3 = rhs(t + h / 2.0, [psi[0] + k2[0] * (h / 2.0), psi[1] + k2[1] * (h / 2.0)]);
            let k4 = rhs(t + h, [psi[0] + k3[0] * h, psi[1] + k3[1] * h]);
            for i in 0..2 {
                psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        psi
    }

    #[test]
    fn x_half_on_far_detuned_qubit() {
        let p = far_params();
        let seq = PulseSequence::new(vec![Pulse::gaussian(0, 0.0, 5e-9, PI / 2.0, 0.0)]).unwrap();
        let r = evolve_unitary(&p, &seq, &ground(&p), DEFAULT_DT).unwrap();
        let oracle = rabi_oracle(5e-9, PI / 2.0, 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((oracle[0] - C64::new(s, 0.0)).norm() < 1e-9);
        assert!((oracle[1] - C64::new(0.0, -s)).norm() < 1e-9);
        let target = PureState::from_amplitudes(HilbertSpace::qubits(1), oracle.to_vec()).unwrap();
        assert!(fidelity(&r.qubit_state, &target).unwrap() > 1.0 - 1e-3);
    }

    #[test]
    fn drive_free_hamiltonian_conserves_excitations() {
        let p = DeviceParams::default();
        let seq = PulseSequence::new(vec![Pulse::detune(1, 0.0, p.omega_int(), 40e-9, 5e-9)]).unwrap();
        let space = HilbertSpace::new(p.dims()).unwrap();
        let a = Operator::annihilation(p.n_ph).unwrap();
        let mut n_tot = embed(&(&a.dagger() * &a), &[4], &space).unwrap();
        for j in 0..4 {
            n_tot = (n_tot + embed(&Operator::excited_projector(), &[j], &space).unwrap()).unwrap();
        }
        for t in [0.0, 3e-9, 20e-9] {
            let h = hamiltonian_at(&p, &seq, t).unwrap();
            assert!(h.is_hermitian());
            assert!(h.commutator(&n_tot).unwrap().matrix().iter().all(|v| v.norm() < 1e-6));
        }
        // one detuned qubit: diagonal entry Delta on its excited subspace
        let h = hamiltonian_at(&p, &seq, 20e-9).unwrap();
        let idx = space.index_of(&[0, 1, 0, 0, 0]);
        assert!((h.matrix()[(idx, idx)].re - p.delta_int).abs() < 1e-3);
    }

    #[test]
    fn coupling_only_at_resonance() {
        let mut p = DeviceParams::default();
        p.omega_idle = vec![p.omega_r + 2.0 * PI * 100e6; 4];
        p.omega_idle.iter_mut().for_each(|w| *w = p.omega_r + 2.0 * PI * 100e6);
        let seq = PulseSequence::empty();
        let h = hamiltonian_at(&p, &seq, 0.0).unwrap();
        assert!(h.is_hermitian());
    }

    #[test]
    fn lindblad_matches_unitary_without_noise() {
        let p = DeviceParams::default();
        let seq = PulseSequence::new(vec![
            Pulse::gaussian(0, 0.0, 5e-9, PI / 2.0, 0.3),
            Pulse::gaussian(2, 0.0, 5e-9, PI / 2.0, -0.4),
            Pulse::detune(0, 20e-9, p.omega_int(), 30e-9, 5e-9),
            Pulse::detune(2, 20e-9, p.omega_int(), 30e-9, 5e-9),
        ])
        .unwrap();
        let psi = ground(&p);
        let u = evolve_unitary(&p, &seq, &psi, DEFAULT_DT).unwrap();
        let noise = NoiseParams::uniform(4, 1.0, 2.0);
        let l = evolve_lindblad(&p, &noise, &seq, &psi.to_density(), DEFAULT_DT).unwrap();
        assert!(u.final_state.trace_distance(&l.final_state).unwrap() < 1e-6);
        assert!((u.final_pure.unwrap().norm() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn excited_qubit_decays_exponentially() {
        let p = far_params();
        let t1 = 600e-9;
        let noise = NoiseParams::uniform(1, t1, 2.0 * t1);
        let t = 100e-9;
        let seq = PulseSequence::new(vec![Pulse::gaussian(0, t - 1e-9, 0.25e-9, 0.0, 0.0)]).unwrap();
        let space = HilbertSpace::new(p.dims()).unwrap();
        let excited = PureState::basis(&space, space.index_of(&[1, 0])).unwrap();
        let r = evolve_lindblad(&p, &noise, &seq, &excited.to_density(), DEFAULT_DT).unwrap();
        let p1 = r.qubit_state.matrix()[(1, 1)].re;
        assert!((p1 - (-t / t1).exp()).abs() < 1e-4, "{p1}");
        assert!((r.final_state.trace() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn virtual_z_is_exact() {
        let p = far_params();
        let seq = PulseSequence::new(vec![
            Pulse::gaussian(0, 0.0, 2e-9, PI / 2.0, 0.0),
            Pulse { variant: PulseVariant::VirtualZ { qubit: 0, angle: PI / 2.0 }, start_time: 8e-9 },
            Pulse::gaussian(0, 8e-9, 0.5e-9, 0.0, 0.0),
        ])
        .unwrap();
        let r = evolve_unitary(&p, &seq, &ground(&p), DEFAULT_DT).unwrap();
        // X/2 gives -y; a quarter turn about z moves it to +x
        let x = Operator::pauli_x();
        let v = r.qubit_state.expectation_complex(&x).re;
        assert!(v > 0.99, "{v}");
    }

    #[test]
    fn halving_step_is_converged() {
        let p = DeviceParams::default();
        let seq = PulseSequence::new(vec![
            Pulse::gaussian(1, 0.0, 5e-9, PI / 2.0, 0.0),
            Pulse::detune(1, 20e-9, p.omega_int(), 20e-9, 5e-9),
        ])
        .unwrap();
        let psi = ground(&p);
        let a = evolve_unitary(&p, &seq, &psi, DEFAULT_DT).unwrap();
        let b = evolve_unitary(&p, &seq, &psi, DEFAULT_DT / 2.0).unwrap();
        let fa = a.final_pure.unwrap();
        let fb = b.final_pure.unwrap();
        assert!(1.0 - fa.inner(&fb).unwrap().norm_sqr() < 1e-10);
    }
}
