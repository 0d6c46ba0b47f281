use super::params::DeviceParams;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// FWHM of a Gaussian in units of its standard deviation.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;
/// Gaussian windows extend this many FWHM to each side of the center.
pub const GAUSSIAN_HALF_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseVariant {
    /// Resonant drive in the qubit's frame: rotation by `rotation_angle`
    /// about the equatorial axis at azimuth `drive_phase`.
    GaussianDrive { qubit: usize, fwhm: f64, rotation_angle: f64, drive_phase: f64 },
    /// Frequency excursion to `target_frequency` (absolute, rad/s). `duration`
    /// is measured between the half-way points of the cosine edges, so the
    /// pulse occupies `duration + rise_time`.
    SquareDetune { qubit: usize, target_frequency: f64, duration: f64, rise_time: f64 },
    /// Instantaneous `exp(-i angle Z / 2)` in the qubit frame.
    VirtualZ { qubit: usize, angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub variant: PulseVariant,
    pub start_time: f64,
}

impl Pulse {
    pub fn gaussian(qubit: usize, start: f64, fwhm: f64, angle: f64, phase: f64) -> Self {
        Pulse {
            variant: PulseVariant::GaussianDrive { qubit, fwhm, rotation_angle: angle, drive_phase: phase },
            start_time: start,
        }
    }

    pub fn detune(qubit: usize, start: f64, target_frequency: f64, duration: f64, rise_time: f64) -> Self {
        Pulse {
            variant: PulseVariant::SquareDetune { qubit, target_frequency, duration, rise_time },
            start_time: start,
        }
    }

    pub fn qubit(&self) -> usize {
        match self.variant {
            PulseVariant::GaussianDrive { qubit, .. }
            | PulseVariant::SquareDetune { qubit, .. }
            | PulseVariant::VirtualZ { qubit, .. } => qubit,
        }
    }

    /// Time span occupied by the pulse.
    pub fn span(&self) -> f64 {
        match self.variant {
            PulseVariant::GaussianDrive { fwhm, .. } => 2.0 * GAUSSIAN_HALF_WIDTH * fwhm,
            PulseVariant::SquareDetune { duration, rise_time, .. } => duration + rise_time,
            PulseVariant::VirtualZ { .. } => 0.0,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.span()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Sequence(m.into()));
        if !self.start_time.is_finite() || self.start_time < 0.0 {
            return bad("pulse start times must be finite and non-negative");
        }
        match self.variant {
            PulseVariant::GaussianDrive { fwhm, rotation_angle, drive_phase, .. } => {
                if !(fwhm > 0.0) {
                    return bad("Gaussian FWHM must be positive");
                }
                if !rotation_angle.is_finite() || !drive_phase.is_finite() {
                    return bad("non-finite drive angle or phase");
                }
            }
            PulseVariant::SquareDetune { target_frequency, duration, rise_time, .. } => {
                if !(duration > 0.0) || !(rise_time >= 0.0) || !target_frequency.is_finite() {
                    return bad("detuning pulse needs positive duration and non-negative rise time");
                }
                if rise_time > duration {
                    return bad("detuning pulse rise time exceeds its duration");
                }
            }
            PulseVariant::VirtualZ { angle, .. } => {
                if !angle.is_finite() {
                    return bad("non-finite virtual-Z angle");
                }
            }
        }
        Ok(())
    }
}

/// Peak Rabi rate of a truncated Gaussian whose area equals `angle`.
pub fn gaussian_amplitude(fwhm: f64, angle: f64) -> f64 {
    let sigma = fwhm / FWHM_PER_SIGMA;
    let half = GAUSSIAN_HALF_WIDTH * fwhm;
    let area_unit = sigma * (2.0 * PI).sqrt() * libm::erf(half / (sigma * std::f64::consts::SQRT_2));
    angle / area_unit
}

/// Rabi rate of a Gaussian pulse at time `t` (zero outside its window).
pub fn gaussian_envelope(start: f64, fwhm: f64, angle: f64, t: f64) -> f64 {
    let half = GAUSSIAN_HALF_WIDTH * fwhm;
    let center = start + half;
    let x = t - center;
    if x.abs() > half {
        return 0.0;
    }
    let sigma = fwhm / FWHM_PER_SIGMA;
    gaussian_amplitude(fwhm, angle) * (-0.5 * (x / sigma).powi(2)).exp()
}

/// Time-ordered list of pulses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
}

/// One row of the JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub variant: String,
    pub qubit: usize,
    pub start_ns: f64,
    pub duration_ns: f64,
    pub angle_rad: f64,
    pub phase_rad: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_ghz: Option<f64>,
}

impl PulseSequence {
    /// Pulses must be listed by non-decreasing start time, and detuning pulses
    /// on one qubit must not overlap.
    pub fn new(pulses: Vec<Pulse>) -> Result<Self> {
        for p in &pulses {
            p.validate()?;
        }
        for w in pulses.windows(2) {
            if w[1].start_time < w[0].start_time {
                return Err(Error::Sequence(format!(
                    "pulse starting at {:.3} ns listed after one starting at {:.3} ns",
                    w[1].start_time * 1e9,
                    w[0].start_time * 1e9
                )));
            }
        }
        let detunes: Vec<&Pulse> =
            pulses.iter().filter(|p| matches!(p.variant, PulseVariant::SquareDetune { .. })).collect();
        for (k, a) in detunes.iter().enumerate() {
            for b in &detunes[k + 1..] {
                if a.qubit() == b.qubit() && b.start_time < a.end_time() && a.start_time < b.end_time() {
                    return Err(Error::Sequence(format!("overlapping detuning pulses on qubit {}", a.qubit())));
                }
            }
        }
        Ok(Self { pulses })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(Pulse::end_time).fold(0.0, f64::max)
    }

    /// Appends pulses, keeping time order.
    pub fn extended(&self, more: &[Pulse]) -> Result<Self> {
        let mut all = self.pulses.clone();
        all.extend_from_slice(more);
        all.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        Self::new(all)
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.pulses.iter().map(Pulse::qubit).max()
    }

    pub fn to_records(&self) -> Vec<PulseRecord> {
        self.pulses
            .iter()
            .map(|p| {
                let (variant, angle, phase, target) = match p.variant {
                    PulseVariant::GaussianDrive { rotation_angle, drive_phase, .. } => {
                        ("gaussian_drive", rotation_angle, drive_phase, None)
                    }
                    PulseVariant::SquareDetune { target_frequency, .. } => {
                        ("square_detune", 0.0, 0.0, Some(target_frequency / (2.0 * PI) / 1e9))
                    }
                    PulseVariant::VirtualZ { angle, .. } => ("virtual_z", angle, 0.0, None),
                };
                PulseRecord {
                    variant: variant.into(),
                    qubit: p.qubit(),
                    start_ns: p.start_time * 1e9,
                    duration_ns: p.span() * 1e9,
                    angle_rad: angle,
                    phase_rad: phase,
                    target_ghz: target,
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// Idle weight 1 (qubit at its idle frequency).
    Idle,
    /// Idle weight 0 (qubit at the excursion target).
    Away,
    /// Cosine from idle to the target.
    Leave,
    /// Cosine from the target back to idle.
    Return,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    t0: f64,
    t1: f64,
    shape: Shape,
    target: f64,
    /// Integral of the idle weight from 0 to `t0`.
    weight_integral: f64,
    /// Integral of the commanded detuning from 0 to `t0`.
    detuning_integral: f64,
}

/// Commanded frequency of one qubit and of the frame that tracks it, both
/// measured from the resonator frequency.
///
/// At idle the frame follows the dispersively shifted qubit frequency
/// `delta + g^2/delta`; during an excursion it follows the bare commanded
/// frequency. The shift is blended with the same cosine edges.
#[derive(Debug, Clone)]
pub struct FrequencyProfile {
    idle: f64,
    dressing: f64,
    pieces: Vec<Piece>,
}

impl FrequencyProfile {
    pub fn new(params: &DeviceParams, sequence: &PulseSequence, qubit: usize) -> Self {
        let idle = params.idle_detuning(qubit);
        let dressing = params.idle_dressing(qubit);
        let mut pieces = Vec::new();
        let mut t = 0.0;
        let mut wi = 0.0;
        let mut di = 0.0;
        let mut push = |t0: f64, t1: f64, shape: Shape, target: f64, wi: &mut f64, di: &mut f64| {
            if t1 <= t0 {
                return;
            }
            let p = Piece { t0, t1, shape, target, weight_integral: *wi, detuning_integral: *di };
            let w = weight_integral_within(&p, t1);
            *di += target * (t1 - t0) + (idle - target) * w;
            *wi += w;
            pieces.push(p);
        };
        for p in sequence.pulses() {
            if let PulseVariant::SquareDetune { qubit: q, target_frequency, duration, rise_time } = p.variant {
                if q != qubit {
                    continue;
                }
                let target = target_frequency - params.omega_r;
                let s = p.start_time;
                push(t, s, Shape::Idle, idle, &mut wi, &mut di);
                push(s, s + rise_time, Shape::Leave, target, &mut wi, &mut di);
                push(s + rise_time, s + duration, Shape::Away, target, &mut wi, &mut di);
                push(s + duration, s + duration + rise_time, Shape::Return, target, &mut wi, &mut di);
                t = s + duration + rise_time;
            }
        }
        FrequencyProfile { idle, dressing, pieces }
    }

    fn piece_at(&self, t: f64) -> Option<&Piece> {
        let k = self.pieces.partition_point(|p| p.t1 <= t);
        self.pieces.get(k).filter(|p| p.t0 <= t)
    }

    fn last_end(&self) -> (f64, f64, f64) {
        match self.pieces.last() {
            Some(p) => {
                let w = weight_integral_within(p, p.t1);
                (p.t1, p.weight_integral + w, p.detuning_integral + p.target * (p.t1 - p.t0) + (self.idle - p.target) * w)
            }
            None => (0.0, 0.0, 0.0),
        }
    }

    /// Idle weight in [0, 1].
    pub fn idle_weight(&self, t: f64) -> f64 {
        match self.piece_at(t) {
            Some(p) => weight_at(p, t),
            None => 1.0,
        }
    }

    /// Commanded detuning `omega_j(t) - omega_r`.
    pub fn detuning(&self, t: f64) -> f64 {
        match self.piece_at(t) {
            Some(p) => p.target + (self.idle - p.target) * weight_at(p, t),
            None => self.idle,
        }
    }

    /// Frame detuning `f_j(t)`.
    pub fn frame_detuning(&self, t: f64) -> f64 {
        self.detuning(t) + self.dressing * self.idle_weight(t)
    }

    /// Commanded minus frame detuning.
    pub fn residual(&self, t: f64) -> f64 {
        -self.dressing * self.idle_weight(t)
    }

    fn integrals(&self, t: f64) -> (f64, f64) {
        if let Some(p) = self.piece_at(t) {
            let w = weight_integral_within(p, t);
            let wi = p.weight_integral + w;
            let di = p.detuning_integral + p.target * (t - p.t0) + (self.idle - p.target) * w;
            return (wi, di);
        }
        let (end, wi, di) = self.last_end();
        if t >= end {
            (wi + (t - end), di + self.idle * (t - end))
        } else {
            // before the first piece: idle from 0
            (t, self.idle * t)
        }
    }

    /// Frame phase `F_j(t) = integral of f_j from 0 to t`.
    pub fn frame_phase(&self, t: f64) -> f64 {
        let (wi, di) = self.integrals(t);
        di + self.dressing * wi
    }

    /// Integral of the commanded detuning from 0 to t.
    pub fn detuning_phase(&self, t: f64) -> f64 {
        self.integrals(t).1
    }

    /// Times where the profile changes shape.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().flat_map(|p| [p.t0, p.t1]).collect()
    }
}

fn weight_at(p: &Piece, t: f64) -> f64 {
    let r = p.t1 - p.t0;
    match p.shape {
        Shape::Idle => 1.0,
        Shape::Away => 0.0,
        Shape::Leave => 0.5 * (1.0 + (PI * (t - p.t0) / r).cos()),
        Shape::Return => 0.5 * (1.0 - (PI * (t - p.t0) / r).cos()),
    }
}

/// Integral of the idle weight from `p.t0` to `t`.
fn weight_integral_within(p: &Piece, t: f64) -> f64 {
    let x = t - p.t0;
    let r = p.t1 - p.t0;
    match p.shape {
        Shape::Idle => x,
        Shape::Away => 0.0,
        Shape::Leave => 0.5 * x + r / (2.0 * PI) * (PI * x / r).sin(),
        Shape::Return => 0.5 * x - r / (2.0 * PI) * (PI * x / r).sin(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn gaussian_area_equals_angle() {
        for (fwhm, angle) in [(5e-9, PI / 2.0), (4e-9, -PI / 8.0), (10e-9, PI)] {
            let area = simpson(|t| gaussian_envelope(0.0, fwhm, angle, t), 0.0, 4.0 * fwhm, 4000);
            assert!((area - angle).abs() < 1e-9, "{area} vs {angle}");
        }
    }

    #[test]
    fn gaussian_fwhm() {
        let fwhm = 5e-9;
        let peak = gaussian_envelope(0.0, fwhm, 1.0, 2.0 * fwhm);
        let half = gaussian_envelope(0.0, fwhm, 1.0, 2.0 * fwhm + fwhm / 2.0);
        assert!((half / peak - 0.5).abs() < 1e-12);
        assert_eq!(gaussian_envelope(0.0, fwhm, 1.0, 4.0 * fwhm + 1e-12), 0.0);
    }

    #[test]
    fn sequence_validation() {
        let a = Pulse::gaussian(0, 10e-9, 5e-9, 1.0, 0.0);
        let b = Pulse::gaussian(0, 0.0, 5e-9, 1.0, 0.0);
        assert!(matches!(PulseSequence::new(vec![a, b]), Err(Error::Sequence(_))));
        let d1 = Pulse::detune(1, 0.0, 1.0, 20e-9, 0.0);
        let d2 = Pulse::detune(1, 10e-9, 1.0, 20e-9, 0.0);
        assert!(PulseSequence::new(vec![d1, d2]).is_err());
        let d3 = Pulse::detune(2, 10e-9, 1.0, 20e-9, 0.0);
        assert!(PulseSequence::new(vec![d1, d3]).is_ok());
        assert!(PulseSequence::new(vec![Pulse::detune(0, 0.0, 1.0, 5e-9, 6e-9)]).is_err());
    }

    #[test]
    fn profile_integrals_match_quadrature() {
        let p = DeviceParams::default();
        let seq = PulseSequence::new(vec![Pulse::detune(2, 20e-9, p.omega_int(), 60e-9, 10e-9)]).unwrap();
        let prof = FrequencyProfile::new(&p, &seq, 2);
        for t in [5e-9, 25e-9, 50e-9, 85e-9, 120e-9] {
            let q = simpson(|s| prof.frame_detuning(s), 0.0, t, 20000);
            assert!((prof.frame_phase(t) - q).abs() < 1e-6, "t={t}: {} vs {q}", prof.frame_phase(t));
        }
        assert!((prof.detuning(50e-9) - p.delta_int).abs() < 1e-3);
        assert!((prof.frame_detuning(0.0) - (p.idle_detuning(2) + p.idle_dressing(2))).abs() < 1e-3);
        assert!((prof.detuning(25e-9) - (p.idle_detuning(2) + p.delta_int) / 2.0).abs() < 1.0);
    }

    #[test]
    fn records_export() {
        let p = DeviceParams::default();
        let seq = PulseSequence::new(vec![
            Pulse::gaussian(0, 0.0, 5e-9, PI / 2.0, 0.25),
            Pulse::detune(0, 20e-9, p.omega_int(), 59.3e-9, 0.0),
        ])
        .unwrap();
        let rec = seq.to_records();
        assert_eq!(rec[0].variant, "gaussian_drive");
        assert!((rec[0].duration_ns - 20.0).abs() < 1e-9);
        assert!((rec[1].target_ghz.unwrap() - (6.2 - 0.057)).abs() < 1e-9);
        let json = seq.to_json().unwrap();
        assert!(json.contains("start_ns"));
    }
}
