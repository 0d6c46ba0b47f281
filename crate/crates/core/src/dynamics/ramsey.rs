//! Single-qubit Ramsey sequence and envelope fit.
//!
//! Markovian relaxation and dephasing come from the master equation. A
//! Gaussian envelope is produced by averaging over a static detuning drawn
//! from a normal distribution (Gauss-Hermite quadrature), since a Markovian
//! generator alone only yields exponentials.

use super::evolve::{density_from_rows, rows_from_density, Model, Propagator};
use super::params::{DeviceParams, NoiseParams};
use super::protocol::X_HALF_FWHM;
use super::pulse::{Pulse, PulseSequence};
use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, HilbertSpace, PureState, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// Exponential decay constant; `None` when the fitted linear term is not a decay.
    pub t_exp: Option<f64>,
    /// Gaussian time constant; `None` when the fitted quadratic term is not a decay.
    pub t_gauss: Option<f64>,
    pub amplitude: f64,
    /// RMS of `envelope - model` over the samples.
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyResult {
    /// Free-evolution times after the X/2 pulse.
    pub taus: Vec<f64>,
    /// Fringe amplitude `2|rho_01|`.
    pub envelope: Vec<f64>,
    pub fit: EnvelopeFit,
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule (weight `e^{-x^2}`).
pub(crate) fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], PI.sqrt() * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Runs X/2 followed by free evolution of qubit `qubit` at its idle point
/// and records the coherence envelope at each of `taus` (increasing, >= 0),
/// counted from the end of the pulse. The fit uses the time since the
/// pulse centre.
pub fn ramsey(
    params: &DeviceParams,
    qubit: usize,
    noise: &NoiseParams,
    t2_star: Option<f64>,
    taus: &[f64],
    nodes: usize,
    dt: f64,
) -> Result<RamseyResult> {
    if taus.len() < 4 {
        return Err(Error::InvalidInput("at least four delays are needed".into()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) || taus[0] < 0.0 {
        return Err(Error::InvalidInput("delays must be non-negative and strictly increasing".into()));
    }
    let p1 = params.single_qubit(qubit)?;
    let n1 = noise.single_qubit(qubit)?;
    let space = HilbertSpace::new(p1.dims())?;
    let seq = PulseSequence::new(vec![Pulse::gaussian(0, 0.0, X_HALF_FWHM, FRAC_PI_2, 0.0)])?;
    let t_x = seq.total_duration();
    let (xs, ws) = match t2_star {
        Some(t2s) if t2s > 0.0 => {
            let (x, w) = gauss_hermite(nodes.max(1));
            let sigma = 2f64.sqrt() / t2s;
            (x.into_iter().map(|v| 2f64.sqrt() * sigma * v).collect(), w.into_iter().map(|v| v / PI.sqrt()).collect())
        }
        Some(_) => return Err(Error::InvalidInput("t2_star must be positive".into())),
        None => (vec![0.0], vec![1.0]),
    };
    let mut coherence = vec![C64::new(0.0, 0.0); taus.len()];
    for (&delta, &w) in xs.iter().zip(&ws) {
        let model = Model::new(&p1, &seq)?.with_extra_detuning(vec![delta]);
        let prop = Propagator::new(model, Some(&n1), dt)?;
        let mut rho = rows_from_density(&PureState::basis(&space, 0)?.to_density());
        let mut warnings = Vec::new();
        let mut t = 0.0;
        for (k, &tau) in taus.iter().enumerate() {
            let t_next = t_x + tau;
            if t_next > t {
                prop.advance_density(&mut rho, t, t_next, &mut warnings)?;
                t = t_next;
            }
            let q = partial_trace(&density_from_rows(&space, &rho), &[0])?;
            coherence[k] += q.matrix()[(0, 1)] * w;
        }
    }
    let envelope: Vec<f64> = coherence.iter().map(|c| 2.0 * c.norm()).collect();
    // the fringe phase starts accumulating at the pulse centre
    let since_centre: Vec<f64> = taus.iter().map(|t| t + 0.5 * t_x).collect();
    let fit = fit_envelope(&since_centre, &envelope)?;
    Ok(RamseyResult { taus: taus.to_vec(), envelope, fit })
}

/// Least-squares fit of `ln E = c - tau/T_exp - (tau/T_gauss)^2`.
pub fn fit_envelope(taus: &[f64], envelope: &[f64]) -> Result<EnvelopeFit> {
    if taus.len() != envelope.len() {
        return Err(Error::DimensionMismatch { expected: taus.len(), found: envelope.len() });
    }
    let pts: Vec<(f64, f64)> = taus.iter().zip(envelope).filter(|(_, &e)| e > 1e-12).map(|(&t, &e)| (t, e)).collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate("fewer than three positive envelope samples".into()));
    }
    let scale = pts.iter().map(|p| p.0).fold(0.0, f64::max).max(1e-30);
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => -pts[i].0 / scale,
        _ => -(pts[i].0 / scale).powi(2),
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1.ln()));
    let x = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::Degenerate(e.to_string()))?;
    let lin = x[1] / scale;
    let quad = x[2] / (scale * scale);
    let t_exp = (lin > 0.0).then(|| 1.0 / lin);
    let t_gauss = (quad > 0.0).then(|| 1.0 / quad.sqrt());
    let amplitude = x[0].exp();
    let ss: f64 = taus
        .iter()
        .zip(envelope)
        .map(|(&t, &e)| (e - amplitude * (-lin * t - quad * t * t).exp()).powi(2))
        .sum();
    Ok(EnvelopeFit { t_exp, t_gauss, amplitude, residual_rms: (ss / taus.len() as f64).sqrt() })
}
