use anyon_core::dynamics::{
    evolve_lindblad, gate_level_backend, ghz_sequence, run_ghz, to_primed, DeviceParams, FrameTracker, GateOp, GhzProtocol,
    NoiseParams, PulseBackend, DEFAULT_DT,
};
use anyon_core::hilbert::{fidelity, DensityMatrix, HilbertSpace, PureState, C64};
use anyon_core::interference::{fit_cosine, gamma_grid, run_scan, BraidScenario, ScanBackend};
use anyon_core::tomo::{exact_tomography, ghz_witness, reconstruct_linear, reconstruct_mle, sample_tomography};
use anyon_core::toric::{build_lattice, build_stabilizers, measure_syndrome, LatticeKind};
use std::f64::consts::PI;

fn register_ground(p: &DeviceParams) -> DensityMatrix {
    PureState::basis(&HilbertSpace::new(p.dims()).unwrap(), 0).unwrap().to_density()
}

#[test]
fn lindblad_run_stays_physical() {
    let p = DeviceParams::default();
    let noise = NoiseParams::uniform(4, 600e-9, 300e-9);
    let r = evolve_lindblad(&p, &noise, &ghz_sequence(&p).unwrap(), &register_ground(&p), DEFAULT_DT).unwrap();
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    assert!((r.final_state.trace() - 1.0).abs() < 1e-6);
    assert!(r.final_state.min_eigenvalue() > -1e-6);
    assert!(r.qubit_state.min_eigenvalue() > -1e-6);
}

#[test]
fn fidelity_falls_as_dephasing_grows() {
    let p = DeviceParams::default();
    let proto = GhzProtocol::nominal(&p);
    let f: Vec<f64> = [1200e-9, 600e-9, 200e-9]
        .iter()
        .map(|&t2| run_ghz(&p, Some(&NoiseParams::uniform(4, 600e-9, t2)), &proto, DEFAULT_DT).unwrap().fidelity)
        .collect();
    assert!(f[0] > f[1] && f[1] > f[2], "{f:?}");
}

#[test]
fn gate_state_through_tomography_and_witness() {
    let zero = PureState::basis(&HilbertSpace::qubits(4), 0).unwrap();
    let psi_e = gate_level_backend(&[GateOp::PrepareGhz, GateOp::ZPrime(0)], &zero).unwrap();
    let rho = psi_e.to_density();

    let exact = reconstruct_linear(&exact_tomography(&rho).unwrap()).unwrap();
    assert!(exact.rho.max_imaginary() < 1e-9);
    assert!((fidelity(&exact.rho, &psi_e).unwrap() - 1.0).abs() < 1e-9);

    // a pure stabilizer state gives deterministic parities, so mix in white noise for a finite error bar
    let white = DensityMatrix::maximally_mixed(HilbertSpace::qubits(4));
    let noisy = DensityMatrix::new(HilbertSpace::qubits(4), rho.matrix() * C64::new(0.8, 0.0) + white.matrix() * C64::new(0.2, 0.0)).unwrap();
    let data = sample_tomography(&noisy, 3000, 9).unwrap();
    let mle = reconstruct_mle(&data, 2000, 1e-10).unwrap();
    assert!(mle.rho.min_eigenvalue() >= -1e-12);
    let w = ghz_witness(&mle.rho, &psi_e, Some(&data), 10).unwrap();
    assert!(w.passes && (w.fidelity - 0.8125).abs() < 0.02, "{w:?}");
    assert!(w.sigma_margin.unwrap() > 10.0);

    // the primed frame of the gate backend is the zero frame; the syndrome sees one e anyon
    let primed = to_primed(&rho, &FrameTracker::zeros(4)).unwrap();
    let e = PureState::ghz_with_phase(4, PI);
    assert!((fidelity(&primed, &e).unwrap() - 1.0).abs() < 1e-9);
    let stabs = build_stabilizers(&build_lattice(LatticeKind::MinimalCell).unwrap()).unwrap();
    assert_eq!(measure_syndrome(&e, &stabs).unwrap().e_sites(), vec![0]);
}

#[test]
fn gate_and_pulse_scans_share_conventions() {
    // a coarse pulse scan of the plain GHZ must sit near the gate phase, not a sign-flipped one
    let p = DeviceParams::default();
    let b = PulseBackend { params: p.clone(), noise: None, protocol: GhzProtocol::nominal(&p), dt: DEFAULT_DT };
    let grid = gamma_grid(9).unwrap();
    let gate = fit_cosine(&run_scan(BraidScenario::Excited, &grid, None, ScanBackend::Gate, 1).unwrap()).unwrap();
    let pulse = fit_cosine(&run_scan(BraidScenario::Excited, &grid, None, ScanBackend::Pulse(&b), 1).unwrap()).unwrap();
    assert!((gate.phi.abs() - PI).abs() < 1e-9);
    let d = (pulse.phi - gate.phi + PI).rem_euclid(2.0 * PI) - PI;
    assert!(d.abs() < 0.5, "pulse {} vs gate {}", pulse.phi, gate.phi);
}
