use serde_json::Value;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn anyon(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyon")).args(args).current_dir(cwd).output().expect("spawn anyon")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = anyon(args, cwd);
    assert!(out.status.success(), "anyon {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect()
}

#[test]
fn gate_ghz_exact_and_sampled() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["ghz", "--shots", "0", "--out", "exact"], dir.path());
    let r = json(&dir.path().join("exact/report.json"));
    assert!((r["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r["tomography"]["method"], "linear");

    ok(&["ghz", "--out", "sampled"], dir.path());
    let r = json(&dir.path().join("sampled/report.json"));
    assert!(r["fidelity"].as_f64().unwrap() >= 0.98);
    assert_eq!(r["tomography"]["method"], "mle");
    assert_eq!(r["tomography"]["settings"], 81);
    assert_eq!(r["witness"]["passes"], true);
    let names = listing(&dir.path().join("sampled"));
    for f in ["manifest.json", "report.json", "rho.json", "rho.svg", "tomography.json"] {
        assert!(names.contains(f), "{f} missing from {names:?}");
    }
}

#[test]
fn gate_e_anyon_targets_minus_branch() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["e-anyon", "--shots", "0", "--out", "e"], dir.path());
    let r = json(&dir.path().join("e/report.json"));
    assert!((r["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let rho = json(&dir.path().join("e/rho.json"));
    let coherence = rho["re"][15].as_f64().unwrap();
    assert!((coherence + 0.5).abs() < 1e-9, "{coherence}");
}

#[test]
fn gate_braid_exact_phases() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["braid", "--shots", "0", "--out", "b"], dir.path());
    let r = json(&dir.path().join("b/braid_report.json"));
    let fits = r["fits"].as_array().unwrap();
    let expect = [("empty_vertex", 0.0), ("e_vertex", 0.0), ("half_filled", 1.0)];
    for (fit, (name, phi)) in fits.iter().zip(expect) {
        assert_eq!(fit["scenario"], name);
        let got = fit["phi_over_pi"].as_f64().unwrap();
        let d = (got - phi).rem_euclid(2.0);
        assert!(d.min(2.0 - d) < 1e-9, "{name}: {got}");
    }
    assert!((r["braiding_phase"]["delta_phi"].as_f64().unwrap().abs() - PI).abs() < 1e-9);
    let names = listing(&dir.path().join("b"));
    for s in ["empty_vertex", "e_vertex", "half_filled"] {
        assert!(names.contains(&format!("scan_{s}.csv")) && names.contains(&format!("fit_{s}.json")));
    }
    let csv = std::fs::read_to_string(dir.path().join("b/scan_half_filled.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "gamma_rad,parity,parity_stderr,shots");
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn sampled_braid_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["braid", "--seed", "7", "--out", "a"], dir.path());
    ok(&["braid", "--seed", "7", "--out", "b"], dir.path());
    ok(&["braid", "--seed", "8", "--out", "c"], dir.path());
    let hashes = |d: &str| {
        let m = json(&dir.path().join(d).join("manifest.json"));
        m["artifacts"].as_array().unwrap().iter().map(|a| (a["path"].to_string(), a["sha256"].to_string())).collect::<Vec<_>>()
    };
    assert_eq!(hashes("a"), hashes("b"));
    assert_ne!(hashes("a"), hashes("c"));
}

#[test]
fn bad_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = 3\nshots = \"many\"\n").unwrap();
    let out = anyon(&["ghz", "--config", "bad.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    std::fs::write(dir.path().join("unknown.toml"), "shots = 10\nbogus = 1\n").unwrap();
    let out = anyon(&["ghz", "--config", "unknown.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = anyon(&["ghz", "--config", "missing.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn gate_backend_ignores_device_section() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "g_ghz = -1.0\nt1_ns = 600.0\nt2eff_ns = 500.0\n").unwrap();
    let out = ok(&["ghz", "--config", "c.toml", "--shots", "0", "--out", "o"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("noiseless"));
    let out = anyon(&["ghz", "--config", "c.toml", "--backend", "pulse", "--out", "p"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ramsey_recovers_t1_limit_and_dephasing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.toml"), "t1_ns = 600.0\nt2eff_ns = 1200.0\n").unwrap();
    ok(&["ramsey", "--config", "r.toml", "--out", "r"], dir.path());
    let f = json(&dir.path().join("r/ramsey_fit.json"));
    let t2 = f["t_exp_ns"].as_f64().unwrap();
    assert!((t2 / 1200.0 - 1.0).abs() < 0.02, "{t2}");
    assert!(f["residual_rms"].as_f64().unwrap() < 0.01);

    std::fs::write(dir.path().join("d.toml"), "t1_ns = 600.0\nt2eff_ns = 300.0\n").unwrap();
    ok(&["ramsey", "--config", "d.toml", "--out", "d"], dir.path());
    let f = json(&dir.path().join("d/ramsey_fit.json"));
    assert!(f["t_exp_ns"].as_f64().unwrap() < 1200.0);
    assert!(f["residual_rms"].as_f64().unwrap() < 0.01);
    let csv = std::fs::read_to_string(dir.path().join("d/ramsey.csv")).unwrap();
    let last: f64 = csv.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((last - 900.0).abs() < 1e-6);

    let out = anyon(&["ramsey", "--config", "r.toml", "--backend", "gate", "--out", "g"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_warns_at_upper_bracket() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "interaction_time_ns = 75.0\nt1_ns = 600.0\n").unwrap();
    let out = ok(&["calibrate", "--config", "c.toml", "--target", "0.99", "--out", "c"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("upper bracket"));
    let f = json(&dir.path().join("c/calibrated.json"));
    assert_eq!(f["calibration"]["at_upper_bracket"], true);
    assert_eq!(f["t2eff_ns"][0].as_f64().unwrap(), 1200.0);
    let m = json(&dir.path().join("c/manifest.json"));
    assert_eq!(m["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn writes_only_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["braid", "--shots", "0", "--gammas", "9", "--out", "nested/out"], dir.path());
    assert_eq!(listing(dir.path()), BTreeSet::from(["nested".to_string()]));
    assert_eq!(listing(&dir.path().join("nested")), BTreeSet::from(["out".to_string()]));
    let m = json(&dir.path().join("nested/out/manifest.json"));
    let listed: BTreeSet<String> =
        m["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap().to_string()).collect();
    let mut on_disk = listing(&dir.path().join("nested/out"));
    on_disk.remove("manifest.json");
    assert_eq!(listed, on_disk);
}

#[test]
fn noise_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "interaction_time_ns = 75.0\nt1_ns = 600.0\n").unwrap();
    ok(&["calibrate", "--config", "c.toml", "--target", "0.99", "--out", "c"], dir.path());
    std::fs::write(dir.path().join("r.toml"), "ramsey_points = 11\n").unwrap();
    ok(&["ramsey", "--config", "r.toml", "--noise", "c/calibrated.json", "--out", "r"], dir.path());
    let f = json(&dir.path().join("r/ramsey_fit.json"));
    assert_eq!(f["t2eff_ns"].as_f64().unwrap(), 1200.0);
    let out = anyon(&["ghz", "--noise", "nowhere.json", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
