use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SHORT: &str = r#"
[oct]
t_pulse = "0.96 us"
max_iterations = 3
checkpoint_every = 1
"#;

fn iontrap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iontrap"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn short_config(dir: &Path) -> String {
    let p = dir.join("short.toml");
    fs::write(&p, SHORT).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn trap_and_gate_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(code(&iontrap(dir, &["trap"])), 0);
        assert_eq!(code(&iontrap(dir, &["gate"])), 0);
    }
    for name in [
        "basis.json",
        "energies.csv",
        "transitions.csv",
        "dipole.csv",
        "gate.json",
        "gate.csv",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("gate.json")).unwrap()).unwrap();
    assert!(doc.to_string().contains("config_hash"));
}

#[test]
fn invalid_inputs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&iontrap(d, &["--tier", "paper", "optimize"])), 2);
    assert_eq!(code(&iontrap(d, &["simulate", "--field", "/nonexistent/field.csv"])), 2);
    let bad = d.join("bad.toml");
    fs::write(&bad, "[trap]\ndynamical_size = 60\n").unwrap();
    assert_eq!(code(&iontrap(d, &["--config", bad.to_str().unwrap(), "trap"])), 2);
    assert_eq!(code(&iontrap(d, &["optimize", "--functional", "Q"])), 2);
    assert_eq!(
        code(&iontrap(d, &["optimize", "--dissipative", "--kappa", "1e-18,5e-18"])),
        2
    );
    assert_ne!(code(&iontrap(d, &["no-such-command"])), 0);
}

#[test]
fn optimize_reports_non_convergence_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = short_config(d);
    let o = iontrap(d, &["--config", &cfg, "optimize", "--functional", "F"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let field = d.join("field_gate_F.csv");
    let text = fs::read_to_string(&field).unwrap();
    assert!(text.contains("iteration"));
    let trace = fs::read_to_string(d.join("trace_gate_F.csv")).unwrap();
    let rows = trace
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .count();
    assert_eq!(rows, 4);

    // Nothing left to do at the iteration limit: the trace is kept, not duplicated.
    let copy = d.join("resume.csv");
    fs::copy(&field, &copy).unwrap();
    let o = iontrap(
        d,
        &[
            "--config",
            &cfg,
            "optimize",
            "--functional",
            "F",
            "--resume",
            copy.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 4);
    let again = fs::read_to_string(d.join("trace_gate_F.csv")).unwrap();
    let rows = again
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .count();
    assert_eq!(rows, 4);
}

#[test]
fn analyze_and_simulate_a_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = short_config(d);
    assert_eq!(
        code(&iontrap(d, &["--config", &cfg, "optimize", "--functional", "P"])),
        4
    );
    let field = d.join("field_gate_P.csv");
    let f = field.to_str().unwrap();

    let o = iontrap(d, &["--config", &cfg, "analyze", "--field", f, "--band", "0.5,20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("analysis_field_gate_P.json")).unwrap()).unwrap();
    assert!(doc.to_string().contains("parseval"));
    assert!(d.join("spectrum_field_gate_P.csv").exists());
    assert_eq!(code(&iontrap(d, &["analyze", "--field", f, "--band", "20,0.5"])), 2);

    let sim = format!("{SHORT}[sim]\npulses = 2\n");
    let sim_cfg = d.join("sim.toml");
    fs::write(&sim_cfg, sim).unwrap();
    let o = iontrap(
        d,
        &[
            "--config",
            sim_cfg.to_str().unwrap(),
            "--kappa",
            "1e-18",
            "simulate",
            "--field",
            f,
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "simulation.json",
        "exact.csv",
        "trajectory_kappa0e0.csv",
        "populations_kappa0e0.csv",
        "fidelity_kappa1e-18.csv",
    ] {
        assert!(d.join(name).exists(), "{name} missing");
    }
    let heated = fs::read_dir(d)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("fidelity_kappa"))
        .count();
    assert_eq!(heated, 2);
}
