//! End-to-end checks of the command-line driver: artifact shapes, exit
//! codes, validation diagnostics, and byte-level determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pnfield"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const ISO_HEADER: &str = "
[kernel]
variant = cubic
mu = 12.566370614359172   # 4 pi: unit line tension for unit slips
nu = 0.0

[domain]
kind = torus
side1 = 1.0
side2 = 1.0
";

#[test]
fn psi_table_isotropic_units_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = psi-table
b_set = units
b_max = 1
k_directions = 32
"
        ),
    );
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["psi-table", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(["--seed", "7"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv1 = std::fs::read(out1.join("psi_table.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("psi_table.csv")).unwrap();
    assert_eq!(csv1, csv2, "identical config + seed must be byte-identical");

    let text = String::from_utf8(csv1).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 5); // b1, b2, theta, psi, psi_rel_upper
        let psi: f64 = cols[3].parse().unwrap();
        assert!(
            (psi - 1.0).abs() < 1e-10,
            "isotropic unit-slip psi must be 1.0, got {psi}"
        );
        rows += 1;
    }
    assert_eq!(rows, 4 * 32);
}

#[test]
fn validate_reports_diagnostics_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(
        &cfg,
        "
[kernel]
variant = cubic
mu = 1.0
nu = 0.6

[experiment]
kind = sweep-gamma
geometry = missing.pnp
rho = 0.01
alpha = 0.7
",
    );
    let output = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("alpha outside (0, 1/2)"), "{stdout}");
    assert!(stdout.contains("kernel not elliptic"), "{stdout}");

    // A clean configuration validates silently.
    let good = dir.path().join("good.cfg");
    write(
        &good,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = psi-table
b_max = 1
k_directions = 32
"
        ),
    );
    let status = bin()
        .args(["validate", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("out2"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn empty_sweep_range_fails_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let pnp = dir.path().join("strip.pnp");
    let cfg = dir.path().join("sweep.cfg");
    // A valid geometry so only the eps range is at fault.
    let pf = pnfield::fields::PolyhedralField::horizontal_strip(
        pnfield::fields::DomainSpec::torus(1.0, 1.0).unwrap(),
        1.0,
        0.25,
        0.75,
        vec![1, 0],
    )
    .unwrap();
    pf.save(&pnp).unwrap();
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = sweep-linetension
geometry = strip.pnp
p_min = 8
p_max = 6
"
        ),
    );
    let output = bin()
        .args(["sweep-linetension", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn subcommand_config_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = psi-table
"
        ),
    );
    let output = bin()
        .args(["envelope", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn energy_experiment_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let field_path = dir.path().join("u.pnf");
    let domain = pnfield::fields::DomainSpec::torus(1.0, 1.0).unwrap();
    let gf = pnfield::fields::GridField::constant(domain, [16, 16], &[0.5, 0.0]).unwrap();
    gf.save(&field_path).unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = energy
field = u.pnf
eps = 0.1
method = convolution
"
        ),
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["energy", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("energy.json")).unwrap())
            .unwrap();
    // Constant half-integer field: W = 1/4 over the unit area at eps = 0.1.
    assert!((report["w_term"].as_f64().unwrap() - 2.5).abs() < 1e-12);
    assert_eq!(report["nonlocal_term"].as_f64().unwrap(), 0.0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn small_gamma_sweep_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let pnp = dir.path().join("strip.pnp");
    let pf = pnfield::fields::PolyhedralField::horizontal_strip(
        pnfield::fields::DomainSpec::torus(1.0, 1.0).unwrap(),
        1.0,
        0.25,
        0.75,
        vec![1, 0],
    )
    .unwrap();
    pf.save(&pnp).unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = sweep-gamma
geometry = strip.pnp
p_min = 4
p_max = 6
rho = 0.01
alpha = 0.3
zeta = 0.0 0.8
infinity_dims = 64
infinity_quad = 128
"
        ),
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep-gamma", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap())
            .unwrap();
    assert!(summary["target"].as_f64().unwrap() > 0.0);
}

#[test]
fn envelope_experiment_reports_a_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = envelope
b_max = 1
k_directions = 8
matrix = 0.0 1.0 0.0 0.0
"
        ),
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["envelope", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("g_report.json")).unwrap())
            .unwrap();
    // e1 (x) (0,1) is itself an atom of unit cost for this kernel.
    let g = report["g"].as_f64().unwrap();
    assert!((g - 1.0).abs() < 1e-9, "g = {g}");
    let decomp = std::fs::read_to_string(out.join("decomposition.csv")).unwrap();
    assert!(decomp.lines().next().unwrap().starts_with("lambda,b1,b2,theta,cost"));
    assert!(decomp.lines().count() >= 2);
}

#[test]
fn minimize_experiment_descends_to_the_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let field_path = dir.path().join("u.pnf");
    let domain = pnfield::fields::DomainSpec::torus(1.0, 1.0).unwrap();
    let gf = pnfield::fields::GridField::constant(domain, [8, 8], &[0.4, 0.0]).unwrap();
    gf.save(&field_path).unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = minimize
field = u.pnf
eps = 0.1
max_iter = 200
grad_tol = 1e-10
"
        ),
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["minimize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("minimize.json")).unwrap())
            .unwrap();
    assert!(report["energy"]["total"].as_f64().unwrap() < 1e-10);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap() == "iteration,energy,grad_norm,step");
    let minimized =
        pnfield::fields::GridField::load(out.join("minimized.pnf")).unwrap();
    assert!(minimized.values().iter().all(|v| v.abs() < 1e-5));
}

#[test]
fn linetension_sweep_writes_fit_columns() {
    let dir = tempfile::tempdir().unwrap();
    let pnp = dir.path().join("strip.pnp");
    let pf = pnfield::fields::PolyhedralField::horizontal_strip(
        pnfield::fields::DomainSpec::torus(1.0, 1.0).unwrap(),
        1.0,
        0.25,
        0.75,
        vec![1, 0],
    )
    .unwrap();
    pf.save(&pnp).unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(
        &cfg,
        &format!(
            "{ISO_HEADER}
[experiment]
kind = sweep-linetension
geometry = strip.pnp
p_min = 4
p_max = 7
"
        ),
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep-linetension", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 4);
    let fit_a: f64 = lines[4].split(',').nth(7).unwrap().parse().unwrap();
    // Isotropic strip target is 2.0; the coarse-range fit lands near it.
    assert!((fit_a - 2.0).abs() < 0.5, "fit_a = {fit_a}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap())
            .unwrap();
    assert!((summary["target"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}
