//! Experiment orchestration: build inputs from a configuration, call the
//! library, and emit CSV/JSON artifacts plus a manifest. All arithmetic
//! happens in the library modules; this layer only formats.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{kernel_from_config, ExperimentKind, RawConfig};
use crate::energy::{
    energy_eps, energy_gradient, minimize, EnergyMethod, MinimizeOptions,
};
use crate::envelope::{build_atoms, certified_bounds, g_eval, save_decomposition};
use crate::error::{Error, Result};
use crate::fields::{average_shift_limit, GridField, PolyhedralField};
use crate::linetension::{
    build_linetension_table, psi_line, slip_cube, LineTensionQuery, RelaxationOptions,
};
use crate::recovery::{
    choose_zeta, scaling_sweep, DimsPolicy, RecoveryGeometry, RecoveryParams, SweepBuilder,
};

pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
}

/// Execute the experiment described by `cfg`, writing artifacts into
/// `out_dir`. The subcommand kind must match the configured kind.
pub fn run(cfg: &RawConfig, kind: ExperimentKind, out_dir: &Path, seed: u64) -> Result<RunOutcome> {
    let declared = ExperimentKind::parse(cfg.require("experiment", "kind")?)?;
    if declared != kind {
        return Err(Error::BadConfig(format!(
            "configured experiment '{}' does not match subcommand '{}'",
            declared.name(),
            kind.name()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let mut artifacts = match kind {
        ExperimentKind::PsiTable => run_psi_table(cfg, out_dir)?,
        ExperimentKind::Envelope => run_envelope(cfg, out_dir)?,
        ExperimentKind::Energy => run_energy(cfg, out_dir)?,
        ExperimentKind::Minimize => run_minimize(cfg, out_dir)?,
        ExperimentKind::SweepLineTension => run_sweep_linetension(cfg, out_dir)?,
        ExperimentKind::SweepGamma => run_sweep_gamma(cfg, out_dir)?,
    };
    let manifest = serde_json::json!({
        "experiment": kind.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "config": cfg.text,
        "artifacts": artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    artifacts.push(manifest_path);
    Ok(RunOutcome { artifacts })
}

fn relaxation_options(cfg: &RawConfig, b_max: i64, k: usize) -> Result<RelaxationOptions> {
    Ok(RelaxationOptions {
        b_max: cfg.parse_or("experiment", "relax_b_max", b_max)?,
        n_directions: k,
        max_iterations: cfg.parse_or("experiment", "max_iterations", 200)?,
        tolerance: cfg.parse_or("experiment", "tolerance", 1e-12)?,
        quad_nodes: cfg.parse_or("experiment", "quad_nodes", 8192)?,
    })
}

fn slip_set(cfg: &RawConfig, n_comp: usize, b_max: i64) -> Result<Vec<Vec<i64>>> {
    match cfg.parse_or::<String>("experiment", "b_set", "cube".into())?.as_str() {
        "cube" => Ok(slip_cube(n_comp, b_max)),
        "units" => {
            let mut set = Vec::new();
            for c in 0..n_comp {
                for s in [-1i64, 1] {
                    let mut b = vec![0i64; n_comp];
                    b[c] = s;
                    set.push(b);
                }
            }
            Ok(set)
        }
        other => Err(Error::BadConfig(format!("unknown b_set '{other}'"))),
    }
}

fn run_psi_table(cfg: &RawConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let kernel = kernel_from_config(cfg)?;
    let b_max: i64 = cfg.parse_or("experiment", "b_max", 1)?;
    let k: usize = cfg.parse_or("experiment", "k_directions", 32)?;
    let opts = relaxation_options(cfg, b_max, k)?;
    let b_set = slip_set(cfg, kernel.n_components(), b_max)?;
    let table = build_linetension_table(&kernel, &b_set, k, &opts)?;
    let path = out.join("psi_table.csv");
    table.save_csv(&path)?;
    Ok(vec![path])
}

fn run_envelope(cfg: &RawConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let kernel = kernel_from_config(cfg)?;
    let b_max: i64 = cfg.parse_or("experiment", "b_max", 1)?;
    let k: usize = cfg.parse_or("experiment", "k_directions", 32)?;
    let opts = relaxation_options(cfg, b_max, k)?;
    let table = build_linetension_table(
        &kernel,
        &slip_cube(kernel.n_components(), b_max),
        k,
        &opts,
    )?;
    let atoms = build_atoms(&table, b_max, k)?;
    let matrix = cfg.vector("experiment", "matrix")?;
    let eval = g_eval(&atoms, &matrix)?;
    let (lo, hi) = certified_bounds(&atoms);
    let fro = matrix.iter().map(|v| v * v).sum::<f64>().sqrt();
    let report = serde_json::json!({
        "matrix": matrix,
        "g": eval.value,
        "k_directions": eval.k_directions,
        "support_size": eval.support.len(),
        "lower_bound": lo * fro,
        "upper_bound": hi * fro,
        "lambda_star": table.lambda_star,
    });
    let report_path = out.join("g_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let decomp_path = out.join("decomposition.csv");
    save_decomposition(&atoms, &eval, &decomp_path)?;
    let table_path = out.join("psi_table.csv");
    table.save_csv(&table_path)?;
    Ok(vec![report_path, decomp_path, table_path])
}

fn energy_method(cfg: &RawConfig) -> Result<EnergyMethod> {
    match cfg.parse_or::<String>("experiment", "method", "convolution".into())?.as_str() {
        "direct" => Ok(EnergyMethod::Direct),
        "convolution" => Ok(EnergyMethod::Convolution),
        other => Err(Error::BadConfig(format!("unknown energy method '{other}'"))),
    }
}

fn run_energy(cfg: &RawConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let kernel = kernel_from_config(cfg)?;
    let field = GridField::load(cfg.path("experiment", "field")?)?;
    let eps: f64 = cfg.parse_value("experiment", "eps")?;
    let breakdown = energy_eps(&field, &kernel, eps, energy_method(cfg)?)?;
    let path = out.join("energy.json");
    std::fs::write(&path, serde_json::to_string_pretty(&breakdown.to_json())?)?;
    Ok(vec![path])
}

fn run_minimize(cfg: &RawConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let kernel = kernel_from_config(cfg)?;
    let field = GridField::load(cfg.path("experiment", "field")?)?;
    let eps: f64 = cfg.parse_value("experiment", "eps")?;
    let opts = MinimizeOptions {
        max_iterations: cfg.parse_or("experiment", "max_iter", 500)?,
        grad_tol: cfg.parse_or("experiment", "grad_tol", 1e-8)?,
        initial_step: cfg.parse_or("experiment", "initial_step", 1.0)?,
        ..Default::default()
    };
    let (minimized, trace) = minimize(&field, &kernel, eps, &opts)?;
    let field_path = out.join("minimized.pnf");
    minimized.save(&field_path)?;
    let trace_path = out.join("trace.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&trace_path)?);
    writeln!(w, "iteration,energy,grad_norm,step")?;
    for row in &trace {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e}",
            row.iteration, row.energy, row.grad_norm, row.step
        )?;
    }
    drop(w);
    let final_energy = energy_eps(&minimized, &kernel, eps, EnergyMethod::Convolution)?;
    let grad = energy_gradient(&minimized, &kernel, eps)?;
    let grad_norm = grad.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let report = serde_json::json!({
        "energy": final_energy.to_json(),
        "grad_norm": grad_norm,
        "iterations": trace.len(),
    });
    let report_path = out.join("minimize.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    Ok(vec![field_path, trace_path, report_path])
}

fn eps_list(cfg: &RawConfig) -> Result<Vec<f64>> {
    let p_min: i32 = cfg.parse_or("experiment", "p_min", 6)?;
    let p_max: i32 = cfg.parse_or("experiment", "p_max", 10)?;
    if p_min > p_max {
        return Err(Error::BadConfig(format!(
            "empty eps list: p_min = {p_min} > p_max = {p_max}"
        )));
    }
    Ok((p_min..=p_max).map(|p| (2.0f64).powi(-p)).collect())
}

fn dims_policy(cfg: &RawConfig) -> Result<DimsPolicy> {
    let factor: f64 = cfg.parse_or("experiment", "dims_factor", 4.0)?;
    let max_dims = match cfg.get("experiment", "max_dims") {
        Some(_) => Some(cfg.parse_value::<usize>("experiment", "max_dims")?),
        None => None,
    };
    Ok(DimsPolicy { factor, max_dims })
}

/// Line-tension target: the psi-weighted length of the jump set, at exact
/// segment normals.
fn line_tension_target(pf: &PolyhedralField, kernel: &crate::kernel::AnisotropyKernel) -> Result<f64> {
    let mut target = 0.0;
    for seg in pf.segments() {
        let q = LineTensionQuery::new(seg.jump.clone(), seg.normal)?;
        target += seg.length() * pf.sigma() * psi_line(kernel, &q)?;
    }
    Ok(target)
}

fn run_sweep_linetension(cfg: &RawConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let kernel = kernel_from_config(cfg)?;
    let pf = PolyhedralField::load(cfg.path("experiment", "geometry")?)?;
    let eps = eps_list(cfg)?;
    let target = line_tension_target(&pf, &kernel)?;
    let sweep = scaling_sweep(
        &pf,
        SweepBuilder::MollifiedJump,
        &eps,
        &kernel,
        dims_policy(cfg)?,
        target,
    )?;
    let path = out.join("sweep.csv");
    sweep.save_csv(&path)?;
    let summary = serde_json::json!({
        "target": target,
        "points": sweep.records.len(),
        "fit_a": sweep.fit.map(|f| f.a),
        "fit_b": sweep.fit.map(|f| f.b),
        "fit_residual": sweep.fit.map(|f| f.residual),
    });
    let summary_path = out.join("sweep.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(vec![path, summary_path])
}

fn run_sweep_gamma(cfg: &RawConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let kernel = kernel_from_config(cfg)?;
    let pf = PolyhedralField::load(cfg.path("experiment", "geometry")?)?;
    let eps = eps_list(cfg)?;
    let rho: f64 = cfg.parse_value("experiment", "rho")?;
    let alpha: f64 = cfg.parse_value("experiment", "alpha")?;
    let margin: f64 = cfg.parse_or("experiment", "margin", 0.0)?;

    // Shift direction: configured, or chosen by the averaging argument at
    // the coarsest sweep point.
    let zeta = match cfg.get("experiment", "zeta") {
        Some(_) => {
            let v = cfg.vector("experiment", "zeta")?;
            if v.len() != 2 {
                return Err(Error::BadConfig("zeta needs two components".into()));
            }
            [v[0], v[1]]
        }
        None => {
            let candidates: usize = cfg.parse_or("experiment", "zeta_candidates", 16)?;
            let probe_eps = *eps.first().ok_or_else(|| {
                Error::BadConfig("sweep needs at least one eps".into())
            })?;
            let geometry = RecoveryGeometry { rho, alpha, zeta: [0.0, 0.0], margin };
            let params = RecoveryParams { eps: probe_eps, geometry };
            let probe_dims = DimsPolicy { factor: 4.0, max_dims: Some(256) }
                .dims_for(pf.domain().side, probe_eps);
            choose_zeta(&pf, &params, &kernel, probe_dims, candidates)?.zeta
        }
    };
    let geometry = RecoveryGeometry { rho, alpha, zeta, margin };

    // Limit target: line-tension part plus the long-range energy of the
    // running-average field.
    let lt_part = line_tension_target(&pf, &kernel)?;
    let inf_dims: usize = cfg.parse_or("experiment", "infinity_dims", 256)?;
    let inf_quad: usize = cfg.parse_or("experiment", "infinity_quad", 512)?;
    let inf = average_shift_limit(&pf, zeta, rho, alpha, inf_quad)?;
    let inf_grid = inf.rasterize([inf_dims, inf_dims])?;
    let nonlocal_limit = if pf.domain().is_torus() {
        crate::energy::nonlocal_convolution(&inf_grid, &kernel)?
    } else {
        crate::energy::nonlocal_direct(&inf_grid, &kernel)?
    };
    let target = lt_part + nonlocal_limit;

    let sweep = scaling_sweep(
        &pf,
        SweepBuilder::Recovery(geometry),
        &eps,
        &kernel,
        dims_policy(cfg)?,
        target,
    )?;
    let path = out.join("sweep.csv");
    sweep.save_csv(&path)?;
    let summary = serde_json::json!({
        "zeta": zeta,
        "line_tension_part": lt_part,
        "nonlocal_limit_part": nonlocal_limit,
        "target": target,
        "points": sweep.records.len(),
        "fit_a": sweep.fit.map(|f| f.a),
        "fit_residual": sweep.fit.map(|f| f.residual),
    });
    let summary_path = out.join("sweep.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(vec![path, summary_path])
}
