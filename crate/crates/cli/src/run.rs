//! Command dispatch and artifact writing.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use membrane_core::io::{field_to_csv_string, read_field_csv};
use membrane_core::{
    epsilon_path, free_boundary, optimality_residual, optimize, project_box, run_all, solve_one_phase,
    solve_state_from, BoundaryData, Grid2D, OptimizeReport, OptimizerConfig, ProblemData, ScalarField, Smoother,
    VerifyConfig,
};

use crate::config::{Command, Expression, FieldSource, Model, RunConfig};

/// Result of a run; `success` is false when a verification check failed.
#[derive(Debug)]
pub struct Outcome {
    pub success: bool,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path);
        Ok(())
    }

    fn field(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        self.text(name, &field_to_csv_string(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(v)?;
        body.push('\n');
        self.text(name, &body)
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut body = String::new();
        for r in rows {
            body.push_str(&serde_json::to_string(r)?);
            body.push('\n');
        }
        self.text(name, &body)
    }
}

fn nonnegative_field(expr: &Expression, grid: &Grid2D, key: &str) -> Result<ScalarField> {
    let f = expr.field(grid).with_context(|| format!("evaluating `{key}`"))?;
    if let Some((k, v)) = f.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        bail!(
            "key `{key}`: negative value {v} at node ({}, {})",
            k % grid.nx(),
            k / grid.nx()
        );
    }
    Ok(f)
}

fn load_field(src: &FieldSource, grid: &Grid2D, key: &str) -> Result<ScalarField> {
    match src {
        FieldSource::Expr(e) => e.field(grid).with_context(|| format!("evaluating `{key}`")),
        FieldSource::File(path) => {
            let file = fs::File::open(path).with_context(|| format!("key `{key}`: opening {}", path.display()))?;
            let f = read_field_csv(BufReader::new(file)).with_context(|| format!("key `{key}`: {}", path.display()))?;
            if f.grid() != grid {
                bail!("key `{key}`: grid in {} does not match the configured grid", path.display());
            }
            Ok(f)
        }
    }
}

fn build_problem(cfg: &RunConfig, warnings: &mut Vec<String>) -> Result<ProblemData> {
    let grid = cfg.grid.build()?;
    let expect = |e: &Option<Expression>, key: &str| e.clone().with_context(|| format!("key `{key}` is required"));
    let fp = nonnegative_field(&expect(&cfg.f_plus, "f_plus")?, &grid, "f_plus")?;
    let fm = nonnegative_field(&expect(&cfg.f_minus, "f_minus")?, &grid, "f_minus")?;
    let g: BoundaryData = expect(&cfg.g, "g")?.boundary(&grid).context("evaluating `g`")?;
    if !g.sign_changing() {
        match cfg.model {
            Model::TwoPhase => bail!("key `g`: boundary data must change sign for two-phase runs"),
            Model::OnePhase => warnings.push("boundary data `g` does not change sign".into()),
        }
    }
    let phi = load_field(&cfg.phi, &grid, "phi")?;
    Ok(ProblemData::new(fp, fm, g, phi)?)
}

fn optimizer_config(cfg: &RunConfig) -> Result<OptimizerConfig> {
    let oc = OptimizerConfig {
        lambda: cfg.lambda.context("key `lambda` is required")?,
        eps: cfg.eps,
        step0: cfg.step0,
        armijo_c: cfg.armijo_c,
        shrink: cfg.shrink,
        max_iters: cfg.max_iters,
        stat_tol: cfg.stat_tol,
        state_tol: cfg.tol,
        max_backtracks: cfg.max_backtracks,
        spectral_steps: cfg.spectral_steps,
    };
    oc.validate()?;
    Ok(oc)
}

fn run_state(cfg: &RunConfig, w: &mut Writer, warnings: &mut Vec<String>) -> Result<()> {
    let data = build_problem(cfg, warnings)?;
    let s = Smoother::new(cfg.eps)?;
    let sol = match cfg.model {
        Model::TwoPhase => solve_state_from(&data, &s, cfg.tol, cfg.max_newton, None)?,
        Model::OnePhase => solve_one_phase(&data, &s, cfg.tol)?,
    };
    let fb = free_boundary(&sol.u, cfg.utol, cfg.gtol);
    use membrane_core::NodeLabel::*;
    w.field("u.csv", &sol.u)?;
    w.text("free_boundary.csv", &fb.to_csv_string())?;
    w.json(
        "diagnostics.json",
        &json!({
            "model": match cfg.model { Model::TwoPhase => "two-phase", Model::OnePhase => "one-phase" },
            "eps": cfg.eps,
            "newton_iters": sol.newton_iters,
            "final_residual": sol.final_residual,
            "energy": sol.energy,
            "energy_trace": sol.energy_trace,
            "u_min": sol.u.min(),
            "u_max": sol.u.max(),
            "labels": { "P": fb.count(P), "N": fb.count(N), "Z": fb.count(Z), "G1": fb.count(G1), "G2": fb.count(G2) },
            "warnings": warnings,
        }),
    )
}

fn write_report(w: &mut Writer, prefix: &str, rep: &OptimizeReport, data: &ProblemData, lambda: f64) -> Result<f64> {
    w.field(&format!("{prefix}phi.csv"), &rep.phi)?;
    w.field(&format!("{prefix}u.csv"), &rep.u)?;
    w.field(&format!("{prefix}p.csv"), &rep.p)?;
    w.jsonl(&format!("{prefix}log.jsonl"), &rep.log)?;
    optimality_residual(&rep.phi, &rep.u, &rep.p, data, lambda).map_err(Into::into)
}

fn run_optimize(cfg: &RunConfig, w: &mut Writer, warnings: &mut Vec<String>) -> Result<()> {
    let data = build_problem(cfg, warnings)?;
    let z = load_field(cfg.z.as_ref().context("key `z` is required")?, data.grid(), "z")?;
    let oc = optimizer_config(cfg)?;
    let rep = optimize(&data, &z, &oc)?;
    let optres = write_report(w, "", &rep, &data, oc.lambda)?;
    w.json(
        "summary.json",
        &json!({
            "converged": rep.converged,
            "iters": rep.iters,
            "objective": rep.objective_trace.last(),
            "tracking": rep.tracking,
            "stationarity": rep.stationarity,
            "optimality_residual": optres,
            "config": oc,
        }),
    )?;
    if !rep.converged {
        warnings.push(format!("optimizer stopped after {} iterations without reaching stat_tol", rep.iters));
    }
    Ok(())
}

fn run_sweep(cfg: &RunConfig, w: &mut Writer, warnings: &mut Vec<String>) -> Result<()> {
    let data = build_problem(cfg, warnings)?;
    let z = load_field(cfg.z.as_ref().context("key `z` is required")?, data.grid(), "z")?;
    let oc = optimizer_config(cfg)?;
    let path = epsilon_path(&data, &z, &oc, &cfg.eps_list)?;
    let mut summary = Vec::new();
    for (k, (eps, rep)) in path.eps.iter().zip(&path.reports).enumerate() {
        let optres = write_report(w, &format!("eps_{k:02}/"), rep, &data, oc.lambda)?;
        summary.push(json!({
            "index": k,
            "eps": eps,
            "converged": rep.converged,
            "iters": rep.iters,
            "tracking": rep.tracking,
            "stationarity": rep.stationarity,
            "optimality_residual": optres,
        }));
        if !rep.converged {
            warnings.push(format!("eps = {eps}: optimizer did not reach stat_tol"));
        }
    }
    let mut csv = String::from("eps_from,eps_to,phi_l2,u_h1\n");
    for k in 0..path.phi_distances.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            path.eps[k], path.eps[k + 1], path.phi_distances[k], path.u_distances[k]
        ));
    }
    w.text("distances.csv", &csv)?;
    w.jsonl("runs.jsonl", &summary)
}

fn run_make_target(cfg: &RunConfig, w: &mut Writer, warnings: &mut Vec<String>) -> Result<()> {
    let data = build_problem(cfg, warnings)?;
    let target = cfg.phi_target.as_ref().context("key `phi_target` is required")?;
    let phi = target.field(data.grid()).context("evaluating `phi_target`")?;
    let violation = data.admissibility_violation(&phi);
    if violation > 0.0 {
        warnings.push(format!("phi_target leaves the box by {violation:e}; it is projected"));
    }
    let phi = project_box(&phi, data.fm(), data.fp())?;
    let sol = solve_state_from(
        &data.with_control(phi.clone())?,
        &Smoother::new(cfg.eps)?,
        cfg.tol,
        cfg.max_newton,
        None,
    )?;
    w.field("z.csv", &sol.u)?;
    w.field("phi_target.csv", &phi)?;
    w.json(
        "diagnostics.json",
        &json!({
            "eps": cfg.eps,
            "newton_iters": sol.newton_iters,
            "final_residual": sol.final_residual,
            "warnings": warnings,
        }),
    )
}

fn run_verify(cfg: &RunConfig, w: &mut Writer) -> Result<bool> {
    if cfg.grid.nx != cfg.grid.ny {
        bail!("key `ny`: verify runs on a square grid (nx = ny)");
    }
    let vc = VerifyConfig {
        seed: cfg.seed,
        n: cfg.grid.nx,
        pairs: cfg.pairs,
        eps: cfg.eps,
        state_tol: cfg.tol,
        tol: cfg.check_tol,
        gradient_instances: cfg.gradient_instances,
        directions: cfg.directions,
        fd_eps: cfg.fd_eps,
        eps_list: if cfg.eps_list.is_empty() {
            VerifyConfig::default().eps_list
        } else {
            cfg.eps_list.clone()
        },
    };
    let reports = run_all(&vc)?;
    w.jsonl("checks.jsonl", &reports)?;
    Ok(reports.iter().all(|r| r.passed))
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Executes `cfg`, writing artifacts and `manifest.json` into `out`.
pub fn run(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let mut w = Writer::new(out)?;
    let mut warnings = Vec::new();
    let success = match cfg.command {
        Command::State => run_state(cfg, &mut w, &mut warnings).map(|_| true),
        Command::Optimize => run_optimize(cfg, &mut w, &mut warnings).map(|_| true),
        Command::SweepEps => run_sweep(cfg, &mut w, &mut warnings).map(|_| true),
        Command::MakeTarget => run_make_target(cfg, &mut w, &mut warnings).map(|_| true),
        Command::Verify => run_verify(cfg, &mut w),
    }?;
    let elapsed = start.elapsed();
    let files: Vec<String> = w
        .outputs
        .iter()
        .filter_map(|p| p.strip_prefix(out).ok())
        .map(|p| p.display().to_string())
        .collect();
    let manifest = json!({
        "tool": "membrane-opt",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": membrane_core::VERSION,
        "command": cfg.command.as_str(),
        "config_sha256": sha256_hex(config_text),
        "seed": cfg.seed,
        "success": success,
        "outputs": files,
        "warnings": warnings,
        "timings": { "total_seconds": elapsed.as_secs_f64() },
    });
    let mut file = fs::File::create(out.join("manifest.json")).context("writing manifest.json")?;
    writeln!(file, "{}", serde_json::to_string_pretty(&manifest)?)?;
    w.outputs.push(out.join("manifest.json"));
    Ok(Outcome {
        success,
        outputs: w.outputs,
        warnings,
    })
}
