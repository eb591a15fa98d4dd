//! Tracking-type optimal control over the box `−f− ≤ φ ≤ f+`, solved by
//! projected gradient descent with Armijo backtracking.

use serde::Serialize;

use crate::adjoint::{reduced_gradient, solve_adjoint};
use crate::error::{Error, Result};
use crate::field::{h1_distance, l2_inner, l2_norm, same_grid, ScalarField};
use crate::regularization::Smoother;
use crate::state::{solve_state_from, ProblemData, DEFAULT_MAX_NEWTON};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerConfig {
    /// Tikhonov weight on `‖φ‖²`.
    pub lambda: f64,
    /// Smoothing width of the state equation.
    pub eps: f64,
    /// Initial trial step; also the step used by the stationarity measure.
    pub step0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_iters: usize,
    pub stat_tol: f64,
    /// Residual tolerance for every state solve.
    pub state_tol: f64,
    pub max_backtracks: usize,
    /// Use safeguarded Barzilai-Borwein trial steps instead of `step0`.
    pub spectral_steps: bool,
}

impl OptimizerConfig {
    pub fn new(lambda: f64, eps: f64) -> Self {
        Self {
            lambda,
            eps,
            step0: 1.0,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_iters: 5000,
            stat_tol: 1e-6,
            state_tol: 1e-10,
            max_backtracks: 60,
            spectral_steps: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("eps", self.eps),
            ("step0", self.step0),
            ("stat_tol", self.stat_tol),
            ("state_tol", self.state_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        for (name, v) in [("armijo_c", self.armijo_c), ("shrink", self.shrink)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in (0, 1), got {v}"),
                });
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// One line of the optimization log.
#[derive(Clone, Debug, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub tracking: f64,
    pub stationarity: f64,
    /// Accepted step leading to the next iterate; 0 on the final record.
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizeReport {
    pub phi: ScalarField,
    pub u: ScalarField,
    pub p: ScalarField,
    pub objective_trace: Vec<f64>,
    /// `½‖u − z‖²` at the final iterate.
    pub tracking: f64,
    pub stationarity: f64,
    pub iters: usize,
    pub converged: bool,
    pub log: Vec<IterRecord>,
}

/// Nodewise clamp to `[−fm, fp]`.
pub fn project_box(phi: &ScalarField, fm: &ScalarField, fp: &ScalarField) -> Result<ScalarField> {
    same_grid(phi, fm)?;
    same_grid(phi, fp)?;
    let v = phi
        .values()
        .iter()
        .zip(fm.values().iter().zip(fp.values()))
        .map(|(&x, (&lo, &hi))| x.max(-lo).min(hi))
        .collect();
    ScalarField::new(*phi.grid(), v)
}

struct Evaluation {
    objective: f64,
    tracking: f64,
    u: ScalarField,
}

fn evaluate(
    phi: &ScalarField,
    z: &ScalarField,
    cfg: &OptimizerConfig,
    data: &ProblemData,
    s: &Smoother,
    warm: Option<&ScalarField>,
) -> Result<Evaluation> {
    let d = data.with_control(phi.clone())?;
    let u = solve_state_from(&d, s, cfg.state_tol, DEFAULT_MAX_NEWTON, warm)?.u;
    let misfit = &u - z;
    let tracking = 0.5 * l2_inner(&misfit, &misfit)?;
    let objective = tracking + 0.5 * cfg.lambda * l2_inner(phi, phi)?;
    Ok(Evaluation {
        objective,
        tracking,
        u,
    })
}

/// `½‖u(φ) − z‖² + λ/2 ‖φ‖²` with `u(φ)` the regularized state.
pub fn objective(phi: &ScalarField, z: &ScalarField, cfg: &OptimizerConfig, data: &ProblemData) -> Result<f64> {
    same_grid(phi, z)?;
    let s = Smoother::new(cfg.eps)?;
    Ok(evaluate(phi, z, cfg, data, &s, None)?.objective)
}

fn stationarity(phi: &ScalarField, grad: &ScalarField, data: &ProblemData, step: f64) -> Result<f64> {
    let moved = project_box(&(phi - &(grad * step)), data.fm(), data.fp())?;
    Ok(l2_norm(&(phi - &moved)) / step)
}

/// Minimizes the regularized objective starting from `data.phi()` projected onto the box.
pub fn optimize(data: &ProblemData, z: &ScalarField, cfg: &OptimizerConfig) -> Result<OptimizeReport> {
    cfg.validate()?;
    same_grid(z, data.fp())?;
    let s = Smoother::new(cfg.eps)?;
    let mut phi = project_box(data.phi(), data.fm(), data.fp())?;
    let mut eval = evaluate(&phi, z, cfg, data, &s, None)?;
    let mut trace = vec![eval.objective];
    let mut log = Vec::new();
    let mut prev: Option<(ScalarField, ScalarField)> = None;
    let mut converged = false;
    let mut iters = 0;

    let (p, stat) = loop {
        let d = data.with_control(phi.clone())?;
        let p = solve_adjoint(&eval.u, z, &d, &s, 1e-13)?.p;
        let grad = reduced_gradient(&phi, &p, cfg.lambda)?;
        let stat = stationarity(&phi, &grad, data, cfg.step0)?;
        if stat <= cfg.stat_tol || iters >= cfg.max_iters {
            converged = stat <= cfg.stat_tol;
            break (p, stat);
        }

        let mut step = cfg.step0;
        if cfg.spectral_steps {
            if let Some((phi_old, grad_old)) = &prev {
                let sv = &phi - phi_old;
                let yv = &grad - grad_old;
                let sy = l2_inner(&sv, &yv)?;
                if sy > 0.0 {
                    step = (l2_inner(&sv, &sv)? / sy).clamp(1e-10, 1e10);
                }
            }
        }

        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial = project_box(&(&phi - &(&grad * step)), data.fm(), data.fp())?;
            let model = l2_inner(&grad, &(&trial - &phi))?;
            if !(model < 0.0) {
                // projected step collapsed onto the current iterate
                break;
            }
            let e = evaluate(&trial, z, cfg, data, &s, Some(&eval.u))?;
            // Once the predicted decrease is below the rounding level of J, any non-increase is accepted.
            let below_noise = -cfg.armijo_c * model <= 1e-14 * eval.objective.abs();
            if e.objective <= eval.objective + cfg.armijo_c * model
                || (below_noise && e.objective <= eval.objective)
            {
                accepted = Some((trial, e));
                break;
            }
            step *= cfg.shrink;
        }
        let Some((next, e)) = accepted else {
            break (p, stat);
        };
        log.push(IterRecord {
            iter: iters,
            objective: eval.objective,
            tracking: eval.tracking,
            stationarity: stat,
            step,
        });
        prev = Some((phi, grad));
        phi = next;
        eval = e;
        trace.push(eval.objective);
        iters += 1;
    };
    log.push(IterRecord {
        iter: iters,
        objective: eval.objective,
        tracking: eval.tracking,
        stationarity: stat,
        step: 0.0,
    });
    Ok(OptimizeReport {
        phi,
        u: eval.u,
        p,
        objective_trace: trace,
        tracking: eval.tracking,
        stationarity: stat,
        iters,
        converged,
        log,
    })
}

/// Distance of `φ` from the projection `P(−p/λ)` that characterizes stationary controls.
pub fn optimality_residual(
    phi: &ScalarField,
    u: &ScalarField,
    p: &ScalarField,
    data: &ProblemData,
    lambda: f64,
) -> Result<f64> {
    same_grid(phi, u)?;
    same_grid(phi, p)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must be positive, got {lambda}"),
        });
    }
    let target = project_box(&(p * (-1.0 / lambda)), data.fm(), data.fp())?;
    Ok(l2_norm(&(phi - &target)))
}

#[derive(Clone, Debug)]
pub struct EpsilonPath {
    pub eps: Vec<f64>,
    pub reports: Vec<OptimizeReport>,
    /// `‖φ_k − φ_{k+1}‖_L2` for consecutive entries.
    pub phi_distances: Vec<f64>,
    /// `‖u_k − u_{k+1}‖_H1` for consecutive entries.
    pub u_distances: Vec<f64>,
}

/// Runs [`optimize`] for each ε (strictly decreasing), warm-starting from the previous control.
pub fn epsilon_path(
    data: &ProblemData,
    z: &ScalarField,
    cfg: &OptimizerConfig,
    eps_list: &[f64],
) -> Result<EpsilonPath> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "must be non-empty and strictly decreasing".into(),
        });
    }
    let mut reports: Vec<OptimizeReport> = Vec::with_capacity(eps_list.len());
    let mut current = data.clone();
    for &eps in eps_list {
        let run_cfg = OptimizerConfig { eps, ..cfg.clone() };
        let report = optimize(&current, z, &run_cfg)?;
        current = data.with_control(report.phi.clone())?;
        reports.push(report);
    }
    let mut phi_distances = Vec::new();
    let mut u_distances = Vec::new();
    for w in reports.windows(2) {
        phi_distances.push(l2_norm(&(&w[0].phi - &w[1].phi)));
        u_distances.push(h1_distance(&w[0].u, &w[1].u)?);
    }
    Ok(EpsilonPath {
        eps: eps_list.to_vec(),
        reports,
        phi_distances,
        u_distances,
    })
}
