//! Property checks of the control-to-state map and the reduced gradient.
//!
//! Each check solves a handful of state problems and compares the outcome with
//! an inequality or an independent difference-quotient oracle. `run_all`
//! assembles seeded random instances and runs every check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adjoint::{reduced_gradient, solve_adjoint, solve_sensitivity};
use crate::control::{objective, project_box, OptimizerConfig};
use crate::error::{Error, Result};
use crate::field::{
    h1_distance, h1_seminorm_sq, l2_inner, l2_norm, smallest_eigenvalue, solve_spd, BoundaryData, Grid2D,
    ScalarField,
};
use crate::regularization::Smoother;
use crate::state::{solve_state_from, ProblemData, DEFAULT_MAX_NEWTON};

/// Outcome of one check (or one aggregated suite).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Largest measured violation; compared against `tolerance`.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub instances: usize,
    /// Smoothing width used by the state solves.
    pub eps: f64,
    /// Raw per-instance measurements (distances, errors, ratios) where meaningful.
    pub series: Vec<f64>,
    pub details: String,
}

impl CheckReport {
    fn new(name: &str, worst_violation: f64, tolerance: f64, eps: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: worst_violation <= tolerance,
            worst_violation,
            tolerance,
            instances: 1,
            eps,
            series: Vec::new(),
            details: String::new(),
        }
    }

    /// Combines reports of one kind into a suite report.
    pub fn aggregate(name: &str, reports: &[CheckReport]) -> CheckReport {
        let worst = reports.iter().map(|r| r.worst_violation).fold(0.0, f64::max);
        let failed = reports.iter().filter(|r| !r.passed).count();
        CheckReport {
            name: name.to_string(),
            passed: failed == 0,
            worst_violation: worst,
            tolerance: reports.first().map_or(0.0, |r| r.tolerance),
            instances: reports.iter().map(|r| r.instances).sum(),
            eps: reports.first().map_or(0.0, |r| r.eps),
            series: reports.iter().flat_map(|r| r.series.iter().copied()).collect(),
            details: format!("{failed} of {} instances failed", reports.len()),
        }
    }
}

/// Solver settings shared by the checks.
#[derive(Clone, Copy, Debug)]
pub struct CheckContext {
    pub smoother: Smoother,
    /// Residual tolerance of every state solve.
    pub state_tol: f64,
}

impl CheckContext {
    pub fn new(eps: f64, state_tol: f64) -> Result<Self> {
        Ok(Self {
            smoother: Smoother::new(eps)?,
            state_tol,
        })
    }

    fn state(&self, data: &ProblemData, phi: &ScalarField, warm: Option<&ScalarField>) -> Result<ScalarField> {
        let d = data.with_control(phi.clone())?;
        Ok(solve_state_from(&d, &self.smoother, self.state_tol, DEFAULT_MAX_NEWTON, warm)?.u)
    }
}

fn require_ordered(phi1: &ScalarField, phi2: &ScalarField) -> Result<()> {
    let gap = phi1.zip_map(phi2, |a, b| a - b)?.min();
    if gap < 0.0 {
        return Err(Error::InvalidParameter {
            name: "phi1",
            reason: format!("must dominate phi2 nodewise (min gap {gap:e})"),
        });
    }
    Ok(())
}

/// `φ1 ≥ φ2` implies `u1 ≥ u2`; passes when `min(u1 − u2) ≥ −tol`.
pub fn check_monotonicity(
    data: &ProblemData,
    phi1: &ScalarField,
    phi2: &ScalarField,
    ctx: &CheckContext,
    tol: f64,
) -> Result<CheckReport> {
    require_ordered(phi1, phi2)?;
    let u1 = ctx.state(data, phi1, None)?;
    let u2 = ctx.state(data, phi2, Some(&u1))?;
    let gap = (&u1 - &u2).min();
    let mut r = CheckReport::new("monotonicity", (-gap).max(0.0), tol, ctx.smoother.eps());
    r.series = vec![gap];
    r.details = format!("min(u1 - u2) = {gap:e}");
    Ok(r)
}

/// Solution of `Δ_h v = 1` with zero boundary values (so `v ≤ 0`).
pub fn unit_source_potential(grid: &Grid2D) -> Result<ScalarField> {
    solve_spd(
        &ScalarField::zeros(*grid),
        &ScalarField::constant(*grid, -1.0),
        &BoundaryData::zeros(*grid),
        1e-13,
        10 * grid.len() + 1000,
    )
}

/// `u1 + M v ≤ u2 ≤ u1` with `M = max(φ1 − φ2)` and `Δv = 1`.
pub fn check_sandwich(
    data: &ProblemData,
    phi1: &ScalarField,
    phi2: &ScalarField,
    ctx: &CheckContext,
    tol: f64,
) -> Result<CheckReport> {
    require_ordered(phi1, phi2)?;
    let grid = *data.grid();
    let diff = phi1 - phi2;
    let m = diff.interior_max().max(0.0);
    let v = unit_source_potential(&grid)?;
    let u1 = ctx.state(data, phi1, None)?;
    let u2 = ctx.state(data, phi2, Some(&u1))?;
    let lower = (&(&u1 + &(&v * m)) - &u2).max();
    let upper = (&u2 - &u1).max();
    let worst = lower.max(upper).max(0.0);
    let mut r = CheckReport::new("sandwich", worst, tol, ctx.smoother.eps());
    r.series = vec![lower, upper];
    r.details = format!("M = {m:e}, max(u1 + Mv - u2) = {lower:e}, max(u2 - u1) = {upper:e}");
    Ok(r)
}

/// `|u1 − u2|_H1 ≤ λ1^{-1/2} ‖φ1 − φ2‖_L2 + tol`.
pub fn check_lipschitz(
    data: &ProblemData,
    phi1: &ScalarField,
    phi2: &ScalarField,
    ctx: &CheckContext,
    lambda1: f64,
    tol: f64,
) -> Result<CheckReport> {
    let u1 = ctx.state(data, phi1, None)?;
    let u2 = ctx.state(data, phi2, Some(&u1))?;
    let lhs = h1_seminorm_sq(&(&u1 - &u2)).sqrt();
    let dphi = l2_norm(&(phi1 - phi2));
    let bound = dphi / lambda1.sqrt();
    let mut r = CheckReport::new("lipschitz", (lhs - bound).max(0.0), tol, ctx.smoother.eps());
    let ratio = if dphi > 0.0 { lhs / dphi } else { 0.0 };
    r.series = vec![ratio];
    r.details = format!(
        "ratio |u1-u2|_H1 / |phi1-phi2|_L2 = {ratio:.6}, bound {:.6}",
        lambda1.powf(-0.5)
    );
    Ok(r)
}

/// Direction families for difference-quotient checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Unit value at one interior node.
    Bump,
    /// Product of sines with random mode numbers.
    Smooth,
    /// Uniform noise in `[-1, 1]` on the interior.
    Noise,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Bump, Direction::Smooth, Direction::Noise];

    pub fn sample(self, grid: &Grid2D, rng: &mut ChaCha8Rng) -> ScalarField {
        use std::f64::consts::PI;
        let field = match self {
            Direction::Bump => {
                let i = rng.gen_range(1..grid.nx() - 1);
                let j = rng.gen_range(1..grid.ny() - 1);
                let mut v = vec![0.0; grid.len()];
                v[grid.index(i, j)] = 1.0;
                ScalarField::new(*grid, v)
            }
            Direction::Smooth => {
                let (ax, bx, ay, by) = grid.bounds();
                let k = rng.gen_range(1..4) as f64;
                let l = rng.gen_range(1..4) as f64;
                ScalarField::from_fn(*grid, |x, y| {
                    (k * PI * (x - ax) / (bx - ax)).sin() * (l * PI * (y - ay) / (by - ay)).sin()
                })
            }
            Direction::Noise => {
                let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                ScalarField::new(*grid, v)
            }
        };
        field.expect("directions are finite").interior_only()
    }
}

/// Steps of the gradient check. Below `1e-2` the central differences reach the
/// rounding floor (about `1e-10` relative); the pass threshold applies at `1e-4`.
pub const GRADIENT_STEPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const GRADIENT_REL_TOL: f64 = 1e-3;

/// Adjoint directional derivative against central differences of the objective.
///
/// Passes when the relative error at `1e-4` is below [`GRADIENT_REL_TOL`] for every
/// direction and, for smooth and noise directions, strictly decreases from `t = 1e-1`
/// to `t = 1e-2`. Bump directions have a second-order term at rounding level, so only
/// the threshold applies to them. `series` holds the errors at each of [`GRADIENT_STEPS`]
/// per direction.
#[allow(clippy::too_many_arguments)]
pub fn check_gradient_fd(
    data: &ProblemData,
    z: &ScalarField,
    phi: &ScalarField,
    lambda: f64,
    ctx: &CheckContext,
    families: &[Direction],
    directions: usize,
    seed: u64,
) -> Result<CheckReport> {
    if families.is_empty() {
        return Err(Error::InvalidParameter {
            name: "families",
            reason: "at least one direction family is required".into(),
        });
    }
    let grid = *data.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = OptimizerConfig {
        state_tol: ctx.state_tol,
        ..OptimizerConfig::new(lambda, ctx.smoother.eps())
    };
    let d = data.with_control(phi.clone())?;
    let u = ctx.state(data, phi, None)?;
    let p = solve_adjoint(&u, z, &d, &ctx.smoother, 1e-14)?.p;
    let grad = reduced_gradient(phi, &p, lambda)?;
    let gnorm = l2_norm(&grad);

    let mut series = Vec::new();
    let mut worst: f64 = 0.0;
    let mut decreasing = true;
    for n in 0..directions {
        let family = families[n % families.len()];
        let psi = family.sample(&grid, &mut rng);
        let adjoint = l2_inner(&grad, &psi)?;
        let floor = 1e-8 * gnorm * l2_norm(&psi);
        let mut errs = Vec::new();
        for &t in &GRADIENT_STEPS {
            let jp = objective(&(phi + &(&psi * t)), z, &cfg, data)?;
            let jm = objective(&(phi - &(&psi * t)), z, &cfg, data)?;
            let fd = (jp - jm) / (2.0 * t);
            errs.push((adjoint - fd).abs() / adjoint.abs().max(floor));
        }
        worst = worst.max(errs[3]);
        if family != Direction::Bump {
            decreasing &= errs[1] < errs[0];
        }
        series.extend_from_slice(&errs);
    }
    let mut r = CheckReport::new("gradient_fd", worst, GRADIENT_REL_TOL, ctx.smoother.eps());
    r.passed &= decreasing;
    r.instances = directions;
    r.series = series;
    r.details = format!("worst relative error at t=1e-4: {worst:e}; decreasing from t=1e-1 to 1e-2: {decreasing}");
    Ok(r)
}

/// Linearized state against forward difference quotients at steps `t` and `t/10`.
///
/// Passes when the error drops by at least `min_ratio` and `|u(φ+tψ) − u(φ)|_H1 ≤ λ1^{-1/2} t ‖ψ‖`
/// on every sample. Directions cycle through `families`; the ratio test needs directions whose
/// second-order term dominates rounding, so bump directions are a poor fit.
/// `series` holds `(err(t), err(t/10))` per direction.
#[allow(clippy::too_many_arguments)]
pub fn check_sensitivity_fd(
    data: &ProblemData,
    phi: &ScalarField,
    ctx: &CheckContext,
    families: &[Direction],
    directions: usize,
    t: f64,
    min_ratio: f64,
    lambda1: f64,
    seed: u64,
) -> Result<CheckReport> {
    let grid = *data.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.with_control(phi.clone())?;
    let u = ctx.state(data, phi, None)?;
    let mut series = Vec::new();
    let mut worst_ratio_shortfall: f64 = 0.0;
    let mut lipschitz_excess: f64 = 0.0;
    if families.is_empty() {
        return Err(Error::InvalidParameter {
            name: "families",
            reason: "at least one direction family is required".into(),
        });
    }
    for n in 0..directions {
        let psi = families[n % families.len()].sample(&grid, &mut rng);
        let xi = solve_sensitivity(&u, &psi, &d, &ctx.smoother, 1e-14)?;
        let mut errs = [0.0; 2];
        for (e, &step) in errs.iter_mut().zip(&[t, t / 10.0]) {
            let up = ctx.state(data, &(phi + &(&psi * step)), Some(&u))?;
            let dq = &(&up - &u) * (1.0 / step);
            *e = l2_norm(&(&xi - &dq));
            let bound = step * l2_norm(&psi) / lambda1.sqrt();
            lipschitz_excess = lipschitz_excess.max(h1_seminorm_sq(&(&up - &u)).sqrt() - bound);
        }
        let ratio = errs[0] / errs[1].max(f64::MIN_POSITIVE);
        worst_ratio_shortfall = worst_ratio_shortfall.max(min_ratio - ratio);
        series.extend_from_slice(&errs);
    }
    let mut r = CheckReport::new(
        "sensitivity_fd",
        worst_ratio_shortfall.max(0.0),
        0.0,
        ctx.smoother.eps(),
    );
    r.passed &= lipschitz_excess <= 1e-12;
    r.instances = directions;
    r.series = series;
    r.details = format!(
        "error ratio shortfall vs {min_ratio}: {:e}; Lipschitz excess {lipschitz_excess:e}",
        worst_ratio_shortfall.max(0.0)
    );
    Ok(r)
}

/// Cauchy behaviour of the regularized states as ε decreases, plus the joint
/// limit `T^{ε_k}(φ_k) → T^{ε_K}(φ)` for `φ_k = P(φ + (ε_k/ε_0) ψ)`.
///
/// `series` holds the consecutive H1 distances followed by the joint-limit distances.
pub fn check_eps_convergence(
    data: &ProblemData,
    eps_list: &[f64],
    psi: &ScalarField,
    state_tol: f64,
    tol: f64,
) -> Result<CheckReport> {
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "needs at least two strictly decreasing entries".into(),
        });
    }
    let phi = data.phi();
    let mut states = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let ctx = CheckContext::new(eps, state_tol)?;
        states.push(ctx.state(data, phi, states.last())?);
    }
    let steps: Vec<f64> = states
        .windows(2)
        .map(|w| h1_distance(&w[0], &w[1]))
        .collect::<Result<_>>()?;

    let reference = states.last().expect("at least two states");
    let eps0 = eps_list[0];
    let mut joint = Vec::new();
    let mut warm: Option<ScalarField> = None;
    for &eps in &eps_list[..eps_list.len() - 1] {
        let phi_k = project_box(&(phi + &(psi * (eps / eps0))), data.fm(), data.fp())?;
        let ctx = CheckContext::new(eps, state_tol)?;
        let u = ctx.state(data, &phi_k, warm.as_ref())?;
        joint.push(h1_distance(&u, reference)?);
        warm = Some(u);
    }
    let increase = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let worst = increase(&steps).max(increase(&joint));
    let mut r = CheckReport::new("eps_convergence", worst, tol, *eps_list.last().unwrap());
    r.instances = eps_list.len();
    r.details = format!("consecutive H1 steps {steps:?}; joint-limit distances {joint:?}");
    r.series = steps;
    r.series.extend(joint);
    Ok(r)
}

/// Damped Picard iteration `u ← (1−ω)u + ω S(u)`, `S(u)` solving `−Δw = φ − β(u)`,
/// compared with the Newton solution in L∞.
pub fn check_picard_newton_agreement(data: &ProblemData, ctx: &CheckContext, tol: f64) -> Result<CheckReport> {
    const MAX_PICARD: usize = 20_000;
    let grid = *data.grid();
    let s = ctx.smoother;
    let newton = ctx.state(data, data.phi(), None)?;

    let lambda1 = smallest_eigenvalue(&grid, 1e-8)?;
    let slope = (data.fp() + data.fm()).max() * 0.75 / s.eps();
    let omega = 1.0 / (1.0 + slope / lambda1);
    let zero = ScalarField::zeros(grid);
    let mut u = crate::state::harmonic_extension(data.g())?;
    let mut iters = 0;
    let mut residual = f64::INFINITY;
    while iters < MAX_PICARD {
        residual = l2_norm(&crate::state::state_residual(&u, data, &s)?);
        if residual <= ctx.state_tol {
            break;
        }
        let rhs = data.phi() - &s.beta(&u, data.fp(), data.fm())?;
        let w = solve_spd(&zero, &rhs, data.g(), 1e-13, 10 * grid.len() + 1000)?;
        u = &(&u * (1.0 - omega)) + &(&w * omega);
        iters += 1;
    }
    let gap = (&u - &newton).max_abs();
    let converged = residual <= ctx.state_tol;
    let mut r = CheckReport::new("picard_newton", gap, 10.0 * tol, s.eps());
    r.passed &= converged;
    r.series = vec![gap, iters as f64];
    r.details = format!(
        "Picard {} after {iters} iterations (omega {omega:.4}, residual {residual:e}); L-inf gap {gap:e}",
        if converged { "converged" } else { "did not converge" }
    );
    Ok(r)
}

/// `λ1` from inverse iteration against the closed-form five-point eigenvalue.
pub fn check_eigenvalue(grid: &Grid2D, tol: f64) -> Result<CheckReport> {
    use std::f64::consts::PI;
    let computed = smallest_eigenvalue(grid, 1e-13)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let exact = 4.0 / (hx * hx) * (PI * hx / (2.0 * (grid.nx() - 1) as f64 * hx)).sin().powi(2)
        + 4.0 / (hy * hy) * (PI * hy / (2.0 * (grid.ny() - 1) as f64 * hy)).sin().powi(2);
    let rel = ((computed - exact) / exact).abs();
    let mut r = CheckReport::new("eigenvalue", rel, tol, 0.0);
    r.series = vec![computed, exact];
    r.details = format!("inverse iteration {computed:.12}, closed form {exact:.12}");
    Ok(r)
}

// ---------------------------------------------------------------------------
// random instances

/// Smooth field `Σ c_m sin(k_m π ξ + a_m) cos(l_m π η + b_m)` scaled into `[-1, 1]`.
pub fn random_smooth(grid: &Grid2D, rng: &mut ChaCha8Rng, modes: usize) -> ScalarField {
    use std::f64::consts::PI;
    let (ax, bx, ay, by) = grid.bounds();
    let terms: Vec<[f64; 5]> = (0..modes)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..4) as f64,
                rng.gen_range(0..4) as f64,
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    let norm: f64 = terms.iter().map(|t| t[0].abs()).sum::<f64>().max(1e-12);
    ScalarField::from_fn(*grid, |x, y| {
        let (xi, eta) = ((x - ax) / (bx - ax), (y - ay) / (by - ay));
        terms
            .iter()
            .map(|t| t[0] * (t[1] * PI * xi + t[3]).sin() * (t[2] * PI * eta + t[4]).cos())
            .sum::<f64>()
            / norm
    })
    .expect("finite")
}

/// Random data with `f± ∈ [0.5, 1.5]`, sign-changing boundary data and zero control.
pub fn random_problem(grid: &Grid2D, rng: &mut ChaCha8Rng) -> ProblemData {
    let fp = random_smooth(grid, rng, 3).map(|v| 1.0 + 0.5 * v);
    let fm = random_smooth(grid, rng, 3).map(|v| 1.0 + 0.5 * v);
    let (ax, bx, ay, by) = grid.bounds();
    let c = rng.gen_range(0.3..0.7);
    let a = rng.gen_range(0.0..0.2);
    let k = rng.gen_range(1..4) as f64;
    let g = BoundaryData::from_fn(*grid, |x, y| {
        let (xi, eta) = ((x - ax) / (bx - ax), (y - ay) / (by - ay));
        xi - c + a * (k * std::f64::consts::PI * eta).sin()
    })
    .expect("finite");
    ProblemData::new(fp, fm, g, ScalarField::zeros(*grid)).expect("valid random data")
}

/// Random control inside `[−0.9 f−, 0.9 f+]`.
pub fn random_control(data: &ProblemData, rng: &mut ChaCha8Rng) -> ScalarField {
    let w = random_smooth(data.grid(), rng, 4);
    let v = w
        .values()
        .iter()
        .zip(data.fp().values().iter().zip(data.fm().values()))
        .map(|(&w, (&p, &m))| 0.9 * if w >= 0.0 { w * p } else { w * m })
        .collect();
    ScalarField::new(*data.grid(), v).expect("finite")
}

/// Ordered admissible pair `φ1 ≥ φ2`. Every third pair differs by a constant shift.
pub fn random_ordered_pair(data: &ProblemData, rng: &mut ChaCha8Rng, index: usize) -> (ScalarField, ScalarField) {
    let phi2 = random_control(data, rng);
    let bump = if index % 3 == 2 {
        ScalarField::constant(*data.grid(), rng.gen_range(0.0..0.5))
    } else {
        random_smooth(data.grid(), rng, 3).map(|v| 0.5 * v.abs())
    };
    let phi1 = project_box(&(&phi2 + &bump), data.fm(), data.fp()).expect("same grid");
    (phi1, phi2)
}

/// Settings for [`run_all`].
#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Nodes per axis of the unit-square grid.
    pub n: usize,
    /// Random ordered pairs for the monotonicity, sandwich and Lipschitz suites.
    pub pairs: usize,
    /// Smoothing width for those suites.
    pub eps: f64,
    pub state_tol: f64,
    /// Pass tolerance for the inequality suites.
    pub tol: f64,
    pub gradient_instances: usize,
    pub directions: usize,
    /// Smoothing width for the gradient and sensitivity checks.
    pub fd_eps: f64,
    pub eps_list: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            n: 33,
            pairs: 100,
            eps: 0.01,
            state_tol: 1e-10,
            tol: 1e-7,
            gradient_instances: 3,
            directions: 6,
            fd_eps: 0.1,
            eps_list: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
        }
    }
}

/// Deterministic target for the gradient checks.
fn gradient_target(grid: &Grid2D, rng: &mut ChaCha8Rng) -> ScalarField {
    random_smooth(grid, rng, 3).map(|v| 0.3 * v)
}

/// Runs every check on seeded random instances.
pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let grid = Grid2D::unit_square(cfg.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ctx = CheckContext::new(cfg.eps, cfg.state_tol)?;
    let mut out = Vec::new();

    let eig = check_eigenvalue(&grid, 1e-8)?;
    let lambda1 = eig.series[0];
    out.push(eig);

    let mut mono = Vec::with_capacity(cfg.pairs);
    let mut sand = Vec::with_capacity(cfg.pairs);
    let mut lip = Vec::with_capacity(cfg.pairs);
    for k in 0..cfg.pairs {
        let data = random_problem(&grid, &mut rng);
        let (phi1, phi2) = random_ordered_pair(&data, &mut rng, k);
        mono.push(check_monotonicity(&data, &phi1, &phi2, &ctx, cfg.tol)?);
        sand.push(check_sandwich(&data, &phi1, &phi2, &ctx, cfg.tol)?);
        // unordered pair for the Lipschitz bound
        let phi3 = random_control(&data, &mut rng);
        lip.push(check_lipschitz(&data, &phi1, &phi3, &ctx, lambda1, 1e-6)?);
    }
    out.push(CheckReport::aggregate("monotonicity", &mono));
    out.push(CheckReport::aggregate("sandwich", &sand));
    out.push(CheckReport::aggregate("lipschitz", &lip));

    let fd_ctx = CheckContext::new(cfg.fd_eps, cfg.state_tol.min(1e-11))?;
    let mut grads = Vec::new();
    for k in 0..cfg.gradient_instances {
        let data = random_problem(&grid, &mut rng);
        let phi = random_control(&data, &mut rng).map(|v| 0.5 * v);
        let z = gradient_target(&grid, &mut rng);
        grads.push(check_gradient_fd(
            &data,
            &z,
            &phi,
            1e-2,
            &fd_ctx,
            &Direction::ALL,
            cfg.directions,
            cfg.seed.wrapping_add(k as u64),
        )?);
    }
    out.push(CheckReport::aggregate("gradient_fd", &grads));

    let data = random_problem(&grid, &mut rng);
    let phi = random_control(&data, &mut rng).map(|v| 0.5 * v);
    out.push(check_sensitivity_fd(
        &data,
        &phi,
        &fd_ctx,
        &[Direction::Smooth, Direction::Noise],
        cfg.directions,
        1e-3,
        5.0,
        lambda1,
        cfg.seed,
    )?);

    let data = random_problem(&grid, &mut rng);
    let psi = random_smooth(&grid, &mut rng, 2).map(|v| 0.3 * v);
    out.push(check_eps_convergence(&data, &cfg.eps_list, &psi, cfg.state_tol, 0.0)?);

    let data = random_problem(&grid, &mut rng);
    let data = data.with_control(random_control(&data, &mut rng))?;
    let picard_ctx = CheckContext::new(cfg.fd_eps, cfg.state_tol)?;
    out.push(check_picard_newton_agreement(&data, &picard_ctx, cfg.tol)?);
    Ok(out)
}
