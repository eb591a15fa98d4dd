//! Control-to-state map.
//!
//! The regularized state equation is `Δu = β(u) − φ` in the interior with
//! `u = g` on the boundary ring. It is the stationarity condition of the convex
//! energy
//!
//! ```text
//! I(v) = ½|v|²_H1 + Σ area·[f+ Φ(v) + f− Φ(−v) − φ v]
//! ```
//!
//! whose discrete gradient is exactly `area·(−Δ_h v + β(v) − φ)`, so damped
//! Newton with backtracking on `I` converges from any start.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{
    apply_laplacian, h1_distance, h1_seminorm_sq, l2_inner, l2_norm, same_grid, solve_spd,
    solve_spd_from, BoundaryData, Grid2D, ScalarField,
};
use crate::regularization::{check_non_negative, Smoother};

/// Data of one state equation: phase coefficients, boundary values and control.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData {
    grid: Grid2D,
    fp: ScalarField,
    fm: ScalarField,
    g: BoundaryData,
    phi: ScalarField,
}

impl ProblemData {
    pub fn new(fp: ScalarField, fm: ScalarField, g: BoundaryData, phi: ScalarField) -> Result<Self> {
        same_grid(&fp, &fm)?;
        same_grid(&fp, &phi)?;
        if *g.grid() != *fp.grid() {
            return Err(Error::GridMismatch);
        }
        check_non_negative("f_plus", &fp)?;
        check_non_negative("f_minus", &fm)?;
        Ok(Self {
            grid: *fp.grid(),
            fp,
            fm,
            g,
            phi,
        })
    }

    /// Same coefficients and boundary data, different control.
    pub fn with_control(&self, phi: ScalarField) -> Result<Self> {
        same_grid(&self.fp, &phi)?;
        Ok(Self { phi, ..self.clone() })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn fp(&self) -> &ScalarField {
        &self.fp
    }

    pub fn fm(&self) -> &ScalarField {
        &self.fm
    }

    pub fn g(&self) -> &BoundaryData {
        &self.g
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    /// Largest violation of `−f− ≤ φ ≤ f+` over all nodes; 0 when admissible.
    pub fn admissibility_violation(&self, phi: &ScalarField) -> f64 {
        phi.values()
            .iter()
            .zip(self.fp.values().iter().zip(self.fm.values()))
            .map(|(&v, (&p, &m))| (v - p).max(-m - v).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Converged state with solver diagnostics.
#[derive(Clone, Debug)]
pub struct StateSolution {
    pub u: ScalarField,
    pub newton_iters: usize,
    /// Discrete L2 norm of the state residual.
    pub final_residual: f64,
    /// Regularized energy at `u`.
    pub energy: f64,
    /// Energy of every accepted iterate, starting with the initial one.
    pub energy_trace: Vec<f64>,
}

pub const DEFAULT_STATE_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_NEWTON: usize = 100;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Clone, Copy)]
enum Model {
    TwoPhase,
    /// `Δu = (f+ − φ) chi(u)`; `f−` is ignored.
    OnePhase,
}

struct Nonlinear<'a> {
    data: &'a ProblemData,
    s: Smoother,
    model: Model,
}

impl Nonlinear<'_> {
    #[inline]
    fn node(&self, k: usize, u: f64) -> (f64, f64) {
        let fp = self.data.fp.values()[k];
        match self.model {
            Model::TwoPhase => {
                let fm = self.data.fm.values()[k];
                (
                    fp * self.s.chi(u) - fm * self.s.chi(-u),
                    fp * self.s.chi_prime(u) + fm * self.s.chi_prime(-u),
                )
            }
            Model::OnePhase => {
                let c = fp - self.data.phi.values()[k];
                (c * self.s.chi(u), c * self.s.chi_prime(u))
            }
        }
    }

    /// `Δu − b(u) + source` on the interior.
    fn residual(&self, u: &ScalarField) -> ScalarField {
        let lap = apply_laplacian(u);
        let g = u.grid();
        let mut r = vec![0.0; g.len()];
        for (_, _, k) in g.interior() {
            let (b, _) = self.node(k, u.values()[k]);
            let src = match self.model {
                Model::TwoPhase => self.data.phi.values()[k],
                Model::OnePhase => 0.0,
            };
            r[k] = lap.values()[k] - b + src;
        }
        ScalarField::new(*g, r).expect("residual of finite fields is finite")
    }

    /// Newton matrix diagonal; negative slopes (non-convex one-phase data) are dropped.
    fn jacobian_diag(&self, u: &ScalarField) -> ScalarField {
        let g = u.grid();
        let mut d = vec![0.0; g.len()];
        for (_, _, k) in g.interior() {
            d[k] = self.node(k, u.values()[k]).1.max(0.0);
        }
        ScalarField::new(*g, d).expect("finite")
    }

    fn energy(&self, u: &ScalarField) -> f64 {
        let g = u.grid();
        let v = u.values();
        let fp = self.data.fp.values();
        let fm = self.data.fm.values();
        let phi = self.data.phi.values();
        let mut s = 0.0;
        for (_, _, k) in g.interior() {
            s += match self.model {
                Model::TwoPhase => {
                    fp[k] * self.s.phi_int(v[k]) + fm[k] * self.s.phi_int(-v[k]) - phi[k] * v[k]
                }
                Model::OnePhase => (fp[k] - phi[k]) * self.s.phi_int(v[k]),
            };
        }
        0.5 * h1_seminorm_sq(u) + g.cell_area() * s
    }
}

/// Discrete harmonic extension of the boundary data.
pub fn harmonic_extension(g: &BoundaryData) -> Result<ScalarField> {
    let grid = *g.grid();
    let zero = ScalarField::zeros(grid);
    solve_spd(&zero, &zero, g, 1e-13, max_cg(&grid))
}

fn max_cg(grid: &Grid2D) -> usize {
    10 * grid.len() + 1000
}

/// `Δ_h u − β(u) + φ` on the interior, zero on the boundary.
pub fn state_residual(u: &ScalarField, data: &ProblemData, s: &Smoother) -> Result<ScalarField> {
    same_grid(u, &data.fp)?;
    Ok(Nonlinear {
        data,
        s: *s,
        model: Model::TwoPhase,
    }
    .residual(u))
}

/// Regularized energy `I(v)` whose minimizer is the regularized state.
pub fn regularized_energy(v: &ScalarField, data: &ProblemData, s: &Smoother) -> Result<f64> {
    same_grid(v, &data.fp)?;
    Ok(Nonlinear {
        data,
        s: *s,
        model: Model::TwoPhase,
    }
    .energy(v))
}

/// Solves the regularized two-phase equation starting from the harmonic extension of `g`.
pub fn solve_state(data: &ProblemData, s: &Smoother, tol: f64, max_newton: usize) -> Result<StateSolution> {
    solve_state_from(data, s, tol, max_newton, None)
}

/// [`solve_state`] from a given initial iterate (its boundary is reset to `g`).
pub fn solve_state_from(
    data: &ProblemData,
    s: &Smoother,
    tol: f64,
    max_newton: usize,
    initial: Option<&ScalarField>,
) -> Result<StateSolution> {
    newton(
        &Nonlinear {
            data,
            s: *s,
            model: Model::TwoPhase,
        },
        tol,
        max_newton,
        initial,
    )
}

/// One-phase obstacle form `Δu = (f+ − φ) χ{u > 0}`, regularized with `s`.
pub fn solve_one_phase(data: &ProblemData, s: &Smoother, tol: f64) -> Result<StateSolution> {
    newton(
        &Nonlinear {
            data,
            s: *s,
            model: Model::OnePhase,
        },
        tol,
        DEFAULT_MAX_NEWTON,
        None,
    )
}

fn newton(
    model: &Nonlinear<'_>,
    tol: f64,
    max_newton: usize,
    initial: Option<&ScalarField>,
) -> Result<StateSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let data = model.data;
    let grid = data.grid;
    let mut u = match initial {
        Some(u0) => {
            same_grid(u0, &data.fp)?;
            u0.with_boundary(&data.g)?
        }
        None => harmonic_extension(&data.g)?,
    };
    let zero_bc = BoundaryData::zeros(grid);

    let mut energy = model.energy(&u);
    let mut trace = vec![energy];
    let mut r = model.residual(&u);
    let mut rnorm = l2_norm(&r);

    for it in 0..max_newton {
        if rnorm <= tol {
            return Ok(StateSolution {
                u,
                newton_iters: it,
                final_residual: rnorm,
                energy,
                energy_trace: trace,
            });
        }
        // forcing term: coarse early, tight near the root
        let target = (rnorm.min(0.1) * rnorm).max(0.01 * tol);
        let lin_tol = (target / (1.0 + rnorm)).max(1e-15);
        let d = model.jacobian_diag(&u);
        let step = solve_spd_from(&d, &r, &zero_bc, None, lin_tol, max_cg(&grid))?.u;
        // directional derivative of the energy along the step
        let slope = -l2_inner(&r, &step)?;
        let noise = 1e-13 * (1.0 + energy.abs());

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &u + &(&step * t);
            let e = model.energy(&trial);
            if e <= energy + ARMIJO_C * t * slope {
                accepted = Some((trial, e));
                break;
            }
            // Near the root the energy change drops below rounding; fall back to residual decrease.
            if e <= energy + noise {
                let rt = model.residual(&trial);
                if l2_norm(&rt) < rnorm {
                    accepted = Some((trial, e.min(energy)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, e)) = accepted else {
            return Err(Error::NewtonStagnation {
                iterations: it,
                residual: rnorm,
                best: Box::new(u),
            });
        };
        u = next;
        energy = e;
        trace.push(energy);
        r = model.residual(&u);
        rnorm = l2_norm(&r);
    }
    if rnorm <= tol {
        return Ok(StateSolution {
            u,
            newton_iters: max_newton,
            final_residual: rnorm,
            energy,
            energy_trace: trace,
        });
    }
    Err(Error::NewtonStagnation {
        iterations: max_newton,
        residual: rnorm,
        best: Box::new(u),
    })
}

/// One level of the ε-continuation.
#[derive(Clone, Debug, Serialize)]
pub struct LimitLevel {
    pub eps: f64,
    pub newton_iters: usize,
    /// H1 distance to the previous level; `None` on the first.
    pub h1_step: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LimitSolution {
    pub state: StateSolution,
    /// Smoothing width of the returned iterate.
    pub eps: f64,
    pub levels: Vec<LimitLevel>,
}

pub const MAX_CONTINUATION_LEVELS: usize = 30;

/// Approximates the unregularized state by halving ε with warm starts until two
/// consecutive solutions are within `tol_h1` in H1.
pub fn solve_state_limit(data: &ProblemData, eps0: f64, tol_h1: f64) -> Result<LimitSolution> {
    let mut eps = eps0;
    let mut prev = solve_state(data, &Smoother::new(eps)?, DEFAULT_STATE_TOL, DEFAULT_MAX_NEWTON)?;
    let mut levels = vec![LimitLevel {
        eps,
        newton_iters: prev.newton_iters,
        h1_step: None,
    }];
    let mut last_step = f64::INFINITY;
    for _ in 1..MAX_CONTINUATION_LEVELS {
        eps *= 0.5;
        let next = solve_state_from(
            data,
            &Smoother::new(eps)?,
            DEFAULT_STATE_TOL,
            DEFAULT_MAX_NEWTON,
            Some(&prev.u),
        )?;
        last_step = h1_distance(&next.u, &prev.u)?;
        levels.push(LimitLevel {
            eps,
            newton_iters: next.newton_iters,
            h1_step: Some(last_step),
        });
        prev = next;
        if last_step <= tol_h1 {
            return Ok(LimitSolution {
                state: prev,
                eps,
                levels,
            });
        }
    }
    Err(Error::ContinuationBudget {
        levels: MAX_CONTINUATION_LEVELS,
        last_step,
    })
}

/// Obstacle `φ̃` with `Δ_h φ̃ = φ*` and zero boundary values.
pub fn recover_obstacle(phi_star: &ScalarField) -> Result<ScalarField> {
    let grid = *phi_star.grid();
    solve_spd(
        &ScalarField::zeros(grid),
        &(-phi_star),
        &BoundaryData::zeros(grid),
        1e-13,
        max_cg(&grid),
    )
}

/// Unregularized two-phase energy with the control absorbed into the phase coefficients.
pub fn energy_two_phase(u: &ScalarField, data: &ProblemData) -> Result<f64> {
    let up = u.map(|v| v.max(0.0));
    let um = u.map(|v| (-v).max(0.0));
    let cp = &data.fp - &data.phi;
    let cm = &data.fm + &data.phi;
    Ok(0.5 * h1_seminorm_sq(u) + l2_inner(&cp, &up)? + l2_inner(&cm, &um)?)
}

/// Node classification of a free-boundary extraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeLabel {
    /// `u > utol`
    P,
    /// `u < −utol`
    N,
    /// `|u| ≤ utol`, not on the free boundary
    Z,
    /// free boundary with vanishing gradient
    G1,
    /// free boundary with non-vanishing gradient
    G2,
}

impl NodeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeLabel::P => "P",
            NodeLabel::N => "N",
            NodeLabel::Z => "Z",
            NodeLabel::G1 => "G1",
            NodeLabel::G2 => "G2",
        }
    }

    pub fn is_free_boundary(&self) -> bool {
        matches!(self, NodeLabel::G1 | NodeLabel::G2)
    }
}

#[derive(Clone, Debug)]
pub struct FreeBoundary {
    grid: Grid2D,
    labels: Vec<NodeLabel>,
}

impl FreeBoundary {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize, j: usize) -> NodeLabel {
        self.labels[self.grid.index(i, j)]
    }

    pub fn count(&self, label: NodeLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Field-CSV header followed by one row of labels per grid row.
    pub fn to_csv_string(&self) -> String {
        use crate::io::format_f64;
        let (ax, bx, ay, by) = self.grid.bounds();
        let mut out = format!(
            "{},{},{},{},{},{}\n",
            self.grid.nx(),
            self.grid.ny(),
            format_f64(ax),
            format_f64(bx),
            format_f64(ay),
            format_f64(by)
        );
        for row in self.labels.chunks(self.grid.nx()) {
            let line: Vec<&str> = row.iter().map(NodeLabel::as_str).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Labels interior nodes by phase and marks the free boundary.
///
/// A free-boundary node is either a `Z` node with a `P` or `N` neighbour, or the
/// endpoint closer to zero of an edge joining `P` to `N` directly. Its gradient is
/// measured with centred differences and compared to `gtol`.
pub fn free_boundary(u: &ScalarField, utol: f64, gtol: f64) -> FreeBoundary {
    let grid = *u.grid();
    let v = u.values();
    let nx = grid.nx();
    let base: Vec<NodeLabel> = v
        .iter()
        .map(|&x| {
            if x > utol {
                NodeLabel::P
            } else if x < -utol {
                NodeLabel::N
            } else {
                NodeLabel::Z
            }
        })
        .collect();
    let mut labels = base.clone();
    for (i, j, k) in grid.interior() {
        let nbrs = [k - 1, k + 1, k - nx, k + nx];
        let on_gamma = match base[k] {
            NodeLabel::Z => nbrs.iter().any(|&n| base[n] != NodeLabel::Z),
            own => nbrs.iter().any(|&n| {
                let other = base[n];
                other != NodeLabel::Z && other != own && v[k].abs() <= v[n].abs()
            }),
        };
        if on_gamma {
            let gx = (u.at(i + 1, j) - u.at(i - 1, j)) / (2.0 * grid.hx());
            let gy = (u.at(i, j + 1) - u.at(i, j - 1)) / (2.0 * grid.hy());
            labels[k] = if gx.hypot(gy) > gtol {
                NodeLabel::G2
            } else {
                NodeLabel::G1
            };
        }
    }
    FreeBoundary { grid, labels }
}
