//! Linearized state equation, adjoint state and the reduced gradient of the
//! tracking objective.
//!
//! Both the sensitivity and the adjoint solve the same self-adjoint operator
//! `−Δ_h + β'(u)` with zero boundary values; only the right-hand side differs.

use crate::error::Result;
use crate::field::{apply_laplacian, l2_norm, same_grid, solve_spd, BoundaryData, ScalarField};
use crate::regularization::Smoother;
use crate::state::ProblemData;

#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub p: ScalarField,
    /// Discrete L2 residual of the adjoint equation.
    pub residual: f64,
}

fn linearized_solve(
    u: &ScalarField,
    rhs: &ScalarField,
    data: &ProblemData,
    s: &Smoother,
    tol: f64,
) -> Result<(ScalarField, ScalarField)> {
    same_grid(u, data.fp())?;
    same_grid(u, rhs)?;
    let grid = *u.grid();
    let d = s.beta_prime(u, data.fp(), data.fm())?;
    let x = solve_spd(&d, rhs, &BoundaryData::zeros(grid), tol, 10 * grid.len() + 1000)?;
    Ok((x, d))
}

/// Solves `−Δp + β'(u) p = u − z`, `p = 0` on the boundary.
pub fn solve_adjoint(
    u: &ScalarField,
    z: &ScalarField,
    data: &ProblemData,
    s: &Smoother,
    tol: f64,
) -> Result<AdjointSolution> {
    same_grid(u, z)?;
    let rhs = u - z;
    let (p, d) = linearized_solve(u, &rhs, data, s, tol)?;
    let lhs = &(-&apply_laplacian(&p)) + &p.zip_map(&d, |a, b| a * b)?;
    let residual = l2_norm(&(&lhs - &rhs));
    Ok(AdjointSolution { p, residual })
}

/// Derivative of the control-to-state map at `u` in direction `psi`:
/// `(−Δ + β'(u)) ξ = ψ`, `ξ = 0` on the boundary.
pub fn solve_sensitivity(
    u: &ScalarField,
    psi: &ScalarField,
    data: &ProblemData,
    s: &Smoother,
    tol: f64,
) -> Result<ScalarField> {
    linearized_solve(u, psi, data, s, tol).map(|(xi, _)| xi)
}

/// L2 Riesz representative `p + λ φ` of the objective's derivative.
pub fn reduced_gradient(phi: &ScalarField, p: &ScalarField, lambda: f64) -> Result<ScalarField> {
    phi.zip_map(p, |f, q| q + lambda * f)
}
