//! Uniform-grid discrete calculus.
//!
//! Nodes are stored row-major (y outer, x inner). The outer ring of nodes is the
//! Dirichlet boundary; every operator works on the interior and treats boundary
//! rows as identity, so the linear systems stay symmetric positive definite
//! after the boundary values are eliminated.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform rectangular grid over `[ax, bx] x [ay, by]`, boundary nodes included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        if ![ax, bx, ay, by].iter().all(|v| v.is_finite()) || bx <= ax || by <= ay {
            return Err(Error::InvalidGrid(format!(
                "degenerate domain [{ax}, {bx}] x [{ay}, {by}]"
            )));
        }
        Ok(Self {
            nx,
            ny,
            ax,
            bx,
            ay,
            by,
            hx: (bx - ax) / (nx - 1) as f64,
            hy: (by - ay) / (ny - 1) as f64,
        })
    }

    /// `n x n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 0.0, 1.0, 0.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Domain corners `(ax, bx, ay, by)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.ax, self.bx, self.ay, self.by)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.bx
        } else {
            self.ax + i as f64 * self.hx
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.by
        } else {
            self.ay + j as f64 * self.hy
        }
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    pub fn is_boundary_index(&self, k: usize) -> bool {
        self.is_boundary(k % self.nx, k / self.nx)
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    /// Boundary ring in ascending node order; this is the enumeration used by [`BoundaryData`].
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_boundary_index(k)).collect()
    }

    /// Interior nodes as `(i, j, k)`.
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (1..self.ny - 1).flat_map(move |j| (1..self.nx - 1).map(move |i| (i, j, j * self.nx + i)))
    }
}

/// Nodal values on a grid. All values are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        assert!(c.is_finite(), "constant field value must be finite");
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(self, other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Copy with the boundary ring replaced by `bc`.
    pub fn with_boundary(&self, bc: &BoundaryData) -> Result<Self> {
        if bc.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = self.clone();
        for (&k, &v) in self.grid.boundary_indices().iter().zip(&bc.values) {
            out.values[k] = v;
        }
        Ok(out)
    }

    /// Copy with the interior replaced by zeros.
    pub fn boundary_only(&self) -> Self {
        let mut out = self.clone();
        for (_, _, k) in self.grid.interior() {
            out.values[k] = 0.0;
        }
        out
    }

    /// Copy with the boundary ring set to zero.
    pub fn interior_only(&self) -> Self {
        let mut out = self.clone();
        for k in self.grid.boundary_indices() {
            out.values[k] = 0.0;
        }
        out
    }

    pub fn boundary_data(&self) -> BoundaryData {
        BoundaryData {
            grid: self.grid,
            values: self
                .grid
                .boundary_indices()
                .into_iter()
                .map(|k| self.values[k])
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn interior_min(&self) -> f64 {
        self.grid
            .interior()
            .map(|(_, _, k)| self.values[k])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn interior_max(&self) -> f64 {
        self.grid
            .interior()
            .map(|(_, _, k)| self.values[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn interior_max_abs(&self) -> f64 {
        self.grid
            .interior()
            .fold(0.0, |m, (_, _, k)| m.max(self.values[k].abs()))
    }
}

pub(crate) fn same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.grid == b.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

// Arithmetic operators panic on a grid mismatch, like shape mismatches in ndarray.
impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|v| v * rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

/// Dirichlet data on the boundary ring, ordered as [`Grid2D::boundary_indices`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    grid: Grid2D,
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        let expected = grid.len() - grid.interior_count();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len() - grid.interior_count()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid
            .boundary_indices()
            .into_iter()
            .map(|k| f(grid.x(k % grid.nx()), grid.y(k / grid.nx())))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when the data takes both signs on the ring.
    pub fn sign_changing(&self) -> bool {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo < 0.0 && 0.0 < hi
    }
}

/// Five-point Laplacian; boundary nodes get 0.
pub fn apply_laplacian(u: &ScalarField) -> ScalarField {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (cx, cy) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let v = &u.values;
    let mut out = vec![0.0; g.len()];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            out[k] = cx * (v[k - 1] - 2.0 * v[k] + v[k + 1]) + cy * (v[k - nx] - 2.0 * v[k] + v[k + nx]);
        }
    }
    ScalarField { grid: g, values: out }
}

/// Interior-node rectangle rule for the L2 product.
pub fn l2_inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    same_grid(a, b)?;
    Ok(interior_dot(&a.grid, &a.values, &b.values) * a.grid.cell_area())
}

pub fn l2_norm(a: &ScalarField) -> f64 {
    (interior_dot(&a.grid, &a.values, &a.values) * a.grid.cell_area()).sqrt()
}

/// Squared discrete H1 seminorm over forward-difference edges.
///
/// Edges lying on the boundary ring carry half weight, so a linear profile
/// integrates exactly and, for fields vanishing on the boundary, the value
/// equals `l2_inner(-apply_laplacian(u), u)`.
pub fn h1_seminorm_sq(u: &ScalarField) -> f64 {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let v = &u.values;
    let mut sx = 0.0;
    for j in 0..ny {
        let w = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        let mut row = 0.0;
        for i in 0..nx - 1 {
            let k = j * nx + i;
            let d = v[k + 1] - v[k];
            row += d * d;
        }
        sx += w * row;
    }
    let mut sy = 0.0;
    for j in 0..ny - 1 {
        for i in 0..nx {
            let w = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
            let k = j * nx + i;
            let d = v[k + nx] - v[k];
            sy += w * d * d;
        }
    }
    g.cell_area() * (sx / (g.hx * g.hx) + sy / (g.hy * g.hy))
}

/// Full discrete H1 norm: seminorm plus interior L2 part.
pub fn h1_norm(u: &ScalarField) -> f64 {
    (h1_seminorm_sq(u) + l2_norm(u).powi(2)).sqrt()
}

pub fn h1_distance(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    same_grid(a, b)?;
    Ok(h1_norm(&(a - b)))
}

fn interior_dot(g: &Grid2D, a: &[f64], b: &[f64]) -> f64 {
    let nx = g.nx;
    let mut s = 0.0;
    for j in 1..g.ny - 1 {
        let row = j * nx;
        for i in 1..nx - 1 {
            s += a[row + i] * b[row + i];
        }
    }
    s
}

/// Result of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct SpdSolve {
    pub u: ScalarField,
    pub iterations: usize,
    /// Discrete L2 norm of `-Δu + d u - rhs`.
    pub residual: f64,
}

/// Solves `-Δ_h u + d u = rhs` on the interior with `u = bc` on the boundary.
///
/// Jacobi-preconditioned conjugate gradients; converged when both the discrete
/// L2 norm and the max norm of the residual are at most `tol * (1 + ||rhs||)`,
/// or at the rounding level `16 ε ||A|| max|u|` when that is larger.
pub fn solve_spd(
    d: &ScalarField,
    rhs: &ScalarField,
    bc: &BoundaryData,
    tol: f64,
    max_iter: usize,
) -> Result<ScalarField> {
    solve_spd_from(d, rhs, bc, None, tol, max_iter).map(|s| s.u)
}

/// [`solve_spd`] with an optional initial guess for the interior.
pub fn solve_spd_from(
    d: &ScalarField,
    rhs: &ScalarField,
    bc: &BoundaryData,
    guess: Option<&ScalarField>,
    tol: f64,
    max_iter: usize,
) -> Result<SpdSolve> {
    same_grid(d, rhs)?;
    if bc.grid != d.grid {
        return Err(Error::GridMismatch);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let g = d.grid;
    for (_, _, k) in g.interior() {
        if d.values[k] < 0.0 {
            return Err(Error::Negative {
                name: "d",
                index: k,
                value: d.values[k],
            });
        }
    }
    let mut u = match guess {
        Some(x0) => {
            same_grid(d, x0)?;
            x0.with_boundary(bc)?
        }
        None => ScalarField::zeros(g).with_boundary(bc)?,
    };

    let area = g.cell_area();
    let target = tol * (1.0 + (interior_dot(&g, &rhs.values, &rhs.values) * area).sqrt());
    let diag: Vec<f64> = {
        let c = 2.0 / (g.hx * g.hx) + 2.0 / (g.hy * g.hy);
        d.values.iter().map(|&di| c + di).collect()
    };

    // Residuals below the rounding level of the operator are not representable.
    let op_scale = diag.iter().fold(0.0f64, |m, &v| m.max(v)) * 2.0;
    let floor = |u: &ScalarField| 16.0 * f64::EPSILON * op_scale * u.max_abs().max(1e-300);

    let mut total = 0;
    let mut residual = f64::INFINITY;
    // The recursive residual can drift from the true one; restart from the
    // current iterate until the true residual meets the target.
    for _restart in 0..4 {
        let mut r = residual_vec(&u, d, rhs);
        residual = (interior_dot(&g, &r, &r) * area).sqrt();
        let target = target.max(floor(&u));
        if residual.max(max_abs(&r)) <= target {
            return Ok(SpdSolve {
                u,
                iterations: total,
                residual,
            });
        }
        if total >= max_iter {
            break;
        }
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz = interior_dot(&g, &r, &z);
        let mut ap = vec![0.0; g.len()];
        while total < max_iter {
            apply_operator(&g, &d.values, &p, &mut ap);
            let pap = interior_dot(&g, &p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for (_, _, k) in g.interior() {
                u.values[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            total += 1;
            let rr = interior_dot(&g, &r, &r);
            if (rr * area).sqrt().max(max_abs(&r)) <= 0.5 * target {
                break;
            }
            for (_, _, k) in g.interior() {
                z[k] = r[k] / diag[k];
            }
            let rz_new = interior_dot(&g, &r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (_, _, k) in g.interior() {
                p[k] = z[k] + beta * p[k];
            }
        }
    }
    Err(Error::LinearSolver {
        iterations: total,
        residual,
    })
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

// rhs - (-Δu + d u) on the interior, zero on the boundary.
fn residual_vec(u: &ScalarField, d: &ScalarField, rhs: &ScalarField) -> Vec<f64> {
    let g = u.grid;
    let mut au = vec![0.0; g.len()];
    apply_operator(&g, &d.values, &u.values, &mut au);
    let mut r = vec![0.0; g.len()];
    for (_, _, k) in g.interior() {
        r[k] = rhs.values[k] - au[k];
    }
    r
}

// out = -Δ_h x + d x on the interior, reading boundary entries of x as given.
fn apply_operator(g: &Grid2D, d: &[f64], x: &[f64], out: &mut [f64]) {
    let nx = g.nx;
    let (cx, cy) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let c = 2.0 * (cx + cy);
    for j in 1..g.ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            out[k] = (c + d[k]) * x[k] - cx * (x[k - 1] + x[k + 1]) - cy * (x[k - nx] + x[k + nx]);
        }
    }
}

/// Smallest eigenvalue of `-Δ_h` with zero Dirichlet data, by inverse power
/// iteration with Rayleigh quotients; stops when the relative change is below `tol`.
pub fn smallest_eigenvalue(grid: &Grid2D, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    const MAX_ITERS: usize = 500;
    let zero = ScalarField::zeros(*grid);
    let bc = BoundaryData::zeros(*grid);
    let lin_tol = 1e-12;
    let max_cg = 20 * grid.len() + 100;

    let mut v = ScalarField::constant(*grid, 1.0).interior_only();
    let mut lambda = f64::NAN;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let norm = l2_norm(&v);
        v = &v * (1.0 / norm);
        let w = solve_spd_from(&zero, &v, &bc, Some(&v), lin_tol, max_cg)?.u;
        let next = h1_seminorm_sq(&w) / l2_norm(&w).powi(2);
        change = ((next - lambda) / next).abs();
        lambda = next;
        v = w;
        if change <= tol {
            return Ok(lambda);
        }
    }
    Err(Error::Eigenvalue {
        iterations: MAX_ITERS,
        change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_small_or_degenerate() {
        assert!(Grid2D::new(2, 5, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(Grid2D::new(5, 5, 1.0, 1.0, 0.0, 1.0).is_err());
        let g = Grid2D::new(5, 9, 0.0, 2.0, -1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.5);
        assert_eq!(g.hy(), 0.25);
        assert_eq!(g.x(4), 2.0);
        assert_eq!(g.boundary_indices().len(), 5 * 9 - 3 * 7);
    }

    #[test]
    fn field_rejects_non_finite_and_bad_length() {
        let g = Grid2D::unit_square(3).unwrap();
        assert!(matches!(
            ScalarField::new(g, vec![0.0; 8]),
            Err(Error::LengthMismatch { .. })
        ));
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite { index: 4 })));
    }

    #[test]
    fn laplacian_of_constant_and_linear_vanishes() {
        let g = Grid2D::unit_square(5).unwrap();
        let c = ScalarField::constant(g, 3.7);
        assert!(apply_laplacian(&c).max_abs() < 1e-12);
        let x = ScalarField::from_fn(g, |x, _| x).unwrap();
        assert!(apply_laplacian(&x).max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_quadratic_is_four() {
        let g = Grid2D::unit_square(5).unwrap();
        let q = ScalarField::from_fn(g, |x, y| x * x + y * y).unwrap();
        let lap = apply_laplacian(&q);
        for (i, j, k) in g.interior() {
            assert!((lap.values()[k] - 4.0).abs() < 1e-12, "node ({i},{j})");
        }
        for k in g.boundary_indices() {
            assert_eq!(lap.values()[k], 0.0);
        }
    }

    #[test]
    fn l2_inner_counts_interior_cells() {
        let g = Grid2D::unit_square(9).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let expected = g.cell_area() * 7.0 * 7.0;
        assert!((l2_inner(&one, &one).unwrap() - expected).abs() < 1e-15);
        assert_eq!(l2_inner(&ScalarField::zeros(g), &one).unwrap(), 0.0);
        let other = ScalarField::zeros(Grid2D::unit_square(5).unwrap());
        assert!(matches!(l2_inner(&one, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn l2_inner_of_sine_mode() {
        let g = Grid2D::unit_square(65).unwrap();
        let s = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
        assert!((l2_inner(&s, &s).unwrap() - 0.25).abs() < 2e-3);
    }

    #[test]
    fn h1_seminorm_values() {
        let g = Grid2D::unit_square(17).unwrap();
        assert_eq!(h1_seminorm_sq(&ScalarField::constant(g, 2.0)), 0.0);
        let x = ScalarField::from_fn(g, |x, _| x).unwrap();
        assert!((h1_seminorm_sq(&x) - 1.0).abs() < 1e-12);
        let g = Grid2D::unit_square(65).unwrap();
        let s = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
        assert!((h1_seminorm_sq(&s) - PI * PI / 2.0).abs() < 0.02);
    }

    #[test]
    fn spd_reproduces_linear_boundary_data() {
        let g = Grid2D::unit_square(17).unwrap();
        let bc = BoundaryData::from_fn(g, |x, _| x).unwrap();
        let z = ScalarField::zeros(g);
        let u = solve_spd(&z, &z, &bc, 1e-13, 10_000).unwrap();
        for (i, _, k) in g.interior() {
            assert!((u.values()[k] - g.x(i)).abs() < 1e-10);
        }
    }

    #[test]
    fn spd_residual_contract_with_reaction() {
        let g = Grid2D::new(13, 9, 0.0, 1.5, 0.0, 1.0).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let tol = 1e-9;
        let u = solve_spd(&one, &one, &BoundaryData::zeros(g), tol, 10_000).unwrap();
        let res = &(&(-&apply_laplacian(&u)) + &u) - &one;
        assert!(res.interior_max_abs() <= tol);
    }

    #[test]
    fn spd_manufactured_poisson() {
        let g = Grid2D::unit_square(65).unwrap();
        let exact = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
        let rhs = &exact * (2.0 * PI * PI);
        let u = solve_spd(&ScalarField::zeros(g), &rhs, &BoundaryData::zeros(g), 1e-12, 10_000).unwrap();
        assert!((&u - &exact).max_abs() <= 2e-3);
    }

    #[test]
    fn spd_rejects_negative_coefficient() {
        let g = Grid2D::unit_square(5).unwrap();
        let d = ScalarField::constant(g, -1.0);
        let z = ScalarField::zeros(g);
        assert!(matches!(
            solve_spd(&d, &z, &BoundaryData::zeros(g), 1e-8, 100),
            Err(Error::Negative { .. })
        ));
    }

    #[test]
    fn spd_reports_non_convergence() {
        let g = Grid2D::unit_square(33).unwrap();
        let rhs = ScalarField::constant(g, 1.0);
        let err = solve_spd(&ScalarField::zeros(g), &rhs, &BoundaryData::zeros(g), 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::LinearSolver { iterations: 3, .. }));
    }

    #[test]
    fn eigenvalue_on_unit_square() {
        let g = Grid2D::unit_square(33).unwrap();
        let h = g.hx();
        let exact = 2.0 * (4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        let lam = smallest_eigenvalue(&g, 1e-12).unwrap();
        assert!((lam - exact).abs() / exact < 1e-9, "{lam} vs {exact}");
        // continuum value 2π² is approached at O(h²)
        assert!((lam - 2.0 * PI * PI).abs() < 0.05);
    }

    #[test]
    fn eigenvalue_on_rectangle() {
        let g = Grid2D::new(65, 33, 0.0, 2.0, 0.0, 1.0).unwrap();
        let lam = smallest_eigenvalue(&g, 1e-10).unwrap();
        assert!((lam - PI * PI * 1.25).abs() < 0.05, "{lam}");
    }
}
