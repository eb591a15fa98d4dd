//! Problem instances shared by the benchmarks.

use membrane_core::{BoundaryData, Grid2D, ProblemData, ScalarField};

/// Sign-changing two-phase instance on an `n x n` unit-square grid.
pub fn two_phase_instance(n: usize) -> ProblemData {
    let grid = Grid2D::unit_square(n).expect("valid grid");
    ProblemData::new(
        ScalarField::constant(grid, 1.0),
        ScalarField::constant(grid, 1.0),
        BoundaryData::from_fn(grid, |x, y| x - 0.5 + 0.25 * (3.0 * y).sin()).expect("finite"),
        ScalarField::from_fn(grid, |x, y| 0.3 * (std::f64::consts::PI * x).sin() * y).expect("finite"),
    )
    .expect("valid data")
}
