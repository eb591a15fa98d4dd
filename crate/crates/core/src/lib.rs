//! Two-phase membrane free-boundary problem: regularized state solver,
//! adjoint-based gradients and projected-gradient optimal control on uniform
//! rectangular grids, plus executable property checks of the control-to-state map.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod adjoint;
pub mod control;
pub mod error;
pub mod field;
pub mod io;
pub mod regularization;
pub mod state;
pub mod verify;

pub use adjoint::{reduced_gradient, solve_adjoint, solve_sensitivity, AdjointSolution};
pub use control::{
    epsilon_path, objective, optimality_residual, optimize, project_box, EpsilonPath, IterRecord,
    OptimizeReport, OptimizerConfig,
};
pub use error::{Error, Result};
pub use field::{
    apply_laplacian, h1_distance, h1_norm, h1_seminorm_sq, l2_inner, l2_norm, smallest_eigenvalue,
    solve_spd, solve_spd_from, BoundaryData, Grid2D, ScalarField, SpdSolve,
};
pub use regularization::Smoother;
pub use state::{
    energy_two_phase, free_boundary, harmonic_extension, recover_obstacle, regularized_energy,
    solve_one_phase, solve_state, solve_state_from, solve_state_limit, state_residual, DEFAULT_MAX_NEWTON,
    DEFAULT_STATE_TOL, MAX_CONTINUATION_LEVELS,
    FreeBoundary, LimitLevel, LimitSolution, NodeLabel, ProblemData, StateSolution,
};
pub use verify::{run_all, CheckContext, CheckReport, Direction, VerifyConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
