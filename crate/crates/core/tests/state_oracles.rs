use membrane_core::*;

fn strip(nx: usize, h_rows: usize) -> Grid2D {
    let h = 2.0 / (nx - 1) as f64;
    Grid2D::new(nx, h_rows, -1.0, 1.0, 0.0, (h_rows - 1) as f64 * h).unwrap()
}

/// Newton on the 1D three-point scheme with a tridiagonal (Thomas) solve.
fn newton_1d(x: &[f64], fp: f64, fm: f64, phi: &dyn Fn(f64) -> f64, ua: f64, ub: f64, s: &Smoother) -> Vec<f64> {
    let n = x.len();
    let h = x[1] - x[0];
    let mut u: Vec<f64> = (0..n).map(|i| ua + (ub - ua) * i as f64 / (n - 1) as f64).collect();
    let beta = |v: f64| fp * s.chi(v) - fm * s.chi(-v);
    let dbeta = |v: f64| fp * s.chi_prime(v) + fm * s.chi_prime(-v);
    for _ in 0..200 {
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        let mut norm: f64 = 0.0;
        for k in 0..m {
            let i = k + 1;
            let f = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h) - beta(u[i]) + phi(x[i]);
            norm = norm.max(f.abs());
            diag[k] = 2.0 / (h * h) + dbeta(u[i]);
            rhs[k] = f;
        }
        if norm < 1e-12 {
            break;
        }
        // (−D2 + β') δ = F with off-diagonals −1/h²
        let off = -1.0 / (h * h);
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        c[0] = off / diag[0];
        d[0] = rhs[0] / diag[0];
        for k in 1..m {
            let den = diag[k] - off * c[k - 1];
            c[k] = off / den;
            d[k] = (rhs[k] - off * d[k - 1]) / den;
        }
        let mut delta = vec![0.0; m];
        delta[m - 1] = d[m - 1];
        for k in (0..m - 1).rev() {
            delta[k] = d[k] - c[k] * delta[k + 1];
        }
        for k in 0..m {
            u[k + 1] += delta[k];
        }
    }
    u
}

#[test]
fn strip_matches_tridiagonal_newton() {
    let grid = strip(65, 5);
    let s = Smoother::new(0.05).unwrap();
    let phi1 = |x: f64| 0.3 * (std::f64::consts::PI * x).sin();
    let xs: Vec<f64> = (0..grid.nx()).map(|i| grid.x(i)).collect();
    let oracle = newton_1d(&xs, 1.0, 2.0, &phi1, -0.4, 0.6, &s);
    // the 1D solution on the whole ring keeps the 2D solution independent of y
    let h = grid.hx();
    let g = BoundaryData::from_fn(grid, |x, _| oracle[((x + 1.0) / h).round() as usize]).unwrap();
    let data = ProblemData::new(
        ScalarField::constant(grid, 1.0),
        ScalarField::constant(grid, 2.0),
        g,
        ScalarField::from_fn(grid, |x, _| phi1(x)).unwrap(),
    )
    .unwrap();
    let u = solve_state(&data, &s, 1e-12, 100).unwrap().u;
    for j in 0..grid.ny() {
        for (i, &expected) in oracle.iter().enumerate() {
            assert!((u.at(i, j) - expected).abs() < 1e-9, "node ({i},{j})");
        }
    }
}

fn square_data(n: usize) -> ProblemData {
    let grid = Grid2D::unit_square(n).unwrap();
    ProblemData::new(
        ScalarField::constant(grid, 1.0),
        ScalarField::from_fn(grid, |x, _| 1.0 + 0.5 * x).unwrap(),
        BoundaryData::from_fn(grid, |x, y| x - 0.5 + 0.2 * (3.0 * y).sin()).unwrap(),
        ScalarField::from_fn(grid, |x, y| 0.3 * (x - y)).unwrap(),
    )
    .unwrap()
}

#[test]
fn solution_is_independent_of_the_initial_guess() {
    let data = square_data(33);
    let s = Smoother::new(0.02).unwrap();
    let a = solve_state(&data, &s, 1e-11, 100).unwrap().u;
    let wild = ScalarField::from_fn(*data.grid(), |x, y| 3.0 * (7.0 * x * y).cos()).unwrap();
    let b = solve_state_from(&data, &s, 1e-11, 100, Some(&wild)).unwrap().u;
    assert!((&a - &b).max_abs() < 1e-10);
}

#[test]
fn energy_is_minimal_at_the_solution() {
    let data = square_data(17);
    let s = Smoother::new(0.05).unwrap();
    let u = solve_state(&data, &s, 1e-12, 100).unwrap().u;
    let e0 = regularized_energy(&u, &data, &s).unwrap();
    let grid = *data.grid();
    for k in 0..50 {
        let amp = 1e-3 * (1 + k % 5) as f64;
        let (a, b) = (1.0 + (k % 3) as f64, 1.0 + (k % 4) as f64);
        let pert = ScalarField::from_fn(grid, |x, y| amp * (a * 3.1 * x + k as f64).sin() * (b * 2.7 * y).cos())
            .unwrap()
            .interior_only();
        let e = regularized_energy(&(&u + &pert), &data, &s).unwrap();
        assert!(e >= e0 - 1e-14 * e0.abs().max(1.0), "perturbation {k}: {e} < {e0}");
    }
}

#[test]
fn larger_control_gives_larger_state() {
    let data = square_data(33);
    let s = Smoother::new(0.01).unwrap();
    let lo = solve_state(&data, &s, 1e-11, 100).unwrap().u;
    let shifted = data.phi().map(|v| v + 0.2);
    let hi = solve_state(&data.with_control(shifted).unwrap(), &s, 1e-11, 100).unwrap().u;
    assert!((&hi - &lo).min() >= -1e-12);
    assert!((&hi - &lo).interior_min() > 0.0);
}

#[test]
fn continuation_reports_shrinking_steps() {
    let data = square_data(33);
    let sol = solve_state_limit(&data, 0.1, 1e-3).unwrap();
    assert!(sol.eps < 0.1);
    let steps: Vec<f64> = sol.levels.iter().filter_map(|l| l.h1_step).collect();
    assert!(*steps.last().unwrap() <= 1e-3);
    assert!(steps[0] > *steps.last().unwrap(), "{steps:?}");
    assert!(sol.levels[0].h1_step.is_none());
}

#[test]
fn continuation_stops_once_no_node_is_in_the_layer() {
    // once ε is below every |u| at the interior nodes, consecutive levels coincide
    let data = square_data(9);
    let sol = solve_state_limit(&data, 0.1, 0.0).unwrap();
    assert_eq!(sol.levels.last().unwrap().h1_step, Some(0.0));
    assert!(sol.levels.len() < MAX_CONTINUATION_LEVELS);
}

#[test]
fn one_phase_state_stays_above_minus_eps() {
    let grid = Grid2D::unit_square(33).unwrap();
    let eps = 0.01;
    let data = ProblemData::new(
        ScalarField::constant(grid, 4.0),
        ScalarField::zeros(grid),
        BoundaryData::from_fn(grid, |x, y| 0.05 * (1.0 + (6.0 * x + y).sin())).unwrap(),
        ScalarField::constant(grid, 1.0),
    )
    .unwrap();
    let u = solve_one_phase(&data, &Smoother::new(eps).unwrap(), 1e-10).unwrap().u;
    assert!(u.min() >= -eps - 1e-9, "min {}", u.min());
    // contact set is non-empty: the source drives u to zero in the middle
    assert!(u.at(16, 16).abs() < eps);
}

#[test]
fn recovered_obstacle_of_constant_source() {
    // Δw = 4 on the unit square: w(½,½) = 4·(−0.0736713…)
    let grid = Grid2D::unit_square(65).unwrap();
    let w = recover_obstacle(&ScalarField::constant(grid, 4.0)).unwrap();
    assert!((w.at(32, 32) + 0.2946853).abs() < 5e-4, "{}", w.at(32, 32));
    assert!(w.max() <= 0.0);
}

#[test]
fn free_boundary_of_the_quadratic_profile_is_degenerate() {
    // u = x|x|/2 has a vanishing gradient at x = 0
    let grid = strip(129, 5);
    let u = ScalarField::from_fn(grid, |x, _| 0.5 * x * x.abs()).unwrap();
    let fb = free_boundary(&u, 1e-4, 0.05);
    let mid = grid.nx() / 2;
    for j in 1..grid.ny() - 1 {
        assert_eq!(fb.label(mid, j), NodeLabel::G1);
    }
    assert_eq!(fb.count(NodeLabel::G2), 0);
    assert!(fb.count(NodeLabel::P) > 0 && fb.count(NodeLabel::N) > 0);
}
