//! Smoothed Heaviside `chi`, its antiderivative `phi_int` and the nonlinearity
//! `beta(u) = f+ chi(u) - f- chi(-u)` of the regularized state equation.
//!
//! `chi` is the cubic smoothstep stretched over `[-eps, eps]`. It is C1,
//! non-decreasing, satisfies `chi(t) + chi(-t) = 1` and `chi(0) = 1/2`.

use crate::error::{Error, Result};
use crate::field::{same_grid, ScalarField};

/// Smoothing width for the regularized problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoother {
    eps: f64,
}

impl Smoother {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self { eps })
        } else {
            Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("must be positive and finite, got {eps}"),
            })
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn chi(&self, t: f64) -> f64 {
        let x = (t + self.eps) / (2.0 * self.eps);
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            x * x * (3.0 - 2.0 * x)
        }
    }

    #[inline]
    pub fn chi_prime(&self, t: f64) -> f64 {
        let x = (t + self.eps) / (2.0 * self.eps);
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            6.0 * x * (1.0 - x) / (2.0 * self.eps)
        }
    }

    /// `∫_{-∞}^t chi(s) ds`, a smooth surrogate for `max(t, 0)`.
    #[inline]
    pub fn phi_int(&self, t: f64) -> f64 {
        let x = (t + self.eps) / (2.0 * self.eps);
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            t
        } else {
            2.0 * self.eps * x * x * x * (1.0 - 0.5 * x)
        }
    }

    pub fn beta(&self, u: &ScalarField, fp: &ScalarField, fm: &ScalarField) -> Result<ScalarField> {
        check_coefficients(u, fp, fm)?;
        let v: Vec<f64> = u
            .values()
            .iter()
            .zip(fp.values().iter().zip(fm.values()))
            .map(|(&u, (&p, &m))| p * self.chi(u) - m * self.chi(-u))
            .collect();
        ScalarField::new(*u.grid(), v)
    }

    pub fn beta_prime(&self, u: &ScalarField, fp: &ScalarField, fm: &ScalarField) -> Result<ScalarField> {
        check_coefficients(u, fp, fm)?;
        let v: Vec<f64> = u
            .values()
            .iter()
            .zip(fp.values().iter().zip(fm.values()))
            .map(|(&u, (&p, &m))| p * self.chi_prime(u) + m * self.chi_prime(-u))
            .collect();
        ScalarField::new(*u.grid(), v)
    }
}

pub(crate) fn check_non_negative(name: &'static str, f: &ScalarField) -> Result<()> {
    match f.values().iter().position(|&v| v < 0.0) {
        Some(index) => Err(Error::Negative {
            name,
            index,
            value: f.values()[index],
        }),
        None => Ok(()),
    }
}

fn check_coefficients(u: &ScalarField, fp: &ScalarField, fm: &ScalarField) -> Result<()> {
    same_grid(u, fp)?;
    same_grid(u, fm)?;
    check_non_negative("f_plus", fp)?;
    check_non_negative("f_minus", fm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use proptest::prelude::*;

    fn s(eps: f64) -> Smoother {
        Smoother::new(eps).unwrap()
    }

    #[test]
    fn rejects_non_positive_width() {
        assert!(Smoother::new(0.0).is_err());
        assert!(Smoother::new(-1.0).is_err());
        assert!(Smoother::new(f64::NAN).is_err());
    }

    #[test]
    fn chi_values() {
        let sm = s(0.1);
        assert_eq!(sm.chi(0.0), 0.5);
        assert_eq!(sm.chi(0.1), 1.0);
        assert_eq!(sm.chi(-0.1), 0.0);
        assert!((sm.chi(0.05) - 0.84375).abs() < 1e-15);
    }

    #[test]
    fn chi_prime_values() {
        let sm = s(0.2);
        assert!((sm.chi_prime(0.0) - 3.0 / (4.0 * 0.2)).abs() < 1e-14);
        assert_eq!(sm.chi_prime(0.2), 0.0);
        assert_eq!(sm.chi_prime(-0.2), 0.0);
        let t = 0.3 * 0.2;
        let errs: Vec<f64> = [1e-3, 1e-4]
            .iter()
            .map(|&d| ((sm.chi(t + d) - sm.chi(t - d)) / (2.0 * d) - sm.chi_prime(t)).abs())
            .collect();
        // second order: error drops by ~100 when δ drops by 10
        assert!(errs[1] < errs[0] / 50.0 || errs[1] < 1e-10, "{errs:?}");
    }

    #[test]
    fn phi_int_values() {
        let eps = 0.3;
        let sm = s(eps);
        assert_eq!(sm.phi_int(-eps), 0.0);
        assert!((sm.phi_int(2.0 * eps) - 2.0 * eps).abs() < 1e-15);
        assert!((sm.phi_int(0.0) - 3.0 * eps / 16.0).abs() < 1e-15);
        assert!((sm.phi_int(eps) - eps).abs() < 1e-15);
    }

    #[test]
    fn phi_int_approximates_positive_part() {
        for &eps in &[0.5, 0.1, 0.01] {
            let sm = s(eps);
            let mut worst: f64 = 0.0;
            let mut arg = 0.0;
            for k in 0..=4000 {
                let t = -2.0 * eps + 4.0 * eps * k as f64 / 4000.0;
                let e = (sm.phi_int(t) - t.max(0.0)).abs();
                if e > worst {
                    worst = e;
                    arg = t;
                }
            }
            assert!(worst <= eps * 13.0 / 32.0);
            assert!(arg.abs() < eps);
            assert!((worst - 3.0 * eps / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_saturates_and_balances() {
        let g = Grid2D::unit_square(4).unwrap();
        let sm = s(0.1);
        let fp = ScalarField::constant(g, 2.0);
        let fm = ScalarField::constant(g, 3.0);
        let hi = sm.beta(&ScalarField::constant(g, 0.1), &fp, &fm).unwrap();
        assert!(hi.values().iter().all(|&v| v == 2.0));
        let lo = sm.beta(&ScalarField::constant(g, -0.5), &fp, &fm).unwrap();
        assert!(lo.values().iter().all(|&v| v == -3.0));
        let one = ScalarField::constant(g, 1.0);
        let zero = ScalarField::zeros(g);
        assert!(sm.beta(&zero, &one, &one).unwrap().max_abs() == 0.0);
        let bp = sm.beta_prime(&zero, &one, &one).unwrap();
        assert!(bp.values().iter().all(|&v| (v - 3.0 / (2.0 * 0.1)).abs() < 1e-12));
        let far = sm.beta_prime(&ScalarField::constant(g, -0.2), &one, &one).unwrap();
        assert_eq!(far.max_abs(), 0.0);
    }

    #[test]
    fn beta_rejects_negative_coefficients() {
        let g = Grid2D::unit_square(3).unwrap();
        let u = ScalarField::zeros(g);
        let bad = ScalarField::constant(g, -1.0);
        let ok = ScalarField::constant(g, 1.0);
        assert!(matches!(sm_beta(&u, &bad, &ok), Err(Error::Negative { name: "f_plus", .. })));
        assert!(matches!(sm_beta(&u, &ok, &bad), Err(Error::Negative { name: "f_minus", .. })));
    }

    fn sm_beta(u: &ScalarField, fp: &ScalarField, fm: &ScalarField) -> Result<ScalarField> {
        s(0.1).beta(u, fp, fm)
    }

    #[test]
    fn beta_prime_matches_directional_difference() {
        let g = Grid2D::unit_square(6).unwrap();
        let sm = s(0.25);
        let u = ScalarField::from_fn(g, |x, y| 0.4 * (7.0 * x).sin() * (3.0 * y + 0.2).cos()).unwrap();
        let fp = ScalarField::from_fn(g, |x, _| 1.0 + x).unwrap();
        let fm = ScalarField::from_fn(g, |_, y| 0.5 + y).unwrap();
        let bp = sm.beta_prime(&u, &fp, &fm).unwrap();
        let d = 1e-6;
        let up = u.map(|v| v + d);
        let um = u.map(|v| v - d);
        let fd = &(&sm.beta(&up, &fp, &fm).unwrap() - &sm.beta(&um, &fp, &fm).unwrap()) * (0.5 / d);
        assert!((&fd - &bp).max_abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn partition_of_unity(t in -3.0f64..3.0, eps in 1e-3f64..1.0) {
            let sm = s(eps);
            prop_assert!((sm.chi(t) + sm.chi(-t) - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn chi_is_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0, eps in 1e-3f64..1.0) {
            let sm = s(eps);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(sm.chi(hi) >= sm.chi(lo));
            prop_assert!((0.0..=1.0).contains(&sm.chi(a)));
            prop_assert!(sm.chi_prime(a) >= 0.0);
        }

        #[test]
        fn phi_int_derivative_is_chi(t in -1.5f64..1.5, eps in 0.05f64..1.0) {
            let sm = s(eps);
            let d = 1e-5;
            let fd = (sm.phi_int(t + d) - sm.phi_int(t - d)) / (2.0 * d);
            prop_assert!((fd - sm.chi(t)).abs() < 1e-6);
        }

        #[test]
        fn beta_is_nondecreasing(u0 in -1.0f64..1.0, du in 0.0f64..0.5, p in 0.0f64..3.0, m in 0.0f64..3.0) {
            let g = Grid2D::unit_square(3).unwrap();
            let sm = s(0.2);
            let fp = ScalarField::constant(g, p);
            let fm = ScalarField::constant(g, m);
            let b0 = sm.beta(&ScalarField::constant(g, u0), &fp, &fm).unwrap();
            let b1 = sm.beta(&ScalarField::constant(g, u0 + du), &fp, &fm).unwrap();
            prop_assert!(b1.values()[0] >= b0.values()[0]);
        }
    }
}
