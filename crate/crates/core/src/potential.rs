//! Logarithmic Flory-Huggins machinery of the modified Crank-Nicolson step.
//!
//! With `G(x) = x ln x`, the secant slope `F_a(x) = (G(x) - G(a)) / (x - a)`
//! replaces the derivative of the entropy part. It is evaluated as
//! `ln x + ln(1 + t) / t` with `t = (x - a)/a`, which has no cancellation
//! away from the diagonal; within `diag_switch_tol` of the diagonal a
//! three-term Taylor expansion is used instead.

use serde::{Deserialize, Serialize};

use crate::error::{ChnsError, Result};
use crate::grid::{lap, BcMode, Field, Stagger};

/// Singular regularization added to the chemical potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// `N(phi) = ln(1 + phi) - ln(1 - phi)`
    LogDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub theta0: f64,
    pub eps: f64,
    pub reg_kind: Regularization,
    pub diag_switch_tol: f64,
}

impl PotentialParams {
    pub fn new(theta0: f64, eps: f64) -> Self {
        PotentialParams {
            theta0,
            eps,
            reg_kind: Regularization::LogDifference,
            diag_switch_tol: 1e-7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0 && self.theta0.is_finite()) {
            return Err(ChnsError::config("theta0", "must be positive"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(ChnsError::config("eps", "must be positive"));
        }
        if !(self.diag_switch_tol > 0.0 && self.diag_switch_tol <= 1e-4) {
            return Err(ChnsError::config("diag_switch_tol", "must lie in (0, 1e-4]"));
        }
        Ok(())
    }
}

/// Relative distance from the diagonal below which the derivative of `F_a`
/// switches to its series. The closed form loses about `1e-16 / t` relative
/// accuracy, so this threshold is much larger than the one for `F_a` itself.
const DERIV_SERIES_TOL: f64 = 1e-3;

fn check_domain(a: f64, x: f64) -> Result<()> {
    if a > 0.0 && x > 0.0 && a.is_finite() && x.is_finite() {
        Ok(())
    } else {
        Err(ChnsError::Domain { a, x })
    }
}

/// `F_a(x)` with the default switch tolerance.
pub fn f_diffquot(a: f64, x: f64) -> Result<f64> {
    f_diffquot_tol(a, x, 1e-7)
}

pub fn f_diffquot_tol(a: f64, x: f64, diag_switch_tol: f64) -> Result<f64> {
    check_domain(a, x)?;
    Ok(f_diffquot_unchecked(a, x, diag_switch_tol))
}

#[inline]
fn f_diffquot_unchecked(a: f64, x: f64, tol: f64) -> f64 {
    let d = x - a;
    if d.abs() < tol * a.max(x) {
        let r = d / a;
        a.ln() + 1.0 + r * (0.5 - r / 6.0)
    } else {
        let t = d / a;
        x.ln() + t.ln_1p() / t
    }
}

/// `F_a'(x)`, nonnegative for all positive arguments.
pub fn f_diffquot_dx(a: f64, x: f64) -> Result<f64> {
    check_domain(a, x)?;
    Ok(f_diffquot_dx_unchecked(a, x))
}

#[inline]
fn f_diffquot_dx_unchecked(a: f64, x: f64) -> f64 {
    let t = (x - a) / a;
    if t.abs() < DERIV_SERIES_TOL {
        // (t - ln(1+t)) / t^2 = 1/2 - t/3 + t^2/4 - t^3/5 + t^4/6
        let s = 0.5 + t * (-1.0 / 3.0 + t * (0.25 + t * (-0.2 + t / 6.0)));
        s / a
    } else {
        (t - t.ln_1p()) / (t * t * a)
    }
}

fn check_phase(phi: f64, i: usize, j: usize) -> Result<()> {
    if phi.abs() < 1.0 {
        Ok(())
    } else {
        Err(ChnsError::OutOfBounds { value: phi, i, j })
    }
}

/// `N(phi) = ln(1 + phi) - ln(1 - phi)`
pub fn n_reg(phi: f64) -> Result<f64> {
    check_phase(phi, 0, 0)?;
    Ok(phi.ln_1p() - (-phi).ln_1p())
}

/// `N'(phi) = 1/(1 + phi) + 1/(1 - phi)`
pub fn n_reg_prime(phi: f64) -> Result<f64> {
    check_phase(phi, 0, 0)?;
    Ok(2.0 / ((1.0 - phi) * (1.0 + phi)))
}

/// Errors with the first cell whose value is not strictly inside (-1, 1).
pub fn check_bounds(phi: &Field) -> Result<()> {
    let n = phi.n() as isize;
    for j in 0..n {
        for i in 0..n {
            let v = phi.get(i, j);
            if !(v.abs() < 1.0) {
                return Err(ChnsError::OutOfBounds {
                    value: v,
                    i: i as usize,
                    j: j as usize,
                });
            }
        }
    }
    Ok(())
}

fn pointwise(a: &Field, b: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
    let mut out = Field::cell(a.n());
    let n = a.n() as isize;
    for j in 0..n {
        for i in 0..n {
            out.set(i, j, f(a.get(i, j), b.get(i, j)));
        }
    }
    out
}

/// Chemical potential at the half step:
///
/// `F_{1+phi_n}(1+phi_next) - F_{1-phi_n}(1-phi_next) - theta0 (3/2 phi_n - 1/2 phi_nm1)
///  - eps^2 lap(3/4 phi_next + 1/4 phi_nm1) + tau (N(phi_next) - N(phi_n))`.
///
/// The result is ghost-filled for `bc`.
pub fn chemical_potential(
    phi_next: &Field,
    phi_n: &Field,
    phi_nm1: &Field,
    tau: f64,
    params: &PotentialParams,
    bc: BcMode,
) -> Result<Field> {
    check_bounds(phi_next)?;
    check_bounds(phi_n)?;
    check_bounds(phi_nm1)?;
    let tol = params.diag_switch_tol;
    let theta0 = params.theta0;
    let log_part = pointwise(phi_next, phi_n, |p1, p0| {
        let plus = f_diffquot_unchecked(1.0 + p0, 1.0 + p1, tol);
        let minus = f_diffquot_unchecked(1.0 - p0, 1.0 - p1, tol);
        let reg = (p1.ln_1p() - (-p1).ln_1p()) - (p0.ln_1p() - (-p0).ln_1p());
        plus - minus + tau * reg
    });
    let mut surf = Field::lin_comb(0.75, phi_next, 0.25, phi_nm1);
    surf.fill_ghosts(bc);
    let surf_lap = lap(&surf);
    let eps2 = params.eps * params.eps;
    let mut mu = Field::cell(phi_n.n());
    let n = phi_n.n() as isize;
    for j in 0..n {
        for i in 0..n {
            let ext = 1.5 * phi_n.get(i, j) - 0.5 * phi_nm1.get(i, j);
            mu.set(i, j, log_part.get(i, j) - theta0 * ext - eps2 * surf_lap.get(i, j));
        }
    }
    mu.fill_ghosts(bc);
    Ok(mu)
}

/// Newton linearization of [`chemical_potential`] in `phi_next`: a positive
/// pointwise diagonal plus the constant operator `-coef_neg_lap * lap`.
#[derive(Clone, Debug)]
pub struct MuLinearization {
    pub diagonal: Field,
    /// `3/4 eps^2`, the coefficient of `-lap`.
    pub coef_neg_lap: f64,
}

impl MuLinearization {
    /// Applies the linearization to a direction `d` (ghost-filled result).
    pub fn apply(&self, d: &Field, bc: BcMode) -> Field {
        let dg = d.clone().with_ghosts(bc);
        let l = lap(&dg);
        let mut out = Field::lin_comb(1.0, &self.diagonal.mul_elem(&dg), -self.coef_neg_lap, &l);
        out.fill_ghosts(bc);
        out
    }
}

pub fn chemical_potential_linearization(
    phi_next: &Field,
    phi_n: &Field,
    tau: f64,
    params: &PotentialParams,
) -> Result<MuLinearization> {
    check_bounds(phi_next)?;
    check_bounds(phi_n)?;
    let diagonal = pointwise(phi_next, phi_n, |p1, p0| {
        f_diffquot_dx_unchecked(1.0 + p0, 1.0 + p1)
            + f_diffquot_dx_unchecked(1.0 - p0, 1.0 - p1)
            + tau * 2.0 / ((1.0 - p1) * (1.0 + p1))
    });
    debug_assert_eq!(diagonal.stagger(), Stagger::Cell);
    Ok(MuLinearization {
        diagonal,
        coef_neg_lap: 0.75 * params.eps * params.eps,
    })
}

/// `(1 + phi) ln(1 + phi) + (1 - phi) ln(1 - phi)`, with `0 ln 0 = 0`.
pub fn entropy_density(phi: f64) -> f64 {
    xlogx(1.0 + phi) + xlogx(1.0 - phi)
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_value_is_ln_a_plus_one() {
        for a in [0.5, 1.0, 1.7] {
            assert!((f_diffquot(a, a).unwrap() - (a.ln() + 1.0)).abs() < 1e-15);
        }
        assert_eq!(f_diffquot(1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn off_diagonal_quotient() {
        let v = f_diffquot(1.5, 0.5).unwrap();
        let direct = (0.5 * 0.5f64.ln() - 1.5 * 1.5f64.ln()) / (0.5 - 1.5);
        assert!((v - direct).abs() < 1e-14, "{v}");
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(f_diffquot(0.0, 1.0), Err(ChnsError::Domain { .. })));
        assert!(matches!(f_diffquot_dx(1.0, -0.1), Err(ChnsError::Domain { .. })));
        assert!(matches!(n_reg(1.0), Err(ChnsError::OutOfBounds { .. })));
    }

    #[test]
    fn derivative_diagonal_limit() {
        for a in [0.3, 1.0, 1.9] {
            assert!((f_diffquot_dx(a, a).unwrap() - 0.5 / a).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let (a, x, s) = (1.2, 0.7, 1e-5);
        let fd = (f_diffquot(a, x + s).unwrap() - f_diffquot(a, x - s).unwrap()) / (2.0 * s);
        let d = f_diffquot_dx(a, x).unwrap();
        assert!((fd - d).abs() < 1e-8, "{fd} vs {d}");
    }

    #[test]
    fn derivative_branches_agree_at_switch() {
        let a = 0.8;
        for t in [DERIV_SERIES_TOL * (1.0 - 1e-3), -DERIV_SERIES_TOL * (1.0 - 1e-3)] {
            let x = a * (1.0 + t);
            let tt = (x - a) / a;
            let closed = (tt - tt.ln_1p()) / (tt * tt * a);
            let series = f_diffquot_dx(a, x).unwrap();
            assert!((closed - series).abs() < 1e-12 * series, "{closed} {series}");
        }
    }

    #[test]
    fn regularization_values() {
        assert_eq!(n_reg(0.0).unwrap(), 0.0);
        assert_eq!(n_reg_prime(0.0).unwrap(), 2.0);
        assert!((n_reg(0.5).unwrap() - 3f64.ln()).abs() < 1e-15);
        for p in [0.1, 0.55, 0.99] {
            assert_eq!(n_reg(-p).unwrap(), -n_reg(p).unwrap());
        }
    }

    #[test]
    fn chemical_potential_of_zero_fields_vanishes() {
        let z = Field::cell(6);
        let p = PotentialParams::new(3.0, 0.1);
        let mu = chemical_potential(&z, &z, &z, 0.01, &p, BcMode::Periodic).unwrap();
        assert!(mu.max_abs() < 1e-15);
    }

    #[test]
    fn chemical_potential_of_constant_fields() {
        let c = 0.37;
        let f = Field::constant(6, Stagger::Cell, c);
        let p = PotentialParams::new(3.0, 0.1);
        let mu = chemical_potential(&f, &f, &f, 0.01, &p, BcMode::PhysicalNeumannFreeSlip).unwrap();
        let expected = ((1.0 + c) / (1.0 - c)).ln() - 3.0 * c;
        assert!((mu.get(2, 3) - expected).abs() < 1e-13);
    }

    #[test]
    fn linearization_at_origin_is_identity_diagonal() {
        let z = Field::cell(4);
        let lin = chemical_potential_linearization(&z, &z, 0.0, &PotentialParams::new(3.0, 0.1)).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                assert!((lin.diagonal.get(i, j) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn entropy_density_limits() {
        assert_eq!(entropy_density(0.0), 0.0);
        assert!((entropy_density(1.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(entropy_density(-1.0).is_finite());
    }

    #[test]
    fn validate_rejects_bad_switch() {
        let mut p = PotentialParams::new(3.0, 0.1);
        p.diag_switch_tol = 1e-3;
        assert!(p.validate().is_err());
    }
}
