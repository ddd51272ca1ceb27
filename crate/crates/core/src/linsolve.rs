//! Matrix-free Krylov solvers over grid fields.
//!
//! Operators are plain callbacks. A solve never assembles a matrix; the only
//! structure a solver may exploit is the optional preconditioner attached to
//! the operator.

use std::fmt;

use crate::error::{ChnsError, Result};
use crate::grid::{inner, inner_vec, mean_c, Field, MacVelocity, Stagger};

/// Vector space operations the Krylov solvers need.
pub trait KrylovVector: Clone {
    fn dot(&self, other: &Self) -> f64;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn zeros_like(&self) -> Self;
    /// Elementwise `self / d`, with zero wherever `d` vanishes.
    fn div_elem(&self, d: &Self) -> Self;
    /// Subtracts the mean. Only cell fields have a mean; others are untouched.
    fn remove_mean(&mut self) {}
    fn mean(&self) -> f64 {
        0.0
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl KrylovVector for Field {
    fn dot(&self, other: &Self) -> f64 {
        inner(self, other)
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        Field::axpy(self, a, x);
    }

    fn scale(&mut self, a: f64) {
        Field::scale(self, a);
    }

    fn zeros_like(&self) -> Self {
        Field::zeros(self.n(), self.stagger())
    }

    fn div_elem(&self, d: &Self) -> Self {
        self.zip_map(d, |a, b| if b != 0.0 { a / b } else { 0.0 })
    }

    fn remove_mean(&mut self) {
        if self.stagger() == Stagger::Cell {
            let m = mean_c(self);
            self.add_constant(-m);
        }
    }

    fn mean(&self) -> f64 {
        if self.stagger() == Stagger::Cell {
            mean_c(self)
        } else {
            0.0
        }
    }
}

impl KrylovVector for MacVelocity {
    fn dot(&self, other: &Self) -> f64 {
        inner_vec(self, other)
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        MacVelocity::axpy(self, a, x);
    }

    fn scale(&mut self, a: f64) {
        MacVelocity::scale(self, a);
    }

    fn zeros_like(&self) -> Self {
        MacVelocity::zeros(self.n())
    }

    fn div_elem(&self, d: &Self) -> Self {
        MacVelocity {
            x: self.x.div_elem(&d.x),
            y: self.y.div_elem(&d.y),
        }
    }
}

pub enum Preconditioner<'a, V> {
    Identity,
    /// Jacobi scaling by the given diagonal.
    Diagonal(V),
    Custom(Box<dyn Fn(&V) -> V + 'a>),
}

/// A linear map given by a callback, plus what the solvers may know about it.
pub struct LinearOperator<'a, V> {
    apply: Box<dyn Fn(&V) -> V + 'a>,
    pub symmetric: bool,
    precond: Preconditioner<'a, V>,
}

impl<'a, V: KrylovVector> LinearOperator<'a, V> {
    pub fn new(apply: impl Fn(&V) -> V + 'a, symmetric: bool) -> Self {
        LinearOperator {
            apply: Box::new(apply),
            symmetric,
            precond: Preconditioner::Identity,
        }
    }

    pub fn with_diagonal(mut self, diagonal: V) -> Self {
        self.precond = Preconditioner::Diagonal(diagonal);
        self
    }

    pub fn with_preconditioner(mut self, p: impl Fn(&V) -> V + 'a) -> Self {
        self.precond = Preconditioner::Custom(Box::new(p));
        self
    }

    pub fn apply(&self, v: &V) -> V {
        (self.apply)(v)
    }

    fn precondition(&self, r: &V) -> V {
        match &self.precond {
            Preconditioner::Identity => r.clone(),
            Preconditioner::Diagonal(d) => r.div_elem(d),
            Preconditioner::Custom(p) => p(r),
        }
    }

    fn residual(&self, x: &V, rhs: &V) -> V {
        let mut r = rhs.clone();
        r.axpy(-1.0, &self.apply(x));
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||op(x) - rhs|| / ||rhs||`, recomputed from the returned solution.
    pub final_residual: f64,
    pub converged: bool,
    pub restarted: bool,
}

impl SolveReport {
    fn trivial() -> Self {
        SolveReport {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            restarted: false,
        }
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}{}",
            self.iterations,
            self.final_residual,
            if self.restarted { ", restarted" } else { "" }
        )
    }
}

/// Preconditioned conjugate gradients for symmetric positive (semi)definite
/// operators. With `project_mean` the iteration runs in the mean-zero
/// subspace, which is how the constant nullspace of the Neumann and periodic
/// Laplacians is handled.
pub fn solve_spd<V: KrylovVector>(
    op: &LinearOperator<'_, V>,
    rhs: &V,
    tol: f64,
    max_iter: usize,
    project_mean: bool,
) -> Result<(V, SolveReport)> {
    let bnorm = rhs.norm();
    if project_mean {
        let m = rhs.mean();
        let allowed = 1e-12 * bnorm.max(f64::MIN_POSITIVE);
        if m.abs() > allowed {
            return Err(ChnsError::NonZeroMean { mean: m, tol: allowed });
        }
    }
    let mut x = rhs.zeros_like();
    if bnorm == 0.0 {
        return Ok((x, SolveReport::trivial()));
    }
    let target = tol * bnorm;

    let mut r = rhs.clone();
    if project_mean {
        r.remove_mean();
    }
    let mut iterations = 0;
    let mut restarted = false;
    'outer: loop {
        let mut z = op.precondition(&r);
        if project_mean {
            z.remove_mean();
        }
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        while iterations < max_iter {
            iterations += 1;
            let q = op.apply(&p);
            let pq = p.dot(&q);
            if pq <= 0.0 || !pq.is_finite() {
                break 'outer;
            }
            let alpha = rz / pq;
            x.axpy(alpha, &p);
            r.axpy(-alpha, &q);
            if project_mean {
                r.remove_mean();
            }
            if r.norm() <= target {
                // confirm with the true residual before stopping
                let mut rt = op.residual(&x, rhs);
                if project_mean {
                    rt.remove_mean();
                }
                if rt.norm() <= target {
                    break 'outer;
                }
                r = rt;
                restarted = true;
                continue 'outer;
            }
            z = op.precondition(&r);
            if project_mean {
                z.remove_mean();
            }
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            let mut p_new = z;
            p_new.axpy(beta, &p);
            p = p_new;
        }
        break;
    }
    if project_mean {
        x.remove_mean();
    }
    let final_residual = op.residual(&x, rhs).norm() / bnorm;
    let report = SolveReport {
        iterations,
        final_residual,
        converged: final_residual <= tol,
        restarted,
    };
    if report.converged {
        Ok((x, report))
    } else {
        Err(ChnsError::NoConvergence(report))
    }
}

/// Right-preconditioned BiCGSTAB for nonsymmetric operators. A breakdown
/// triggers one restart from the current iterate with a fresh shadow
/// residual; a second breakdown is an error.
pub fn solve_general<V: KrylovVector>(
    op: &LinearOperator<'_, V>,
    rhs: &V,
    tol: f64,
    max_iter: usize,
) -> Result<(V, SolveReport)> {
    let bnorm = rhs.norm();
    let mut x = rhs.zeros_like();
    if bnorm == 0.0 {
        return Ok((x, SolveReport::trivial()));
    }
    let target = tol * bnorm;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut r = rhs.clone();

    'outer: loop {
        let shadow = r.clone();
        let shadow_norm = shadow.norm();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = rhs.zeros_like();
        let mut p = rhs.zeros_like();
        let mut breakdown = false;

        while iterations < max_iter {
            iterations += 1;
            let rho_new = shadow.dot(&r);
            if rho_new.abs() <= 1e-300_f64.max(1e-15 * shadow_norm * r.norm()) {
                breakdown = true;
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            // p = r + beta (p - omega v)
            p.axpy(-omega, &v);
            p.scale(beta);
            p.axpy(1.0, &r);

            let p_hat = op.precondition(&p);
            v = op.apply(&p_hat);
            let sv = shadow.dot(&v);
            if sv == 0.0 || !sv.is_finite() {
                breakdown = true;
                break;
            }
            alpha = rho / sv;
            let mut s = r.clone();
            s.axpy(-alpha, &v);
            if s.norm() <= target {
                x.axpy(alpha, &p_hat);
                if finish_check(op, &mut x, rhs, target, &mut r) {
                    break 'outer;
                }
                continue 'outer;
            }
            let s_hat = op.precondition(&s);
            let t = op.apply(&s_hat);
            let tt = t.dot(&t);
            if tt == 0.0 || !tt.is_finite() {
                breakdown = true;
                break;
            }
            omega = t.dot(&s) / tt;
            x.axpy(alpha, &p_hat);
            x.axpy(omega, &s_hat);
            r = s;
            r.axpy(-omega, &t);
            if r.norm() <= target {
                if finish_check(op, &mut x, rhs, target, &mut r) {
                    break 'outer;
                }
                continue 'outer;
            }
            if omega == 0.0 {
                breakdown = true;
                break;
            }
        }

        if breakdown {
            r = op.residual(&x, rhs);
            if r.norm() <= target {
                break;
            }
            restarts += 1;
            if restarts > 1 {
                let report = SolveReport {
                    iterations,
                    final_residual: r.norm() / bnorm,
                    converged: false,
                    restarted: true,
                };
                return Err(ChnsError::Breakdown(report));
            }
            continue;
        }
        break;
    }

    let final_residual = op.residual(&x, rhs).norm() / bnorm;
    let report = SolveReport {
        iterations,
        final_residual,
        converged: final_residual <= tol,
        restarted: restarts > 0,
    };
    if report.converged {
        Ok((x, report))
    } else {
        Err(ChnsError::NoConvergence(report))
    }
}

fn finish_check<V: KrylovVector>(op: &LinearOperator<'_, V>, x: &mut V, rhs: &V, target: f64, r: &mut V) -> bool {
    *r = op.residual(x, rhs);
    r.norm() <= target
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lap, BcMode};

    fn neg_lap(bc: BcMode) -> impl Fn(&Field) -> Field {
        move |f: &Field| {
            let g = f.clone().with_ghosts(bc);
            &lap(&g) * -1.0
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let op = LinearOperator::new(neg_lap(BcMode::Periodic), true);
        let b = Field::cell(8);
        let (x, rep) = solve_spd(&op, &b, 1e-10, 100, true).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x.max_abs(), 0.0);
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let op = LinearOperator::new(|f: &Field| f.clone(), true);
        let b = Field::from_fn(6, Stagger::Cell, |x, y| x + y * y);
        let (x, rep) = solve_spd(&op, &b, 1e-12, 10, false).unwrap();
        assert!(rep.iterations <= 1);
        assert!((&x - &b).max_abs() < 1e-14);
    }

    #[test]
    fn periodic_eigenpair_is_inverted() {
        let n = 16;
        let h = 1.0 / n as f64;
        let b = Field::from_fn(n, Stagger::Cell, |x, _| (2.0 * std::f64::consts::PI * x).cos());
        let lam = 4.0 / (h * h) * (std::f64::consts::PI * h).sin().powi(2);
        let op = LinearOperator::new(neg_lap(BcMode::Periodic), true);
        let (x, rep) = solve_spd(&op, &b, 1e-12, 1000, true).unwrap();
        assert!(rep.converged);
        let expected = &b * (1.0 / lam);
        assert!((&x - &expected).max_abs() < 1e-10 * expected.max_abs());
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let op = LinearOperator::new(neg_lap(BcMode::Periodic), true);
        let b = Field::constant(6, Stagger::Cell, 1.0);
        assert!(matches!(
            solve_spd(&op, &b, 1e-10, 100, true),
            Err(ChnsError::NonZeroMean { .. })
        ));
    }

    #[test]
    fn diagonal_operator_two_iterations() {
        let d = Field::from_fn(5, Stagger::Cell, |x, y| 1.0 + x + 2.0 * y);
        let dd = d.clone();
        let op = LinearOperator::new(move |f: &Field| f.mul_elem(&dd), false).with_diagonal(d.clone());
        let b = Field::from_fn(5, Stagger::Cell, |x, y| (x - y).sin() + 0.3);
        let (x, rep) = solve_general(&op, &b, 1e-12, 50).unwrap();
        assert!(rep.iterations <= 2, "{rep}");
        assert!((&x.mul_elem(&d) - &b).max_abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let op = LinearOperator::new(neg_lap(BcMode::PhysicalNeumannFreeSlip), true);
        let b = Field::from_fn(32, Stagger::Cell, |x, y| (9.0 * x).sin() * (5.0 * y).cos());
        let mut b = b;
        b.remove_mean();
        match solve_spd(&op, &b, 1e-14, 2, true) {
            Err(ChnsError::NoConvergence(rep)) => {
                assert_eq!(rep.iterations, 2);
                assert!(!rep.converged);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }
}
