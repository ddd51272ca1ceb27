//! Manufactured-solution harness and error functionals.
//!
//! The exact solution is
//!
//! ```text
//! phi = 0.5 sin(2 pi x) cos(2 pi y) cos t + 0.1
//! u   = -cos t cos(2 pi x) sin(2 pi y)
//! v   =  cos t sin(2 pi x) cos(2 pi y)
//! p   =  sin t sin(2 pi x)
//! ```
//!
//! on the periodic unit square. Forcing terms are the continuous residuals
//! of the PDE system at the exact solution, sampled on the grid.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChnsError, Result};
use crate::grid::{grad, grad_norm_sq, lap, mean_c, norm_l2_vec, BcMode, Field, MacVelocity, Stagger};
use crate::scheme::{SchemeParams, SimState, SourceTerms, StepDiagnostics, Stepper};

const K: f64 = 2.0 * PI;

/// Closed forms of the manufactured solution and its forcing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsFields {
    pub eps: f64,
    pub theta0: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl MmsFields {
    pub fn from_params(p: &SchemeParams) -> Self {
        MmsFields {
            eps: p.eps,
            theta0: p.theta0,
            gamma: p.gamma,
            nu: p.nu,
        }
    }

    pub fn phi(&self, x: f64, y: f64, t: f64) -> f64 {
        0.5 * (K * x).sin() * (K * y).cos() * t.cos() + 0.1
    }

    pub fn u(&self, x: f64, y: f64, t: f64) -> f64 {
        -t.cos() * (K * x).cos() * (K * y).sin()
    }

    pub fn v(&self, x: f64, y: f64, t: f64) -> f64 {
        t.cos() * (K * x).sin() * (K * y).cos()
    }

    pub fn p(&self, x: f64, y: f64, t: f64) -> f64 {
        let _ = y;
        t.sin() * (K * x).sin()
    }

    fn phi_grad(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let a = 0.5 * K * t.cos();
        (a * (K * x).cos() * (K * y).cos(), -a * (K * x).sin() * (K * y).sin())
    }

    /// `mu = ln(1+phi) - ln(1-phi) - theta0 phi - eps^2 lap(phi)`.
    pub fn mu(&self, x: f64, y: f64, t: f64) -> f64 {
        let phi = self.phi(x, y, t);
        let lap_phi = -2.0 * K * K * (phi - 0.1);
        phi.ln_1p() - (-phi).ln_1p() - self.theta0 * phi - self.eps * self.eps * lap_phi
    }

    /// `grad mu`; all derivatives of `phi` are multiples of `grad phi` here.
    fn mu_grad(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let phi = self.phi(x, y, t);
        let lp = 2.0 / (1.0 - phi * phi);
        let c = lp - self.theta0 + 2.0 * K * K * self.eps * self.eps;
        let (gx, gy) = self.phi_grad(x, y, t);
        (c * gx, c * gy)
    }

    /// Phase forcing `phi_t + div(phi u) - lap(mu)`.
    pub fn source_phi(&self, x: f64, y: f64, t: f64) -> f64 {
        let phi = self.phi(x, y, t);
        let psi = phi - 0.1;
        let phi_t = -0.5 * (K * x).sin() * (K * y).cos() * t.sin();
        let (gx, gy) = self.phi_grad(x, y, t);
        let transport = self.u(x, y, t) * gx + self.v(x, y, t) * gy;
        let q = 1.0 - phi * phi;
        let (l1, l2) = (2.0 / q, 4.0 * phi / (q * q));
        let lap_phi = -2.0 * K * K * psi;
        let bilap_phi = 4.0 * K.powi(4) * psi;
        let lap_mu = l1 * lap_phi + l2 * (gx * gx + gy * gy) - self.theta0 * lap_phi - self.eps * self.eps * bilap_phi;
        phi_t + transport - lap_mu
    }

    /// Momentum forcing `u_t + u.grad u + grad p - nu lap u + gamma phi grad mu`.
    pub fn source_u(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let (sx, cx) = (K * x).sin_cos();
        let (sy, cy) = (K * y).sin_cos();
        let (st, ct) = t.sin_cos();
        let (u, v) = (self.u(x, y, t), self.v(x, y, t));
        let phi = self.phi(x, y, t);
        let (mx, my) = self.mu_grad(x, y, t);

        let u_t = st * cx * sy;
        let u_x = K * ct * sx * sy;
        let u_y = -K * ct * cx * cy;
        let v_t = -st * sx * cy;
        let v_x = K * ct * cx * cy;
        let v_y = -K * ct * sx * sy;
        let p_x = K * st * cx;
        let lap_u = -2.0 * K * K * u;
        let lap_v = -2.0 * K * K * v;

        let fx = u_t + u * u_x + v * u_y + p_x - self.nu * lap_u + self.gamma * phi * mx;
        let fy = v_t + u * v_x + v * v_y - self.nu * lap_v + self.gamma * phi * my;
        (fx, fy)
    }
}

/// Exact `(phi, u, p)` sampled at the staggered points at time `t`.
pub fn mms_exact(mms: &MmsFields, n: usize, t: f64) -> (Field, MacVelocity, Field) {
    let bc = BcMode::Periodic;
    let phi = Field::from_fn(n, Stagger::Cell, |x, y| mms.phi(x, y, t)).with_ghosts(bc);
    let u = MacVelocity::from_fns(n, |x, y| mms.u(x, y, t), |x, y| mms.v(x, y, t)).with_ghosts(bc);
    let p = Field::from_fn(n, Stagger::Cell, |x, y| mms.p(x, y, t)).with_ghosts(bc);
    (phi, u, p)
}

/// Forcing for the stepper on an `n x n` periodic grid. The sampled phase
/// forcing has its discrete mean removed so that mass is conserved exactly.
pub fn mms_sources(mms: &MmsFields, n: usize) -> SourceTerms {
    let m = *mms;
    let phase = Arc::new(move |t: f64| {
        let mut s = Field::from_fn(n, Stagger::Cell, |x, y| m.source_phi(x, y, t));
        let mean = mean_c(&s);
        s.add_constant(-mean);
        s.with_ghosts(BcMode::Periodic)
    });
    let momentum = Arc::new(move |t: f64| {
        MacVelocity::from_fns(n, |x, y| m.source_u(x, y, t).0, |x, y| m.source_u(x, y, t).1)
            .with_ghosts(BcMode::Periodic)
    });
    let exact = Arc::new(move |t: f64| mms_exact(&m, n, t));
    SourceTerms {
        phase: Some(phase),
        momentum: Some(momentum),
        exact: Some(exact),
    }
}

/// Errors of one state against exact samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSnapshot {
    /// `||grad_h (phi_e - phi)||_2`
    pub phi_h1: f64,
    /// `||u_e - u||_2`
    pub u_l2: f64,
    /// `||grad_h (p_e - p)||_2`
    pub p_h1: f64,
    /// `||grad_h lap_h (phi_e - phi)||_2`
    pub phi_h3: f64,
}

pub fn error_snapshot(
    phi: &Field,
    u: &MacVelocity,
    p: &Field,
    exact: &(Field, MacVelocity, Field),
    bc: BcMode,
) -> ErrorSnapshot {
    let ephi = (&exact.0 - phi).with_ghosts(bc);
    let eu = &exact.1 - u;
    let ep = (&exact.2 - p).with_ghosts(bc);
    let lap_e = lap(&ephi).with_ghosts(bc);
    ErrorSnapshot {
        phi_h1: grad_norm_sq(&ephi).sqrt(),
        u_l2: norm_l2_vec(&eu),
        p_h1: grad_norm_sq(&ep).sqrt(),
        phi_h3: norm_l2_vec(&grad(&lap_e)),
    }
}

/// Accumulates the error functionals over a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTracker {
    pub eps: f64,
    pub tau: f64,
    pub max_phi_h1: f64,
    pub max_u_l2: f64,
    /// `sum_m ||grad_h lap_h phi~^m||^2`
    pub sum_phi_h3_sq: f64,
    pub last: ErrorSnapshot,
}

impl ErrorTracker {
    pub fn new(eps: f64, tau: f64) -> Self {
        ErrorTracker {
            eps,
            tau,
            ..Default::default()
        }
    }

    pub fn record(&mut self, e: ErrorSnapshot) {
        self.max_phi_h1 = self.max_phi_h1.max(e.phi_h1);
        self.max_u_l2 = self.max_u_l2.max(e.u_l2);
        self.sum_phi_h3_sq += e.phi_h3 * e.phi_h3;
        self.last = e;
    }

    /// `((eps^2/8) tau sum ||grad_h lap_h phi~||^2)^(1/2)`
    pub fn dissipation_part(&self) -> f64 {
        (self.eps * self.eps / 8.0 * self.tau * self.sum_phi_h3_sq).sqrt()
    }

    /// Time-maximum phase and velocity errors plus the dissipation part.
    pub fn composite(&self) -> f64 {
        self.max_phi_h1 + self.max_u_l2 + self.dissipation_part()
    }
}

/// Result of one manufactured-solution run.
#[derive(Clone, Debug)]
pub struct MmsRun {
    pub n: usize,
    pub tau: f64,
    pub steps: usize,
    pub tracker: ErrorTracker,
    pub final_state: SimState,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Runs the manufactured solution for `steps` steps with the given
/// parameters; `params.bc` is forced to periodic.
pub fn run_mms(params: &SchemeParams, steps: usize) -> Result<MmsRun> {
    let mut prm = params.clone();
    prm.bc = BcMode::Periodic;
    let n = prm.n;
    let mms = MmsFields::from_params(&prm);
    let stepper = Stepper::new(prm.clone())?;
    let sources = mms_sources(&mms, n);
    let (phi0, u0, _) = mms_exact(&mms, n, 0.0);
    let mut state = stepper.init_history(&phi0, &u0, &sources)?;
    let mut tracker = ErrorTracker::new(prm.eps, prm.tau);
    let mut diagnostics = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, diag) = stepper.step(&state, &sources)?;
        state = next;
        let exact = mms_exact(&mms, n, state.time);
        tracker.record(error_snapshot(&state.phi, &state.u, &state.p, &exact, BcMode::Periodic));
        diagnostics.push(diag);
    }
    Ok(MmsRun {
        n,
        tau: prm.tau,
        steps,
        tracker,
        final_state: state,
        diagnostics,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: u32,
    pub h: f64,
    pub tau: f64,
    pub err_phi_h1: f64,
    pub err_u_l2: f64,
    pub err_p_h1: f64,
    pub composite: f64,
    /// Observed orders against the previous (coarser) row.
    pub order_phi: Option<f64>,
    pub order_u: Option<f64>,
    pub order_p: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

impl RateTable {
    /// Builds the table from `(k, run)` pairs in ascending `k`, using final
    /// time errors for the three fields.
    pub fn from_runs(runs: &[(u32, &MmsRun)]) -> Self {
        let mut rows: Vec<RateRow> = Vec::with_capacity(runs.len());
        for (k, run) in runs {
            let last = run.tracker.last;
            let mut row = RateRow {
                k: *k,
                h: 1.0 / run.n as f64,
                tau: run.tau,
                err_phi_h1: last.phi_h1,
                err_u_l2: last.u_l2,
                err_p_h1: last.p_h1,
                composite: run.tracker.composite(),
                order_phi: None,
                order_u: None,
                order_p: None,
            };
            if let Some(prev) = rows.last() {
                row.order_phi = Some(order(prev.err_phi_h1, row.err_phi_h1));
                row.order_u = Some(order(prev.err_u_l2, row.err_u_l2));
                row.order_p = Some(order(prev.err_p_h1, row.err_p_h1));
            }
            rows.push(row);
        }
        RateTable { rows }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

pub(crate) fn csv_error(e: csv::Error) -> ChnsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ChnsError::Io(io),
        other => ChnsError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Runs every level `k` (with `n = 2^k` and `tau = tau_over_h / n`) to
/// `t_final` in parallel and tabulates the observed orders.
pub fn convergence_study(levels: &[u32], t_final: f64, tau_over_h: f64, base: &SchemeParams) -> Result<RateTable> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ChnsError::config("levels", "must be strictly increasing"));
    }
    if !(t_final > 0.0) {
        return Err(ChnsError::config("t_final", "must be positive"));
    }
    let runs: Vec<Result<MmsRun>> = levels
        .par_iter()
        .map(|&k| {
            let n = 1usize << k;
            let tau = tau_over_h / n as f64;
            let steps = (t_final / tau).round() as usize;
            let prm = SchemeParams {
                n,
                tau,
                bc: BcMode::Periodic,
                ..base.clone()
            };
            run_mms(&prm, steps).map_err(|e| {
                log::error!("level k = {k} failed: {e}");
                e
            })
        })
        .collect();
    let runs: Vec<MmsRun> = runs.into_iter().collect::<Result<_>>()?;
    let pairs: Vec<(u32, &MmsRun)> = levels.iter().copied().zip(runs.iter()).collect();
    Ok(RateTable::from_runs(&pairs))
}

/// Invariant monitors of a state; see [`Stepper::monitor`].
pub fn monitor(stepper: &Stepper, state: &SimState) -> Result<StepDiagnostics> {
    stepper.monitor(state)
}
