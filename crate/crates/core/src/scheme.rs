//! Second-order modified Crank-Nicolson stepper.
//!
//! One step couples four pieces. A damped Newton solve for the phase field
//! sees the intermediate velocity frozen. A linear momentum solve sees the
//! chemical potential frozen. The two alternate until neither moves, and a
//! pressure-correction projection then makes the velocity divergence-free.

use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::discrete_ops::{convect_velocity, div_phi_u, phi_grad_mu, total_energy};
use crate::error::{ChnsError, Result};
use crate::grid::{
    div, grad, grad_norm_sq, inner, lap, lap_vec, mean_c, norm_l2, norm_l2_vec, BcMode, Field, MacVelocity, Stagger,
};
use crate::linsolve::{solve_general, solve_spd, LinearOperator, SolveReport};
use crate::potential::{
    check_bounds, chemical_potential, chemical_potential_linearization, PotentialParams, Regularization,
};
use crate::spectral::SpectralSolver;

/// Largest magnitude allowed for the Newton warm start.
const WARM_START_CLAMP: f64 = 1.0 - 1e-8;
/// Newton stops once the update is this small in max norm.
const NEWTON_STEP_TOL: f64 = 1e-13;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeParams {
    pub eps: f64,
    pub theta0: f64,
    pub gamma: f64,
    pub nu: f64,
    pub tau: f64,
    pub n: usize,
    pub bc: BcMode,
    pub reg_kind: Regularization,
    pub diag_switch_tol: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Relative tolerance of the momentum and Poisson solves.
    pub linear_tol: f64,
    /// Relative tolerance of each Newton correction solve.
    pub newton_linear_tol: f64,
    pub safety_fraction: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            eps: 0.05,
            theta0: 3.0,
            gamma: 1.0,
            nu: 1.0,
            tau: 1e-3,
            n: 64,
            bc: BcMode::PhysicalNeumannFreeSlip,
            reg_kind: Regularization::LogDifference,
            diag_switch_tol: 1e-7,
            newton_tol: 1e-10,
            newton_max: 50,
            outer_tol: 1e-10,
            outer_max: 50,
            linear_tol: 1e-12,
            newton_linear_tol: 1e-10,
            safety_fraction: 0.9,
        }
    }
}

impl SchemeParams {
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn potential(&self) -> PotentialParams {
        PotentialParams {
            theta0: self.theta0,
            eps: self.eps,
            reg_kind: self.reg_kind,
            diag_switch_tol: self.diag_switch_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("theta0", self.theta0),
            ("gamma", self.gamma),
            ("nu", self.nu),
            ("newton_tol", self.newton_tol),
            ("outer_tol", self.outer_tol),
            ("linear_tol", self.linear_tol),
            ("newton_linear_tol", self.newton_linear_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ChnsError::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ChnsError::config(
                "tau",
                format!("must lie in (0, 1), got {}", self.tau),
            ));
        }
        if self.n < 4 {
            return Err(ChnsError::config("n", format!("need at least 4 cells, got {}", self.n)));
        }
        if self.newton_max == 0 {
            return Err(ChnsError::config("newton_max", "must be at least 1"));
        }
        if self.outer_max == 0 {
            return Err(ChnsError::config("outer_max", "must be at least 1"));
        }
        if !(self.safety_fraction > 0.0 && self.safety_fraction < 1.0) {
            return Err(ChnsError::config("safety_fraction", "must lie in (0, 1)"));
        }
        self.potential().validate()
    }
}

pub type FieldSource = Arc<dyn Fn(f64) -> Field + Send + Sync>;
pub type VelocitySource = Arc<dyn Fn(f64) -> MacVelocity + Send + Sync>;
pub type ExactFields = Arc<dyn Fn(f64) -> (Field, MacVelocity, Field) + Send + Sync>;

/// Optional forcing, as functions of time. A step from `t` to `t + tau`
/// evaluates both sources at `t + tau/2`.
#[derive(Clone, Default)]
pub struct SourceTerms {
    pub phase: Option<FieldSource>,
    pub momentum: Option<VelocitySource>,
    /// Exact `(phi, u, p)`; when present, the history is initialized from it.
    pub exact: Option<ExactFields>,
}

impl SourceTerms {
    pub fn none() -> Self {
        SourceTerms::default()
    }

    fn phase_at(&self, t: f64) -> Option<Field> {
        self.phase.as_ref().map(|s| s(t))
    }

    fn momentum_at(&self, t: f64) -> Option<MacVelocity> {
        self.momentum.as_ref().map(|s| s(t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub phi: Field,
    pub phi_prev: Field,
    pub u: MacVelocity,
    pub u_prev: MacVelocity,
    pub p: Field,
    /// Chemical potential of the last step.
    pub mu: Field,
    /// `mean_c(phi)` at step 0.
    pub mass0: f64,
}

impl SimState {
    pub fn n(&self) -> usize {
        self.phi.n()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub mass_drift: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// `min(1 - phi, 1 + phi)` over all cells.
    pub margin: f64,
    pub energy: f64,
    /// `energy` plus the history terms
    /// `theta0/4 |dphi|^2 + eps^2/8 |grad dphi|^2 + tau^2/(8 gamma) |grad p|^2`,
    /// with `dphi = phi^n - phi^{n-1}`.
    pub modified_energy: f64,
    pub div_inf: f64,
    pub outer_iters: usize,
    pub outer_update: f64,
    pub newton_iters: usize,
    pub damping_events: usize,
    /// Smallest Newton step length taken; 1 means no damping.
    pub min_step_length: f64,
    pub momentum_iters: usize,
    pub poisson_iters: usize,
}

/// Result of one Cahn-Hilliard Newton solve.
#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub phi: Field,
    pub mu: Field,
    pub iterations: usize,
    pub damping_events: usize,
    pub min_step_length: f64,
    /// `||R||_2` before each iteration and after the last.
    pub residuals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    params: SchemeParams,
    state: SimState,
}

/// Writes `params` and `state` as JSON; floats round-trip exactly.
pub fn save_checkpoint(path: &std::path::Path, params: &SchemeParams, state: &SimState) -> Result<()> {
    let ck = Checkpoint {
        params: params.clone(),
        state: state.clone(),
    };
    let text = serde_json::to_string(&ck).map_err(|e| ChnsError::Checkpoint(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<(SchemeParams, SimState)> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| ChnsError::Checkpoint(e.to_string()))?;
    if ck.state.n() != ck.params.n {
        return Err(ChnsError::Checkpoint(format!(
            "state has {} cells per side, parameters say {}",
            ck.state.n(),
            ck.params.n
        )));
    }
    Ok((ck.params, ck.state))
}

fn linear_failure(stage: &'static str) -> impl Fn(ChnsError) -> ChnsError {
    move |e| match e {
        ChnsError::NoConvergence(report) | ChnsError::Breakdown(report) => ChnsError::LinearSolve { stage, report },
        other => other,
    }
}

/// Time stepper with its cached preconditioners.
pub struct Stepper {
    params: SchemeParams,
    cell: SpectralSolver,
    edge_x: SpectralSolver,
    edge_y: SpectralSolver,
}

impl Stepper {
    pub fn new(params: SchemeParams) -> Result<Self> {
        params.validate()?;
        let (n, bc) = (params.n, params.bc);
        Ok(Stepper {
            cell: SpectralSolver::new(n, Stagger::Cell, bc),
            edge_x: SpectralSolver::new(n, Stagger::EdgeX, bc),
            edge_y: SpectralSolver::new(n, Stagger::EdgeY, bc),
            params,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn bc(&self) -> BcMode {
        self.params.bc
    }

    fn max_iter(&self) -> usize {
        10 * self.params.n.max(20)
    }

    /// Builds `(phi^{-1}, u^{-1}, p^0)` from `phi^0` and `u^0`.
    ///
    /// With exact fields in `sources`, the history is sampled from them.
    /// Otherwise one backward step of the semi-discrete system is taken,
    /// halving the phase increment until it stays inside `(-1, 1)`.
    pub fn init_history(&self, phi0: &Field, u0: &MacVelocity, sources: &SourceTerms) -> Result<SimState> {
        let prm = &self.params;
        let bc = self.bc();
        let tau = prm.tau;
        check_bounds(phi0)?;
        let phi0 = phi0.clone().with_ghosts(bc);
        let mass0 = mean_c(&phi0);
        if mass0.abs() >= 1.0 {
            return Err(ChnsError::config("phi0", format!("mean {mass0} must lie in (-1, 1)")));
        }

        if let Some(exact) = &sources.exact {
            let (phi_m, u_m, _) = exact(-tau);
            let (_, _, p0) = exact(0.0);
            check_bounds(&phi_m)?;
            let u0 = u0.clone().with_ghosts(bc);
            return Ok(SimState {
                step: 0,
                time: 0.0,
                mu: Field::cell(prm.n),
                phi: phi0,
                phi_prev: phi_m.with_ghosts(bc),
                u: u0,
                u_prev: u_m.with_ghosts(bc),
                p: p0.with_ghosts(bc),
                mass0,
            });
        }

        let (u0, _) = self.helmholtz_project(&u0.clone().with_ghosts(bc))?;
        let pot = prm.potential();
        let eps2 = pot.eps * pot.eps;
        let lap_phi = lap(&phi0);
        let mut mu0 = Field::cell(prm.n);
        for j in 0..prm.n as isize {
            for i in 0..prm.n as isize {
                let v = phi0.get(i, j);
                let val = v.ln_1p() - (-v).ln_1p() - pot.theta0 * v - eps2 * lap_phi.get(i, j);
                mu0.set(i, j, val);
            }
        }
        mu0.fill_ghosts(bc);

        let mut dphi = &lap(&mu0) - &div_phi_u(&phi0, &u0, bc);
        if let Some(s) = sources.phase_at(0.0) {
            dphi = &dphi + &s;
        }
        let mut scale = tau;
        let mut phi_prev = Field::lin_comb(1.0, &phi0, -scale, &dphi);
        let mut halvings = 0;
        while check_bounds(&phi_prev).is_err() {
            halvings += 1;
            if halvings > 60 {
                return Err(ChnsError::OutOfBounds {
                    value: phi_prev.max_abs(),
                    i: 0,
                    j: 0,
                });
            }
            scale *= 0.5;
            phi_prev = Field::lin_comb(1.0, &phi0, -scale, &dphi);
        }
        if halvings > 0 {
            warn!("backward initialization damped by 2^-{halvings}");
        }
        phi_prev.fill_ghosts(bc);

        let mut du = convect_velocity(&u0, &u0, bc);
        du.scale(-1.0);
        du.axpy(prm.nu, &lap_vec(&u0));
        du.axpy(-prm.gamma, &phi_grad_mu(&phi0, &mu0, bc));
        if let Some(s) = sources.momentum_at(0.0) {
            du.axpy(1.0, &s);
        }
        let u_back = MacVelocity::lin_comb(1.0, &u0, -tau, &du).with_ghosts(bc);
        let (u_prev, _) = self.helmholtz_project(&u_back)?;

        Ok(SimState {
            step: 0,
            time: 0.0,
            mu: mu0,
            phi: phi0,
            phi_prev,
            u: u0,
            u_prev,
            p: Field::cell(prm.n),
            mass0,
        })
    }

    /// Advances `state` by one time step.
    pub fn step(&self, state: &SimState, sources: &SourceTerms) -> Result<(SimState, StepDiagnostics)> {
        let prm = &self.params;
        let bc = self.bc();
        let tau = prm.tau;
        let t_half = state.time + 0.5 * tau;
        let phi_tilde = Field::lin_comb(1.5, &state.phi, -0.5, &state.phi_prev).with_ghosts(bc);
        let u_tilde = MacVelocity::lin_comb(1.5, &state.u, -0.5, &state.u_prev).with_ghosts(bc);
        let s_phi = sources.phase_at(t_half);
        let s_u = sources.momentum_at(t_half);

        let mut warm = Field::lin_comb(2.0, &state.phi, -1.0, &state.phi_prev)
            .map(|v| v.clamp(-WARM_START_CLAMP, WARM_START_CLAMP));
        warm.fill_ghosts(bc);
        let mut u_hat = u_tilde.clone();
        let mut newton_iters = 0;
        let mut damping_events = 0;
        let mut min_step_length: f64 = 1.0;
        let mut momentum_iters = 0;
        let mut outer_iters = 0;
        let mut update = f64::INFINITY;
        let mut mu = state.mu.clone();
        let mut phi_next = warm.clone();

        while outer_iters < prm.outer_max {
            outer_iters += 1;
            let ch = self.solve_ch_newton(state, &u_hat, s_phi.as_ref(), &warm)?;
            newton_iters += ch.iterations;
            damping_events += ch.damping_events;
            min_step_length = min_step_length.min(ch.min_step_length);
            let (u_new, report) =
                self.solve_momentum(&state.u, &u_tilde, &state.p, &phi_tilde, &ch.mu, s_u.as_ref())?;
            momentum_iters += report.iterations;

            let dphi = norm_l2(&(&ch.phi - &warm));
            let du = norm_l2_vec(&(&u_new - &u_hat));
            let size = norm_l2(&ch.phi) + norm_l2_vec(&u_new);
            update = (dphi + du) / size.max(f64::MIN_POSITIVE);
            debug!("outer pass {outer_iters}: relative update {update:.3e}");
            warm = ch.phi.clone();
            u_hat = u_new;
            phi_next = ch.phi;
            mu = ch.mu;
            if update <= prm.outer_tol {
                break;
            }
        }
        if update > prm.outer_tol {
            return Err(ChnsError::OuterNoConvergence {
                iterations: outer_iters,
                update,
            });
        }

        let (u_next, p_next, poisson) = self.project_velocity(&u_hat, &state.p)?;
        if check_bounds(&phi_next).is_err() {
            return Err(ChnsError::PositivityBreach { step: state.step + 1 });
        }

        let next = SimState {
            step: state.step + 1,
            time: state.time + tau,
            phi: phi_next,
            phi_prev: state.phi.clone(),
            u: u_next,
            u_prev: state.u.clone(),
            p: p_next,
            mu,
            mass0: state.mass0,
        };
        let mut diag = self.monitor(&next)?;
        diag.outer_iters = outer_iters;
        diag.outer_update = update;
        diag.newton_iters = newton_iters;
        diag.damping_events = damping_events;
        diag.min_step_length = min_step_length;
        diag.momentum_iters = momentum_iters;
        diag.poisson_iters = poisson.iterations;
        Ok((next, diag))
    }

    /// State monitors: extrema, margin to the singular values, mass drift,
    /// total energy and divergence.
    pub fn monitor(&self, state: &SimState) -> Result<StepDiagnostics> {
        let prm = &self.params;
        let phi = &state.phi;
        let (lo, hi) = (phi.min_value(), phi.max_value());
        let mass = mean_c(phi);
        let energy = total_energy(phi, &state.u, prm.eps, prm.theta0, prm.gamma, prm.bc)?;
        Ok(StepDiagnostics {
            step: state.step,
            time: state.time,
            mass,
            mass_drift: mass - state.mass0,
            phi_min: lo,
            phi_max: hi,
            margin: (1.0 - hi).min(1.0 + lo),
            energy,
            modified_energy: energy + self.history_energy(state),
            div_inf: div(&state.u).max_abs(),
            min_step_length: 1.0,
            ..Default::default()
        })
    }

    fn history_energy(&self, state: &SimState) -> f64 {
        let prm = &self.params;
        let dphi = Field::lin_comb(1.0, &state.phi, -1.0, &state.phi_prev).with_ghosts(prm.bc);
        let p = state.p.clone().with_ghosts(prm.bc);
        0.25 * prm.theta0 * inner(&dphi, &dphi)
            + 0.125 * prm.eps * prm.eps * grad_norm_sq(&dphi)
            + prm.tau * prm.tau / (8.0 * prm.gamma) * grad_norm_sq(&p)
    }

    /// Phase residual
    /// `R(phi) = (phi - phi^n)/tau + div(A phi~ (u_hat + u^n)/2) - lap(mu(phi)) - S`.
    fn ch_residual(
        &self,
        phi: &Field,
        state: &SimState,
        transport: &Field,
        source: Option<&Field>,
    ) -> Result<(Field, Field)> {
        let prm = &self.params;
        let bc = self.bc();
        let mu = chemical_potential(phi, &state.phi, &state.phi_prev, prm.tau, &prm.potential(), bc)?;
        let mut r = Field::lin_comb(1.0 / prm.tau, phi, -1.0 / prm.tau, &state.phi);
        r.axpy(1.0, transport);
        r.axpy(-1.0, &lap(&mu));
        if let Some(s) = source {
            r.axpy(-1.0, s);
        }
        Ok((r.with_ghosts(bc), mu))
    }

    /// Damped Newton solve of the phase equation for a frozen intermediate
    /// velocity. Every iterate stays strictly inside `(-1, 1)`.
    pub fn solve_ch_newton(
        &self,
        state: &SimState,
        u_hat: &MacVelocity,
        source: Option<&Field>,
        initial: &Field,
    ) -> Result<NewtonOutcome> {
        let prm = &self.params;
        let bc = self.bc();
        let tau = prm.tau;
        let phi_tilde = Field::lin_comb(1.5, &state.phi, -0.5, &state.phi_prev).with_ghosts(bc);
        let u_bar = MacVelocity::lin_comb(0.5, u_hat, 0.5, &state.u).with_ghosts(bc);
        let transport = div_phi_u(&phi_tilde, &u_bar, bc);

        let mut phi = initial.clone().with_ghosts(bc);
        check_bounds(&phi)?;
        let scale = norm_l2(&state.phi) / tau + source.map_or(0.0, norm_l2) + 1.0;
        let target = prm.newton_tol * scale;
        let (mut r, mut mu) = self.ch_residual(&phi, state, &transport, source)?;
        let mut rnorm = norm_l2(&r);
        let mut residuals = vec![rnorm];
        let mut iterations = 0;
        let mut damping_events = 0;
        let mut min_step_length: f64 = 1.0;
        let eps2 = 0.75 * prm.eps * prm.eps;
        let pot = prm.potential();

        while rnorm > target {
            if iterations == prm.newton_max {
                return Err(ChnsError::NewtonFailure {
                    iterations,
                    residual: rnorm,
                });
            }
            iterations += 1;
            let lin = chemical_potential_linearization(&phi, &state.phi, tau, &pot)?;
            let d_mean = mean_c(&lin.diagonal);
            let diag = lin.diagonal.with_ghosts(bc);
            let jac = |d: &Field| -> Field {
                let dg = d.clone().with_ghosts(bc);
                let inner_term = Field::lin_comb(1.0, &diag.mul_elem(&dg), -eps2, &lap(&dg)).with_ghosts(bc);
                let out = Field::lin_comb(1.0 / tau, &dg, -1.0, &lap(&inner_term));
                out.with_ghosts(bc)
            };
            let spectral = &self.cell;
            let op = LinearOperator::new(jac, false).with_preconditioner(move |v: &Field| {
                spectral.apply(v, |lam| 1.0 / (1.0 / tau + d_mean * lam + eps2 * lam * lam))
            });
            let mut rhs = r.clone();
            rhs.scale(-1.0);
            // round-off floor of the relative residual, ~ eps_mach * tau * ||J||
            let lam = self.cell.max_eigenvalue();
            let j_norm = 1.0 / tau + diag.max_value() * lam + eps2 * lam * lam;
            let lin_tol = prm.newton_linear_tol.max(f64::EPSILON * tau * j_norm);
            let (mut delta, _) =
                solve_general(&op, &rhs, lin_tol, self.max_iter()).map_err(linear_failure("newton"))?;
            // the mean of the update is fixed by the time derivative alone
            let shift = -tau * mean_c(&r) - mean_c(&delta);
            delta.add_constant(shift);
            delta.fill_ghosts(bc);

            let step_inf = delta.max_abs();
            let mut alpha = 1.0;
            let n = prm.n as isize;
            for j in 0..n {
                for i in 0..n {
                    let (p, d) = (phi.get(i, j), delta.get(i, j));
                    if (p + d).abs() >= 1.0 {
                        let dist = if d > 0.0 { 1.0 - p } else { 1.0 + p };
                        alpha = f64::min(alpha, prm.safety_fraction * dist / d.abs());
                    }
                }
            }
            if step_inf * alpha <= NEWTON_STEP_TOL {
                // round-off floor of the residual; the update is negligible
                phi.axpy(alpha, &delta);
                phi.fill_ghosts(bc);
                let (r_new, mu_new) = self.ch_residual(&phi, state, &transport, source)?;
                r = r_new;
                mu = mu_new;
                rnorm = norm_l2(&r);
                residuals.push(rnorm);
                break;
            }

            let mut halvings = 0;
            let accepted = loop {
                let mut trial = phi.clone();
                trial.axpy(alpha, &delta);
                trial.fill_ghosts(bc);
                if let Ok((r_t, mu_t)) = self.ch_residual(&trial, state, &transport, source) {
                    let rn = norm_l2(&r_t);
                    if rn < rnorm {
                        break Some((trial, r_t, mu_t, rn));
                    }
                }
                if halvings == MAX_HALVINGS {
                    break None;
                }
                halvings += 1;
                alpha *= 0.5;
            };
            if alpha < 1.0 {
                damping_events += 1;
                min_step_length = min_step_length.min(alpha);
            }
            match accepted {
                Some((trial, r_t, mu_t, rn)) => {
                    phi = trial;
                    r = r_t;
                    mu = mu_t;
                    rnorm = rn;
                    residuals.push(rnorm);
                }
                None if rnorm <= 1e3 * target => break,
                None => {
                    return Err(ChnsError::NewtonFailure {
                        iterations,
                        residual: rnorm,
                    })
                }
            }
        }
        Ok(NewtonOutcome {
            phi,
            mu,
            iterations,
            damping_events,
            min_step_length,
            residuals,
        })
    }

    /// Momentum operator `u/tau + b(u~, u)/2 - nu/2 lap(u)`.
    pub fn momentum_operator(&self, u_tilde: &MacVelocity, v: &MacVelocity) -> MacVelocity {
        let prm = &self.params;
        let bc = self.bc();
        let v = v.clone().with_ghosts(bc);
        let mut out = convect_velocity(u_tilde, &v, bc);
        out.scale(0.5);
        out.axpy(1.0 / prm.tau, &v);
        out.axpy(-0.5 * prm.nu, &lap_vec(&v));
        out.with_ghosts(bc)
    }

    /// Solves the linear momentum equation for the intermediate velocity
    /// given the frozen chemical potential.
    pub fn solve_momentum(
        &self,
        u_n: &MacVelocity,
        u_tilde: &MacVelocity,
        p_n: &Field,
        phi_tilde: &Field,
        mu: &Field,
        source: Option<&MacVelocity>,
    ) -> Result<(MacVelocity, SolveReport)> {
        let prm = &self.params;
        let bc = self.bc();
        let tau = prm.tau;
        let mut rhs = convect_velocity(u_tilde, u_n, bc);
        rhs.scale(-0.5);
        rhs.axpy(1.0 / tau, u_n);
        rhs.axpy(0.5 * prm.nu, &lap_vec(u_n));
        rhs.axpy(-1.0, &grad(p_n));
        rhs.axpy(-prm.gamma, &phi_grad_mu(phi_tilde, mu, bc));
        if let Some(s) = source {
            rhs.axpy(1.0, s);
        }
        rhs.fill_ghosts(bc);

        let shift = 1.0 / tau;
        let half_nu = 0.5 * prm.nu;
        let (sx, sy) = (&self.edge_x, &self.edge_y);
        let op = LinearOperator::new(|v: &MacVelocity| self.momentum_operator(u_tilde, v), false).with_preconditioner(
            move |r: &MacVelocity| {
                let g = |lam: f64| 1.0 / (shift + half_nu * lam);
                MacVelocity::new(sx.apply(&r.x, g), sy.apply(&r.y, g))
            },
        );
        let (u, report) =
            solve_general(&op, &rhs, prm.linear_tol, self.max_iter()).map_err(linear_failure("momentum"))?;
        Ok((u.with_ghosts(bc), report))
    }

    /// Pressure correction: `u = u_hat - tau/2 grad(dp)` with `div u = 0`,
    /// and `p^{n+1} = p^n + dp`.
    pub fn project_velocity(&self, u_hat: &MacVelocity, p_n: &Field) -> Result<(MacVelocity, Field, SolveReport)> {
        let bc = self.bc();
        let tau = self.params.tau;
        let (psi, report) = self.poisson(&div(&u_hat.clone().with_ghosts(bc)), "projection")?;
        // lap(psi) = div(u_hat), and dp = 2 psi / tau
        let mut dp = psi;
        dp.scale(2.0 / tau);
        let mut u = u_hat.clone();
        u.axpy(-0.5 * tau, &grad(&dp));
        let p = (p_n + &dp).with_ghosts(bc);
        Ok((u.with_ghosts(bc), p, report))
    }

    /// Removes the gradient part of `u`: `u - grad(psi)` with `lap(psi) = div(u)`.
    pub fn helmholtz_project(&self, u: &MacVelocity) -> Result<(MacVelocity, SolveReport)> {
        let bc = self.bc();
        let (psi, report) = self.poisson(&div(u), "projection")?;
        let mut out = u.clone();
        out.axpy(-1.0, &grad(&psi));
        Ok((out.with_ghosts(bc), report))
    }

    /// Mean-zero `psi` with `lap(psi) = f`.
    fn poisson(&self, f: &Field, stage: &'static str) -> Result<(Field, SolveReport)> {
        let bc = self.bc();
        let mut rhs = f.clone();
        rhs.scale(-1.0);
        // the divergence telescopes to zero; remove what round-off leaves
        rhs.add_constant(-mean_c(&rhs));
        rhs.fill_ghosts(bc);
        let spectral = &self.cell;
        let op = LinearOperator::new(
            |v: &Field| {
                let mut w = lap(&v.clone().with_ghosts(bc));
                w.scale(-1.0);
                w.with_ghosts(bc)
            },
            true,
        )
        .with_preconditioner(move |r: &Field| spectral.apply(r, |lam| if lam > 1e-12 { 1.0 / lam } else { 0.0 }));
        let (psi, report) =
            solve_spd(&op, &rhs, self.params.linear_tol, self.max_iter(), true).map_err(linear_failure(stage))?;
        Ok((psi.with_ghosts(bc), report))
    }
}
