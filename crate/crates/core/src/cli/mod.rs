//! Command-line driver: configuration, run orchestration and output.

pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChnsError, Result};
use crate::grid::{mean_c, BcMode, Field, MacVelocity, Stagger};
use crate::scheme::{load_checkpoint, save_checkpoint, SchemeParams, SimState, SourceTerms, StepDiagnostics, Stepper};
use crate::verification::convergence_study;

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "CHNS_WORKERS";

/// Largest mass drift accepted in source-free runs.
pub const MASS_TOL: f64 = 1e-11;
/// Largest discrete divergence accepted after projection.
pub const DIV_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Mms,
    #[serde(alias = "demo_spinodal")]
    Demo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Vtk,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn vtk(self) -> bool {
        matches!(self, OutputFormat::Vtk | OutputFormat::Both)
    }
}

/// Initial phase field: a constant plus seeded uniform noise, or a field
/// file written by a previous run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCondition {
    pub beta0: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub file: Option<PathBuf>,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition {
            beta0: 0.0,
            amplitude: 0.05,
            seed: 42,
            file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Fields are written every `cadence` steps and at the end.
    pub cadence: usize,
    pub format: OutputFormat,
    /// Checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            cadence: 100,
            format: OutputFormat::Both,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsConfig {
    pub levels: Vec<u32>,
    /// `tau = tau_over_h * h` on every level.
    pub tau_over_h: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            levels: vec![4, 5, 6, 7],
            tau_over_h: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub params: Option<SchemeParams>,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub mms: MmsConfig,
    /// Checkpoint to resume from (simulate and demo modes).
    #[serde(default)]
    pub resume: Option<PathBuf>,
}

impl RunConfig {
    /// Configuration with every default made explicit for `mode`.
    pub fn defaults(mode: Mode) -> Self {
        let mut cfg = RunConfig {
            mode,
            t_final: None,
            params: None,
            initial: InitialCondition::default(),
            output: OutputConfig::default(),
            mms: MmsConfig::default(),
            resume: None,
        };
        cfg.fill_defaults();
        cfg
    }

    fn fill_defaults(&mut self) {
        if self.params.is_none() {
            self.params = Some(match self.mode {
                Mode::Simulate | Mode::Demo => SchemeParams::default(),
                Mode::Mms => SchemeParams {
                    eps: 0.1,
                    theta0: 3.0,
                    bc: BcMode::Periodic,
                    n: 16,
                    tau: 1.0 / 16.0,
                    ..SchemeParams::default()
                },
            });
        }
        if self.t_final.is_none() {
            self.t_final = Some(match self.mode {
                Mode::Simulate | Mode::Demo => 2.0,
                Mode::Mms => 0.5,
            });
        }
    }

    pub fn params(&self) -> &SchemeParams {
        self.params.as_ref().expect("defaults are filled on parse")
    }

    pub fn params_mut(&mut self) -> &mut SchemeParams {
        self.fill_defaults();
        self.params.as_mut().expect("defaults are filled on parse")
    }

    pub fn t_final(&self) -> f64 {
        self.t_final.expect("defaults are filled on parse")
    }

    /// Number of steps needed to reach `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final() / self.params().tau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        let t = self.t_final();
        if !(t > 0.0 && t.is_finite()) {
            return Err(ChnsError::config("t_final", format!("must be positive, got {t}")));
        }
        if self.output.cadence == 0 {
            return Err(ChnsError::config("output.cadence", "must be at least 1"));
        }
        let ic = &self.initial;
        if ic.beta0.abs() > 0.5 {
            return Err(ChnsError::config("initial.beta0", "must satisfy |beta0| <= 0.5"));
        }
        if !(0.0..=0.05).contains(&ic.amplitude) {
            return Err(ChnsError::config("initial.amplitude", "must lie in [0, 0.05]"));
        }
        if self.mode == Mode::Mms {
            let lv = &self.mms.levels;
            if lv.is_empty() || lv.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ChnsError::config(
                    "mms.levels",
                    "must be non-empty and strictly increasing",
                ));
            }
            if lv.iter().any(|&k| !(2..=12).contains(&k)) {
                return Err(ChnsError::config("mms.levels", "each level must lie in 2..=12"));
            }
            if !(self.mms.tau_over_h > 0.0) {
                return Err(ChnsError::config("mms.tau_over_h", "must be positive"));
            }
        } else if self.steps() == 0 {
            return Err(ChnsError::config("t_final", "shorter than one time step"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }
}

/// Parses a TOML configuration, fills mode defaults and validates.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let field = e.message().split('`').nth(1).unwrap_or("config").to_string();
        ChnsError::Config {
            field,
            message: e.to_string(),
        }
    })?;
    cfg.fill_defaults();
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

/// `beta0 + amplitude * U(-1, 1)` per cell, re-centred so the mean is
/// exactly `beta0` up to round-off.
pub fn random_phase(n: usize, beta0: f64, amplitude: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * n).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
    let mut phi = Field::from_cell_values(n, &values);
    let shift = beta0 - mean_c(&phi);
    for j in 0..n as isize {
        for i in 0..n as isize {
            phi.set(i, j, phi.get(i, j) + shift);
        }
    }
    phi
}

fn initial_phase(cfg: &RunConfig) -> Result<Field> {
    let n = cfg.params().n;
    match &cfg.initial.file {
        Some(path) => output::read_phase_csv(path, n),
        None => Ok(random_phase(
            n,
            cfg.initial.beta0,
            cfg.initial.amplitude,
            cfg.initial.seed,
        )),
    }
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub final_state: Option<SimState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Checks the per-step invariants of a source-free run.
pub fn check_invariants(d: &StepDiagnostics) -> Result<()> {
    if !(d.margin > 0.0) {
        return Err(ChnsError::InvariantBreach {
            name: "positivity",
            step: d.step,
            value: d.margin,
        });
    }
    if !(d.mass_drift.abs() <= MASS_TOL) {
        return Err(ChnsError::InvariantBreach {
            name: "mass",
            step: d.step,
            value: d.mass_drift,
        });
    }
    if !(d.div_inf <= DIV_TOL) {
        return Err(ChnsError::InvariantBreach {
            name: "divergence",
            step: d.step,
            value: d.div_inf,
        });
    }
    Ok(())
}

/// Executes the configured mode.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    std::fs::write(cfg.output.dir.join("config.toml"), cfg.to_toml())?;
    info!("configuration:\n{}", cfg.to_toml());
    match cfg.mode {
        Mode::Mms => run_mms(cfg),
        Mode::Simulate | Mode::Demo => run_simulation(cfg),
    }
}

fn run_mms(cfg: &RunConfig) -> Result<RunSummary> {
    let table = convergence_study(&cfg.mms.levels, cfg.t_final(), cfg.mms.tau_over_h, cfg.params())?;
    let path = cfg.output.dir.join("rates.csv");
    table.save_csv(&path)?;
    for row in &table.rows {
        info!(
            "k={} h={:.3e} phi_H1={:.3e} u_L2={:.3e} p_H1={:.3e} orders={:?}/{:?}/{:?}",
            row.k, row.h, row.err_phi_h1, row.err_u_l2, row.err_p_h1, row.order_phi, row.order_u, row.order_p
        );
    }
    Ok(RunSummary {
        steps: 0,
        final_state: None,
        diagnostics: vec![],
    })
}

fn run_simulation(cfg: &RunConfig) -> Result<RunSummary> {
    let out = &cfg.output;
    let (params, mut state) = match &cfg.resume {
        Some(path) => {
            let (p, s) = load_checkpoint(path)?;
            if &p != cfg.params() {
                warn!("resuming with the parameters stored in {}", path.display());
            }
            (p, s)
        }
        None => (cfg.params().clone(), SimState::placeholder(cfg.params().n)),
    };
    let stepper = Stepper::new(params.clone())?;
    let sources = SourceTerms::none();
    if cfg.resume.is_none() {
        let phi0 = initial_phase(cfg)?;
        state = stepper.init_history(&phi0, &MacVelocity::zeros(params.n), &sources)?;
    }
    let total = (cfg.t_final() / params.tau).round() as usize;
    let mut diag_writer = output::DiagnosticsWriter::create(&out.dir.join("diagnostics.csv"))?;
    let mut diagnostics = Vec::new();
    let first = stepper.monitor(&state)?;
    diag_writer.write(&first)?;
    diagnostics.push(first);
    write_fields(cfg, &state)?;

    let mut prev_energy = diagnostics[0].energy;
    while state.step < total {
        let result = stepper.step(&state, &sources).and_then(|(next, d)| {
            check_invariants(&d)?;
            Ok((next, d))
        });
        let (next, d) = match result {
            Ok(v) => v,
            Err(e) => {
                let path = out.dir.join("failure_checkpoint.json");
                save_checkpoint(&path, &params, &state)?;
                log::error!("step {} failed: {e}; state saved to {}", state.step + 1, path.display());
                return Err(e);
            }
        };
        if d.energy > prev_energy + 1e-8 * prev_energy.abs() {
            warn!(
                "energy increased at step {}: {:e} -> {:e}",
                d.step, prev_energy, d.energy
            );
        }
        prev_energy = d.energy;
        diag_writer.write(&d)?;
        state = next;
        if state.step % out.cadence == 0 || state.step == total {
            write_fields(cfg, &state)?;
        }
        if out.checkpoint_every > 0 && state.step % out.checkpoint_every == 0 {
            save_checkpoint(
                &out.dir.join(format!("checkpoint_{:06}.json", state.step)),
                &params,
                &state,
            )?;
        }
        diagnostics.push(d);
    }
    diag_writer.flush()?;
    save_checkpoint(&out.dir.join("checkpoint.json"), &params, &state)?;
    Ok(RunSummary {
        steps: diagnostics.len() - 1,
        final_state: Some(state),
        diagnostics,
    })
}

fn write_fields(cfg: &RunConfig, state: &SimState) -> Result<()> {
    let dir = &cfg.output.dir;
    let title = format!("chns step {} time {} seed {}", state.step, state.time, cfg.initial.seed);
    if cfg.output.format.csv() {
        output::write_fields_csv(
            &dir.join(format!("fields_{:06}.csv", state.step)),
            state,
            cfg.params().bc,
        )?;
    }
    if cfg.output.format.vtk() {
        output::write_vtk(
            &dir.join(format!("fields_{:06}.vtk", state.step)),
            state,
            cfg.params().bc,
            &title,
        )?;
    }
    Ok(())
}

impl SimState {
    fn placeholder(n: usize) -> Self {
        SimState {
            step: 0,
            time: 0.0,
            phi: Field::cell(n),
            phi_prev: Field::cell(n),
            u: MacVelocity::zeros(n),
            u_prev: MacVelocity::zeros(n),
            p: Field::zeros(n, Stagger::Cell),
            mu: Field::cell(n),
            mass0: 0.0,
        }
    }
}

/// Parses `k1..k2` (inclusive) or a comma-separated list.
pub fn parse_levels(s: &str) -> std::result::Result<Vec<u32>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| format!("bad level `{a}`"))?;
        let b: u32 = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| format!("bad level `{b}`"))?;
        if b < a {
            return Err(format!("empty level range {s}"));
        }
        Ok((a..=b).collect())
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| format!("bad level `{t}`")))
            .collect()
    }
}

/// Refinement levels given on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Levels(pub Vec<u32>);

fn parse_level_arg(s: &str) -> std::result::Result<Levels, String> {
    parse_levels(s).map(Levels)
}

#[derive(Debug, Parser)]
#[command(
    name = "chns",
    version,
    about = "Cahn-Hilliard-Navier-Stokes solver with a Flory-Huggins potential"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a source-free simulation from a configuration file.
    Simulate(RunArgs),
    /// Manufactured-solution convergence study.
    Mms(RunArgs),
    /// Spinodal decomposition demo with the default parameters.
    Demo(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Levels as `k1..k2` or a comma-separated list.
    #[arg(long, value_parser = parse_level_arg)]
    pub levels: Option<Levels>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Resume from a checkpoint file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

impl Cli {
    /// Merges the configuration file (if any) with command-line overrides.
    pub fn into_config(self) -> Result<RunConfig> {
        let (mode, args) = match self.command {
            Command::Simulate(a) => (Mode::Simulate, a),
            Command::Mms(a) => (Mode::Mms, a),
            Command::Demo(a) => (Mode::Demo, a),
        };
        let mut cfg = match &args.config {
            Some(path) => {
                let c = parse_config(path)?;
                if c.mode != mode {
                    return Err(ChnsError::config(
                        "mode",
                        format!("file says {:?}, command says {mode:?}", c.mode),
                    ));
                }
                c
            }
            None => RunConfig::defaults(mode),
        };
        if let Some(n) = args.n {
            cfg.params_mut().n = n;
        }
        if let Some(tau) = args.tau {
            cfg.params_mut().tau = tau;
        }
        if let Some(t) = args.tfinal {
            cfg.t_final = Some(t);
        }
        if let Some(out) = args.out {
            cfg.output.dir = out;
        }
        if let Some(seed) = args.seed {
            cfg.initial.seed = seed;
        }
        if let Some(levels) = args.levels {
            cfg.mms.levels = levels.0;
        }
        if let Some(f) = args.format {
            cfg.output.format = f;
        }
        if args.resume.is_some() {
            cfg.resume = args.resume;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sizes the global thread pool from [`WORKERS_ENV`] when set.
pub fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| ChnsError::config(WORKERS_ENV, format!("not a thread count: {v}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ChnsError::config(WORKERS_ENV, e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_demo_config_gets_defaults() {
        let cfg = parse_config_str("mode = \"demo\"").unwrap();
        let p = cfg.params();
        assert_eq!((p.eps, p.theta0, p.gamma, p.nu), (0.05, 3.0, 1.0, 1.0));
        assert_eq!(p.n, 64);
        assert_eq!(cfg.steps(), 2000);
    }

    #[test]
    fn negative_tau_names_field() {
        let err = parse_config_str("mode = \"demo\"\n[params]\ntau = -0.1\n").unwrap_err();
        match err {
            ChnsError::Config { field, .. } => assert_eq!(field, "tau"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(parse_config_str("mode = \"demo\"\n[params]\ntua = 0.1\n").is_err());
    }

    #[test]
    fn level_syntax() {
        assert_eq!(parse_levels("4..7").unwrap(), vec![4, 5, 6, 7]);
        assert_eq!(parse_levels("4,6").unwrap(), vec![4, 6]);
        assert!(parse_levels("7..4").is_err());
    }

    #[test]
    fn random_phase_is_centred() {
        let phi = random_phase(16, 0.2, 0.05, 7);
        assert!((mean_c(&phi) - 0.2).abs() < 1e-15);
        // re-centring shifts the noise, so only the spread is bounded
        assert!(phi.max_value() - phi.min_value() <= 2.0 * 0.05);
        assert!((phi.max_value() - 0.2).abs() <= 2.0 * 0.05);
    }
}
