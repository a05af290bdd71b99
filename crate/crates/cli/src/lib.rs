//! Command-line front end: solves mechanisms, computes thresholds, writes
//! sweep tables and runs Monte Carlo checks.

pub mod config;
pub mod figures;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mechlab::atwill::{solve_d1, solve_d2};
use mechlab::buyer_side::solve_buyer;
use mechlab::montecarlo::{build_buyer_rule, build_rule, simulate, SimEstimate};
use mechlab::{Market, MechanismKind, MechanismSolution};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{DeltaGrid, RunConfig, Side};
pub use figures::{format_sig, sweep, write_csv, Figure, SweepRow};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DRAWS: u64 = 1_000_000;
/// Standard errors allowed between a simulated and an analytic value.
pub const SIM_SIGMAS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unsupported(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<mechlab::Error> for CliError {
    fn from(e: mechlab::Error) -> Self {
        use mechlab::Error as E;
        match e {
            E::Unsupported(_) | E::NotRegular { .. } => CliError::Unsupported(e.to_string()),
            E::Domain { .. } | E::InvalidDistribution(_) | E::InvalidArgument(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mech {
    Eafp,
    Epo,
    Eao,
    D,
    D1,
    D2,
}

impl Mech {
    fn kind(self) -> Option<MechanismKind> {
        match self {
            Mech::Eafp => Some(MechanismKind::Eafp),
            Mech::Epo => Some(MechanismKind::Epo),
            Mech::Eao => Some(MechanismKind::Eao),
            Mech::D => Some(MechanismKind::D),
            Mech::D1 | Mech::D2 => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mechlab",
    version,
    about = "Optimal selling mechanisms with a delayed cost"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Discount-factor grid as `min:max:steps`.
    #[arg(long = "delta-grid", global = true)]
    pub delta_grid: Option<DeltaGrid>,
    #[arg(long, global = true, value_enum)]
    pub side: Option<Side>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one mechanism.
    Solve {
        #[arg(long, value_enum)]
        mech: Mech,
        #[command(flatten)]
        common: Common,
    },
    /// Discount-factor thresholds between the regimes.
    Thresholds {
        #[command(flatten)]
        common: Common,
    },
    /// Profits of all four mechanisms and the best one.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep table behind a figure, as CSV.
    #[command(alias = "sweep")]
    Figure {
        #[arg(value_enum)]
        which: Figure,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of a solved mechanism.
    Simulate {
        #[arg(long, value_enum)]
        mech: Mech,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of draws.
        #[arg(long)]
        n: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(d) = common.delta {
        cfg.delta = Some(d);
    }
    if let Some(g) = common.delta_grid {
        cfg.delta_grid = Some(g);
    }
    if let Some(s) = common.side {
        cfg.side = s;
    }
    Ok(cfg)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Io(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn with_tag(value: impl Serialize, key: &str, tag: Value) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.insert(key.to_string(), tag);
    }
    Ok(v)
}

fn seller_solution(
    market: &Market,
    kind: MechanismKind,
    delta: Option<f64>,
) -> Result<MechanismSolution, CliError> {
    let need = |what: &str| delta.ok_or_else(|| CliError::Config(format!("{what} needs --delta")));
    Ok(match kind {
        MechanismKind::Eafp => market.solve_eafp()?,
        MechanismKind::Eao => market.solve_eao()?,
        MechanismKind::Epo => market.solve_epo(need("EPO")?)?.0,
        MechanismKind::D => market.solve_dynamic(need("D")?)?.solution,
    })
}

pub fn cmd_solve(cfg: &RunConfig, mech: Mech) -> Result<Value, CliError> {
    let market = cfg.market()?;
    let delta = cfg.single_delta()?;
    match (cfg.side, mech.kind()) {
        (Side::Seller, Some(kind)) => {
            let s = seller_solution(&market, kind, delta)?;
            serde_json::to_value(s).map_err(|e| CliError::Numeric(e.to_string()))
        }
        (Side::Seller, None) => {
            let delta = cfg.require_delta("the at-will mechanisms")?;
            if mech == Mech::D1 {
                with_tag(solve_d1(&market, delta)?, "kind", json!("D1"))
            } else {
                with_tag(solve_d2(&market, delta)?, "kind", json!("D2"))
            }
        }
        (Side::Buyer, Some(kind)) => {
            with_tag(solve_buyer(&market, kind, delta)?, "side", json!("buyer"))
        }
        (Side::Buyer, None) => Err(CliError::Unsupported(
            "the at-will mechanisms have no buyer-side counterpart".into(),
        )),
    }
}

pub fn cmd_thresholds(cfg: &RunConfig) -> Result<Value, CliError> {
    let t = cfg.market()?.regime_thresholds()?;
    serde_json::to_value(t).map_err(|e| CliError::Numeric(e.to_string()))
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Value, CliError> {
    let market = cfg.market()?;
    if cfg.delta_grid.is_some() {
        let reports = cfg
            .sweep_deltas()?
            .into_iter()
            .map(|d| market.compare(d).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?;
        return serde_json::to_value(reports).map_err(|e| CliError::Numeric(e.to_string()));
    }
    let delta = cfg.require_delta("compare")?;
    serde_json::to_value(market.compare(delta)?).map_err(|e| CliError::Numeric(e.to_string()))
}

pub fn cmd_figure(cfg: &RunConfig, which: Figure, out: &mut dyn Write) -> Result<(), CliError> {
    let market = cfg.market()?;
    let deltas = cfg.sweep_deltas()?;
    let at_will = which == Figure::AtWill;
    if at_will && !market.is_uniform() {
        return Err(CliError::Unsupported(
            "the appendix-c sweep needs uniform value and cost laws".into(),
        ));
    }
    let rows = sweep(&market, &deltas, at_will)?;
    write_csv(out, which, &rows)
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub kind: MechanismKind,
    pub side: Side,
    pub delta: f64,
    #[serde(flatten)]
    pub estimate: SimEstimate,
    /// Analytic seller profit, or buyer utility on the buyer side.
    pub analytic: f64,
    pub pass: bool,
}

pub fn cmd_simulate(cfg: &RunConfig, mech: Mech) -> Result<SimulationReport, CliError> {
    let market = cfg.market()?;
    let Some(kind) = mech.kind() else {
        return Err(CliError::Unsupported(
            "simulation covers EAFP, EPO, EAO and D".into(),
        ));
    };
    let delta = cfg.require_delta("simulate")?;
    let n = cfg.n_sim.unwrap_or(DEFAULT_DRAWS);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let (rule, analytic) = match cfg.side {
        Side::Seller => {
            let s = seller_solution(&market, kind, Some(delta))?;
            (build_rule(&s, &market)?, s.profit)
        }
        Side::Buyer => {
            let s = solve_buyer(&market, kind, Some(delta))?;
            (build_buyer_rule(&s)?, s.utility)
        }
    };
    let estimate = simulate(&rule, &market, delta, n, seed)?;
    let pass = match cfg.side {
        Side::Seller => estimate.profit_agrees(analytic, SIM_SIGMAS),
        Side::Buyer => estimate.surplus_agrees(analytic, SIM_SIGMAS),
    };
    Ok(SimulationReport {
        kind,
        side: cfg.side,
        delta,
        estimate,
        analytic,
        pass,
    })
}

/// Runs a parsed command; the error carries the process exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { mech, common } => {
            let cfg = resolve(&common)?;
            emit(&mut *open_out(&common.out)?, &cmd_solve(&cfg, mech)?)
        }
        Command::Thresholds { common } => {
            let cfg = resolve(&common)?;
            emit(&mut *open_out(&common.out)?, &cmd_thresholds(&cfg)?)
        }
        Command::Compare { common } => {
            let cfg = resolve(&common)?;
            emit(&mut *open_out(&common.out)?, &cmd_compare(&cfg)?)
        }
        Command::Figure { which, common } => {
            let cfg = resolve(&common)?;
            let mut out = open_out(&common.out)?;
            cmd_figure(&cfg, which, &mut *out)
        }
        Command::Simulate {
            mech,
            seed,
            n,
            common,
        } => {
            let mut cfg = resolve(&common)?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            if n.is_some() {
                cfg.n_sim = n;
            }
            emit(&mut *open_out(&common.out)?, &cmd_simulate(&cfg, mech)?)
        }
    }
}
