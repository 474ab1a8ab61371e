//! Command layer for the `covert-a2g` binary.

pub mod commands;
pub mod table;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use covert_a2g::scenario::{Scenario, ScenarioConfig};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

pub use commands::{ModeSel, SweepAxis, SweepMetric};
use table::Table;

#[derive(Debug, Parser)]
#[command(name = "covert-a2g", version, about = "Covert UAV air-to-ground link analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario file (flat dotted keys); defaults apply to anything omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Downgrade Alice-Willie safe-distance violations to warnings.
    #[arg(long, global = true)]
    pub allow_unsafe: bool,
    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Never changes the output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Append Monte Carlo columns to sweeps.
    #[arg(long, global = true)]
    pub mc: bool,
    /// Monte Carlo draws per estimate (default 1e6 for validate, 1e5 otherwise).
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Add the finite-sample radiometer cross-check to validate.
    #[arg(long, global = true)]
    pub radiometer: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the default scenario file.
    Defaults,
    /// Sweep one parameter and report per-mode metrics.
    Sweep(SweepArgs),
    /// Optimize power (and rate) for each mode and pick the better one.
    Optimize(OptimizeArgs),
    /// Mode selection across UAV positions.
    ModeMap(ModeMapArgs),
    /// Compare every closed form against Monte Carlo on the reference grid.
    Validate,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// First axis value, in file units (dB, dBm, m, bit/s).
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["dep", "outage", "ecr", "csc"])]
    pub metrics: Vec<SweepMetric>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["om", "dm"])]
    pub modes: Vec<ModeSel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Ecr,
    Csc,
    Both,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub metric: MetricArg,
}

#[derive(Debug, Args)]
pub struct ModeMapArgs {
    #[arg(long, value_enum, default_value = "ecr")]
    pub metric: MetricArg,
    #[arg(long, allow_hyphen_values = true, default_value_t = -200.0)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 2200.0)]
    pub to: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

/// Input problem: bad arguments or scenario. Maps to exit status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Loaded scenario plus the run-wide settings every command needs.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub seed: u64,
    pub allow_unsafe: bool,
    pub mc: bool,
    pub samples: Option<u64>,
    pub radiometer: bool,
}

impl Context {
    pub fn load(g: &GlobalArgs) -> Result<Self> {
        let text = match &g.config {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| input_error(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_text(&text, g)
    }

    pub fn from_text(text: &str, g: &GlobalArgs) -> Result<Self> {
        let config = ScenarioConfig::parse(text).map_err(|e| input_error(e.to_string()))?;
        let scenario = config.resolve(g.allow_unsafe).map_err(|e| input_error(e.to_string()))?;
        Ok(Self {
            seed: g.seed.unwrap_or(scenario.seed),
            config,
            scenario,
            allow_unsafe: g.allow_unsafe,
            mc: g.mc,
            samples: g.samples,
            radiometer: g.radiometer,
        })
    }

    /// Standard metadata block; `command` must not mention output-only
    /// flags such as the worker count.
    pub fn metadata(&self, command: String) -> Vec<(String, String)> {
        vec![
            ("tool".into(), format!("covert-a2g {}", env!("CARGO_PKG_VERSION"))),
            ("scenario_sha256".into(), self.config.hash_hex()),
            ("seed".into(), self.seed.to_string()),
            ("units.power".into(), "p_a and p_max in mW unless the column ends in _dbm".into()),
            ("units.rho".into(), "noise.rho_db is read in dB (linear rho = 10^(rho_db/10))".into()),
            (
                "units.rician".into(),
                "k0 and k at pi/2 are read as dB power ratios".into(),
            ),
            ("units.r_b".into(), "target rate r_b is an absolute rate in bit/s".into()),
            (
                "units.gamma_th".into(),
                "gamma_th = 2^(r_b/W) - 1 with W the bandwidth of the row's mode".into(),
            ),
            ("command".into(), command),
        ]
    }
}

/// Runs the parsed command and returns the process exit status.
pub fn run(cli: &Cli) -> Result<u8> {
    let go = || -> Result<u8> {
        if let Command::Defaults = cli.command {
            let cfg = ScenarioConfig::default();
            let text = cfg.to_config_string();
            emit_raw(&cli.global, text.as_bytes())?;
            return Ok(0);
        }
        let ctx = Context::load(&cli.global)?;
        let (table, status) = match &cli.command {
            Command::Defaults => unreachable!(),
            Command::Sweep(a) => {
                let spec = commands::SweepSpec {
                    axis: a.axis,
                    from: a.from,
                    to: a.to,
                    points: a.points,
                    metrics: a.metrics.clone(),
                    modes: a.modes.clone(),
                };
                (commands::sweep(&ctx, &spec)?, 0)
            }
            Command::Optimize(a) => (commands::optimize(&ctx, a.metric)?, 0),
            Command::ModeMap(a) => (commands::mode_map(&ctx, a.metric, a.from, a.to, a.points)?, 0),
            Command::Validate => {
                let report = commands::validate(&ctx)?;
                let failed = report.failed();
                eprintln!(
                    "validate: {} of {} cells passed",
                    report.table.rows.len() - failed,
                    report.table.rows.len()
                );
                (report.table, u8::from(failed > 0))
            }
        };
        emit(&cli.global, &table)?;
        Ok(status)
    };
    match cli.global.workers {
        Some(0) => Err(input_error("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building worker pool")?
            .install(go),
        None => go(),
    }
}

fn emit_raw(g: &GlobalArgs, bytes: &[u8]) -> Result<()> {
    match &g.out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(bytes)?;
            Ok(())
        }
    }
}

fn emit(g: &GlobalArgs, t: &Table) -> Result<()> {
    let mut buf = Vec::new();
    if g.json {
        t.write_json(&mut buf)?;
    } else {
        t.write_csv(&mut buf)?;
    }
    emit_raw(g, &buf)
}

/// Exit status for an error returned by [`run`].
pub fn error_status(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<InputError>().is_some() {
        2
    } else {
        1
    }
}
