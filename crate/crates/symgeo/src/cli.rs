//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use symgeo_core::scenarios::SCENARIO_NAMES;
use symgeo_core::stability::DEFAULT_PAIRS;

use crate::check::cmd_check;
use crate::error::{CliError, CliResult};
use crate::io::{builtin, emit, load_config, to_json_pretty, with_dt, Format};
use crate::simulate::{simulate, Init, SimulateOptions};
use crate::sweep::{summary, sweep, Axis, SweepDocument, SweepOptions};

#[derive(Debug, Parser)]
#[command(
    name = "symgeo",
    version,
    about = "Certify, simulate and sweep delayed symbolic-geometric graph field dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Where the configuration comes from: a JSON file (the `.json` suffix may
/// be omitted) or a built-in scenario name.
#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Configuration file or built-in scenario name.
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    pub positional: Option<String>,
    #[arg(long, value_name = "CONFIG")]
    pub config: Option<String>,
    /// Override the integration step.
    #[arg(long)]
    pub dt: Option<f64>,
}

impl ConfigArg {
    fn load(&self) -> CliResult<symgeo_core::SystemConfig> {
        let arg = self
            .config
            .as_deref()
            .or(self.positional.as_deref())
            .ok_or_else(|| CliError::config("no configuration given; pass --config PATH or a scenario name"))?;
        with_dt(load_config(arg)?, self.dt)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every stability certificate. Exit 0 iff all pass.
    Check {
        #[command(flatten)]
        config: ConfigArg,
        /// Seed of the sampled certificates.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampled pairs per one-sided constant.
        #[arg(long, default_value_t = DEFAULT_PAIRS)]
        pairs: usize,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Integrate and write a trajectory with diagnostics.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Seed of the random initial history.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record every N-th step.
        #[arg(long, default_value_t = 1)]
        every: u64,
        #[arg(long, value_enum, default_value_t = Init::Random)]
        init: Init,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Write a checkpoint after the last step.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Certificates and a convergence run at every point of a grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Grid axis `name=v1,v2,...` or `name=start:stop:count`; repeat
        /// for a product grid. Names: tau, dt, k, sigma, sigma_alpha,
        /// sigma_beta, delta, delta_q, delta_w, alpha, alpha_h, alpha_x,
        /// kappa_y, kappa_p.
        #[arg(long = "grid", value_name = "AXIS")]
        grid: Vec<Axis>,
        #[arg(long, default_value_t = 20_000)]
        steps: u64,
        /// Output table; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Seed of the initial history and the sampled certificates.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2_000)]
        pairs: usize,
        /// Concurrent workers; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 256)]
        max_points: usize,
        /// Final error below which a run counts as converged.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Print the full configuration of a built-in scenario.
    Scenario {
        /// Scenario name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Check {
            config,
            seed,
            pairs,
            out,
            format,
        } => {
            let cfg = config.load()?;
            cmd_check(&cfg, seed, pairs, out.as_deref(), format)
        }
        Command::Simulate {
            config,
            steps,
            out,
            format,
            seed,
            every,
            init,
            resume,
            checkpoint,
        } => {
            let cfg = config.load()?;
            let opts = SimulateOptions {
                steps,
                every,
                init,
                seed,
                out,
                format,
                resume,
                checkpoint,
            };
            let s = simulate(&cfg, &opts)?;
            if s.rows == 0 {
                eprintln!("0 rows written");
                return Ok(());
            }
            eprintln!(
                "{} rows, last step {}, residual {}, principal error {}",
                s.rows,
                s.final_step,
                crate::io::fmt_f64(s.final_residual),
                crate::io::fmt_opt(s.final_error)
            );
            Ok(())
        }
        Command::Sweep {
            config,
            grid,
            steps,
            out,
            format,
            seed,
            pairs,
            workers,
            max_points,
            tol,
        } => {
            let cfg = config.load()?;
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1);
            let opts = SweepOptions {
                axes: grid,
                steps,
                seed,
                pairs,
                workers,
                max_points,
                tol,
            };
            let rows = sweep(&cfg, &opts)?;
            let text = match format {
                Format::Csv => crate::sweep::to_csv(&opts.axes, &rows)?,
                Format::Json => to_json_pretty(&SweepDocument {
                    config: &cfg,
                    parameters: opts.axes.iter().map(|a| a.param.name()).collect(),
                    steps,
                    seed,
                    rows: &rows,
                })?,
            };
            emit(out.as_deref(), &text)?;
            eprintln!("{}", summary(&rows));
            Ok(())
        }
        Command::Scenario { name, list, dt, out } => {
            if list {
                return emit(out.as_deref(), &SCENARIO_NAMES.join("\n"));
            }
            let name = name.ok_or_else(|| CliError::config("scenario name required (or --list)"))?;
            let cfg = builtin(&name).ok_or_else(|| {
                CliError::config(format!(
                    "unknown scenario {name:?}; one of {}",
                    SCENARIO_NAMES.join(", ")
                ))
            })??;
            let cfg = with_dt(cfg, dt)?;
            emit(out.as_deref(), &to_json_pretty(&cfg)?)
        }
    }
}
