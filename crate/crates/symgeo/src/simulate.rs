//! The `simulate` command: stream a trajectory with diagnostics, optionally
//! resuming from and writing checkpoints.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use symgeo_core::dynamics::residual_norm;
use symgeo_core::integrator::{random_history, Checkpoint, Integrator};
use symgeo_core::stability::{LkConstants, LyapunovTracker};
use symgeo_core::state::validate_state;
use symgeo_core::{HistoryBuffer, StateVector, SystemConfig};

use crate::error::{CliError, CliResult};
use crate::io::{create, fmt_f64, fmt_opt, to_json_pretty, Format};

/// Initial history when not resuming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Interpolation between two random valid states drawn from `--seed`.
    Random,
    /// Constant history at the reference state.
    Reference,
    /// Constant history at the neutral state.
    Neutral,
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub steps: u64,
    /// Record every `every`-th step (at least 1).
    pub every: u64,
    pub init: Init,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub resume: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Everything needed to rerun a simulation: written next to CSV output and
/// embedded in JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config: SystemConfig,
    pub init: Init,
    pub seed: u64,
    pub resumed_from_step: Option<u64>,
    pub steps: u64,
    pub every: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub version: u32,
    pub config: SystemConfig,
    pub checkpoint: Checkpoint,
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// One recorded step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub step: u64,
    pub time: f64,
    pub residual: f64,
    /// Principal distance to the reference state, when there is one.
    pub principal_error: Option<f64>,
    /// Lyapunov-Krasovskii value around the reference state.
    pub lyapunov: Option<f64>,
    pub violations: usize,
    pub state: StateVector,
}

#[derive(Debug, Clone, Serialize)]
struct JsonRun<'a> {
    manifest: &'a RunManifest,
    aborted: Option<String>,
    samples: &'a [Row],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub rows: usize,
    pub final_step: u64,
    pub final_residual: f64,
    pub final_error: Option<f64>,
}

enum Sink {
    Csv(Box<csv::Writer<BufWriter<fs::File>>>),
    Json(Vec<Row>),
}

pub const CSV_DIAGNOSTICS: [&str; 6] = ["step", "time", "residual", "principal_error", "lyapunov", "violations"];

impl Sink {
    fn open(opts: &SimulateOptions, cfg: &SystemConfig) -> CliResult<Sink> {
        match opts.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(BufWriter::new(create(&opts.out)?));
                let mut header: Vec<String> = CSV_DIAGNOSTICS.iter().map(|s| s.to_string()).collect();
                header.extend(StateVector::labels(&cfg.arch));
                w.write_record(&header)?;
                Ok(Sink::Csv(Box::new(w)))
            }
            Format::Json => Ok(Sink::Json(Vec::new())),
        }
    }

    fn push(&mut self, row: Row) -> CliResult<()> {
        match self {
            Sink::Csv(w) => {
                let mut rec = vec![
                    row.step.to_string(),
                    fmt_f64(row.time),
                    fmt_f64(row.residual),
                    fmt_opt(row.principal_error),
                    fmt_opt(row.lyapunov),
                    row.violations.to_string(),
                ];
                rec.extend(row.state.flatten().into_iter().map(fmt_f64));
                w.write_record(&rec)?;
            }
            Sink::Json(rows) => rows.push(row),
        }
        Ok(())
    }

    fn finish(self, out: &Path, manifest: &RunManifest, aborted: Option<String>) -> CliResult<usize> {
        match self {
            Sink::Csv(mut w) => {
                w.flush()?;
                let sidecar = manifest_path(out);
                fs::write(&sidecar, to_json_pretty(manifest)?)
                    .map_err(|e| CliError::config(format!("{}: cannot write: {e}", sidecar.display())))?;
                Ok(0)
            }
            Sink::Json(rows) => {
                let doc = JsonRun {
                    manifest,
                    aborted,
                    samples: &rows,
                };
                let mut f = BufWriter::new(create(out)?);
                serde_json::to_writer(&mut f, &doc).map_err(|e| CliError::config(format!("json output error: {e}")))?;
                f.flush()?;
                Ok(rows.len())
            }
        }
    }
}

/// `<out>.run.json`, the manifest written next to CSV output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

pub fn read_checkpoint(path: &Path) -> CliResult<CheckpointFile> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: cannot read: {e}", path.display())))?;
    let ck: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(CliError::config(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            ck.version
        )));
    }
    Ok(ck)
}

fn initial_history(cfg: &SystemConfig, init: Init, seed: u64) -> CliResult<HistoryBuffer> {
    let depth = cfg.arch.history_depth();
    match init {
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_history(&cfg.arch, &mut rng).map_err(|e| CliError::config(format!("initial history: {e}")))
        }
        Init::Reference => cfg
            .reference_state()
            .map(|z| HistoryBuffer::constant(z.clone(), depth))
            .ok_or_else(|| {
                CliError::config("--init reference: the config has no equilibrium or closed-regime reference")
            }),
        Init::Neutral => Ok(HistoryBuffer::constant(StateVector::neutral(&cfg.arch), depth)),
    }
}

pub fn simulate(cfg: &SystemConfig, opts: &SimulateOptions) -> CliResult<SimulateSummary> {
    let every = opts.every.max(1);
    let (mut integ, resumed_from_step) = match &opts.resume {
        Some(path) => {
            let file = read_checkpoint(path)?;
            if &file.config != cfg {
                return Err(CliError::config(format!(
                    "{}: checkpoint was written for a different config",
                    path.display()
                )));
            }
            let step = file.checkpoint.step;
            let integ = Integrator::from_checkpoint(cfg, file.checkpoint)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            (integ, Some(step))
        }
        None => {
            let history = initial_history(cfg, opts.init, opts.seed)?;
            let integ = Integrator::new(cfg, history).map_err(|e| CliError::config(format!("initial history: {e}")))?;
            (integ, None)
        }
    };
    let manifest = RunManifest {
        config: cfg.clone(),
        init: opts.init,
        seed: opts.seed,
        resumed_from_step,
        steps: opts.steps,
        every,
    };
    let reference = cfg.reference_state().cloned();
    let (n_rl, n_lr) = cfg.arch.delay_indices();
    let mut tracker = reference.as_ref().map(|eq| {
        LyapunovTracker::new(
            LkConstants::from_config(cfg),
            n_rl,
            n_lr,
            cfg.arch.dt,
            eq.clone(),
            integ.history().iter(),
        )
    });
    let mut sink = Sink::open(opts, cfg)?;
    let mut rows = 0;
    let mut last = SimulateSummary {
        rows: 0,
        final_step: integ.steps_done(),
        final_residual: f64::NAN,
        final_error: None,
    };
    for k in 1..=opts.steps {
        let step_index = integ.steps_done();
        if let Err(e) = integ.step() {
            let err = CliError::from_step(step_index, e);
            sink.finish(&opts.out, &manifest, Some(err.to_string()))?;
            return Err(err);
        }
        let z = integ.current();
        if let Some(t) = tracker.as_mut() {
            t.push(z);
        }
        if k % every == 0 || k == opts.steps {
            let residual = residual_norm(cfg, z, integ.carry(), &integ.next_input())
                .map_err(|e| CliError::from_step(step_index, e))?;
            let principal_error = reference.as_ref().map(|r| z.principal_distance(r));
            let row = Row {
                step: integ.steps_done(),
                time: integ.time(),
                residual,
                principal_error,
                lyapunov: tracker.as_ref().map(|t| t.value()),
                violations: validate_state(z, &cfg.arch)
                    .map_err(|e| CliError::from_step(step_index, e))?
                    .len(),
                state: z.clone(),
            };
            last = SimulateSummary {
                rows: rows + 1,
                final_step: row.step,
                final_residual: residual,
                final_error: principal_error,
            };
            sink.push(row)?;
            rows += 1;
        }
    }
    sink.finish(&opts.out, &manifest, None)?;
    if let Some(path) = &opts.checkpoint {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            config: cfg.clone(),
            checkpoint: integ.checkpoint(),
        };
        fs::write(
            path,
            serde_json::to_string(&file).map_err(|e| CliError::config(format!("checkpoint: {e}")))?,
        )
        .map_err(|e| CliError::config(format!("{}: cannot write: {e}", path.display())))?;
    }
    Ok(last)
}
