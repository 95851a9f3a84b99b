//! Loading, validating and writing configuration documents.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use symgeo_core::config::CONFIG_VERSION;
use symgeo_core::scenarios::{by_name, SCENARIO_NAMES};
use symgeo_core::SystemConfig;

use crate::error::{CliError, CliResult};

/// Output format shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Built-in scenario for `name`, accepting a `-default` suffix.
pub fn builtin(name: &str) -> Option<CliResult<SystemConfig>> {
    let base = name.strip_suffix("-default").unwrap_or(name);
    by_name(base).map(|r| r.map_err(|e| CliError::config(format!("built-in scenario {base}: {e}"))))
}

/// Parse and validate a configuration document. Parse errors carry the
/// line and column of the first problem.
pub fn parse_config(text: &str, origin: &str) -> CliResult<SystemConfig> {
    let cfg: SystemConfig = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    if cfg.version != CONFIG_VERSION {
        return Err(CliError::config(format!(
            "{origin}: unsupported config version {}, expected {CONFIG_VERSION}",
            cfg.version
        )));
    }
    cfg.validate()
        .map_err(|e| CliError::config(format!("{origin}: invalid config: {e}")))?;
    Ok(cfg)
}

/// Resolve a `--config` argument: an existing file, the same path with
/// `.json` appended, or the name of a built-in scenario.
pub fn load_config(arg: &str) -> CliResult<SystemConfig> {
    let path = Path::new(arg);
    let with_ext = PathBuf::from(format!("{arg}.json"));
    for candidate in [path, with_ext.as_path()] {
        if candidate.is_file() {
            let text = fs::read_to_string(candidate)
                .map_err(|e| CliError::config(format!("{}: cannot read: {e}", candidate.display())))?;
            return parse_config(&text, &candidate.display().to_string());
        }
    }
    if let Some(cfg) = builtin(arg) {
        return cfg;
    }
    Err(CliError::config(format!(
        "{arg}: no such file, and not a built-in scenario (one of {})",
        SCENARIO_NAMES.join(", ")
    )))
}

/// Override the step and revalidate: the step bound and the delay indices
/// both depend on it.
pub fn with_dt(mut cfg: SystemConfig, dt: Option<f64>) -> CliResult<SystemConfig> {
    if let Some(dt) = dt {
        cfg.arch.dt = dt;
        cfg.validate()
            .map_err(|e| CliError::config(format!("--dt {dt}: invalid config: {e}")))?;
    }
    Ok(cfg)
}

pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::config(format!("serialization failed: {e}")))
}

/// Write `text` to `out`, or to stdout when `out` is `None`.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::config(format!("{}: cannot write: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

pub fn create(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|e| CliError::config(format!("{}: cannot create: {e}", path.display())))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
