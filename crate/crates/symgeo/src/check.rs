//! The `check` command: every certificate plus the operator-class report.

use std::path::Path;

use serde::Serialize;
use symgeo_core::scenarios::{coarse_grain_report, ClassCheck};
use symgeo_core::{StabilityReport, SystemConfig};

use crate::error::{CliError, CliResult};
use crate::io::{emit, fmt_f64, to_json_pretty, Format};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub report: StabilityReport,
    pub classes: Vec<ClassCheck>,
    pub passes: bool,
}

pub fn run_check(cfg: &SystemConfig, seed: u64, pairs: usize) -> CliResult<CheckOutput> {
    let report =
        StabilityReport::compute(cfg, seed, pairs).map_err(|e| CliError::config(format!("certificates: {e}")))?;
    let classes = coarse_grain_report(cfg, seed, pairs);
    let passes = report.passes();
    Ok(CheckOutput {
        report,
        classes,
        passes,
    })
}

pub fn to_text(out: &CheckOutput) -> String {
    let mut s = out.report.to_table();
    s.push_str("\noperator classes\n");
    for c in &out.classes {
        s.push_str(&format!(
            "{:<10} {:<5} {:>14.6e}  {}\n",
            c.class,
            if c.pass { "pass" } else { "FAIL" },
            c.measured,
            c.criterion
        ));
    }
    s
}

/// Flat `certificate,value,pass` table.
pub fn to_csv(out: &CheckOutput) -> CliResult<String> {
    let r = &out.report;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["certificate", "value", "pass"])?;
    let mut row = |name: &str, value: f64, pass: bool| w.write_record([name, &fmt_f64(value), &pass.to_string()]);
    row("small_gain", r.c_k * r.c_k - r.mu_l * r.mu_r, r.small_gain_ok)?;
    row(
        "radial_margin",
        r.eta_l.min(r.eta_r),
        r.radial_ok || r.radial_by_projection,
    )?;
    if let (Some(m), Some(ok)) = (r.m_sdc, r.strengthened_ok) {
        row("strengthened_small_gain", m, ok)?;
    }
    row("crossgain", r.crossgain_min_eig, r.crossgain_ok)?;
    row("dissipativity_f_l", r.sampled.f_l, r.dissipativity_ok)?;
    row("dissipativity_f_r", r.sampled.f_r, r.dissipativity_ok)?;
    row("dissipativity_p", r.sampled.p, r.dissipativity_ok)?;
    for a in &r.assumptions {
        row(a.name, a.value, a.ok)?;
    }
    for c in &out.classes {
        row(c.class, c.measured, c.pass)?;
    }
    row("overall", f64::from(u8::from(out.passes)), out.passes)?;
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("csv output error: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::config(format!("csv output error: {e}")))
}

/// Print the text report, write `--out` in the requested format and turn
/// a failing certificate into [`CliError::Certificate`].
pub fn cmd_check(cfg: &SystemConfig, seed: u64, pairs: usize, out: Option<&Path>, format: Format) -> CliResult<()> {
    let result = run_check(cfg, seed, pairs)?;
    emit(None, &to_text(&result))?;
    if let Some(path) = out {
        let text = match format {
            Format::Json => to_json_pretty(&result)?,
            Format::Csv => to_csv(&result)?,
        };
        emit(Some(path), &text)?;
    }
    if result.passes {
        Ok(())
    } else {
        let failed: Vec<String> = failing(&result);
        Err(CliError::Certificate(failed.join(", ")))
    }
}

fn failing(out: &CheckOutput) -> Vec<String> {
    let r = &out.report;
    let mut v = Vec::new();
    if !r.small_gain_ok {
        v.push(String::from("small_gain"));
    }
    if !(r.radial_ok || r.radial_by_projection) {
        v.push(String::from("radial_margin"));
    }
    if r.strengthened_ok == Some(false) {
        v.push(String::from("strengthened_small_gain"));
    }
    if !r.crossgain_ok {
        v.push(String::from("crossgain"));
    }
    if !r.dissipativity_ok {
        v.push(String::from("dissipativity"));
    }
    v.extend(r.assumptions.iter().filter(|a| !a.ok).map(|a| a.name.to_string()));
    v
}
