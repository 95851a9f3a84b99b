//! The `sweep` command: certificates and a convergence run at every point
//! of a parameter grid, evaluated concurrently and reported in grid order.

use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use symgeo_core::dynamics::residual_norm;
use symgeo_core::integrator::{random_history, Integrator};
use symgeo_core::scenarios::{
    build_k3p3, build_k3p3_closed, build_k3p3_full, build_k3p3_valuation, K3p3Params, ValuationParams,
};
use symgeo_core::{StabilityReport, StateVector, SystemConfig};

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, fmt_opt};

/// A sweepable scalar. `Tau` and `Dt` apply to any configuration; the rest
/// are parameters of the built-in K3/P3 families and rebuild the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Tau,
    Dt,
    K,
    Sigma,
    SigmaAlpha,
    SigmaBeta,
    Delta,
    DeltaQ,
    DeltaW,
    Alpha,
    AlphaH,
    AlphaX,
    KappaY,
    KappaP,
}

const PARAMS: [(&str, Param); 14] = [
    ("tau", Param::Tau),
    ("dt", Param::Dt),
    ("k", Param::K),
    ("sigma", Param::Sigma),
    ("sigma_alpha", Param::SigmaAlpha),
    ("sigma_beta", Param::SigmaBeta),
    ("delta", Param::Delta),
    ("delta_q", Param::DeltaQ),
    ("delta_w", Param::DeltaW),
    ("alpha", Param::Alpha),
    ("alpha_h", Param::AlphaH),
    ("alpha_x", Param::AlphaX),
    ("kappa_y", Param::KappaY),
    ("kappa_p", Param::KappaP),
];

impl Param {
    pub fn name(self) -> &'static str {
        PARAMS
            .iter()
            .find(|(_, p)| *p == self)
            .map(|(n, _)| *n)
            .expect("every parameter is listed")
    }

    fn is_generic(self) -> bool {
        matches!(self, Param::Tau | Param::Dt)
    }

    fn apply(self, p: &mut K3p3Params, v: f64) {
        match self {
            Param::Tau => p.tau = v,
            Param::Dt => p.dt = v,
            Param::K => p.k = v,
            Param::Sigma => {
                p.sigma_alpha = v;
                p.sigma_beta = v;
            }
            Param::SigmaAlpha => p.sigma_alpha = v,
            Param::SigmaBeta => p.sigma_beta = v,
            Param::Delta => {
                p.delta_q = v;
                p.delta_w = v;
            }
            Param::DeltaQ => p.delta_q = v,
            Param::DeltaW => p.delta_w = v,
            Param::Alpha => {
                p.alpha_h = v;
                p.alpha_x = v;
            }
            Param::AlphaH => p.alpha_h = v,
            Param::AlphaX => p.alpha_x = v,
            Param::KappaY => p.kappa_y = v,
            Param::KappaP => p.kappa_p = v,
        }
    }
}

/// One grid axis, `name=v1,v2,...` or `name=start:stop:count` (inclusive,
/// evenly spaced). An empty value list is allowed and empties the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, spec) = s
            .split_once('=')
            .ok_or_else(|| format!("grid axis {s:?} must look like name=values"))?;
        let name = name.trim();
        let param = PARAMS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| *p)
            .ok_or_else(|| {
                let known: Vec<&str> = PARAMS.iter().map(|(n, _)| *n).collect();
                format!("unknown sweep parameter {name:?}; known: {}", known.join(", "))
            })?;
        let spec = spec.trim();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("{name}: bad number {t:?}: {e}"))
        };
        let values = if spec.is_empty() {
            Vec::new()
        } else if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("{name}: a range is start:stop:count"));
            }
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2].trim().parse().map_err(|e| format!("{name}: bad count: {e}"))?;
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        } else {
            spec.split(',').map(num).collect::<Result<_, _>>()?
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(format!("{name}: non-finite value {v}"));
        }
        Ok(Axis { param, values })
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub axes: Vec<Axis>,
    pub steps: u64,
    pub seed: u64,
    pub pairs: usize,
    pub workers: usize,
    pub max_points: usize,
    /// Final error below which a run counts as converged.
    pub tol: f64,
}

/// Grid points in row-major order, last axis fastest. No axes, or any
/// empty axis, gives no points.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Vec::new();
    }
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Size of the grid without materialising it.
pub fn grid_size(axes: &[Axis]) -> usize {
    if axes.is_empty() {
        return 0;
    }
    axes.iter().fold(1usize, |n, a| n.saturating_mul(a.values.len()))
}

#[derive(Debug, Clone, Copy)]
enum Family {
    K3p3,
    Valuation,
    Closed,
    Full,
}

impl Family {
    fn build(self, p: &K3p3Params) -> symgeo_core::Result<SystemConfig> {
        let v = ValuationParams {
            base: *p,
            ..ValuationParams::default()
        };
        match self {
            Family::K3p3 => build_k3p3(p),
            Family::Valuation => build_k3p3_valuation(&v),
            Family::Closed => build_k3p3_closed(p),
            Family::Full => build_k3p3_full(&v),
        }
    }
}

/// How grid points are turned into configurations.
enum Builder {
    Generic(Box<SystemConfig>),
    Family(Family, K3p3Params),
}

impl Builder {
    fn new(base: &SystemConfig, axes: &[Axis]) -> CliResult<Builder> {
        if axes.iter().all(|a| a.param.is_generic()) {
            return Ok(Builder::Generic(Box::new(base.clone())));
        }
        let family = match base.name.as_str() {
            "k3p3" => Family::K3p3,
            "k3p3-valuation" => Family::Valuation,
            "k3p3-closed" => Family::Closed,
            "k3p3-full" => Family::Full,
            other => {
                return Err(CliError::config(format!(
                    "config {other:?} is not a built-in K3/P3 scenario; only tau and dt can be swept on it"
                )))
            }
        };
        let params = K3p3Params {
            tau: base.arch.tau_rl,
            dt: base.arch.dt,
            ..K3p3Params::default()
        };
        let rebuilt = family
            .build(&params)
            .map_err(|e| CliError::config(format!("rebuilding {}: {e}", base.name)))?;
        if &rebuilt != base {
            return Err(CliError::config(format!(
                "config {:?} differs from the built-in scenario of that name; builder parameters can only be swept on an unmodified built-in scenario (tau and dt may differ)",
                base.name
            )));
        }
        Ok(Builder::Family(family, params))
    }

    fn point(&self, axes: &[Axis], values: &[f64]) -> Result<SystemConfig, String> {
        match self {
            Builder::Generic(base) => {
                let mut cfg = SystemConfig::clone(base);
                for (a, v) in axes.iter().zip(values) {
                    match a.param {
                        Param::Tau => {
                            cfg.arch.tau_rl = *v;
                            cfg.arch.tau_lr = *v;
                        }
                        Param::Dt => cfg.arch.dt = *v,
                        _ => unreachable!("generic builders only take tau and dt"),
                    }
                }
                cfg.validate().map_err(|e| e.to_string())?;
                Ok(cfg)
            }
            Builder::Family(family, base) => {
                let mut p = *base;
                for (a, v) in axes.iter().zip(values) {
                    a.param.apply(&mut p, *v);
                }
                family.build(&p).map_err(|e| e.to_string())
            }
        }
    }
}

/// Outcome of one grid point that could be configured and run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub small_gain_ok: bool,
    pub strengthened_ok: Option<bool>,
    pub radial_ok: bool,
    pub crossgain_ok: bool,
    pub dissipativity_ok: bool,
    pub certificates_ok: bool,
    pub c_k: f64,
    pub alpha_l: f64,
    pub alpha_r: f64,
    pub converged: bool,
    /// Principal distance to the reference state, or the final residual
    /// when the config has no reference.
    pub final_error: f64,
    pub sign_changes: usize,
    pub oscillating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<f64>,
    /// `None` on success, otherwise why the point could not be evaluated.
    pub error: Option<String>,
    pub result: Option<PointResult>,
}

/// Deviations below this size do not count as sign changes.
const SIGN_DEADBAND: f64 = 1e-9;
/// Sign changes in the tail that flag a run as oscillating.
const OSCILLATION_CHANGES: usize = 3;

fn tracked_coordinate(z: &StateVector, reference: Option<&StateVector>) -> f64 {
    let v = z.h.as_slice()[0];
    v - reference.map_or(0.0, |r| r.h.as_slice()[0])
}

fn evaluate(cfg: &SystemConfig, opts: &SweepOptions) -> Result<PointResult, String> {
    let report = StabilityReport::compute(cfg, opts.seed, opts.pairs).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let history = random_history(&cfg.arch, &mut rng).map_err(|e| e.to_string())?;
    let mut integ = Integrator::new(cfg, history).map_err(|e| e.to_string())?;
    let reference = cfg.reference_state();
    let tail_start = opts.steps - opts.steps / 5;
    let mut sign_changes = 0;
    let mut last_sign = 0.0f64;
    for k in 0..opts.steps {
        let step = integ.steps_done();
        integ.step().map_err(|e| format!("numeric abort at step {step}: {e}"))?;
        if k >= tail_start {
            let d = tracked_coordinate(integ.current(), reference);
            if d.abs() > SIGN_DEADBAND {
                let s = d.signum();
                if last_sign != 0.0 && s != last_sign {
                    sign_changes += 1;
                }
                last_sign = s;
            }
        }
    }
    let z = integ.current();
    let final_error = match reference {
        Some(r) => z.principal_distance(r),
        None => residual_norm(cfg, z, integ.carry(), &integ.next_input()).map_err(|e| e.to_string())?,
    };
    Ok(PointResult {
        small_gain_ok: report.small_gain_ok,
        strengthened_ok: report.strengthened_ok,
        radial_ok: report.radial_ok || report.radial_by_projection,
        crossgain_ok: report.crossgain_ok,
        dissipativity_ok: report.dissipativity_ok,
        certificates_ok: report.passes(),
        c_k: report.c_k,
        alpha_l: report.alpha_l,
        alpha_r: report.alpha_r,
        converged: final_error <= opts.tol,
        final_error,
        sign_changes,
        oscillating: sign_changes >= OSCILLATION_CHANGES,
    })
}

pub fn sweep(base: &SystemConfig, opts: &SweepOptions) -> CliResult<Vec<SweepRow>> {
    let size = grid_size(&opts.axes);
    if size > opts.max_points {
        return Err(CliError::config(format!(
            "grid has {size} points, above the cap of {}; coarsen the grid or raise --max-points",
            opts.max_points
        )));
    }
    let points = grid_points(&opts.axes);
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let builder = Builder::new(base, &opts.axes)?;
    let slots: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; points.len()]);
    let next = AtomicUsize::new(0);
    let workers = opts.workers.clamp(1, points.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(values) = points.get(i) else { break };
                let outcome = builder.point(&opts.axes, values).and_then(|cfg| evaluate(&cfg, opts));
                let row = SweepRow {
                    index: i,
                    values: values.clone(),
                    error: outcome.as_ref().err().cloned(),
                    result: outcome.ok(),
                };
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|r| r.expect("every grid point is evaluated"))
        .collect())
}

const RESULT_COLUMNS: [&str; 13] = [
    "small_gain_ok",
    "strengthened_ok",
    "radial_ok",
    "crossgain_ok",
    "dissipativity_ok",
    "certificates_ok",
    "c_k",
    "alpha_l",
    "alpha_r",
    "converged",
    "final_error",
    "sign_changes",
    "oscillating",
];

pub fn header(axes: &[Axis]) -> Vec<String> {
    let mut h = vec![String::from("index")];
    h.extend(axes.iter().map(|a| a.param.name().to_string()));
    h.push(String::from("error"));
    h.extend(RESULT_COLUMNS.iter().map(|s| s.to_string()));
    h
}

pub fn to_csv(axes: &[Axis], rows: &[SweepRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(axes))?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.values.iter().map(|v| fmt_f64(*v)));
        rec.push(r.error.clone().unwrap_or_default());
        match &r.result {
            Some(p) => rec.extend([
                p.small_gain_ok.to_string(),
                p.strengthened_ok.map(|b| b.to_string()).unwrap_or_default(),
                p.radial_ok.to_string(),
                p.crossgain_ok.to_string(),
                p.dissipativity_ok.to_string(),
                p.certificates_ok.to_string(),
                fmt_f64(p.c_k),
                fmt_f64(p.alpha_l),
                fmt_f64(p.alpha_r),
                p.converged.to_string(),
                fmt_f64(p.final_error),
                p.sign_changes.to_string(),
                p.oscillating.to_string(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), RESULT_COLUMNS.len())),
        }
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("csv output error: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::config(format!("csv output error: {e}")))
}

#[derive(Debug, Serialize)]
pub struct SweepDocument<'a> {
    pub config: &'a SystemConfig,
    pub parameters: Vec<&'static str>,
    pub steps: u64,
    pub seed: u64,
    pub rows: &'a [SweepRow],
}

/// One-line human summary of a finished sweep.
pub fn summary(rows: &[SweepRow]) -> String {
    let ok = rows.iter().filter(|r| r.result.is_some()).count();
    let converged = rows
        .iter()
        .filter(|r| r.result.as_ref().is_some_and(|p| p.converged))
        .count();
    let certified = rows
        .iter()
        .filter(|r| r.result.as_ref().is_some_and(|p| p.certificates_ok))
        .count();
    let worst = rows
        .iter()
        .filter_map(|r| r.result.as_ref().map(|p| p.final_error))
        .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    format!(
        "{} points: {ok} evaluated, {certified} certified, {converged} converged, worst final error {}",
        rows.len(),
        fmt_opt(worst)
    )
}
