//! Dissipativity, small-gain and Lyapunov-Krasovskii certificates.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Regime, SystemConfig, STEP_FACTOR};
use crate::dynamics::fields::{
    executive_rhs, geometric_reaction, overlay_gain_bound, symbolic_reaction, valuative_drive, StageScalars,
};
use crate::dynamics::params::{GeometricParams, SymbolicParams, DA};
use crate::dynamics::{Carry, StepInput};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Mat};
use crate::math::{dot, exp, norm, sqrt, tanh};
use crate::state::{principal_sq, History, StateVector};

/// Sampled pairs used by [`StabilityReport::compute`] unless overridden.
pub const DEFAULT_PAIRS: usize = 10_000;

/// `(ok, α_L, α_R)` with `α_L = μ_L/2 − C²/(2μ_R)` and `α_R = μ_R/2 − C²/(2μ_L)`;
/// `ok` iff `C² < μ_L μ_R`, which holds iff both margins are positive.
pub fn small_gain_check(c_k: f64, mu_l: f64, mu_r: f64) -> Result<(bool, f64, f64)> {
    if !(mu_l > 0.0 && mu_r > 0.0) {
        return Err(Error::invalid("mu", "dissipativity constants must be positive"));
    }
    let c2 = c_k * c_k;
    Ok((
        c2 < mu_l * mu_r,
        mu_l / 2.0 - c2 / (2.0 * mu_r),
        mu_r / 2.0 - c2 / (2.0 * mu_l),
    ))
}

/// `η_L ≥ R_L C R_R` and `η_R ≥ R_R C R_L`.
pub fn radial_margin_check(eta_l: f64, eta_r: f64, r_l: f64, r_r: f64, c_k: f64) -> bool {
    eta_l >= r_l * c_k * r_r && eta_r >= r_r * c_k * r_l
}

/// `m_L = L_α‖X*‖ + L_Q‖H*‖`, `m_R = L_β‖H*‖ + L_W‖X*‖` and
/// `M_sdc = max(m_L, m_R)`.
pub fn state_dependent_margin(
    l_alpha: f64,
    l_beta: f64,
    l_q: f64,
    l_w: f64,
    h_star: f64,
    x_star: f64,
) -> (f64, f64, f64) {
    let m_l = l_alpha * x_star + l_q * h_star;
    let m_r = l_beta * h_star + l_w * x_star;
    (m_l, m_r, m_l.max(m_r))
}

/// `C² + M_sdc² < μ_L μ_R`.
pub fn strengthened_small_gain(c_k: f64, m_sdc: f64, mu_l: f64, mu_r: f64) -> bool {
    c_k * c_k + m_sdc * m_sdc < mu_l * mu_r
}

/// The executive cross-gain matrix with effective gains
/// `c_PH + c_PY L_ΦH` and `c_PX + c_PY L_ΦX`, and whether its smallest
/// eigenvalue is positive.
#[allow(clippy::too_many_arguments)]
pub fn executive_crossgain(
    omega_l: f64,
    omega_r: f64,
    c_ph: f64,
    c_px: f64,
    c_py: f64,
    l_phi_h: f64,
    l_phi_x: f64,
    mu_p: f64,
) -> ([[f64; 3]; 3], f64) {
    let ph = c_ph + c_py * l_phi_h;
    let px = c_px + c_py * l_phi_x;
    let m = [
        [omega_l, 0.0, -0.5 * ph],
        [0.0, omega_r, -0.5 * px],
        [-0.5 * ph, -0.5 * px, mu_p],
    ];
    let rows: Vec<&[f64]> = m.iter().map(|r| &r[..]).collect();
    let mat = Mat::from_rows(&rows).expect("3x3");
    (m, symmetric_eigenvalues(&mat)[0])
}

/// Constants of the Lyapunov-Krasovskii functional.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LkConstants {
    pub c_k: f64,
    pub mu_l: f64,
    pub mu_r: f64,
    pub mu_p: f64,
}

impl LkConstants {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        LkConstants {
            c_k: cfg.coupling_bound(),
            mu_l: cfg.declared.mu_l,
            mu_r: cfg.declared.mu_r,
            mu_p: cfg.declared.mu_p,
        }
    }

    pub fn alpha_l(&self) -> f64 {
        self.mu_l / 2.0 - self.c_k * self.c_k / (2.0 * self.mu_r)
    }

    pub fn alpha_r(&self) -> f64 {
        self.mu_r / 2.0 - self.c_k * self.c_k / (2.0 * self.mu_l)
    }

    /// Weight of the integral of `‖X̃‖²` over the right-to-left window.
    fn weight_x(&self) -> f64 {
        self.c_k * self.c_k / (2.0 * self.mu_l)
    }

    /// Weight of the integral of `‖H̃‖²` over the left-to-right window.
    fn weight_h(&self) -> f64 {
        self.c_k * self.c_k / (2.0 * self.mu_r)
    }
}

/// Trapezoid rule over the last `n` grid intervals; `f(j)` is the value
/// `j` steps back.
fn trapezoid(n: usize, dt: f64, f: impl Fn(usize) -> f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let inner: f64 = (1..n).map(&f).sum();
    dt * (0.5 * f(0) + inner + 0.5 * f(n))
}

/// `V = ½‖H̃(0)‖² + ½‖X̃(0)‖² + ½‖P̃(0)‖² + (C²/2μ_L)∫‖X̃‖² + (C²/2μ_R)∫‖H̃‖²`,
/// the integrals over the two delay windows by the trapezoid rule.
pub fn lyapunov_value<Hs: History + ?Sized>(
    history: &Hs,
    n_rl: usize,
    n_lr: usize,
    dt: f64,
    c: &LkConstants,
    eq: &StateVector,
) -> Result<f64> {
    let k = n_rl.max(n_lr);
    let mut sq = Vec::with_capacity(k + 1);
    for j in 0..=k {
        sq.push(principal_sq(history.delayed(j)?, eq));
    }
    let (h0, x0, p0) = sq[0];
    Ok(0.5 * (h0 + x0 + p0)
        + c.weight_x() * trapezoid(n_rl, dt, |j| sq[j].1)
        + c.weight_h() * trapezoid(n_lr, dt, |j| sq[j].0))
}

/// Streaming evaluation of the dissipation inequality along a trajectory.
/// Each pushed state yields the increment rate
/// `[V(t+Δt) − V(t)]/Δt + α_L‖H̃(t)‖² + α_R‖X̃(t)‖² + μ_P‖P̃(t)‖²`, computed
/// in constant time from the window ends.
#[derive(Debug, Clone)]
pub struct LyapunovTracker {
    c: LkConstants,
    n_rl: usize,
    n_lr: usize,
    dt: f64,
    eq: StateVector,
    /// Squared principal errors, oldest first, `max(n_RL, n_LR) + 1` entries.
    ring: VecDeque<(f64, f64, f64)>,
}

impl LyapunovTracker {
    /// `history` is ordered oldest first; missing older entries repeat the
    /// oldest one.
    pub fn new<'a>(
        c: LkConstants,
        n_rl: usize,
        n_lr: usize,
        dt: f64,
        eq: StateVector,
        history: impl IntoIterator<Item = &'a StateVector>,
    ) -> Self {
        let cap = n_rl.max(n_lr) + 1;
        let mut ring: VecDeque<(f64, f64, f64)> = history.into_iter().map(|z| principal_sq(z, &eq)).collect();
        while ring.len() > cap {
            ring.pop_front();
        }
        let first = ring.front().copied().unwrap_or((0.0, 0.0, 0.0));
        while ring.len() < cap {
            ring.push_front(first);
        }
        LyapunovTracker {
            c,
            n_rl,
            n_lr,
            dt,
            eq,
            ring,
        }
    }

    fn back(&self, j: usize) -> (f64, f64, f64) {
        self.ring[self.ring.len() - 1 - j]
    }

    pub fn value(&self) -> f64 {
        let (h0, x0, p0) = self.back(0);
        0.5 * (h0 + x0 + p0)
            + self.c.weight_x() * trapezoid(self.n_rl, self.dt, |j| self.back(j).1)
            + self.c.weight_h() * trapezoid(self.n_lr, self.dt, |j| self.back(j).0)
    }

    pub fn push(&mut self, z: &StateVector) -> f64 {
        let new = principal_sq(z, &self.eq);
        let cur = self.back(0);
        let dt = self.dt;
        let mut dv = 0.5 * ((new.0 - cur.0) + (new.1 - cur.1) + (new.2 - cur.2));
        if self.n_rl > 0 {
            let (a, b) = (self.back(self.n_rl - 1).1, self.back(self.n_rl).1);
            dv += self.c.weight_x() * 0.5 * dt * (new.1 + cur.1 - a - b);
        }
        if self.n_lr > 0 {
            let (a, b) = (self.back(self.n_lr - 1).0, self.back(self.n_lr).0);
            dv += self.c.weight_h() * 0.5 * dt * (new.0 + cur.0 - a - b);
        }
        let rate = dv / dt + self.c.alpha_l() * cur.0 + self.c.alpha_r() * cur.1 + self.c.mu_p * cur.2;
        self.ring.pop_front();
        self.ring.push_back(new);
        rate
    }
}

/// Largest increment rate of the dissipation inequality along `states`
/// (oldest first, equally spaced by `dt`). The first
/// `max(n_RL, n_LR) + 1` states form the initial history.
pub fn lyapunov_monotonicity(
    states: &[StateVector],
    n_rl: usize,
    n_lr: usize,
    dt: f64,
    c: &LkConstants,
    eq: &StateVector,
) -> Result<f64> {
    let k = n_rl.max(n_lr) + 1;
    if states.len() <= k {
        return Err(Error::InsufficientHistory {
            needed: k,
            available: states.len(),
        });
    }
    let mut tracker = LyapunovTracker::new(*c, n_rl, n_lr, dt, eq.clone(), &states[..k]);
    Ok(states[k..]
        .iter()
        .map(|z| tracker.push(z))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Result of [`slowfast_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowFastReport {
    /// `max_t ‖Y − φ‖ − (e^{−κt}‖Y(0) − φ(0)‖ + G1/κ)`.
    pub max_violation: f64,
    /// Largest finite-difference rate `‖φ(t+Δt) − φ(t)‖/Δt`.
    pub g1: f64,
}

/// Tracking bound of the valuative relaxation against its quasi-steady
/// readout `φ`, from samples `y[k]`, `phi[k]` at times `k Δt`.
pub fn slowfast_bound_check(dt: f64, y: &[Vec<f64>], phi: &[Vec<f64>], kappa: f64) -> Result<SlowFastReport> {
    if y.len() != phi.len() {
        return Err(Error::dims("quasi-steady samples", y.len(), phi.len()));
    }
    if y.is_empty() {
        return Ok(SlowFastReport {
            max_violation: f64::NEG_INFINITY,
            g1: 0.0,
        });
    }
    let gap = |k: usize| crate::math::dist(&y[k], &phi[k]);
    let g1 = phi
        .windows(2)
        .map(|w| crate::math::dist(&w[1], &w[0]) / dt)
        .fold(0.0, f64::max);
    let w0 = gap(0);
    let max_violation = (0..y.len())
        .map(|k| gap(k) - (exp(-kappa * k as f64 * dt) * w0 + g1 / kappa))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SlowFastReport { max_violation, g1 })
}

/// Quasi-steady valuation `φ = (a_Y/κ_Y) tanh(r_Y)` seen by the step from
/// `z` to `z_next`: the readout uses the updated principal fields and the
/// current executive state and memory, exactly as the valuative stage does.
pub fn quasi_steady_valuation(
    cfg: &SystemConfig,
    z: &StateVector,
    z_next: &StateVector,
    carry: &Carry,
    input: &StepInput,
) -> Vec<f64> {
    let p = &cfg.params;
    let scalars = StageScalars {
        homeostatic: carry.homeostatic.clone(),
        prediction_error: crate::math::dist(z_next.x.as_slice(), z.x.as_slice()) / cfg.arch.dt,
        novelty: crate::math::dist(&input.u, &carry.u_prev),
        outcome: input.outcome,
    };
    let r = valuative_drive(
        &p.valuative,
        &p.symbolic,
        &p.geometric,
        &z_next.h,
        &z_next.x,
        &z.p,
        &z.m,
        &scalars,
    );
    let s = p.valuative.amplitude / p.valuative.kappa;
    r.into_iter().map(|v| s * tanh(v)).collect()
}

/// Largest sampled `⟨F(u) − F(v), u − v⟩ / ‖u − v‖²`, an estimate of `−μ`
/// biased upward (toward failure). Coincident pairs are skipped.
pub fn one_sided_lipschitz_estimate<F, S>(mut map: F, mut sampler: S, n_pairs: usize) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
    S: FnMut() -> (Vec<f64>, Vec<f64>),
{
    let mut best = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let (u, v) = sampler();
        let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let d2 = dot(&d, &d);
        if d2 == 0.0 {
            continue;
        }
        let fu = map(&u);
        let fv = map(&v);
        let df: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| a - b).collect();
        best = best.max(dot(&df, &d) / d2);
    }
    best
}

fn uniform_ball<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 0.0 && n <= 1.0 {
            let rad = r * crate::math::pow(rng.gen_range(0.0..1.0), 1.0 / dim as f64);
            return v.into_iter().map(|x| x * rad / n).collect();
        }
    }
}

/// Sampled one-sided constants of the reaction terms and the executive
/// field, each over `n_pairs` pairs of the respective domain with a shared
/// random context per pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampledConstants {
    pub f_l: f64,
    pub f_r: f64,
    pub p: f64,
    pub pairs: usize,
}

type Sampler<'a> = dyn FnMut(&mut ChaCha8Rng) -> Vec<f64> + 'a;
type ContextField<'a> = dyn Fn(&[f64], &[f64]) -> Vec<f64> + 'a;

pub fn sampled_constants(cfg: &SystemConfig, seed: u64, n_pairs: usize) -> SampledConstants {
    let arch = &cfg.arch;
    let p = &cfg.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, d_l, v, d_r) = (arch.tokens, arch.d_l, arch.nodes, arch.d_r);
    let cl = SymbolicParams::context_dim(arch);
    let cr = GeometricParams::context_dim(arch);
    let mut est = |dim: usize, ctx_dim: usize, sample: &mut Sampler, f: &ContextField| {
        let mut best = f64::NEG_INFINITY;
        for _ in 0..n_pairs {
            let ctx: Vec<f64> = (0..ctx_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = sample(&mut rng);
            let b = sample(&mut rng);
            debug_assert_eq!(a.len(), dim);
            best = best.max(one_sided_lipschitz_estimate(
                |u| f(u, &ctx),
                || (a.clone(), b.clone()),
                1,
            ));
        }
        best
    };
    let f_l = est(
        t * d_l,
        cl,
        &mut |rng| uniform_ball(rng, t * d_l, arch.radii.h),
        &|u, ctx| {
            let h = Mat::from_row_major(t, d_l, u.to_vec()).expect("shape");
            symbolic_reaction(&p.symbolic, &h, ctx).as_slice().to_vec()
        },
    );
    let f_r = est(
        v * d_r,
        cr,
        &mut |rng| (0..v).flat_map(|_| uniform_ball(rng, d_r, arch.radii.x)).collect(),
        &|u, ctx| {
            let x = Mat::from_row_major(v, d_r, u.to_vec()).expect("shape");
            geometric_reaction(arch, &p.geometric, &x, ctx).as_slice().to_vec()
        },
    );
    let n_p = arch.n_p;
    let fp = est(n_p, n_p, &mut |rng| uniform_ball(rng, n_p, arch.radii.p), &|u, r| {
        let r: Vec<f64> = r.iter().map(|v| 3.0 * v).collect();
        executive_rhs(&p.executive, u, &r)
    });
    SampledConstants {
        f_l,
        f_r,
        p: fp,
        pairs: n_pairs,
    }
}

/// Radial damping margins `η = min_{‖F‖ = R} −⟨F, reaction(F)⟩`, bounded
/// below in closed form: `α R² − R (α‖center‖ + ‖offset‖ + B)` where `B`
/// bounds the `tanh` term (zero when its argument vanishes identically).
pub fn radial_margins(cfg: &SystemConfig) -> (f64, f64, f64, f64) {
    let arch = &cfg.arch;
    let p = &cfg.params;
    let s = &p.symbolic;
    let g = &p.geometric;
    let r_l = arch.radii.h;
    let r_r = arch.radii.x * sqrt(arch.nodes as f64);
    let tanh_l = if s.a.is_zero() && s.context.is_zero() {
        0.0
    } else {
        sqrt((arch.tokens * arch.d_l) as f64)
    };
    let tanh_r = if g.a.is_zero() && g.context.is_zero() && g.message.is_zero() {
        0.0
    } else {
        sqrt((arch.nodes * arch.d_r) as f64)
    };
    let shift = |alpha: f64, center: &Mat, offset: &Mat| {
        let v: Vec<f64> = center
            .as_slice()
            .iter()
            .zip(offset.as_slice())
            .map(|(c, o)| alpha * c + o)
            .collect();
        norm(&v)
    };
    let eta_l = s.alpha * r_l * r_l - r_l * (shift(s.alpha, &s.center, &s.offset) + tanh_l);
    let eta_r = g.alpha * r_r * r_r - r_r * (shift(g.alpha, &g.center, &g.offset) + tanh_r);
    (eta_l, eta_r, r_l, r_r)
}

/// One checked structural assumption.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionFlag {
    pub name: &'static str,
    pub ok: bool,
    /// The measured quantity the decision is based on.
    pub value: f64,
    pub detail: String,
}

fn flag(name: &'static str, ok: bool, value: f64, detail: String) -> AssumptionFlag {
    AssumptionFlag {
        name,
        ok,
        value,
        detail,
    }
}

/// Structural assumptions decidable from the configuration.
pub fn check_assumptions(cfg: &SystemConfig) -> Vec<AssumptionFlag> {
    let arch = &cfg.arch;
    let p = &cfg.params;
    let mut out = Vec::new();
    let gap_l = arch
        .graph_l
        .with_weights(arch.graph_l.weights().iter().map(|w| w * arch.eps_q).collect())
        .and_then(|g| g.spectral_gap())
        .unwrap_or(0.0);
    out.push(flag(
        "sequence_gap",
        gap_l > 0.0,
        gap_l,
        format!("lambda_2 at the precision floor = {gap_l:.6}"),
    ));
    let gap_r = arch.graph_r.spectral_gap().unwrap_or(0.0);
    out.push(flag(
        "scene_backbone_gap",
        gap_r > 0.0,
        gap_r,
        format!("lambda_2 of the backbone = {gap_r:.6}"),
    ));
    out.push(flag(
        "precision_box",
        arch.eps_q > 0.0 && arch.eps_q < arch.r_q,
        arch.eps_q,
        format!("[{}, {}]", arch.eps_q, arch.r_q),
    ));
    let m_l = p.symbolic.alpha - p.symbolic.lipschitz();
    out.push(flag("reaction_l", m_l > 0.0, m_l, format!("alpha_H - Lip = {m_l:.6}")));
    let m_r = p.geometric.alpha - p.geometric.lipschitz(arch);
    out.push(flag("reaction_r", m_r > 0.0, m_r, format!("alpha_X - Lip = {m_r:.6}")));
    let budget = cfg.kernel.family_budget();
    let c_k = cfg.coupling_bound();
    out.push(flag(
        "coupling_budget",
        budget <= c_k * (1.0 + 1e-12) && budget.is_finite(),
        budget,
        format!("family budget {budget:.6} against C_K {c_k:.6}"),
    ));
    let d_p = p.executive.dissipation();
    out.push(flag("executive", d_p > 0.0, d_p, format!("mu_P - |W_P| = {d_p:.6}")));
    let v = &p.valuative;
    out.push(flag(
        "valuative",
        v.amplitude <= v.kappa,
        v.kappa - v.amplitude,
        format!("kappa_Y - a_Y = {:.6}", v.kappa - v.amplitude),
    ));
    out.push(flag(
        "memory",
        p.memory.c_m <= arch.radii.m,
        p.memory.c_m,
        format!("C_M = {} against R_M = {}", p.memory.c_m, arch.radii.m),
    ));
    let worst = p.policy.eta.iter().fold(0.0f64, |a, e| a.max(e * p.policy.lambda_reg));
    out.push(flag(
        "policy",
        worst < 1.0,
        worst,
        format!("max eta * lambda_reg = {worst:.6}"),
    ));
    let bound = STEP_FACTOR / cfg.stiffness();
    out.push(flag(
        "step_bound",
        arch.dt <= bound,
        arch.dt,
        format!("dt = {} against {bound:.3e}", arch.dt),
    ));
    let gw = overlay_gain_bound(&p.awareness.gain);
    out.push(flag(
        "overlay_gain",
        gw >= 0.0,
        gw,
        format!("overlay gain bound {gw:.6}"),
    ));
    out
}

/// All certificates of a configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StabilityReport {
    pub name: String,
    pub c_k: f64,
    pub mu_l: f64,
    pub mu_r: f64,
    pub mu_p: f64,
    pub alpha_l: f64,
    pub alpha_r: f64,
    pub small_gain_ok: bool,
    pub eta_l: f64,
    pub eta_r: f64,
    pub radial_ok: bool,
    /// Every integration step ends with a domain projection, which keeps
    /// the principal balls invariant whatever the margins.
    pub radial_by_projection: bool,
    pub m_l: Option<f64>,
    pub m_r: Option<f64>,
    pub m_sdc: Option<f64>,
    pub strengthened_ok: Option<bool>,
    pub crossgain_matrix: [[f64; 3]; 3],
    pub crossgain_min_eig: f64,
    pub crossgain_ok: bool,
    pub sampled: SampledConstants,
    /// Sampled constants confirm the declared ones within `1e-6`.
    pub dissipativity_ok: bool,
    pub assumptions: Vec<AssumptionFlag>,
}

/// Gains of the executive forcing and the valuative readout in the
/// principal errors, `(c_PH, c_PX, c_PY, L_ΦH, L_ΦX)`. Zero in the closed
/// regime, where every auxiliary is frozen.
pub fn executive_gains(cfg: &SystemConfig) -> (f64, f64, f64, f64, f64) {
    if matches!(cfg.regime, Regime::ClosedPrincipal { .. }) {
        return (0.0, 0.0, 0.0, 0.0, 0.0);
    }
    let p = &cfg.params;
    let e = &p.executive;
    let ro = &e.readout;
    let w_da = norm(cfg.params.neuromod.weights.row(DA));
    let c_ph = e.amplitude * ro.wh.op_norm();
    let c_px = e.amplitude * ro.wx.op_norm();
    // μ_DA is ‖w_DA‖/4-Lipschitz in Y and enters as 2 μ_DA − 1.
    let dop = norm(&ro.dopamine) * w_da / 2.0;
    let c_py = e.amplitude * (ro.wy.op_norm() + dop);
    let v = &p.valuative;
    let s = v.amplitude / v.kappa;
    (c_ph, c_px, c_py, s * v.readout.wh.op_norm(), s * v.readout.wx.op_norm())
}

impl StabilityReport {
    pub fn compute(cfg: &SystemConfig, seed: u64, n_pairs: usize) -> Result<Self> {
        let d = &cfg.declared;
        let c_k = cfg.coupling_bound();
        let (small_gain_ok, alpha_l, alpha_r) = small_gain_check(c_k, d.mu_l, d.mu_r)?;
        let (eta_l, eta_r, r_l, r_r) = radial_margins(cfg);
        let radial_ok = radial_margin_check(eta_l, eta_r, r_l, r_r, c_k);
        let (m_l, m_r, m_sdc, strengthened_ok) = match &cfg.analytic {
            Some(a) => {
                let (m_l, m_r, m) =
                    state_dependent_margin(a.l_alpha, a.l_beta, a.l_q, a.l_w, a.h_star_norm, a.x_star_norm);
                (
                    Some(m_l),
                    Some(m_r),
                    Some(m),
                    Some(strengthened_small_gain(c_k, m, d.mu_l, d.mu_r)),
                )
            }
            None => (None, None, None, None),
        };
        let (c_ph, c_px, c_py, l_h, l_x) = executive_gains(cfg);
        let (crossgain_matrix, crossgain_min_eig) =
            executive_crossgain(alpha_l, alpha_r, c_ph, c_px, c_py, l_h, l_x, d.mu_p);
        let sampled = sampled_constants(cfg, seed, n_pairs);
        let dissipativity_ok =
            sampled.f_l <= -d.mu_l + 1e-6 && sampled.f_r <= -d.mu_r + 1e-6 && sampled.p <= -d.mu_p + 1e-6;
        Ok(StabilityReport {
            name: cfg.name.clone(),
            c_k,
            mu_l: d.mu_l,
            mu_r: d.mu_r,
            mu_p: d.mu_p,
            alpha_l,
            alpha_r,
            small_gain_ok,
            eta_l,
            eta_r,
            radial_ok,
            radial_by_projection: true,
            m_l,
            m_r,
            m_sdc,
            strengthened_ok,
            crossgain_matrix,
            crossgain_min_eig,
            crossgain_ok: crossgain_min_eig > 0.0,
            sampled,
            dissipativity_ok,
            assumptions: check_assumptions(cfg),
        })
    }

    /// Every requested certificate passes.
    pub fn passes(&self) -> bool {
        self.small_gain_ok
            && (self.radial_ok || self.radial_by_projection)
            && self.strengthened_ok.unwrap_or(true)
            && self.crossgain_ok
            && self.dissipativity_ok
            && self.assumptions.iter().all(|a| a.ok)
    }

    /// Human-readable table, one quantity per line.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(&format!("{k:<22} {v}\n"));
        };
        let yes = |b: bool| String::from(if b { "pass" } else { "FAIL" });
        line("scenario", self.name.clone());
        line("C_K", format!("{:.6}", self.c_k));
        line(
            "mu_L mu_R mu_P",
            format!("{:.6} {:.6} {:.6}", self.mu_l, self.mu_r, self.mu_p),
        );
        line("alpha_L alpha_R", format!("{:.6} {:.6}", self.alpha_l, self.alpha_r));
        line("small gain", yes(self.small_gain_ok));
        line("eta_L eta_R", format!("{:.6} {:.6}", self.eta_l, self.eta_r));
        line(
            "radial margin",
            if self.radial_ok {
                yes(true)
            } else if self.radial_by_projection {
                String::from("satisfied by projection")
            } else {
                yes(false)
            },
        );
        if let (Some(m_l), Some(m_r), Some(m)) = (self.m_l, self.m_r, self.m_sdc) {
            line("m_L m_R M_sdc", format!("{m_l:.6} {m_r:.6} {m:.6}"));
        }
        if let Some(ok) = self.strengthened_ok {
            line("strengthened gain", yes(ok));
        }
        line("crossgain min eig", format!("{:.6}", self.crossgain_min_eig));
        line("crossgain", yes(self.crossgain_ok));
        line(
            "sampled F_L F_R P",
            format!(
                "{:.6} {:.6} {:.6} ({} pairs)",
                self.sampled.f_l, self.sampled.f_r, self.sampled.p, self.sampled.pairs
            ),
        );
        line("dissipativity", yes(self.dissipativity_ok));
        for a in &self.assumptions {
            line(a.name, format!("{} ({})", yes(a.ok), a.detail));
        }
        line("overall", yes(self.passes()));
        s
    }
}

/// Report with seed 0 and [`DEFAULT_PAIRS`] pairs.
pub fn default_report(cfg: &SystemConfig) -> Result<StabilityReport> {
    StabilityReport::compute(cfg, 0, DEFAULT_PAIRS)
}
