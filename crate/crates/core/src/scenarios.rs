//! Built-in K3/P3 configurations, random admissible configurations and the
//! per-class coarse-graining report.
//!
//! The K3/P3 system has three tokens on the complete graph `K3` and three
//! nodes on the path `P3`, both with scalar features. Its equilibrium is
//! `H* = X* = e₁` with every auxiliary at rest, pinned by offsets computed
//! from that state when the configuration is built.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{
    ActionSchedule, AnalyticBounds, DeclaredConstants, Drive, InputSpec, Regime, SystemConfig, CONFIG_VERSION,
};
use crate::coupling::{
    example_channel, AttentionChannel, CouplingKernel, Direction, Gate, GateInputs, GateSignal, GatedChannel,
    KernelState, LowRankChannel, Selection,
};
use crate::dynamics::fields::{
    awareness_weights, diffusion, neuromod_readout, overlay_gain, precision_field, scene_conductance,
    sequence_conductance,
};
use crate::dynamics::params::{
    AwarenessParams, ExecutiveParams, ExecutiveReadout, FieldParams, GeometricParams, HomeostaticParams, MemoryParams,
    NeuromodParams, OverlayGain, OverlayPattern, PolicyParams, PrecisionLaw, ReliabilityKernel, ReliabilityParams,
    RoutingParams, SymbolicParams, ValuativeParams, ValuativeReadout, ACH, NE,
};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::Mat;
use crate::math::sqrt;
use crate::stability::sampled_constants;
use crate::state::{ArchitectureConfig, PolicySpec, Radii, StateVector};

/// Names accepted by [`by_name`].
pub const SCENARIO_NAMES: [&str; 4] = ["k3p3", "k3p3-valuation", "k3p3-closed", "k3p3-full"];

/// Parameters of the K3/P3 system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct K3p3Params {
    /// Base gain of the coupling gates.
    pub k: f64,
    /// Slope of the right-to-left gate in `Y₀`.
    pub sigma_alpha: f64,
    /// Slope of the left-to-right gate in `P₀`.
    pub sigma_beta: f64,
    /// Precision modulation, `Q(Y) = 1 + δ_Q tanh Y`.
    pub delta_q: f64,
    /// Overlay gain, scene conductance `1 − δ_W + δ_W (1 + tanh P₀)`.
    pub delta_w: f64,
    pub alpha_h: f64,
    pub alpha_x: f64,
    pub kappa_y: f64,
    pub kappa_p: f64,
    /// Common delay of both directions.
    pub tau: f64,
    pub dt: f64,
}

impl Default for K3p3Params {
    fn default() -> Self {
        K3p3Params {
            k: 0.05,
            sigma_alpha: 0.05,
            sigma_beta: 0.05,
            delta_q: 0.05,
            delta_w: 0.05,
            alpha_h: 1.0,
            alpha_x: 1.0,
            kappa_y: 1.0,
            kappa_p: 1.0,
            tau: 0.5,
            dt: 1e-3,
        }
    }
}

impl K3p3Params {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k", self.k),
            ("alpha_h", self.alpha_h),
            ("alpha_x", self.alpha_x),
            ("kappa_y", self.kappa_y),
            ("kappa_p", self.kappa_p),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_beta", self.sigma_beta),
            ("delta_q", self.delta_q),
            ("delta_w", self.delta_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be nonnegative"));
            }
        }
        if self.delta_q >= 1.0 || self.delta_w >= 1.0 {
            return Err(Error::invalid(
                "delta",
                "backbone positivity needs delta_q, delta_w < 1",
            ));
        }
        if self.sigma_alpha > self.k || self.sigma_beta > self.k {
            return Err(Error::invalid("sigma", "nonnegative gates need sigma <= k"));
        }
        Ok(())
    }

    /// `(√15/2)(k + max(σ_α, σ_β))`, the coupling budget in closed form.
    pub fn coupling_budget(&self) -> f64 {
        sqrt(15.0) / 2.0 * (self.k + self.sigma_alpha.max(self.sigma_beta))
    }
}

/// Valuation-executive extension of [`K3p3Params`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ValuationParams {
    pub base: K3p3Params,
    pub a_y: f64,
    pub a_p: f64,
}

impl Default for ValuationParams {
    fn default() -> Self {
        ValuationParams {
            base: K3p3Params::default(),
            a_y: 0.5,
            a_p: 0.5,
        }
    }
}

fn column(v: &[f64]) -> Mat {
    Mat::from_row_major(v.len(), 1, v.to_vec()).expect("column")
}

fn row(v: &[f64]) -> Mat {
    Mat::from_row_major(1, v.len(), v.to_vec()).expect("row")
}

fn k3p3_arch(p: &K3p3Params) -> Result<ArchitectureConfig> {
    Ok(ArchitectureConfig {
        tokens: 3,
        nodes: 3,
        d_l: 1,
        d_r: 1,
        n_s: 2,
        n_y: 1,
        n_p: 1,
        n_m: 1,
        n_u: 1,
        policies: Vec::new(),
        tau_rl: p.tau,
        tau_lr: p.tau,
        dt: p.dt,
        radii: Radii {
            h: 5.0,
            x: 5.0,
            y: 1.0,
            p: 1.0,
            m: 1.0,
        },
        eps_q: 1.0 - p.delta_q,
        r_q: 1.0 + p.delta_q,
        graph_l: WeightedGraph::complete(3, 1.0)?,
        graph_r: WeightedGraph::path(3, 1.0 - p.delta_w)?,
    })
}

fn k3p3_kernel(p: &K3p3Params) -> CouplingKernel {
    CouplingKernel::GatedMixture {
        channels: vec![GatedChannel {
            forward: Gate {
                base: p.k,
                slope: p.sigma_alpha,
                signal: GateSignal::Valuation,
            },
            adjoint: Gate {
                base: p.k,
                slope: p.sigma_beta,
                signal: GateSignal::Executive,
            },
            kernel: example_channel(),
        }],
    }
}

fn k3p3_params(arch: &ArchitectureConfig, p: &K3p3Params) -> FieldParams {
    let (t, v) = (arch.tokens, arch.nodes);
    let e1 = column(&[1.0, 0.0, 0.0]);
    let mut neuromod = Mat::zeros(5, 1);
    // μ_ACh = σ(2Y) = (1 + tanh Y)/2, so the linear law gives Q = 1 + δ_Q tanh Y
    neuromod[(ACH, 0)] = 2.0;
    FieldParams {
        symbolic: SymbolicParams {
            alpha: p.alpha_h,
            center: e1.clone(),
            offset: Mat::zeros(t, 1),
            a: Mat::zeros(1, 1),
            context: Mat::zeros(1, SymbolicParams::context_dim(arch)),
        },
        geometric: GeometricParams {
            alpha: p.alpha_x,
            center: e1,
            offset: Mat::zeros(v, 1),
            a: Mat::zeros(1, 1),
            message: Mat::zeros(1, 1),
            context: Mat::zeros(1, GeometricParams::context_dim(arch)),
            edge_lengths_sq: vec![0.0; arch.graph_r.edge_count()],
        },
        neuromod: NeuromodParams {
            weights: neuromod,
            bias: vec![0.0; 5],
        },
        precision: PrecisionLaw::Linear,
        awareness: AwarenessParams {
            logit_scale: 1.0,
            ne_gain: 0.0,
            gain: OverlayGain::Executive { delta: p.delta_w },
            pattern: OverlayPattern::Uniform,
        },
        routing: RoutingParams {
            bias: Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2"),
            gain: Mat::zeros(2, 2),
            valuation: Mat::zeros(2, 2),
            beta_rho: 0.0,
            broadcast_gain: 0.0,
        },
        valuative: ValuativeParams {
            kappa: p.kappa_y,
            amplitude: 0.0,
            readout: ValuativeReadout {
                wh: Mat::zeros(1, t),
                wx: Mat::zeros(1, v),
                wp: Mat::zeros(1, 1),
                wm: Mat::zeros(1, 1),
                ws: Mat::zeros(1, arch.n_u + 3),
                bias: vec![0.0],
            },
        },
        executive: ExecutiveParams {
            mu_p: p.kappa_p,
            w_p: Mat::zeros(1, 1),
            amplitude: 0.0,
            readout: ExecutiveReadout {
                wh: Mat::zeros(1, t),
                wx: Mat::zeros(1, v),
                wy: Mat::zeros(1, 1),
                dopamine: vec![0.0],
                drift: vec![0.0],
                bias: vec![0.0],
            },
        },
        memory: MemoryParams {
            write: Mat::zeros(1, 2),
            c_m: 0.0,
            gate_weights: vec![0.0; 2],
            gate_bias: 0.0,
            eps_m: 0.1,
        },
        policy: PolicyParams {
            lambda: Vec::new(),
            eta: Vec::new(),
            lambda_reg: 0.1,
            floor_eps: 0.1,
            bound_d: 1.0,
            signed: true,
        },
        reliability: ReliabilityParams {
            alpha: 0.1,
            kernel: ReliabilityKernel::Gaussian,
        },
        homeostatic: HomeostaticParams { kappa_h: 1.0, b_u: 0.0 },
    }
}

/// The rest state `Z*`: `H* = X* = e₁`, `Y = P = M = 0`, precision and
/// awareness at their targets, one-hot cross routing and full reliability.
fn k3p3_equilibrium(arch: &ArchitectureConfig, params: &FieldParams) -> StateVector {
    let mut z = StateVector::neutral(arch);
    z.h = column(&[1.0, 0.0, 0.0]);
    z.x = column(&[1.0, 0.0, 0.0]);
    let mu = neuromod_readout(&z.y, &params.neuromod);
    z.q = precision_field(mu[ACH], arch, &params.precision);
    z.w = awareness_weights(&z.x, mu[NE], arch, &params.awareness);
    z.routing = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2");
    z
}

/// Offsets that make the principal velocities vanish at `z`:
/// `offset_L = Δ_L H* − C_RL(Z*)` and `offset_R = Δ_R X* − C_LR(Z*)`.
fn pin_offsets(cfg: &mut SystemConfig, z: &StateVector) -> Result<()> {
    let arch = &cfg.arch;
    let p = &cfg.params;
    let mu = neuromod_readout(&z.y, &p.neuromod);
    let seq_c = sequence_conductance(&z.q, arch);
    let gain = overlay_gain(&p.awareness.gain, z.p[0], mu[NE]);
    let scene_c = scene_conductance(&z.w, gain, arch, p.awareness.pattern);
    let ks = KernelState {
        gates: GateInputs {
            valuation: z.y[0],
            executive: z.p[0],
        },
        h: &z.h,
        x: &z.x,
    };
    let (g_rl, g_lr) = crate::dynamics::fields::routing_gates(&z.routing);
    let c_rl = cfg
        .kernel
        .operator(&ks, Direction::RightToLeft)
        .apply_forward(&Selection::Full, &z.x)?
        .scaled(g_rl);
    let c_lr = cfg
        .kernel
        .operator(&ks, Direction::LeftToRight)
        .apply_adjoint(&Selection::Full, &z.h)?
        .scaled(g_lr);
    let mut off_l = diffusion(&arch.graph_l, &seq_c, &z.h);
    off_l.add_scaled(-1.0, &c_rl);
    let mut off_r = diffusion(&arch.graph_r, &scene_c, &z.x);
    off_r.add_scaled(-1.0, &c_lr);
    cfg.params.symbolic.offset = off_l;
    cfg.params.geometric.offset = off_r;
    Ok(())
}

fn analytic_bounds(arch: &ArchitectureConfig, p: &K3p3Params) -> Result<AnalyticBounds> {
    let k0 = sqrt(15.0) / 2.0;
    let lap_l = arch.graph_l.laplacian_norm()?;
    let lap_r = arch
        .graph_r
        .with_weights(vec![1.0; arch.graph_r.edge_count()])?
        .laplacian_norm()?;
    Ok(AnalyticBounds {
        l_alpha: k0 * p.sigma_alpha,
        l_beta: k0 * p.sigma_beta,
        l_q: p.delta_q * lap_l,
        l_w: p.delta_w * lap_r,
        h_star_norm: 1.0,
        x_star_norm: 1.0,
    })
}

/// The K3/P3 system with inert valuation and executive state.
pub fn build_k3p3(p: &K3p3Params) -> Result<SystemConfig> {
    p.validate()?;
    let arch = k3p3_arch(p)?;
    let params = k3p3_params(&arch, p);
    let eq = k3p3_equilibrium(&arch, &params);
    let mut cfg = SystemConfig {
        version: CONFIG_VERSION,
        name: String::from("k3p3"),
        kernel: k3p3_kernel(p),
        declared: DeclaredConstants {
            mu_l: p.alpha_h,
            mu_r: p.alpha_x,
            mu_p: p.kappa_p,
            coupling_bound: None,
        },
        analytic: Some(analytic_bounds(&arch, p)?),
        regime: Regime::Adaptive,
        input: InputSpec::zero(&arch),
        equilibrium: None,
        params,
        arch,
    };
    pin_offsets(&mut cfg, &eq)?;
    cfg.equilibrium = Some(eq);
    cfg.validate()?;
    Ok(cfg)
}

/// The K3/P3 system with bounded dissipative valuation and executive
/// dynamics driven by readouts centred at the equilibrium fields.
pub fn build_k3p3_valuation(p: &ValuationParams) -> Result<SystemConfig> {
    let b = &p.base;
    if !(p.a_y > 0.0 && p.a_y <= b.kappa_y) {
        return Err(Error::invalid("a_y", "viability needs 0 < a_Y <= kappa_Y"));
    }
    if !(p.a_p > 0.0 && p.a_p <= b.kappa_p) {
        return Err(Error::invalid("a_p", "viability needs 0 < a_P <= kappa_P"));
    }
    let mut cfg = build_k3p3(b)?;
    cfg.name = String::from("k3p3-valuation");
    let third = 1.0 / 3.0;
    let v = &mut cfg.params.valuative;
    v.amplitude = p.a_y;
    v.readout.wh = row(&[third; 3]);
    v.readout.wx = row(&[third; 3]);
    v.readout.wp = row(&[1.0]);
    let e = &mut cfg.params.executive;
    e.amplitude = p.a_p;
    e.readout.wh = row(&[1.0, 0.0, -1.0]);
    e.readout.wx = row(&[1.0, 0.0, -1.0]);
    e.readout.wy = row(&[1.0]);
    cfg.validate()?;
    Ok(cfg)
}

/// [`build_k3p3`] with every auxiliary frozen at the equilibrium.
pub fn build_k3p3_closed(p: &K3p3Params) -> Result<SystemConfig> {
    let mut cfg = build_k3p3(p)?;
    cfg.name = String::from("k3p3-closed");
    let eq = cfg.equilibrium.clone().expect("built with an equilibrium");
    cfg.regime = Regime::ClosedPrincipal {
        reference: Box::new(eq),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// [`build_k3p3_valuation`] with every subsystem active: a sinusoidal
/// drive, an executive-gated memory write, reliability-weighted routing and
/// a two-action policy. No equilibrium is claimed.
pub fn build_k3p3_full(p: &ValuationParams) -> Result<SystemConfig> {
    let mut cfg = build_k3p3_valuation(p)?;
    cfg.name = String::from("k3p3-full");
    cfg.equilibrium = None;
    cfg.arch.n_s = 5;
    cfg.arch.policies = vec![PolicySpec {
        actions: 2,
        r_z: 20.0,
        r_theta: 40.0,
    }];
    let pr = &mut cfg.params;
    pr.routing = RoutingParams {
        bias: Mat::from_rows(&[
            &[0.0, 1.0, 0.2, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.2, 0.0],
            &[0.3, 0.3, 0.0, 0.0, 0.0],
            &[0.2, 0.2, 0.2, 0.0, 0.0],
            &[0.4, 0.0, 0.0, 0.0, 0.0],
        ])
        .expect("5x5"),
        gain: Mat::from_row_major(5, 5, vec![0.1; 25]).expect("5x5"),
        valuation: Mat::from_row_major(5, 5, vec![0.05; 25]).expect("5x5"),
        beta_rho: 0.2,
        broadcast_gain: 0.1,
    };
    pr.neuromod.weights = Mat::from_rows(&[&[1.0], &[2.0], &[0.5], &[0.0], &[0.0]]).expect("5x1");
    pr.symbolic.context = Mat::from_rows(&[&[0.1, 0.1, 0.1, 0.1]]).expect("1x4");
    pr.geometric.context = Mat::from_rows(&[&[0.1, 0.1, 0.1, 0.1]]).expect("1x4");
    pr.memory = MemoryParams {
        write: Mat::from_rows(&[&[0.5, 0.5]]).expect("1x2"),
        c_m: 0.5,
        gate_weights: vec![0.3, 0.3],
        gate_bias: -1.0,
        eps_m: 0.05,
    };
    pr.valuative.readout.ws = Mat::from_rows(&[&[0.2, 0.1, 0.1, 0.2]]).expect("1x4");
    pr.executive.readout.dopamine = vec![0.3];
    pr.executive.readout.drift = vec![0.1];
    pr.policy = PolicyParams {
        lambda: vec![0.5],
        eta: vec![0.1],
        lambda_reg: 0.5,
        floor_eps: 0.2,
        bound_d: 1.0,
        signed: true,
    };
    pr.homeostatic = HomeostaticParams { kappa_h: 1.0, b_u: 0.5 };
    cfg.input = InputSpec {
        drive: Drive::Sinusoid {
            amplitude: 0.5,
            period: 5.0,
        },
        outcome: 0.1,
        actions: ActionSchedule::Cycle { period_steps: 500 },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in scenario with default parameters.
pub fn by_name(name: &str) -> Option<Result<SystemConfig>> {
    match name {
        "k3p3" => Some(build_k3p3(&K3p3Params::default())),
        "k3p3-valuation" => Some(build_k3p3_valuation(&ValuationParams::default())),
        "k3p3-closed" => Some(build_k3p3_closed(&K3p3Params::default())),
        "k3p3-full" => Some(build_k3p3_full(&ValuationParams::default())),
        _ => None,
    }
}

fn random_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Mat {
    let v = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
    Mat::from_row_major(rows, cols, v).expect("shape")
}

/// Rescale so that the spectral norm is at most `bound`.
fn cap_norm(m: Mat, bound: f64) -> Mat {
    let n = m.op_norm();
    if n > bound && n > 0.0 {
        m.scaled(bound / n)
    } else {
        m
    }
}

fn random_unit_ball<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = crate::math::norm(&v);
    if n > 1.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        v
    }
}

fn random_gate<R: Rng + ?Sized>(rng: &mut R) -> Gate {
    let base = rng.gen_range(0.0..0.3);
    let signal = *[GateSignal::Valuation, GateSignal::Executive, GateSignal::Constant]
        .choose(rng)
        .expect("nonempty");
    Gate {
        base,
        slope: rng.gen_range(-1.0..1.0) * base,
        signal,
    }
}

fn random_kernel<R: Rng + ?Sized>(
    rng: &mut R,
    t: usize,
    n: usize,
    d_l: usize,
    d_r: usize,
    nested: bool,
) -> CouplingKernel {
    let family = if nested {
        rng.gen_range(0..4)
    } else {
        rng.gen_range(0..6)
    };
    let s = 0.3 / sqrt((t * n) as f64);
    match family {
        0 => CouplingKernel::Fixed {
            tokens: t,
            nodes: n,
            blocks: (0..t * n).map(|_| random_mat(rng, d_l, d_r, s)).collect(),
        },
        1 => CouplingKernel::ConstantShared {
            tokens: t,
            nodes: n,
            w: random_mat(rng, d_l, d_r, s),
        },
        2 => {
            let d_k = rng.gen_range(1..=2);
            CouplingKernel::AttentionWeighted {
                tokens: t,
                nodes: n,
                w_v: random_mat(rng, d_l, d_r, 0.3 / sqrt(t as f64)),
                w_q: random_mat(rng, d_k, d_l, 1.0),
                w_k: random_mat(rng, d_k, d_r, 1.0),
            }
        }
        3 => CouplingKernel::LowRank {
            tokens: t,
            nodes: n,
            channels: (0..rng.gen_range(1..=2))
                .map(|_| LowRankChannel {
                    a: random_unit_ball(rng, t),
                    b: random_unit_ball(rng, n),
                    m: random_mat(rng, d_l, d_r, 0.2),
                })
                .collect(),
        },
        4 => CouplingKernel::GatedMixture {
            channels: (0..rng.gen_range(1..=2))
                .map(|_| GatedChannel {
                    forward: random_gate(rng),
                    adjoint: random_gate(rng),
                    kernel: random_kernel(rng, t, n, d_l, d_r, true),
                })
                .collect(),
        },
        _ => CouplingKernel::LowRankGatedAttention {
            tokens: t,
            nodes: n,
            channels: (0..rng.gen_range(1..=2))
                .map(|_| AttentionChannel {
                    gate: random_gate(rng),
                    query: (0..d_l).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    key: (0..d_r).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    m: random_mat(rng, d_l, d_r, 0.5),
                })
                .collect(),
        },
    }
}

/// Connected symmetric graph: a random spanning path plus random chords.
fn random_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Result<WeightedGraph> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    for i in 0..n {
        for j in i + 1..n {
            if !pairs.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)) && rng.gen_bool(0.3) {
                pairs.push((i, j));
            }
        }
    }
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (i, j) in pairs {
        let w = rng.gen_range(floor..1.5);
        edges.push([i, j]);
        edges.push([j, i]);
        weights.push(w);
        weights.push(w);
    }
    WeightedGraph::new(n, edges, weights)
}

/// A random admissible configuration with small dimensions, every kernel
/// family, every overlay law and nonzero drive and outcome. The step is
/// half the explicit bound.
pub fn sample_config<R: Rng + ?Sized>(rng: &mut R) -> Result<SystemConfig> {
    let tokens = rng.gen_range(2..=4);
    let nodes = rng.gen_range(2..=4);
    let d_l = rng.gen_range(1..=3);
    let d_r = rng.gen_range(1..=3);
    let n_s = rng.gen_range(2..=5);
    let n_y = rng.gen_range(1..=2);
    let n_p = rng.gen_range(1..=2);
    let n_m = rng.gen_range(1..=2);
    let n_u = rng.gen_range(1..=2);
    let lambda_reg = rng.gen_range(0.2..1.0);
    let floor_eps = rng.gen_range(0.1..0.4);
    let bound_d = 1.0;
    let mut policies = Vec::new();
    let mut lambda = Vec::new();
    let mut eta = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let actions = rng.gen_range(2..=3);
        let l = rng.gen_range(0.2..0.8);
        let score = (1.0 - floor_eps) * actions as f64 / floor_eps;
        let r_z = score / (1.0 - l) * rng.gen_range(1.0..1.5);
        let r_theta = bound_d * r_z / lambda_reg * rng.gen_range(1.0..1.5);
        policies.push(PolicySpec { actions, r_z, r_theta });
        lambda.push(l);
        eta.push(rng.gen_range(0.01..0.9) / lambda_reg);
    }
    let graph_l = match rng.gen_range(0..3) {
        0 => WeightedGraph::complete(tokens, rng.gen_range(0.5..1.5))?,
        1 if tokens >= 3 => WeightedGraph::cycle(tokens, rng.gen_range(0.5..1.5))?,
        _ => random_graph(rng, tokens, 0.3)?,
    };
    let graph_r = random_graph(rng, nodes, 0.3)?;
    let eps_q = rng.gen_range(0.2..0.8);
    let radii = Radii {
        h: rng.gen_range(1.0..4.0),
        x: rng.gen_range(1.0..4.0),
        y: rng.gen_range(0.5..2.0),
        p: rng.gen_range(0.5..2.0),
        m: rng.gen_range(0.5..2.0),
    };
    let mut arch = ArchitectureConfig {
        tokens,
        nodes,
        d_l,
        d_r,
        n_s,
        n_y,
        n_p,
        n_m,
        n_u,
        policies,
        tau_rl: 0.0,
        tau_lr: 0.0,
        dt: 1e-3,
        radii,
        eps_q,
        r_q: eps_q + rng.gen_range(0.2..1.0),
        graph_l,
        graph_r,
    };
    let alpha_h = rng.gen_range(0.5..2.0);
    let alpha_x = rng.gen_range(0.5..2.0);
    let e_l = arch.graph_l.edge_count();
    let e_r = arch.graph_r.edge_count();
    let geometric_a = cap_norm(random_mat(rng, d_r, d_r, 0.5), 0.3 * alpha_x);
    let message = cap_norm(random_mat(rng, d_r, d_r, 0.5), 0.1 * alpha_x);
    let edge_lengths_sq: Vec<f64> = (0..e_r).map(|_| rng.gen_range(0.0..2.0)).collect();
    let mut geometric = GeometricParams {
        alpha: alpha_x,
        center: random_mat(rng, nodes, d_r, 0.5),
        offset: random_mat(rng, nodes, d_r, 0.5),
        a: geometric_a,
        message,
        context: random_mat(rng, d_r, GeometricParams::context_dim(&arch), 0.5),
        edge_lengths_sq,
    };
    let lip_r = geometric.lipschitz(&arch);
    if lip_r >= 0.9 * alpha_x {
        geometric.message = geometric.message.scaled(0.0);
    }
    let kappa_y: f64 = rng.gen_range(0.5..2.0);
    let a_y = rng.gen_range(0.0..1.0) * kappa_y.min(kappa_y * arch.radii.y / sqrt(n_y as f64));
    let mu_p: f64 = rng.gen_range(0.5..2.0);
    let w_p = cap_norm(random_mat(rng, n_p, n_p, 0.5), 0.5 * mu_p);
    let diss = mu_p - w_p.op_norm();
    let a_p = rng.gen_range(0.0..1.0) * mu_p.min(diss * arch.radii.p / sqrt(n_p as f64));
    let precision = if rng.gen_bool(0.5) {
        PrecisionLaw::Linear
    } else {
        // logits shared by both orientations of an edge
        let rev = arch.graph_l.reverse_indices();
        let mut a = vec![0.0; e_l];
        let mut b = vec![0.0; e_l];
        for k in 0..e_l {
            match rev[k] {
                Some(r) if r < k => {
                    a[k] = a[r];
                    b[k] = b[r];
                }
                _ => {
                    a[k] = rng.gen_range(-1.0..1.0);
                    b[k] = rng.gen_range(0.0..2.0);
                }
            }
        }
        PrecisionLaw::Logistic { a, b }
    };
    let gain = match rng.gen_range(0..3) {
        0 => OverlayGain::Zero,
        1 => OverlayGain::Executive {
            delta: rng.gen_range(0.0..0.5),
        },
        _ => OverlayGain::Norepinephrine {
            scale: rng.gen_range(0.0..0.5),
        },
    };
    let pattern = if rng.gen_bool(0.5) {
        OverlayPattern::Uniform
    } else {
        OverlayPattern::Awareness
    };
    let k = arch.policies.len();
    let params = FieldParams {
        symbolic: SymbolicParams {
            alpha: alpha_h,
            center: random_mat(rng, tokens, d_l, 0.5),
            offset: random_mat(rng, tokens, d_l, 0.5),
            a: cap_norm(random_mat(rng, d_l, d_l, 0.5), 0.5 * alpha_h),
            context: random_mat(rng, d_l, SymbolicParams::context_dim(&arch), 0.5),
        },
        geometric,
        neuromod: NeuromodParams {
            weights: random_mat(rng, 5, n_y, 2.0),
            bias: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        },
        precision,
        awareness: AwarenessParams {
            logit_scale: rng.gen_range(0.1..2.0),
            ne_gain: rng.gen_range(0.0..1.0),
            gain,
            pattern,
        },
        routing: RoutingParams {
            bias: random_mat(rng, n_s, n_s, 1.0),
            gain: random_mat(rng, n_s, n_s, 0.5),
            valuation: random_mat(rng, n_s, n_s, 0.5),
            beta_rho: rng.gen_range(0.0..1.0),
            broadcast_gain: rng.gen_range(0.0..0.9) / sqrt(n_s as f64),
        },
        valuative: ValuativeParams {
            kappa: kappa_y,
            amplitude: a_y,
            readout: ValuativeReadout {
                wh: random_mat(rng, n_y, tokens * d_l, 0.5),
                wx: random_mat(rng, n_y, nodes * d_r, 0.5),
                wp: random_mat(rng, n_y, n_p, 0.5),
                wm: random_mat(rng, n_y, n_m, 0.5),
                ws: random_mat(rng, n_y, n_u + 3, 0.2),
                bias: (0..n_y).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            },
        },
        executive: ExecutiveParams {
            mu_p,
            w_p,
            amplitude: a_p,
            readout: ExecutiveReadout {
                wh: random_mat(rng, n_p, tokens * d_l, 0.5),
                wx: random_mat(rng, n_p, nodes * d_r, 0.5),
                wy: random_mat(rng, n_p, n_y, 0.5),
                dopamine: (0..n_p).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                drift: (0..n_p).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                bias: (0..n_p).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            },
        },
        memory: MemoryParams {
            write: random_mat(rng, n_m, d_l + n_y, 1.0),
            c_m: rng.gen_range(0.0..1.0) * arch.radii.m,
            gate_weights: (0..d_l + n_y).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gate_bias: rng.gen_range(-1.0..1.0),
            eps_m: rng.gen_range(0.01..0.2),
        },
        policy: PolicyParams {
            lambda,
            eta,
            lambda_reg,
            floor_eps,
            bound_d,
            signed: rng.gen_bool(0.5),
        },
        reliability: ReliabilityParams {
            alpha: rng.gen_range(0.05..0.5),
            kernel: *[
                ReliabilityKernel::Gaussian,
                ReliabilityKernel::Rational,
                ReliabilityKernel::Hinge,
            ]
            .choose(rng)
            .expect("nonempty"),
        },
        homeostatic: HomeostaticParams {
            kappa_h: rng.gen_range(0.5..2.0),
            b_u: rng.gen_range(0.0..1.0),
        },
    };
    let input = InputSpec {
        drive: Drive::Sinusoid {
            amplitude: rng.gen_range(0.0..1.0),
            period: rng.gen_range(0.5..5.0),
        },
        outcome: rng.gen_range(-1.0..1.0),
        actions: ActionSchedule::Cycle {
            period_steps: rng.gen_range(1..50),
        },
    };
    let kernel = random_kernel(rng, tokens, nodes, d_l, d_r, false);
    let mut cfg = SystemConfig {
        version: CONFIG_VERSION,
        name: format!("random-{tokens}x{nodes}"),
        arch: arch.clone(),
        kernel,
        params,
        declared: DeclaredConstants {
            mu_l: 0.5 * alpha_h,
            mu_r: 0.5 * alpha_x,
            mu_p: 0.5 * mu_p,
            coupling_bound: None,
        },
        analytic: None,
        regime: Regime::Adaptive,
        equilibrium: None,
        input,
    };
    let dt = 0.5 * crate::config::STEP_FACTOR / cfg.stiffness();
    arch.dt = dt;
    arch.tau_rl = rng.gen_range(0..=20) as f64 * dt;
    arch.tau_lr = rng.gen_range(0..=20) as f64 * dt;
    cfg.arch = arch;
    debug_assert_eq!(cfg.params.policy.lambda.len(), k);
    cfg.validate()?;
    Ok(cfg)
}

/// Membership of one operator class.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ClassCheck {
    pub class: &'static str,
    pub criterion: &'static str,
    pub measured: f64,
    pub pass: bool,
}

/// Per-class report over the nine operator classes of the architecture.
/// Sampling uses `seed` and `n_pairs` pairs.
pub fn coarse_grain_report(cfg: &SystemConfig, seed: u64, n_pairs: usize) -> Vec<ClassCheck> {
    let arch = &cfg.arch;
    let p = &cfg.params;
    let sampled = sampled_constants(cfg, seed, n_pairs);
    let budget = cfg.kernel.family_budget();
    let min_w = arch.graph_l.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let q_floor = arch.eps_q * min_w;
    let routing = p.routing.broadcast_gain.abs() * sqrt(arch.n_s as f64);
    let ro = &p.valuative.readout;
    let mut lip_rows = Vec::with_capacity(arch.n_y);
    for r in 0..arch.n_y {
        let mut v = Vec::new();
        v.extend_from_slice(ro.wh.row(r));
        v.extend_from_slice(ro.wx.row(r));
        v.extend_from_slice(ro.wp.row(r));
        if ro.wm.cols() > 0 {
            v.extend_from_slice(ro.wm.row(r));
        }
        lip_rows.push(v);
    }
    let rows: Vec<&[f64]> = lip_rows.iter().map(|r| &r[..]).collect();
    let lip_y = p.valuative.amplitude * Mat::from_rows(&rows).map(|m| m.op_norm()).unwrap_or(0.0);
    let theta = p.policy.eta.iter().fold(0.0f64, |a, e| a.max(e * p.policy.lambda_reg));
    let d_p = p.executive.dissipation();
    let c_k = cfg.coupling_bound();
    vec![
        ClassCheck {
            class: "A_L",
            criterion: "sampled one-sided constant of F_L < 0",
            measured: sampled.f_l,
            pass: sampled.f_l < 0.0,
        },
        ClassCheck {
            class: "A_R",
            criterion: "sampled one-sided constant of F_R < 0",
            measured: sampled.f_r,
            pass: sampled.f_r < 0.0,
        },
        ClassCheck {
            class: "A_K",
            criterion: "Hilbert-Schmidt family budget <= C_K",
            measured: budget,
            pass: budget.is_finite() && budget <= c_k * (1.0 + 1e-12),
        },
        ClassCheck {
            class: "A_Q",
            criterion: "precision floor eps_Q * min weight > 0",
            measured: q_floor,
            pass: q_floor > 0.0,
        },
        ClassCheck {
            class: "A_W",
            criterion: "residual backbone connected (lambda_2 > 0)",
            measured: arch.graph_r.spectral_gap().unwrap_or(0.0),
            pass: arch.graph_r.is_connected() && arch.graph_r.spectral_gap().unwrap_or(0.0) > 0.0,
        },
        ClassCheck {
            class: "A_RTheta",
            criterion: "broadcast operator norm gamma_B sqrt(n_s) < 1",
            measured: routing,
            pass: routing < 1.0,
        },
        ClassCheck {
            class: "A_Y",
            criterion: "Lip(G_Y) = a_Y |[W_H W_X W_P W_M]| < kappa_Y",
            measured: lip_y,
            pass: lip_y < p.valuative.kappa,
        },
        ClassCheck {
            class: "A_theta",
            criterion: "eta * lambda_reg < 1",
            measured: theta,
            pass: theta < 1.0,
        },
        ClassCheck {
            class: "A_P",
            criterion: "mu_P - |W_P| > 0",
            measured: d_p,
            pass: d_p > 0.0,
        },
    ]
}
