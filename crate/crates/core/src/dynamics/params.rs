//! Parameters of the closed-form surrogate vector fields.
//!
//! Every learned map is replaced by `tanh` of a linear map whose spectral
//! norm is bounded, which gives boundedness, an explicit Lipschitz constant
//! and one-sided dissipativity in one stroke.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{ensure_len, Error, Result};
use crate::linalg::Mat;
use crate::math::sqrt;
use crate::state::ArchitectureConfig;

/// Order of the neuromodulatory channels.
pub const DA: usize = 0;
pub const ACH: usize = 1;
pub const NE: usize = 2;
pub const SEROTONIN: usize = 3;
pub const OPIOID: usize = 4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FieldParams {
    pub symbolic: SymbolicParams,
    pub geometric: GeometricParams,
    pub neuromod: NeuromodParams,
    pub precision: PrecisionLaw,
    pub awareness: AwarenessParams,
    pub routing: RoutingParams,
    pub valuative: ValuativeParams,
    pub executive: ExecutiveParams,
    pub memory: MemoryParams,
    pub policy: PolicyParams,
    pub reliability: ReliabilityParams,
    pub homeostatic: HomeostaticParams,
}

/// `F_L(H) = −α (H − center) + offset + Φ_L`, with
/// `Φ_L(h_ℓ) = tanh(A h_ℓ + B c_L)` and context `c_L = [P, M, u, b_0]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SymbolicParams {
    pub alpha: f64,
    pub center: Mat,
    pub offset: Mat,
    pub a: Mat,
    pub context: Mat,
}

/// `F_R(X) = −α (X − center) + offset + Φ_R`, with
/// `Φ_R(e_i) = tanh(A e_i + G Σ_{(j,i)} exp(−ℓ_ji) e_j + B c_R)` and context
/// `c_R = [Y, M, u, b_1]`. The edge scalars `ℓ_ji` are fixed squared
/// rigid-frame lengths, so `Φ_R` sees only invariant geometry.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GeometricParams {
    pub alpha: f64,
    pub center: Mat,
    pub offset: Mat,
    pub a: Mat,
    pub message: Mat,
    pub context: Mat,
    pub edge_lengths_sq: Vec<f64>,
}

/// `μ = σ(W Y + b)` with channels ordered DA, ACh, NE, 5HT, OP.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NeuromodParams {
    pub weights: Mat,
    pub bias: Vec<f64>,
}

/// How the precision weights follow `μ_ACh`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum PrecisionLaw {
    /// `Q = ε_Q + (R_Q − ε_Q) σ(a + μ_ACh b)` per edge, `b ≥ 0`.
    Logistic { a: Vec<f64>, b: Vec<f64> },
    /// `Q = ε_Q + (R_Q − ε_Q) μ_ACh` on every edge.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum OverlayGain {
    Zero,
    /// `g = δ (1 + tanh P_0) ∈ [0, 2δ]`.
    Executive {
        delta: f64,
    },
    /// `g = scale · μ_NE`.
    Norepinephrine {
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OverlayPattern {
    /// Unit weight on every backbone edge.
    Uniform,
    /// The symmetrized awareness weights.
    Awareness,
}

/// Awareness weights `W_R` and the scene-graph conductance
/// `W_base + g · pattern`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AwarenessParams {
    /// Scale of the awareness logits `⟨e_i, e_j⟩ / √d_R`.
    pub logit_scale: f64,
    /// Relative sharpening of the logits by `μ_NE`.
    pub ne_gain: f64,
    pub gain: OverlayGain,
    pub pattern: OverlayPattern,
}

/// Routing salience `s_ij = bias_ij + gain_ij x_j + val_ij ȳ + β_ρ ρ_j`,
/// where `x_j` is the scalar export of subsystem `j` and `ȳ` the mean of the
/// fresh valuation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RoutingParams {
    pub bias: Mat,
    pub gain: Mat,
    pub valuation: Mat,
    pub beta_rho: f64,
    /// `b = γ_B R s`, the broadcast fed back into the field contexts.
    pub broadcast_gain: f64,
}

/// Linear readout of the valuative drive `r_Y`, centred at the field
/// centers. Stagewise scalars are `[h (n_u), ε_pred, novelty, outcome]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ValuativeReadout {
    pub wh: Mat,
    pub wx: Mat,
    pub wp: Mat,
    pub wm: Mat,
    pub ws: Mat,
    pub bias: Vec<f64>,
}

/// `G_Y = −κ_Y Y + a_Y tanh(r_Y)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ValuativeParams {
    pub kappa: f64,
    pub amplitude: f64,
    pub readout: ValuativeReadout,
}

/// Linear readout of the executive drive `r_P`, centred at the field
/// centers; `dopamine` multiplies `2 μ_DA − 1` and `drift` multiplies
/// `Σ_i ‖Δθ_i‖`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ExecutiveReadout {
    pub wh: Mat,
    pub wx: Mat,
    pub wy: Mat,
    pub dopamine: Vec<f64>,
    pub drift: Vec<f64>,
    pub bias: Vec<f64>,
}

/// `𝒫 = −μ_P P + tanh(W_P P) + a_P tanh(r_P)` with `‖W_P‖_op < μ_P`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ExecutiveParams {
    pub mu_p: f64,
    pub w_p: Mat,
    pub amplitude: f64,
    pub readout: ExecutiveReadout,
}

/// Gate `g_M = ε_M + (1 − 2ε_M) σ(wᵀ [h̄; Y] + b)` and write
/// `Φ_M = C_M tanh(W [h̄; Y]) / √n_M`, `h̄` the column mean of `H`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MemoryParams {
    pub write: Mat,
    pub c_m: f64,
    pub gate_weights: Vec<f64>,
    pub gate_bias: f64,
    pub eps_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PolicyParams {
    /// Trace decay `λ_i ∈ (0, 1)` per policy.
    pub lambda: Vec<f64>,
    /// Learning rate `η_i` per policy.
    pub eta: Vec<f64>,
    pub lambda_reg: f64,
    /// Floor `ε` of the sampling distribution.
    pub floor_eps: f64,
    /// Bound `D` on the learning signal.
    pub bound_d: f64,
    /// `δ = 2 μ_DA − 1` when true, `δ = μ_DA` otherwise.
    pub signed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ReliabilityKernel {
    /// `exp(−x²)`.
    Gaussian,
    /// `1 / (1 + x)`.
    Rational,
    /// `max(0, 1 − x)`.
    Hinge,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ReliabilityParams {
    pub alpha: f64,
    pub kernel: ReliabilityKernel,
}

/// Leaky integrator `h⁺ = (1 − κ_h Δt) h + Δt B_u tanh(u) / √n_u`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HomeostaticParams {
    pub kappa_h: f64,
    pub b_u: f64,
}

impl SymbolicParams {
    pub fn context_dim(arch: &ArchitectureConfig) -> usize {
        arch.n_p + arch.n_m + arch.n_u + 1
    }

    /// Lipschitz bound of `Φ_L` in `H`.
    pub fn lipschitz(&self) -> f64 {
        self.a.op_norm()
    }
}

impl GeometricParams {
    pub fn context_dim(arch: &ArchitectureConfig) -> usize {
        arch.n_y + arch.n_m + arch.n_u + 1
    }

    /// Message operator `S_ij = exp(−ℓ_ji)` for every edge `(j, i)`.
    pub fn message_matrix(&self, arch: &ArchitectureConfig) -> Mat {
        let mut s = Mat::zeros(arch.nodes, arch.nodes);
        for (k, [j, i]) in arch.graph_r.edges().iter().enumerate() {
            s[(*i, *j)] += crate::math::exp(-self.edge_lengths_sq[k]);
        }
        s
    }

    /// Lipschitz bound of `Φ_R` in `X`: `‖A‖ + ‖G‖ ‖S‖`.
    pub fn lipschitz(&self, arch: &ArchitectureConfig) -> f64 {
        self.a.op_norm() + self.message.op_norm() * self.message_matrix(arch).op_norm()
    }
}

impl ExecutiveParams {
    /// One-sided dissipation constant `μ_P − ‖W_P‖_op`.
    pub fn dissipation(&self) -> f64 {
        self.mu_p - self.w_p.op_norm()
    }
}

impl PolicyParams {
    /// `‖∇ log π^ε‖ ≤ (1 − ε) |A| / ε`.
    pub fn score_bound(&self, actions: usize) -> f64 {
        (1.0 - self.floor_eps) * actions as f64 / self.floor_eps
    }
}

fn finite_mat(name: &'static str, m: &Mat) -> Result<()> {
    if m.as_slice().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(name, "non-finite entry"))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

impl FieldParams {
    /// Shape checks and every blueprint inequality that is decidable from the
    /// parameters alone.
    pub fn validate(&self, arch: &ArchitectureConfig) -> Result<()> {
        let (t, v) = (arch.tokens, arch.nodes);
        let s = &self.symbolic;
        positive("symbolic.alpha", s.alpha)?;
        s.center.ensure_shape("symbolic.center", t, arch.d_l)?;
        s.offset.ensure_shape("symbolic.offset", t, arch.d_l)?;
        s.a.ensure_shape("symbolic.a", arch.d_l, arch.d_l)?;
        s.context
            .ensure_shape("symbolic.context", arch.d_l, SymbolicParams::context_dim(arch))?;
        for m in [&s.center, &s.offset, &s.a, &s.context] {
            finite_mat("symbolic", m)?;
        }
        if !(s.lipschitz() < s.alpha) {
            return Err(Error::invalid("symbolic.a", "Lip(Φ_L) must stay below alpha"));
        }

        let g = &self.geometric;
        positive("geometric.alpha", g.alpha)?;
        g.center.ensure_shape("geometric.center", v, arch.d_r)?;
        g.offset.ensure_shape("geometric.offset", v, arch.d_r)?;
        g.a.ensure_shape("geometric.a", arch.d_r, arch.d_r)?;
        g.message.ensure_shape("geometric.message", arch.d_r, arch.d_r)?;
        g.context
            .ensure_shape("geometric.context", arch.d_r, GeometricParams::context_dim(arch))?;
        for m in [&g.center, &g.offset, &g.a, &g.message, &g.context] {
            finite_mat("geometric", m)?;
        }
        ensure_len(
            "geometric.edge_lengths_sq",
            arch.graph_r.edge_count(),
            &g.edge_lengths_sq,
        )?;
        if g.edge_lengths_sq.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid(
                "geometric.edge_lengths_sq",
                "squared lengths are nonnegative",
            ));
        }
        if !(g.lipschitz(arch) < g.alpha) {
            return Err(Error::invalid("geometric.a", "Lip(Φ_R) must stay below alpha"));
        }

        let n = &self.neuromod;
        n.weights.ensure_shape("neuromod.weights", 5, arch.n_y)?;
        ensure_len("neuromod.bias", 5, &n.bias)?;
        finite_mat("neuromod.weights", &n.weights)?;

        if let PrecisionLaw::Logistic { a, b } = &self.precision {
            let e = arch.graph_l.edge_count();
            ensure_len("precision.a", e, a)?;
            ensure_len("precision.b", e, b)?;
            if b.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || a.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(
                    "precision",
                    "modulation weights b must be finite and nonnegative",
                ));
            }
            for (k, r) in arch.graph_l.reverse_indices().iter().enumerate() {
                let r = r.ok_or_else(|| Error::invalid("precision", "sequence graph must hold both orientations"))?;
                if a[k] != a[r] || b[k] != b[r] {
                    return Err(Error::invalid(
                        "precision",
                        "logit fields must be symmetric across orientations",
                    ));
                }
            }
        }

        let aw = &self.awareness;
        if !(aw.logit_scale.is_finite() && aw.ne_gain >= 0.0 && aw.ne_gain.is_finite()) {
            return Err(Error::invalid(
                "awareness",
                "finite logit scale and nonnegative NE gain",
            ));
        }
        match aw.gain {
            OverlayGain::Zero => {}
            OverlayGain::Executive { delta: x } | OverlayGain::Norepinephrine { scale: x } => {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::invalid("awareness.gain", "overlay gain must be nonnegative"));
                }
            }
        }
        if !arch.graph_r.is_connected() {
            return Err(Error::invalid("graph_r", "the residual backbone must be connected"));
        }

        let r = &self.routing;
        for (name, m) in [
            ("routing.bias", &r.bias),
            ("routing.gain", &r.gain),
            ("routing.valuation", &r.valuation),
        ] {
            m.ensure_shape(name, arch.n_s, arch.n_s)?;
            finite_mat(name, m)?;
        }
        if !(r.beta_rho >= 0.0 && r.beta_rho.is_finite() && r.broadcast_gain.is_finite()) {
            return Err(Error::invalid("routing", "beta_rho must be nonnegative"));
        }

        let y = &self.valuative;
        positive("valuative.kappa", y.kappa)?;
        if !(y.amplitude >= 0.0 && y.amplitude <= y.kappa) {
            return Err(Error::invalid(
                "valuative.amplitude",
                "viability needs 0 <= a_Y <= kappa_Y",
            ));
        }
        if y.amplitude * sqrt(arch.n_y as f64) > y.kappa * arch.radii.y {
            return Err(Error::invalid(
                "valuative.amplitude",
                "viability needs a_Y sqrt(n_Y) <= kappa_Y R_Y",
            ));
        }
        let ro = &y.readout;
        ro.wh.ensure_shape("valuative.readout.wh", arch.n_y, t * arch.d_l)?;
        ro.wx.ensure_shape("valuative.readout.wx", arch.n_y, v * arch.d_r)?;
        ro.wp.ensure_shape("valuative.readout.wp", arch.n_y, arch.n_p)?;
        ro.wm.ensure_shape("valuative.readout.wm", arch.n_y, arch.n_m)?;
        ro.ws.ensure_shape("valuative.readout.ws", arch.n_y, arch.n_u + 3)?;
        ensure_len("valuative.readout.bias", arch.n_y, &ro.bias)?;

        let p = &self.executive;
        positive("executive.mu_p", p.mu_p)?;
        p.w_p.ensure_shape("executive.w_p", arch.n_p, arch.n_p)?;
        if !(p.dissipation() > 0.0) {
            return Err(Error::invalid(
                "executive.w_p",
                "spectral norm of W_P must stay below mu_P",
            ));
        }
        if !(p.amplitude >= 0.0 && p.amplitude <= p.mu_p) {
            return Err(Error::invalid(
                "executive.amplitude",
                "viability needs 0 <= a_P <= mu_P",
            ));
        }
        if p.amplitude * sqrt(arch.n_p as f64) > p.dissipation() * arch.radii.p {
            return Err(Error::invalid(
                "executive.amplitude",
                "viability needs a_P sqrt(n_P) <= (mu_P - |W_P|) R_P",
            ));
        }
        let er = &p.readout;
        er.wh.ensure_shape("executive.readout.wh", arch.n_p, t * arch.d_l)?;
        er.wx.ensure_shape("executive.readout.wx", arch.n_p, v * arch.d_r)?;
        er.wy.ensure_shape("executive.readout.wy", arch.n_p, arch.n_y)?;
        ensure_len("executive.readout.dopamine", arch.n_p, &er.dopamine)?;
        ensure_len("executive.readout.drift", arch.n_p, &er.drift)?;
        ensure_len("executive.readout.bias", arch.n_p, &er.bias)?;

        let m = &self.memory;
        m.write.ensure_shape("memory.write", arch.n_m, arch.d_l + arch.n_y)?;
        ensure_len("memory.gate_weights", arch.d_l + arch.n_y, &m.gate_weights)?;
        if !(m.eps_m > 0.0 && m.eps_m < 0.5) {
            return Err(Error::invalid("memory.eps_m", "gate floor must lie in (0, 1/2)"));
        }
        if !(m.c_m >= 0.0 && m.c_m <= arch.radii.m) {
            return Err(Error::invalid("memory.c_m", "write bound must satisfy 0 <= C_M <= R_M"));
        }

        let pol = &self.policy;
        let k = arch.policies.len();
        ensure_len("policy.lambda", k, &pol.lambda)?;
        ensure_len("policy.eta", k, &pol.eta)?;
        if pol.lambda.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::invalid("policy.lambda", "trace decay must lie in (0, 1)"));
        }
        if pol.eta.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("policy.eta", "learning rates must be positive"));
        }
        if !(pol.lambda_reg > 0.0 && pol.floor_eps > 0.0 && pol.floor_eps < 1.0 && pol.bound_d >= 1.0) {
            return Err(Error::invalid(
                "policy",
                "need lambda_reg > 0, floor in (0, 1) and D >= 1",
            ));
        }
        for (i, spec) in arch.policies.iter().enumerate() {
            if pol.eta[i] * pol.lambda_reg >= 1.0 {
                return Err(Error::invalid("policy.eta", "eta * lambda_reg must stay below one"));
            }
            if pol.score_bound(spec.actions) > (1.0 - pol.lambda[i]) * spec.r_z {
                return Err(Error::invalid(
                    "policies.r_z",
                    "trace radius below the score bound (1 - lambda) R_z",
                ));
            }
            if pol.bound_d * spec.r_z > pol.lambda_reg * spec.r_theta {
                return Err(Error::invalid(
                    "policies.r_theta",
                    "parameter radius needs D R_z <= lambda_reg R_theta",
                ));
            }
        }

        let rel = &self.reliability;
        if !(rel.alpha > 0.0 && rel.alpha < 1.0) {
            return Err(Error::invalid("reliability.alpha", "must lie in (0, 1)"));
        }
        let h = &self.homeostatic;
        positive("homeostatic.kappa_h", h.kappa_h)?;
        if !(h.b_u >= 0.0 && h.b_u.is_finite()) {
            return Err(Error::invalid("homeostatic.b_u", "must be nonnegative"));
        }
        if !(arch.dt * h.kappa_h < 1.0) {
            return Err(Error::invalid(
                "dt",
                "the homeostatic integrator needs dt < 1 / kappa_h",
            ));
        }
        Ok(())
    }
}
