//! Closed-form surrogate vector fields and per-component update maps.
//!
//! Everything here is a pure function of its arguments; the staged update in
//! [`super::step`] wires them together.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{
    AwarenessParams, ExecutiveParams, GeometricParams, MemoryParams, NeuromodParams, OverlayGain, OverlayPattern,
    PrecisionLaw, ReliabilityKernel, RoutingParams, SymbolicParams, ValuativeParams,
};
use crate::coupling::{CouplingKernel, Direction, KernelState, Selection};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::Mat;
use crate::math::{dot, exp, mean, norm, sigmoid, sqrt, tanh};
use crate::simplex::{epsilon_floor, project_ball, sparsemax, sparsemax_into, sparsemax_jacobian_apply};
use crate::state::{ArchitectureConfig, History, StateVector};

/// `μ_k = σ(w_kᵀ Y + b_k)`, each strictly inside `(0, 1)` and
/// `‖w_k‖/4`-Lipschitz.
pub fn neuromod_readout(y: &[f64], p: &NeuromodParams) -> [f64; 5] {
    let mut mu = [0.0; 5];
    for (k, m) in mu.iter_mut().enumerate() {
        let s = dot(p.weights.row(k), y) + p.bias[k];
        // σ saturates to exactly 1.0 in floating point beyond ~37
        *m = sigmoid(s).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    }
    mu
}

/// Precision weight per edge of the sequence graph, inside `[ε_Q, R_Q]`
/// and nondecreasing in `μ_ACh`.
pub fn precision_field(mu_ach: f64, arch: &ArchitectureConfig, law: &PrecisionLaw) -> Vec<f64> {
    let span = arch.r_q - arch.eps_q;
    match law {
        PrecisionLaw::Linear => vec![arch.eps_q + span * mu_ach; arch.graph_l.edge_count()],
        PrecisionLaw::Logistic { a, b } => a
            .iter()
            .zip(b)
            .map(|(a, b)| arch.eps_q + span * sigmoid(a + mu_ach * b))
            .collect(),
    }
}

/// Awareness weights: for every node `j`, sparsemax over its in-edges
/// `(i, j)` of `c (1 + g μ_NE) ⟨e_i, e_j⟩ / √d_R`.
pub fn awareness_weights(x: &Mat, mu_ne: f64, arch: &ArchitectureConfig, p: &AwarenessParams) -> Vec<f64> {
    let scale = p.logit_scale * (1.0 + p.ne_gain * mu_ne) / sqrt(arch.d_r as f64);
    let edges = arch.graph_r.edges();
    let mut w = vec![0.0; edges.len()];
    let mut logits = Vec::new();
    let mut out = Vec::new();
    for group in arch.graph_r.in_edges() {
        if group.is_empty() {
            continue;
        }
        logits.clear();
        logits.extend(group.iter().map(|e| {
            let [i, j] = edges[*e];
            scale * dot(x.row(i), x.row(j))
        }));
        out.resize(group.len(), 0.0);
        sparsemax_into(&logits, &mut out);
        for (e, v) in group.iter().zip(&out) {
            w[*e] = *v;
        }
    }
    w
}

/// Overlay gain `g_W ≥ 0`.
pub fn overlay_gain(gain: &OverlayGain, p0: f64, mu_ne: f64) -> f64 {
    match gain {
        OverlayGain::Zero => 0.0,
        OverlayGain::Executive { delta } => delta * (1.0 + tanh(p0)),
        OverlayGain::Norepinephrine { scale } => scale * mu_ne,
    }
}

/// Largest value [`overlay_gain`] can take.
pub fn overlay_gain_bound(gain: &OverlayGain) -> f64 {
    match gain {
        OverlayGain::Zero => 0.0,
        OverlayGain::Executive { delta } => 2.0 * delta,
        OverlayGain::Norepinephrine { scale } => *scale,
    }
}

/// Scene-graph conductance `W_base + g · pattern`, symmetric whenever the
/// backbone is.
pub fn scene_conductance(w: &[f64], gain: f64, arch: &ArchitectureConfig, pattern: OverlayPattern) -> Vec<f64> {
    let base = arch.graph_r.weights();
    match pattern {
        OverlayPattern::Uniform => base.iter().map(|b| b + gain).collect(),
        OverlayPattern::Awareness => {
            let rev = arch.graph_r.reverse_indices();
            base.iter()
                .enumerate()
                .map(|(k, b)| {
                    let back = rev[k].map_or(0.0, |r| w[r]);
                    b + gain * 0.5 * (w[k] + back)
                })
                .collect()
        }
    }
}

/// Sequence-graph conductance, graph weight times precision.
pub fn sequence_conductance(q: &[f64], arch: &ArchitectureConfig) -> Vec<f64> {
    arch.graph_l.weights().iter().zip(q).map(|(w, q)| w * q).collect()
}

/// `Δ_G(c) F`, the weighted Laplacian applied row-wise.
pub fn diffusion(graph: &WeightedGraph, conductance: &[f64], field: &Mat) -> Mat {
    let mut out = Mat::zeros(field.rows(), field.cols());
    graph
        .laplacian_apply_weighted(conductance, field.as_slice(), field.cols(), out.as_mut_slice())
        .expect("conductance and field shapes come from the architecture");
    out
}

/// Column means of a field, the scalar summary `h̄` used by readouts.
pub fn col_mean(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        crate::math::axpy(&mut out, 1.0, m.row(r));
    }
    let n = m.rows().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// `c_L = [P, M, u, b_0]`.
pub fn symbolic_context(p: &[f64], m: &[f64], u: &[f64], b0: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(p.len() + m.len() + u.len() + 1);
    c.extend_from_slice(p);
    c.extend_from_slice(m);
    c.extend_from_slice(u);
    c.push(b0);
    c
}

/// `c_R = [Y, M, u, b_1]`.
pub fn geometric_context(y: &[f64], m: &[f64], u: &[f64], b1: f64) -> Vec<f64> {
    symbolic_context(y, m, u, b1)
}

/// `F_L(H) = −α (H − center) + offset + tanh(A h_ℓ + B c_L)` row-wise.
pub fn symbolic_reaction(p: &SymbolicParams, h: &Mat, ctx: &[f64]) -> Mat {
    let drive = p.context.mul_vec(ctx);
    let mut out = Mat::zeros(h.rows(), h.cols());
    let mut pre = vec![0.0; h.cols()];
    for l in 0..h.rows() {
        p.a.mul_vec_into(h.row(l), &mut pre);
        let (hr, cr, orow) = (h.row(l), p.center.row(l), p.offset.row(l));
        for (c, o) in out.row_mut(l).iter_mut().enumerate() {
            *o = -p.alpha * (hr[c] - cr[c]) + orow[c] + tanh(pre[c] + drive[c]);
        }
    }
    out
}

/// Principal velocity of the token field,
/// `−Δ_{G_L}(c) H + F_L(H) + C_RL`.
pub fn symbolic_rhs(
    arch: &ArchitectureConfig,
    p: &SymbolicParams,
    h: &Mat,
    conductance: &[f64],
    c_rl: &Mat,
    ctx: &[f64],
) -> Mat {
    let mut v = symbolic_reaction(p, h, ctx);
    v.add_scaled(-1.0, &diffusion(&arch.graph_l, conductance, h));
    v.add_scaled(1.0, c_rl);
    v
}

/// `F_R(X) = −α (X − center) + offset + Φ_R(X)` with invariant edge
/// messages.
pub fn geometric_reaction(arch: &ArchitectureConfig, p: &GeometricParams, x: &Mat, ctx: &[f64]) -> Mat {
    let drive = p.context.mul_vec(ctx);
    let d = x.cols();
    let mut agg = Mat::zeros(x.rows(), d);
    for (k, [j, i]) in arch.graph_r.edges().iter().enumerate() {
        let s = exp(-p.edge_lengths_sq[k]);
        crate::math::axpy(agg.row_mut(*i), s, x.row(*j));
    }
    let mut out = Mat::zeros(x.rows(), d);
    let mut pre = vec![0.0; d];
    let mut msg = vec![0.0; d];
    for i in 0..x.rows() {
        p.a.mul_vec_into(x.row(i), &mut pre);
        p.message.mul_vec_into(agg.row(i), &mut msg);
        let (xr, cr, orow) = (x.row(i), p.center.row(i), p.offset.row(i));
        for (c, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = -p.alpha * (xr[c] - cr[c]) + orow[c] + tanh(pre[c] + msg[c] + drive[c]);
        }
    }
    out
}

/// Principal velocity of the node field,
/// `−Δ_{G_R}(c) X + F_R(X) + C_LR`.
pub fn geometric_rhs(
    arch: &ArchitectureConfig,
    p: &GeometricParams,
    x: &Mat,
    conductance: &[f64],
    c_lr: &Mat,
    ctx: &[f64],
) -> Mat {
    let mut v = geometric_reaction(arch, p, x, ctx);
    v.add_scaled(-1.0, &diffusion(&arch.graph_r, conductance, x));
    v.add_scaled(1.0, c_lr);
    v
}

/// Stagewise-derived scalars fed to the valuative readout.
#[derive(Debug, Clone, PartialEq)]
pub struct StageScalars {
    /// Homeostatic deviation `h` (length `n_u`).
    pub homeostatic: Vec<f64>,
    pub prediction_error: f64,
    pub novelty: f64,
    pub outcome: f64,
}

impl StageScalars {
    fn as_vec(&self) -> Vec<f64> {
        let mut v = self.homeostatic.clone();
        v.extend_from_slice(&[self.prediction_error, self.novelty, self.outcome]);
        v
    }
}

fn centred(field: &Mat, center: &Mat) -> Vec<f64> {
    field
        .as_slice()
        .iter()
        .zip(center.as_slice())
        .map(|(a, b)| a - b)
        .collect()
}

/// Valuative drive `r_Y`, centred at the field centers so that it vanishes
/// at the equilibrium fields with zero auxiliaries.
#[allow(clippy::too_many_arguments)]
pub fn valuative_drive(
    p: &ValuativeParams,
    sym: &SymbolicParams,
    geo: &GeometricParams,
    h: &Mat,
    x: &Mat,
    exec: &[f64],
    m: &[f64],
    scalars: &StageScalars,
) -> Vec<f64> {
    let ro = &p.readout;
    let dh = centred(h, &sym.center);
    let dx = centred(x, &geo.center);
    let s = scalars.as_vec();
    let mut r = ro.bias.clone();
    for (k, rk) in r.iter_mut().enumerate() {
        *rk += dot(ro.wh.row(k), &dh) + dot(ro.wx.row(k), &dx) + dot(ro.wp.row(k), exec) + dot(ro.ws.row(k), &s);
        if ro.wm.cols() > 0 {
            *rk += dot(ro.wm.row(k), m);
        }
    }
    r
}

/// `G_Y = −κ_Y Y + a_Y tanh(r_Y)`.
pub fn valuative_rhs(p: &ValuativeParams, y: &[f64], r: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(r)
        .map(|(y, r)| -p.kappa * y + p.amplitude * tanh(*r))
        .collect()
}

/// Executive drive `r_P`, centred at the field centers.
#[allow(clippy::too_many_arguments)]
pub fn executive_drive(
    p: &ExecutiveParams,
    sym: &SymbolicParams,
    geo: &GeometricParams,
    h: &Mat,
    x: &Mat,
    y: &[f64],
    mu_da: f64,
    drift: f64,
) -> Vec<f64> {
    let ro = &p.readout;
    let dh = centred(h, &sym.center);
    let dx = centred(x, &geo.center);
    (0..ro.bias.len())
        .map(|k| {
            ro.bias[k]
                + dot(ro.wh.row(k), &dh)
                + dot(ro.wx.row(k), &dx)
                + dot(ro.wy.row(k), y)
                + ro.dopamine[k] * (2.0 * mu_da - 1.0)
                + ro.drift[k] * drift
        })
        .collect()
}

/// `𝒫(P) = −μ_P P + tanh(W_P P) + a_P tanh(r_P)`; one-sided dissipative
/// with constant `μ_P − ‖W_P‖_op`.
pub fn executive_rhs(p: &ExecutiveParams, x: &[f64], r: &[f64]) -> Vec<f64> {
    let wx = p.w_p.mul_vec(x);
    x.iter()
        .zip(&wx)
        .zip(r)
        .map(|((x, w), r)| -p.mu_p * x + tanh(*w) + p.amplitude * tanh(*r))
        .collect()
}

/// Homeostatic forcing `f_h(u) = B_u tanh(u) / √n_u`, `‖f_h‖ ≤ B_u`.
pub fn homeostatic_drive(u: &[f64], b_u: f64) -> Vec<f64> {
    let s = b_u / sqrt(u.len().max(1) as f64);
    u.iter().map(|v| s * tanh(*v)).collect()
}

/// Leaky integrator `h⁺ = (1 − κ_h Δt) h + Δt f`.
pub fn homeostatic_step(h: &[f64], f: &[f64], kappa_h: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && kappa_h > 0.0 && dt * kappa_h < 1.0) {
        return Err(Error::invalid(
            "dt",
            "the homeostatic integrator needs 0 < dt < 1 / kappa_h",
        ));
    }
    if h.len() != f.len() {
        return Err(Error::dims("homeostatic forcing", h.len(), f.len()));
    }
    let leak = 1.0 - kappa_h * dt;
    Ok(h.iter().zip(f).map(|(h, f)| leak * h + dt * f).collect())
}

pub fn reliability_kernel(kernel: ReliabilityKernel, x: f64) -> f64 {
    match kernel {
        ReliabilityKernel::Gaussian => exp(-x * x),
        ReliabilityKernel::Rational => 1.0 / (1.0 + x),
        ReliabilityKernel::Hinge => (1.0 - x).max(0.0),
    }
}

/// `ρ⁺ = (1 − α) ρ + α φ(‖ε‖ / √d)`; the normalisation makes the kernel
/// argument a per-component error.
pub fn reliability_update(rho: f64, err: &[f64], alpha: f64, kernel: ReliabilityKernel) -> f64 {
    let x = norm(err) / sqrt(err.len().max(1) as f64);
    (1.0 - alpha) * rho + alpha * reliability_kernel(kernel, x)
}

/// Learning signal from dopamine: `2 μ_DA − 1` when signed, else `μ_DA`.
pub fn learning_signal(mu_da: f64, signed: bool) -> f64 {
    if signed {
        2.0 * mu_da - 1.0
    } else {
        mu_da
    }
}

/// Floored sampling distribution `π^ε = (1 − ε) sparsemax(θ) + ε / |A|`.
pub fn policy_distribution(theta: &[f64], floor_eps: f64) -> Result<Vec<f64>> {
    epsilon_floor(&sparsemax(theta), floor_eps)
}

/// `∇_θ log π^ε_a = (1 − ε) J(θ) e_a / π^ε_a`, bounded by `(1 − ε)|A|/ε`.
pub fn policy_score(theta: &[f64], action: usize, floor_eps: f64) -> Result<Vec<f64>> {
    if action >= theta.len() {
        return Err(Error::invalid("action", "action index outside the action set"));
    }
    let pi = policy_distribution(theta, floor_eps)?;
    let mut e = vec![0.0; theta.len()];
    e[action] = 1.0;
    let g = sparsemax_jacobian_apply(theta, &e);
    let s = (1.0 - floor_eps) / pi[action];
    Ok(g.into_iter().map(|v| s * v).collect())
}

/// Result of one eligibility-trace update.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyUpdate {
    pub trace: Vec<f64>,
    pub theta: Vec<f64>,
    /// `Δθ = η (δ z − λ_reg θ)` before projection, computed from the old trace.
    pub delta_theta: Vec<f64>,
}

/// `z⁺ = Π(λ z + score)`, `θ⁺ = Π(θ + η(δ z − λ_reg θ))`; both use the old
/// trace `z`.
#[allow(clippy::too_many_arguments)]
pub fn eligibility_policy_update(
    z: &[f64],
    theta: &[f64],
    delta: f64,
    score: &[f64],
    lambda: f64,
    eta: f64,
    lambda_reg: f64,
    bound_d: f64,
    r_z: f64,
    r_theta: f64,
) -> Result<PolicyUpdate> {
    if !(delta.abs() <= bound_d) {
        return Err(Error::invalid("delta", "learning signal exceeds its bound D"));
    }
    let trace: Vec<f64> = z.iter().zip(score).map(|(z, s)| lambda * z + s).collect();
    let delta_theta: Vec<f64> = z
        .iter()
        .zip(theta)
        .map(|(z, th)| eta * (delta * z - lambda_reg * th))
        .collect();
    let stepped: Vec<f64> = theta.iter().zip(&delta_theta).map(|(a, b)| a + b).collect();
    Ok(PolicyUpdate {
        trace: project_ball(&trace, r_z),
        theta: project_ball(&stepped, r_theta),
        delta_theta,
    })
}

fn memory_input(h_bar: &[f64], y: &[f64]) -> Vec<f64> {
    let mut v = h_bar.to_vec();
    v.extend_from_slice(y);
    v
}

/// `g_M ∈ [ε_M, 1 − ε_M]`.
pub fn memory_gate(p: &MemoryParams, h_bar: &[f64], y: &[f64]) -> f64 {
    let s = dot(&p.gate_weights, &memory_input(h_bar, y)) + p.gate_bias;
    p.eps_m + (1.0 - 2.0 * p.eps_m) * sigmoid(s)
}

/// `Φ_M = C_M tanh(W [h̄; Y]) / √n_M`, `‖Φ_M‖ ≤ C_M`.
pub fn memory_write(p: &MemoryParams, h_bar: &[f64], y: &[f64]) -> Vec<f64> {
    let n = p.write.rows();
    let s = p.c_m / sqrt(n.max(1) as f64);
    p.write
        .mul_vec(&memory_input(h_bar, y))
        .into_iter()
        .map(|v| s * tanh(v))
        .collect()
}

/// `M⁺ = (1 − g) M + g Φ`.
pub fn memory_update(m: &[f64], gate: f64, phi: &[f64]) -> Vec<f64> {
    m.iter().zip(phi).map(|(m, f)| (1.0 - gate) * m + gate * f).collect()
}

/// Scalar export of each routed subsystem: the mean of its state.
pub fn scalar_exports(h: &Mat, x: &Mat, y: &[f64], p: &[f64], m: &[f64], n_s: usize) -> Vec<f64> {
    let all = [mean(h.as_slice()), mean(x.as_slice()), mean(y), mean(p), mean(m)];
    all[..n_s].to_vec()
}

/// Vector export of each routed subsystem, the input of its reliability
/// error.
pub fn vector_exports(z: &StateVector, n_s: usize) -> Vec<Vec<f64>> {
    let m = if z.m.is_empty() { vec![0.0] } else { z.m.clone() };
    let all = [col_mean(&z.h), col_mean(&z.x), z.y.clone(), z.p.clone(), m];
    all[..n_s].to_vec()
}

/// Routing salience without the reliability boost.
pub fn routing_salience(p: &RoutingParams, exports: &[f64], y_mean: f64) -> Mat {
    let n = exports.len();
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = p.bias[(i, j)] + p.gain[(i, j)] * exports[j] + p.valuation[(i, j)] * y_mean;
        }
    }
    s
}

/// Each routing row is `sparsemax(s_i + β_ρ ρ)`.
pub fn routing_update(salience: &Mat, rho: &[f64], beta_rho: f64) -> Mat {
    let n = salience.rows();
    let mut out = Mat::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = salience[(i, j)] + beta_rho * rho[j];
        }
        sparsemax_into(&row, out.row_mut(i));
    }
    out
}

/// Broadcast `b = γ_B R s`.
pub fn broadcast(routing: &Mat, exports: &[f64], gain: f64) -> Vec<f64> {
    routing.mul_vec(exports).into_iter().map(|v| gain * v).collect()
}

/// Gates read from the routing matrix: `g_RL = R[0][1]` (symbolic row,
/// geometric column) and `g_LR = R[1][0]`.
pub fn routing_gates(routing: &Mat) -> (f64, f64) {
    (routing[(0, 1)], routing[(1, 0)])
}

/// Delayed, gated interconnector signals `(C_RL, C_LR)` with the kernel
/// evaluated at `state`.
pub fn interconnector_signals<Hs: History + ?Sized>(
    history: &Hs,
    routing: &Mat,
    kernel: &CouplingKernel,
    state: &KernelState<'_>,
    n_rl: usize,
    n_lr: usize,
) -> Result<(Mat, Mat)> {
    let (g_rl, g_lr) = routing_gates(routing);
    let x_del = &history.delayed(n_rl)?.x;
    let h_del = &history.delayed(n_lr)?.h;
    let c_rl = kernel
        .operator(state, Direction::RightToLeft)
        .apply_forward(&Selection::Full, x_del)?
        .scaled(g_rl);
    let c_lr = kernel
        .operator(state, Direction::LeftToRight)
        .apply_adjoint(&Selection::Full, h_del)?
        .scaled(g_lr);
    Ok((c_rl, c_lr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neuromod_is_inside_open_interval() {
        let p = NeuromodParams {
            weights: Mat::from_rows(&[&[0.0], &[2.0], &[0.0], &[0.0], &[1e3]]).unwrap(),
            bias: vec![0.0; 5],
        };
        let mu = neuromod_readout(&[0.0], &p);
        assert!(mu.iter().all(|m| *m == 0.5));
        let mu = neuromod_readout(&[1.0], &p);
        assert!(mu[4] < 1.0 && mu[4] > 0.999);
        let delta = learning_signal(mu[0], true);
        assert!(delta.abs() <= 1.0);
        assert!(learning_signal(0.3, false) == 0.3);
    }

    #[test]
    fn homeostatic_examples() {
        let h = homeostatic_step(&[1.0], &[0.0], 2.0, 0.1).unwrap();
        assert!((h[0] - 0.8).abs() < 1e-15);
        let h = homeostatic_step(&[0.0, 0.0], &[0.3, -0.1], 2.0, 0.1).unwrap();
        assert!((h[0] - 0.03).abs() < 1e-15 && (h[1] + 0.01).abs() < 1e-15);
        assert!(homeostatic_step(&[0.0], &[0.0], 2.0, 0.5).is_err());
        // unit forcing of norm B_u settles at B_u / κ_h
        let (b_u, kappa) = (0.6, 2.0);
        let mut h = vec![0.0, 0.0];
        let f = [b_u / sqrt(2.0), b_u / sqrt(2.0)];
        for _ in 0..5000 {
            h = homeostatic_step(&h, &f, kappa, 0.01).unwrap();
        }
        assert!((norm(&h) - b_u / kappa).abs() < 1e-12);
    }

    #[test]
    fn reliability_examples() {
        let g = ReliabilityKernel::Gaussian;
        assert!((reliability_update(0.4, &[0.0, 0.0], 0.25, g) - (0.75 * 0.4 + 0.25)).abs() < 1e-15);
        assert!((reliability_update(0.4, &[1e9], 0.25, g) - 0.3).abs() < 1e-15);
        let a = reliability_update(0.5, &[0.3], 0.1, g);
        let b = reliability_update(0.5, &[0.3; 4], 0.1, g);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn policy_update_examples() {
        let z = [0.5, -0.2];
        let th = [1.0, 2.0];
        let u = eligibility_policy_update(&z, &th, 0.0, &[0.0, 0.0], 0.9, 0.1, 0.5, 1.0, 10.0, 10.0).unwrap();
        assert!((u.trace[0] - 0.45).abs() < 1e-15 && (u.trace[1] + 0.18).abs() < 1e-15);
        assert!((u.theta[0] - 0.95).abs() < 1e-15 && (u.theta[1] - 1.9).abs() < 1e-15);
        let u = eligibility_policy_update(&z, &th, 0.3, &[0.1, -0.1], 0.0, 0.1, 0.5, 1.0, 10.0, 10.0).unwrap();
        assert_eq!(u.trace, vec![0.1, -0.1]);
        // Δθ reads the old trace
        assert!((u.delta_theta[0] - 0.1 * (0.3 * 0.5 - 0.5)).abs() < 1e-15);
        assert!(eligibility_policy_update(&z, &th, 1.5, &[0.0; 2], 0.5, 0.1, 0.5, 1.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn policy_score_is_bounded_and_mean_free_on_support() {
        let th = [0.3, 0.1, -2.0];
        for a in 0..3 {
            let s = policy_score(&th, a, 0.2).unwrap();
            assert!(norm(&s) <= (1.0 - 0.2) * 3.0 / 0.2);
            assert!(s.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn memory_examples() {
        let m = memory_update(&[1.0, -1.0], 0.01, &[0.0, 0.0]);
        assert_eq!(m, vec![0.99, -0.99]);
        let m = memory_update(&[0.0, 2.0], 0.99, &[2.0, 0.0]);
        assert!(norm(&m) <= 2.0);
    }

    #[test]
    fn routing_examples() {
        let s = Mat::from_rows(&[&[0.3, 0.3, 0.3], &[0.0, 0.0, 0.0]]).unwrap();
        let s = Mat::from_rows(&[s.row(0), s.row(0), s.row(1)]).unwrap();
        let r = routing_update(&s, &[1.0; 3], 0.0);
        assert!(r.as_slice().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let s = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let r = routing_update(&s, &[1.0, 1.0], 0.0);
        assert_eq!(r.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        let s = Mat::from_rows(&[&[0.2, 0.0], &[0.0, 0.1]]).unwrap();
        let before = routing_update(&s, &[0.5, 0.5], 0.4);
        let after = routing_update(&s, &[0.5, 0.9], 0.4);
        assert!(after[(0, 1)] > before[(0, 1)] && after[(1, 1)] > before[(1, 1)]);
    }
}
