//! The staged discrete update, its continuous-time relaxation field and the
//! frozen-auxiliary frame of the closed principal regime.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::audit::{Audit, Time, Var};
use super::fields::{
    awareness_weights, broadcast, col_mean, eligibility_policy_update, executive_drive, executive_rhs,
    geometric_context, geometric_rhs, homeostatic_drive, homeostatic_step, interconnector_signals, learning_signal,
    memory_gate, memory_update, memory_write, neuromod_readout, overlay_gain, policy_score, precision_field,
    reliability_update, routing_gates, routing_salience, routing_update, scalar_exports, scene_conductance,
    sequence_conductance, symbolic_context, symbolic_rhs, valuative_drive, valuative_rhs, vector_exports, StageScalars,
};
use super::params::{ACH, DA, NE};
use crate::config::{Regime, SystemConfig};
use crate::coupling::{CouplingKernel, Direction, GateInputs, KernelState, Selection};
use crate::error::{ensure_len, Error, Result};
use crate::linalg::Mat;
use crate::math::{dist, mean, norm};
use crate::simplex::project_ball_in_place;
use crate::state::{project_state_in_place, validate_state, ArchitectureConfig, ConstantHistory, History, StateVector};

/// Exogenous input of one step: drive `u`, outcome `r` and one action per
/// policy.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepInput {
    pub u: Vec<f64>,
    pub outcome: f64,
    pub actions: Vec<usize>,
}

impl StepInput {
    pub fn zero(arch: &ArchitectureConfig) -> Self {
        StepInput {
            u: vec![0.0; arch.n_u],
            outcome: 0.0,
            actions: vec![0; arch.policies.len()],
        }
    }

    fn check(&self, arch: &ArchitectureConfig) -> Result<()> {
        ensure_len("input u", arch.n_u, &self.u)?;
        if self.actions.len() != arch.policies.len() {
            return Err(Error::dims("input actions", arch.policies.len(), self.actions.len()));
        }
        Ok(())
    }
}

/// Stagewise variables that are not part of `Z` but persist across steps:
/// the homeostatic deviation and the previous drive.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Carry {
    pub homeostatic: Vec<f64>,
    pub u_prev: Vec<f64>,
}

impl Carry {
    pub fn zero(arch: &ArchitectureConfig) -> Self {
        Carry {
            homeostatic: vec![0.0; arch.n_u],
            u_prev: vec![0.0; arch.n_u],
        }
    }

    /// Fixed point of the homeostatic integrator under a constant drive,
    /// `h* = f_h(u) / κ_h`, with no novelty.
    pub fn steady(cfg: &SystemConfig, u: &[f64]) -> Self {
        let hp = &cfg.params.homeostatic;
        Carry {
            homeostatic: homeostatic_drive(u, hp.b_u)
                .into_iter()
                .map(|f| f / hp.kappa_h)
                .collect(),
            u_prev: u.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepOptions {
    /// Overrides the architecture step.
    pub dt: Option<f64>,
    /// Feed `H^t, X^t` instead of `H^{t+1}, X^{t+1}` to the valuative stage.
    /// Only meaningful for stage-order audits.
    pub stale_principal: bool,
    /// Step index reported in diagnostics.
    pub step: usize,
}

fn note(audit: &mut Option<&mut Audit>, stage: &'static str, writes: Var, level: Time, reads: &[(Var, Time)]) {
    if let Some(a) = audit.as_deref_mut() {
        a.record(stage, writes, level, reads);
    }
}

fn euler(state: &Mat, dt: f64, v: &Mat) -> Mat {
    let mut out = state.clone();
    out.add_scaled(dt, v);
    out
}

fn euler_vec(state: &[f64], dt: f64, v: &[f64]) -> Vec<f64> {
    state.iter().zip(v).map(|(s, v)| s + dt * v).collect()
}

fn project_rows(m: &mut Mat, r: f64) {
    for i in 0..m.rows() {
        project_ball_in_place(m.row_mut(i), r);
    }
}

/// Reject non-finite components, project and confirm the domain.
fn finish(z: &mut StateVector, arch: &ArchitectureConfig, step: usize) -> Result<()> {
    if let Some(component) = z.is_finite() {
        return Err(Error::NonFinite { component, step });
    }
    project_state_in_place(z, arch)?;
    let violations = validate_state(z, arch)?;
    if let Some(v) = violations.first() {
        return Err(Error::DomainViolation {
            step,
            detail: format!("{}[{}] {} violated: {}", v.component, v.index, v.bound, v.observed),
        });
    }
    Ok(())
}

/// One step of the full adaptive system: neuromodulation, precision and
/// awareness, interconnector signals, the two principal fields, valuation,
/// routing, then learning signal, reliability, traces and policies,
/// executive state and memory, in that order. Each stage only reads `Z^t`,
/// delayed taps, the input and outputs of earlier stages.
pub fn discrete_step<Hs: History + ?Sized>(
    cfg: &SystemConfig,
    history: &Hs,
    carry: &Carry,
    input: &StepInput,
    opts: &StepOptions,
    mut audit: Option<&mut Audit>,
) -> Result<(StateVector, Carry)> {
    let arch = &cfg.arch;
    let p = &cfg.params;
    let dt = opts.dt.unwrap_or(arch.dt);
    input.check(arch)?;
    let z = history.current();
    let prev = history.delayed(1)?;
    let a = &mut audit;
    use Time::{Current, Delayed, Derived, Next, Previous};

    // Stagewise scalars from Z^t, Z^{t-1} and the input.
    let homeostatic = carry.homeostatic.clone();
    note(a, "derived", Var::Homeostatic, Derived, &[(Var::Homeostatic, Current)]);
    let novelty = dist(&input.u, &carry.u_prev);
    note(
        a,
        "derived",
        Var::Novelty,
        Derived,
        &[(Var::Input, Current), (Var::Input, Previous)],
    );
    let outcome = input.outcome;
    note(a, "derived", Var::Outcome, Derived, &[(Var::Input, Current)]);
    let rel_err: Vec<Vec<f64>> = vector_exports(z, arch.n_s)
        .into_iter()
        .zip(vector_exports(prev, arch.n_s))
        .map(|(now, before)| now.iter().zip(&before).map(|(a, b)| (a - b) / dt).collect())
        .collect();
    note(
        a,
        "derived",
        Var::RelErr,
        Derived,
        &[
            (Var::H, Current),
            (Var::X, Current),
            (Var::Y, Current),
            (Var::P, Current),
            (Var::M, Current),
            (Var::H, Previous),
            (Var::X, Previous),
            (Var::Y, Previous),
            (Var::P, Previous),
            (Var::M, Previous),
        ],
    );
    let exports = scalar_exports(&z.h, &z.x, &z.y, &z.p, &z.m, arch.n_s);
    let b = broadcast(&z.routing, &exports, p.routing.broadcast_gain);
    note(
        a,
        "derived",
        Var::Broadcast,
        Derived,
        &[
            (Var::Routing, Current),
            (Var::H, Current),
            (Var::X, Current),
            (Var::Y, Current),
            (Var::P, Current),
            (Var::M, Current),
        ],
    );

    // Stage 1: neuromodulation.
    let mu = neuromod_readout(&z.y, &p.neuromod);
    note(a, "1 neuromodulation", Var::Mu, Derived, &[(Var::Y, Current)]);

    // Stage 2: precision and awareness.
    let q_next = precision_field(mu[ACH], arch, &p.precision);
    note(a, "2 precision", Var::Q, Next, &[(Var::Mu, Derived)]);
    let w_next = awareness_weights(&z.x, mu[NE], arch, &p.awareness);
    note(a, "2 awareness", Var::W, Next, &[(Var::X, Current), (Var::Mu, Derived)]);
    let seq_c = sequence_conductance(&q_next, arch);
    let gain = overlay_gain(&p.awareness.gain, z.p[0], mu[NE]);
    let scene_c = scene_conductance(&w_next, gain, arch, p.awareness.pattern);

    // Stage 3: delayed interconnector signals.
    let (n_rl, n_lr) = arch.delay_indices();
    let ks = KernelState {
        gates: GateInputs {
            valuation: z.y[0],
            executive: z.p[0],
        },
        h: &z.h,
        x: &z.x,
    };
    let (c_rl, c_lr) = interconnector_signals(history, &z.routing, &cfg.kernel, &ks, n_rl, n_lr)?;
    note(
        a,
        "3 interconnector",
        Var::Coupling,
        Derived,
        &[
            (Var::X, Delayed),
            (Var::H, Delayed),
            (Var::Routing, Current),
            (Var::H, Current),
            (Var::X, Current),
            (Var::Y, Current),
            (Var::P, Current),
        ],
    );

    // Stage 4: token field.
    let ctx_l = symbolic_context(&z.p, &z.m, &input.u, b[0]);
    let vh = symbolic_rhs(arch, &p.symbolic, &z.h, &seq_c, &c_rl, &ctx_l);
    let mut h_next = euler(&z.h, dt, &vh);
    project_ball_in_place(h_next.as_mut_slice(), arch.radii.h);
    note(
        a,
        "4 token field",
        Var::H,
        Next,
        &[
            (Var::H, Current),
            (Var::Q, Next),
            (Var::Coupling, Derived),
            (Var::P, Current),
            (Var::M, Current),
            (Var::Input, Current),
            (Var::Broadcast, Derived),
        ],
    );

    // Stage 5: node field.
    let ctx_r = geometric_context(&z.y, &z.m, &input.u, b[1]);
    let vx = geometric_rhs(arch, &p.geometric, &z.x, &scene_c, &c_lr, &ctx_r);
    let mut x_next = euler(&z.x, dt, &vx);
    project_rows(&mut x_next, arch.radii.x);
    note(
        a,
        "5 node field",
        Var::X,
        Next,
        &[
            (Var::X, Current),
            (Var::W, Next),
            (Var::Coupling, Derived),
            (Var::Mu, Derived),
            (Var::P, Current),
            (Var::Y, Current),
            (Var::M, Current),
            (Var::Input, Current),
            (Var::Broadcast, Derived),
        ],
    );

    // Stage 6: valuation, with the persistence predictor error of the node
    // field as its prediction-error input.
    let (h_use, x_use, lvl) = if opts.stale_principal {
        (&z.h, &z.x, Current)
    } else {
        (&h_next, &x_next, Next)
    };
    let prediction_error = dist(x_use.as_slice(), z.x.as_slice()) / dt;
    note(
        a,
        "6 prediction error",
        Var::PredError,
        Derived,
        &[(Var::X, lvl), (Var::X, Current)],
    );
    let scalars = StageScalars {
        homeostatic,
        prediction_error,
        novelty,
        outcome,
    };
    let ry = valuative_drive(
        &p.valuative,
        &p.symbolic,
        &p.geometric,
        h_use,
        x_use,
        &z.p,
        &z.m,
        &scalars,
    );
    let mut y_next = euler_vec(&z.y, dt, &valuative_rhs(&p.valuative, &z.y, &ry));
    project_ball_in_place(&mut y_next, arch.radii.y);
    note(
        a,
        "6 valuation",
        Var::Y,
        Next,
        &[
            (Var::Y, Current),
            (Var::H, lvl),
            (Var::X, lvl),
            (Var::P, Current),
            (Var::M, Current),
            (Var::Homeostatic, Derived),
            (Var::PredError, Derived),
            (Var::Novelty, Derived),
            (Var::Outcome, Derived),
        ],
    );

    // Stage 7: routing.
    let s_next = scalar_exports(&h_next, &x_next, &y_next, &z.p, &z.m, arch.n_s);
    let salience = routing_salience(&p.routing, &s_next, mean(&y_next));
    let routing_next = routing_update(&salience, &z.rho, p.routing.beta_rho);
    note(
        a,
        "7 routing",
        Var::Routing,
        Next,
        &[
            (Var::H, Next),
            (Var::X, Next),
            (Var::Y, Next),
            (Var::P, Current),
            (Var::M, Current),
            (Var::Rho, Current),
        ],
    );

    // 8.1: learning signal from the updated valuation.
    let delta = learning_signal(neuromod_readout(&y_next, &p.neuromod)[DA], p.policy.signed);
    note(a, "8.1 learning signal", Var::Delta, Derived, &[(Var::Y, Next)]);

    // 8.2: reliability from the errors at time t.
    let rho_next: Vec<f64> = z
        .rho
        .iter()
        .zip(&rel_err)
        .map(|(r, e)| reliability_update(*r, e, p.reliability.alpha, p.reliability.kernel))
        .collect();
    note(
        a,
        "8.2 reliability",
        Var::Rho,
        Next,
        &[(Var::Rho, Current), (Var::RelErr, Derived)],
    );

    // 8.3: traces and policy parameters, both from the old trace.
    let pp = &p.policy;
    let mut traces = Vec::with_capacity(arch.policies.len());
    let mut policies = Vec::with_capacity(arch.policies.len());
    let mut drift = 0.0;
    for (k, spec) in arch.policies.iter().enumerate() {
        let score = policy_score(&z.policies[k], input.actions[k], pp.floor_eps)?;
        let upd = eligibility_policy_update(
            &z.traces[k],
            &z.policies[k],
            delta,
            &score,
            pp.lambda[k],
            pp.eta[k],
            pp.lambda_reg,
            pp.bound_d,
            spec.r_z,
            spec.r_theta,
        )?;
        drift += norm(&upd.delta_theta);
        traces.push(upd.trace);
        policies.push(upd.theta);
    }
    let policy_reads = [
        (Var::Traces, Current),
        (Var::Theta, Current),
        (Var::Delta, Derived),
        (Var::Action, Current),
    ];
    note(a, "8.3 traces", Var::Traces, Next, &policy_reads);
    note(a, "8.3 policies", Var::Theta, Next, &policy_reads);

    // 8.4: executive state.
    let rp = executive_drive(
        &p.executive,
        &p.symbolic,
        &p.geometric,
        &h_next,
        &x_next,
        &y_next,
        mu[DA],
        drift,
    );
    let mut p_next = euler_vec(&z.p, dt, &executive_rhs(&p.executive, &z.p, &rp));
    project_ball_in_place(&mut p_next, arch.radii.p);
    note(
        a,
        "8.4 executive",
        Var::P,
        Next,
        &[
            (Var::P, Current),
            (Var::Mu, Derived),
            (Var::Traces, Current),
            (Var::Theta, Current),
            (Var::Delta, Derived),
            (Var::H, Next),
            (Var::X, Next),
            (Var::Y, Next),
        ],
    );

    // 8.5: memory consolidation.
    let h_bar = col_mean(&h_next);
    let g_m = memory_gate(&p.memory, &h_bar, &y_next);
    note(
        a,
        "8.5 memory gate",
        Var::MemGate,
        Derived,
        &[(Var::H, Next), (Var::Y, Next)],
    );
    let mut m_next = memory_update(&z.m, g_m, &memory_write(&p.memory, &h_bar, &y_next));
    project_ball_in_place(&mut m_next, arch.radii.m);
    note(
        a,
        "8.5 memory",
        Var::M,
        Next,
        &[
            (Var::M, Current),
            (Var::MemGate, Derived),
            (Var::H, Next),
            (Var::Y, Next),
        ],
    );

    let carry_next = Carry {
        homeostatic: homeostatic_step(
            &carry.homeostatic,
            &homeostatic_drive(&input.u, p.homeostatic.b_u),
            p.homeostatic.kappa_h,
            dt,
        )?,
        u_prev: input.u.clone(),
    };
    let mut out = StateVector {
        h: h_next,
        x: x_next,
        q: q_next,
        w: w_next,
        routing: routing_next,
        y: y_next,
        p: p_next,
        m: m_next,
        rho: rho_next,
        traces,
        policies,
    };
    finish(&mut out, arch, opts.step)?;
    Ok((out, carry_next))
}

/// Everything the closed principal regime holds fixed: conductances,
/// interconnector operators and gates, reaction contexts and the executive
/// forcing, all evaluated at the reference state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFrame {
    reference: StateVector,
    seq_c: Vec<f64>,
    scene_c: Vec<f64>,
    forward: CouplingKernel,
    adjoint: CouplingKernel,
    g_rl: f64,
    g_lr: f64,
    ctx_l: Vec<f64>,
    ctx_r: Vec<f64>,
    /// Executive drive `r_P` at the reference.
    r_p: Vec<f64>,
}

impl ClosedFrame {
    pub fn new(cfg: &SystemConfig, reference: &StateVector, input: &StepInput) -> Result<Self> {
        let arch = &cfg.arch;
        let p = &cfg.params;
        reference.check_shape(arch)?;
        input.check(arch)?;
        let z = reference;
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
        let forward = cfg.kernel.operator(&ks, Direction::RightToLeft).to_fixed();
        let adjoint = cfg.kernel.operator(&ks, Direction::LeftToRight).to_fixed();
        let (g_rl, g_lr) = routing_gates(&z.routing);
        let exports = scalar_exports(&z.h, &z.x, &z.y, &z.p, &z.m, arch.n_s);
        let b = broadcast(&z.routing, &exports, p.routing.broadcast_gain);
        let ctx_l = symbolic_context(&z.p, &z.m, &input.u, b[0]);
        let ctx_r = geometric_context(&z.y, &z.m, &input.u, b[1]);
        let r_p = executive_drive(&p.executive, &p.symbolic, &p.geometric, &z.h, &z.x, &z.y, mu[DA], 0.0);
        Ok(ClosedFrame {
            reference: z.clone(),
            seq_c,
            scene_c,
            forward,
            adjoint,
            g_rl,
            g_lr,
            ctx_l,
            ctx_r,
            r_p,
        })
    }

    /// The frame of a closed-regime configuration, `None` when adaptive.
    pub fn from_config(cfg: &SystemConfig) -> Result<Option<Self>> {
        match &cfg.regime {
            Regime::Adaptive => Ok(None),
            Regime::ClosedPrincipal { reference } => {
                Ok(Some(ClosedFrame::new(cfg, reference, &cfg.input.at(0, &cfg.arch))?))
            }
        }
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    /// Hilbert-Schmidt norms of the frozen forward and adjoint operators,
    /// gates included.
    pub fn coupling_norms(&self) -> (f64, f64) {
        (self.g_rl * self.forward.hs_norm(), self.g_lr * self.adjoint.hs_norm())
    }

    fn signals<Hs: History + ?Sized>(&self, cfg: &SystemConfig, history: &Hs) -> Result<(Mat, Mat)> {
        let (n_rl, n_lr) = cfg.arch.delay_indices();
        let z = history.current();
        let ks = KernelState {
            gates: GateInputs::default(),
            h: &z.h,
            x: &z.x,
        };
        let c_rl = self
            .forward
            .operator(&ks, Direction::RightToLeft)
            .apply_forward(&Selection::Full, &history.delayed(n_rl)?.x)?
            .scaled(self.g_rl);
        let c_lr = self
            .adjoint
            .operator(&ks, Direction::LeftToRight)
            .apply_adjoint(&Selection::Full, &history.delayed(n_lr)?.h)?
            .scaled(self.g_lr);
        Ok((c_rl, c_lr))
    }

    /// Velocities `(Ḣ, Ẋ, Ṗ)` of the reduced system at the current state of
    /// `history`.
    pub fn velocity<Hs: History + ?Sized>(&self, cfg: &SystemConfig, history: &Hs) -> Result<(Mat, Mat, Vec<f64>)> {
        let arch = &cfg.arch;
        let p = &cfg.params;
        let z = history.current();
        let (c_rl, c_lr) = self.signals(cfg, history)?;
        let vh = symbolic_rhs(arch, &p.symbolic, &z.h, &self.seq_c, &c_rl, &self.ctx_l);
        let vx = geometric_rhs(arch, &p.geometric, &z.x, &self.scene_c, &c_lr, &self.ctx_r);
        let vp = executive_rhs(&p.executive, &z.p, &self.r_p);
        Ok((vh, vx, vp))
    }

    /// Projected Euler step of `(H, X, P)`; every other component is copied
    /// from the reference.
    pub fn step<Hs: History + ?Sized>(
        &self,
        cfg: &SystemConfig,
        history: &Hs,
        dt: f64,
        step: usize,
    ) -> Result<StateVector> {
        let arch = &cfg.arch;
        let z = history.current();
        let (vh, vx, vp) = self.velocity(cfg, history)?;
        let mut out = self.reference.clone();
        out.h = euler(&z.h, dt, &vh);
        project_ball_in_place(out.h.as_mut_slice(), arch.radii.h);
        out.x = euler(&z.x, dt, &vx);
        project_rows(&mut out.x, arch.radii.x);
        out.p = euler_vec(&z.p, dt, &vp);
        project_ball_in_place(&mut out.p, arch.radii.p);
        finish(&mut out, arch, step)?;
        Ok(out)
    }
}

/// Continuous-time relaxation field at a constant history: principal and
/// dissipative components report their velocities, target-driven
/// components report `target − current`, and the discrete recursions
/// (reliability, traces, policies, memory) report their one-step
/// increments. It vanishes exactly at fixed points of the staged update.
pub fn relaxation_field(cfg: &SystemConfig, z: &StateVector, carry: &Carry, input: &StepInput) -> Result<StateVector> {
    let arch = &cfg.arch;
    let p = &cfg.params;
    z.check_shape(arch)?;
    input.check(arch)?;
    if let Regime::ClosedPrincipal { reference } = &cfg.regime {
        let frame = ClosedFrame::new(cfg, reference, input)?;
        let (vh, vx, vp) = frame.velocity(cfg, &ConstantHistory(z))?;
        let mut out = zero_like(z);
        out.h = vh;
        out.x = vx;
        out.p = vp;
        return Ok(out);
    }
    let mu = neuromod_readout(&z.y, &p.neuromod);
    let q_target = precision_field(mu[ACH], arch, &p.precision);
    let w_target = awareness_weights(&z.x, mu[NE], arch, &p.awareness);
    let seq_c = sequence_conductance(&z.q, arch);
    let gain = overlay_gain(&p.awareness.gain, z.p[0], mu[NE]);
    let scene_c = scene_conductance(&z.w, gain, arch, p.awareness.pattern);
    let (n_rl, n_lr) = arch.delay_indices();
    let ks = KernelState {
        gates: GateInputs {
            valuation: z.y[0],
            executive: z.p[0],
        },
        h: &z.h,
        x: &z.x,
    };
    let (c_rl, c_lr) = interconnector_signals(&ConstantHistory(z), &z.routing, &cfg.kernel, &ks, n_rl, n_lr)?;
    let exports = scalar_exports(&z.h, &z.x, &z.y, &z.p, &z.m, arch.n_s);
    let b = broadcast(&z.routing, &exports, p.routing.broadcast_gain);
    let vh = symbolic_rhs(
        arch,
        &p.symbolic,
        &z.h,
        &seq_c,
        &c_rl,
        &symbolic_context(&z.p, &z.m, &input.u, b[0]),
    );
    let vx = geometric_rhs(
        arch,
        &p.geometric,
        &z.x,
        &scene_c,
        &c_lr,
        &geometric_context(&z.y, &z.m, &input.u, b[1]),
    );
    let scalars = StageScalars {
        homeostatic: carry.homeostatic.clone(),
        prediction_error: norm(vx.as_slice()),
        novelty: dist(&input.u, &carry.u_prev),
        outcome: input.outcome,
    };
    let ry = valuative_drive(
        &p.valuative,
        &p.symbolic,
        &p.geometric,
        &z.h,
        &z.x,
        &z.p,
        &z.m,
        &scalars,
    );
    let vy = valuative_rhs(&p.valuative, &z.y, &ry);
    let salience = routing_salience(&p.routing, &exports, mean(&z.y));
    let mut vr = routing_update(&salience, &z.rho, p.routing.beta_rho);
    vr.add_scaled(-1.0, &z.routing);
    let delta = learning_signal(mu[DA], p.policy.signed);
    let zero_err = |d: usize| vec![0.0; d];
    let dims = arch.subsystem_dims();
    let vrho: Vec<f64> = z
        .rho
        .iter()
        .zip(&dims)
        .map(|(r, d)| reliability_update(*r, &zero_err(*d), p.reliability.alpha, p.reliability.kernel) - r)
        .collect();
    let pp = &p.policy;
    let mut vtr = Vec::with_capacity(arch.policies.len());
    let mut vth = Vec::with_capacity(arch.policies.len());
    let mut drift = 0.0;
    for k in 0..arch.policies.len() {
        let score = policy_score(&z.policies[k], input.actions[k], pp.floor_eps)?;
        let tr: Vec<f64> = z.traces[k]
            .iter()
            .zip(&score)
            .map(|(t, s)| (pp.lambda[k] - 1.0) * t + s)
            .collect();
        let th: Vec<f64> = z.traces[k]
            .iter()
            .zip(&z.policies[k])
            .map(|(t, th)| pp.eta[k] * (delta * t - pp.lambda_reg * th))
            .collect();
        drift += norm(&th);
        vtr.push(tr);
        vth.push(th);
    }
    let rp = executive_drive(&p.executive, &p.symbolic, &p.geometric, &z.h, &z.x, &z.y, mu[DA], drift);
    let vp = executive_rhs(&p.executive, &z.p, &rp);
    let h_bar = col_mean(&z.h);
    let g_m = memory_gate(&p.memory, &h_bar, &z.y);
    let phi = memory_write(&p.memory, &h_bar, &z.y);
    let vm: Vec<f64> = z.m.iter().zip(&phi).map(|(m, f)| g_m * (f - m)).collect();
    Ok(StateVector {
        h: vh,
        x: vx,
        q: q_target.iter().zip(&z.q).map(|(t, q)| t - q).collect(),
        w: w_target.iter().zip(&z.w).map(|(t, w)| t - w).collect(),
        routing: vr,
        y: vy,
        p: vp,
        m: vm,
        rho: vrho,
        traces: vtr,
        policies: vth,
    })
}

fn zero_like(z: &StateVector) -> StateVector {
    let zeros = |v: &Vec<f64>| vec![0.0; v.len()];
    StateVector {
        h: Mat::zeros(z.h.rows(), z.h.cols()),
        x: Mat::zeros(z.x.rows(), z.x.cols()),
        q: zeros(&z.q),
        w: zeros(&z.w),
        routing: Mat::zeros(z.routing.rows(), z.routing.cols()),
        y: zeros(&z.y),
        p: zeros(&z.p),
        m: zeros(&z.m),
        rho: zeros(&z.rho),
        traces: z.traces.iter().map(zeros).collect(),
        policies: z.policies.iter().map(zeros).collect(),
    }
}

/// Euclidean norm of the relaxation field over every component.
pub fn residual_norm(cfg: &SystemConfig, z: &StateVector, carry: &Carry, input: &StepInput) -> Result<f64> {
    Ok(norm(&relaxation_field(cfg, z, carry, input)?.flatten()))
}
