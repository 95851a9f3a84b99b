//! A complete, self-describing system configuration.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::coupling::CouplingKernel;
use crate::dynamics::fields::overlay_gain_bound;
use crate::dynamics::params::FieldParams;
use crate::dynamics::StepInput;
use crate::error::{Error, Result};
use crate::math::sin;
use crate::state::{validate_state, ArchitectureConfig, StateVector};

pub const CONFIG_VERSION: u32 = 1;

/// Safety factor of the explicit step bound `Δt ≤ STEP_FACTOR / stiffness`.
pub const STEP_FACTOR: f64 = 0.1;

/// Dissipativity constants asserted by the configuration author; the
/// certificates validate them by sampling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DeclaredConstants {
    pub mu_l: f64,
    pub mu_r: f64,
    pub mu_p: f64,
    /// Configured coupling bound `C_K`; defaults to the family budget.
    #[cfg_attr(feature = "serde", serde(default))]
    pub coupling_bound: Option<f64>,
}

/// Closed-form Lipschitz bounds of the state-dependent operators, when the
/// configuration author knows them. Otherwise they are sampled.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AnalyticBounds {
    pub l_alpha: f64,
    pub l_beta: f64,
    pub l_q: f64,
    pub l_w: f64,
    pub h_star_norm: f64,
    pub x_star_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Regime {
    /// Every component evolves.
    Adaptive,
    /// Only `(H, X, P)` evolve; every auxiliary, conductance, gate and the
    /// kernel are frozen at `reference`.
    ClosedPrincipal { reference: Box<StateVector> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Drive {
    Zero,
    Constant {
        u: Vec<f64>,
    },
    /// `u_k(t) = amplitude · sin(2π t / period + k)`.
    Sinusoid {
        amplitude: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum ActionSchedule {
    /// One fixed action per policy.
    Fixed { actions: Vec<usize> },
    /// Every policy cycles through its actions, advancing every
    /// `period_steps` steps.
    Cycle { period_steps: usize },
}

/// Exogenous input stream `(u, r, A)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct InputSpec {
    pub drive: Drive,
    pub outcome: f64,
    pub actions: ActionSchedule,
}

impl InputSpec {
    pub fn zero(arch: &ArchitectureConfig) -> Self {
        InputSpec {
            drive: Drive::Zero,
            outcome: 0.0,
            actions: ActionSchedule::Fixed {
                actions: vec![0; arch.policies.len()],
            },
        }
    }

    pub fn validate(&self, arch: &ArchitectureConfig) -> Result<()> {
        match &self.drive {
            Drive::Zero => {}
            Drive::Constant { u } => crate::error::ensure_len("input.drive.u", arch.n_u, u)?,
            Drive::Sinusoid { amplitude, period } => {
                if !(amplitude.is_finite() && *period > 0.0 && period.is_finite()) {
                    return Err(Error::invalid(
                        "input.drive",
                        "sinusoid needs a finite amplitude and positive period",
                    ));
                }
            }
        }
        if !self.outcome.is_finite() {
            return Err(Error::invalid("input.outcome", "must be finite"));
        }
        match &self.actions {
            ActionSchedule::Fixed { actions } => {
                if actions.len() != arch.policies.len() {
                    return Err(Error::dims("input.actions", arch.policies.len(), actions.len()));
                }
                for (a, spec) in actions.iter().zip(&arch.policies) {
                    if *a >= spec.actions {
                        return Err(Error::invalid("input.actions", "action index outside its action set"));
                    }
                }
            }
            ActionSchedule::Cycle { period_steps } => {
                if *period_steps == 0 {
                    return Err(Error::invalid("input.actions", "cycle period must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Input applied during step `step` (time `step · Δt`).
    pub fn at(&self, step: u64, arch: &ArchitectureConfig) -> StepInput {
        let t = step as f64 * arch.dt;
        let u = match &self.drive {
            Drive::Zero => vec![0.0; arch.n_u],
            Drive::Constant { u } => u.clone(),
            Drive::Sinusoid { amplitude, period } => (0..arch.n_u)
                .map(|k| amplitude * sin(2.0 * core::f64::consts::PI * t / period + k as f64))
                .collect(),
        };
        let actions = match &self.actions {
            ActionSchedule::Fixed { actions } => actions.clone(),
            ActionSchedule::Cycle { period_steps } => arch
                .policies
                .iter()
                .map(|p| ((step / *period_steps as u64) % p.actions as u64) as usize)
                .collect(),
        };
        StepInput {
            u,
            outcome: self.outcome,
            actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SystemConfig {
    pub version: u32,
    pub name: String,
    pub arch: ArchitectureConfig,
    pub kernel: CouplingKernel,
    pub params: FieldParams,
    pub declared: DeclaredConstants,
    #[cfg_attr(feature = "serde", serde(default))]
    pub analytic: Option<AnalyticBounds>,
    pub regime: Regime,
    /// Known equilibrium, used as the reference of the error diagnostics.
    #[cfg_attr(feature = "serde", serde(default))]
    pub equilibrium: Option<StateVector>,
    pub input: InputSpec,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(
                "version",
                format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        let arch = &self.arch;
        arch.validate()?;
        self.kernel.validate(arch.tokens, arch.nodes, arch.d_l, arch.d_r)?;
        self.params.validate(arch)?;
        self.input.validate(arch)?;
        let d = &self.declared;
        for (name, v) in [
            ("declared.mu_l", d.mu_l),
            ("declared.mu_r", d.mu_r),
            ("declared.mu_p", d.mu_p),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "dissipativity constants must be positive"));
            }
        }
        if let Some(c) = d.coupling_bound {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::invalid("declared.coupling_bound", "must be nonnegative"));
            }
        }
        let bound = STEP_FACTOR / self.stiffness();
        if arch.dt > bound {
            return Err(Error::invalid(
                "dt",
                format!("explicit step bound violated: dt = {} > {bound:.3e}", arch.dt),
            ));
        }
        let check = |what: &'static str, z: &StateVector| -> Result<()> {
            let v = validate_state(z, arch)?;
            match v.first() {
                None => Ok(()),
                Some(first) => Err(Error::invalid(
                    what,
                    format!("{} {} violated: {}", first.component, first.bound, first.observed),
                )),
            }
        };
        if let Regime::ClosedPrincipal { reference } = &self.regime {
            check("regime.reference", reference)?;
        }
        if let Some(eq) = &self.equilibrium {
            check("equilibrium", eq)?;
        }
        Ok(())
    }

    /// Coupling bound `C_K`: the declared value, or the family budget.
    pub fn coupling_bound(&self) -> f64 {
        self.declared
            .coupling_bound
            .unwrap_or_else(|| self.kernel.family_budget())
    }

    /// Largest rate of the explicit scheme: diffusion at maximal conductance
    /// plus damping, reaction Lipschitz and coupling, over every component.
    pub fn stiffness(&self) -> f64 {
        let arch = &self.arch;
        let p = &self.params;
        let c_k = self.kernel.family_budget();
        let lap_l = arch
            .graph_l
            .with_weights(arch.graph_l.weights().iter().map(|w| w * arch.r_q).collect())
            .and_then(|g| g.laplacian_norm())
            .unwrap_or(f64::INFINITY);
        let gmax = overlay_gain_bound(&p.awareness.gain);
        let lap_r = arch
            .graph_r
            .with_weights(arch.graph_r.weights().iter().map(|w| w + gmax).collect())
            .and_then(|g| g.laplacian_norm())
            .unwrap_or(f64::INFINITY);
        let sym = lap_l + p.symbolic.alpha + p.symbolic.lipschitz() + c_k;
        let geo = lap_r + p.geometric.alpha + p.geometric.lipschitz(arch) + c_k;
        let exec = p.executive.mu_p + p.executive.w_p.op_norm();
        [sym, geo, p.valuative.kappa, exec, p.homeostatic.kappa_h, 1.0]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Reference state for error diagnostics: the declared equilibrium, the
    /// closed-regime reference, or none.
    pub fn reference_state(&self) -> Option<&StateVector> {
        match &self.regime {
            Regime::ClosedPrincipal { reference } => Some(reference),
            Regime::Adaptive => self.equilibrium.as_ref(),
        }
    }
}
