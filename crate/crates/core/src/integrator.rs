//! Explicit projected Euler integration with integer delay taps, trajectory
//! recording and the damped fixed-point equilibrium solver.

use alloc::vec::Vec;

use rand::Rng;

use crate::config::SystemConfig;
use crate::dynamics::{discrete_step, residual_norm, Audit, Carry, ClosedFrame, StepInput, StepOptions};
use crate::error::{Error, Result};
use crate::stability::{lyapunov_value, LkConstants};
use crate::state::{
    project_state_in_place, random_state, validate_state, ArchitectureConfig, ConstantHistory, HistoryBuffer,
    StateVector,
};

/// Everything needed to resume an interrupted run bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Checkpoint {
    pub step: u64,
    pub history: HistoryBuffer,
    pub carry: Carry,
}

/// One trajectory being advanced in time. Deterministic: the same config,
/// history and carry always produce the same states.
#[derive(Debug, Clone)]
pub struct Integrator<'c> {
    cfg: &'c SystemConfig,
    frame: Option<ClosedFrame>,
    history: HistoryBuffer,
    carry: Carry,
    step: u64,
}

impl<'c> Integrator<'c> {
    pub fn new(cfg: &'c SystemConfig, history: HistoryBuffer) -> Result<Self> {
        Self::from_checkpoint(
            cfg,
            Checkpoint {
                step: 0,
                history,
                carry: Carry::zero(&cfg.arch),
            },
        )
    }

    /// Start at the constant history `φ ≡ z`.
    pub fn constant(cfg: &'c SystemConfig, z: StateVector) -> Result<Self> {
        Self::new(cfg, HistoryBuffer::constant(z, cfg.arch.history_depth()))
    }

    pub fn from_checkpoint(cfg: &'c SystemConfig, ck: Checkpoint) -> Result<Self> {
        ck.history.check(&cfg.arch)?;
        crate::error::ensure_len("carry homeostatic", cfg.arch.n_u, &ck.carry.homeostatic)?;
        crate::error::ensure_len("carry u_prev", cfg.arch.n_u, &ck.carry.u_prev)?;
        Ok(Integrator {
            cfg,
            frame: ClosedFrame::from_config(cfg)?,
            history: ck.history,
            carry: ck.carry,
            step: ck.step,
        })
    }

    pub fn with_carry(mut self, carry: Carry) -> Self {
        self.carry = carry;
        self
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            step: self.step,
            history: self.history.clone(),
            carry: self.carry.clone(),
        }
    }

    pub fn config(&self) -> &SystemConfig {
        self.cfg
    }

    pub fn current(&self) -> &StateVector {
        self.history.current()
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn carry(&self) -> &Carry {
        &self.carry
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.arch.dt
    }

    /// Input applied during the next step.
    pub fn next_input(&self) -> StepInput {
        self.cfg.input.at(self.step, &self.cfg.arch)
    }

    fn advance_with(&mut self, audit: Option<&mut Audit>, stale_principal: bool) -> Result<()> {
        let cfg = self.cfg;
        let opts = StepOptions {
            dt: None,
            stale_principal,
            step: self.step as usize,
        };
        let next = match &self.frame {
            Some(frame) => frame.step(cfg, &self.history, cfg.arch.dt, opts.step)?,
            None => {
                let input = self.next_input();
                let (z, carry) = discrete_step(cfg, &self.history, &self.carry, &input, &opts, audit)?;
                self.carry = carry;
                z
            }
        };
        self.history.push(&next);
        self.step += 1;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.advance_with(None, false)
    }

    /// One step with every stage read and write recorded. The closed
    /// regime bypasses the staged update and records nothing.
    pub fn step_audited(&mut self, audit: &mut Audit) -> Result<()> {
        self.advance_with(Some(audit), false)
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub step: u64,
    pub time: f64,
    pub state: StateVector,
    pub residual: f64,
    /// Lyapunov-Krasovskii value around the configured reference state.
    pub lyapunov: Option<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
}

/// Record every `every` steps (0 records only the endpoints).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordOptions {
    pub every: u64,
}

fn sample(integ: &Integrator<'_>, lk: Option<(&LkConstants, &StateVector)>) -> Result<Sample> {
    let cfg = integ.cfg;
    let z = integ.current();
    let input = integ.next_input();
    let (n_rl, n_lr) = cfg.arch.delay_indices();
    let lyapunov = match lk {
        Some((c, eq)) => Some(lyapunov_value(integ.history(), n_rl, n_lr, cfg.arch.dt, c, eq)?),
        None => None,
    };
    Ok(Sample {
        step: integ.steps_done(),
        time: integ.time(),
        state: z.clone(),
        residual: residual_norm(cfg, z, integ.carry(), &input)?,
        lyapunov,
        violations: validate_state(z, &cfg.arch)?.len(),
    })
}

/// Advance an integrator `steps` times, recording samples. The first and
/// last states are always recorded.
pub fn record(integ: &mut Integrator<'_>, steps: u64, opts: RecordOptions) -> Result<Trajectory> {
    let cfg = integ.cfg;
    let lk_consts = LkConstants::from_config(cfg);
    let lk = cfg.reference_state().map(|eq| (&lk_consts, eq));
    let mut traj = Trajectory {
        dt: cfg.arch.dt,
        samples: Vec::new(),
    };
    traj.samples.push(sample(integ, lk)?);
    for k in 1..=steps {
        integ.step()?;
        if k == steps || (opts.every > 0 && k % opts.every == 0) {
            traj.samples.push(sample(integ, lk)?);
        }
    }
    Ok(traj)
}

/// Integrate from `history` for `steps` steps.
pub fn integrate(cfg: &SystemConfig, history: HistoryBuffer, steps: u64, opts: RecordOptions) -> Result<Trajectory> {
    let mut integ = Integrator::new(cfg, history)?;
    record(&mut integ, steps, opts)
}

/// Linear interpolation between two valid states across the history
/// window. The domain is convex, so every slot is valid.
pub fn interpolated_history(
    arch: &ArchitectureConfig,
    oldest: &StateVector,
    newest: &StateVector,
) -> Result<HistoryBuffer> {
    let depth = arch.history_depth();
    let a = oldest.flatten();
    let b = newest.flatten();
    let mut states = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let s = k as f64 / depth as f64;
        let mut z = newest.clone();
        let v: Vec<f64> = a.iter().zip(&b).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        unflatten_into(&mut z, &v);
        project_state_in_place(&mut z, arch)?;
        states.push(z);
    }
    HistoryBuffer::from_states(states, depth)
}

/// Random initial history: interpolation between two random valid states.
pub fn random_history<R: Rng + ?Sized>(arch: &ArchitectureConfig, rng: &mut R) -> Result<HistoryBuffer> {
    let a = random_state(arch, rng);
    let b = random_state(arch, rng);
    interpolated_history(arch, &a, &b)
}

/// Inverse of [`StateVector::flatten`] onto a template of the right shape.
pub(crate) fn unflatten_into(z: &mut StateVector, v: &[f64]) {
    let mut it = v.iter().copied();
    let mut fill = |dst: &mut [f64]| {
        dst.iter_mut()
            .for_each(|d| *d = it.next().expect("flat length matches"))
    };
    fill(z.h.as_mut_slice());
    fill(z.x.as_mut_slice());
    fill(&mut z.q);
    fill(&mut z.w);
    fill(z.routing.as_mut_slice());
    fill(&mut z.y);
    fill(&mut z.p);
    fill(&mut z.m);
    fill(&mut z.rho);
    for t in &mut z.traces {
        fill(t);
    }
    for t in &mut z.policies {
        fill(t);
    }
}

/// Outcome of [`find_equilibrium`].
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Best iterate found.
    pub state: StateVector,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damping of the fixed-point iteration.
pub const EQUILIBRIUM_DAMPING: f64 = 0.5;

/// Damped fixed-point iteration `z ← Π((1 − ω) z + ω S(z))`, where `S` is
/// the staged update at the constant history `z` with the pseudo-step
/// `0.5 / stiffness` and the homeostatic carry at its steady state. Stops
/// once [`residual_norm`] drops to `tol`; otherwise reports the best
/// iterate.
pub fn find_equilibrium(cfg: &SystemConfig, tol: f64, max_iters: usize) -> Result<Equilibrium> {
    let arch = &cfg.arch;
    let input = cfg.input.at(0, arch);
    let carry = Carry::steady(cfg, &input.u);
    let frame = ClosedFrame::from_config(cfg)?;
    let h = 0.5 / cfg.stiffness();
    let opts = StepOptions {
        dt: Some(h),
        ..StepOptions::default()
    };
    let mut z = match &frame {
        Some(f) => f.reference().clone(),
        None => StateVector::neutral(arch),
    };
    project_state_in_place(&mut z, arch)?;
    let mut best = (z.clone(), f64::INFINITY);
    let w = EQUILIBRIUM_DAMPING;
    for it in 0..=max_iters {
        let r = residual_norm(cfg, &z, &carry, &input)?;
        if !r.is_finite() {
            return Err(Error::NonFinite {
                component: "residual",
                step: it,
            });
        }
        if r < best.1 {
            best = (z.clone(), r);
        }
        if r <= tol {
            return Ok(Equilibrium {
                state: z,
                residual: r,
                iterations: it,
                converged: true,
            });
        }
        if it == max_iters {
            break;
        }
        let hist = ConstantHistory(&z);
        let s = match &frame {
            Some(f) => f.step(cfg, &hist, h, it)?,
            None => discrete_step(cfg, &hist, &carry, &input, &opts, None)?.0,
        };
        let a = z.flatten();
        let b = s.flatten();
        let v: Vec<f64> = a.iter().zip(&b).map(|(a, b)| (1.0 - w) * a + w * b).collect();
        unflatten_into(&mut z, &v);
        project_state_in_place(&mut z, arch)?;
    }
    Ok(Equilibrium {
        state: best.0,
        residual: best.1,
        iterations: max_iters,
        converged: false,
    })
}
