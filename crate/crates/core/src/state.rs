//! The full state vector, its compact domain and the delayed history.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::Mat;
use crate::math::{dist, floor, norm, sqrt};
use crate::simplex::{project_ball_in_place, sparsemax};

/// Domain tolerance used by [`validate_state`].
pub const DOMAIN_TOL: f64 = 1e-9;

/// Subsystems in routing order. Only the first `n_s` take part.
pub const SUBSYSTEMS: [&str; 5] = ["symbolic", "geometric", "valuative", "executive", "memory"];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PolicySpec {
    /// Size of the action set.
    pub actions: usize,
    /// Trace radius `R_z`.
    pub r_z: f64,
    /// Parameter radius `R_θ`.
    pub r_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Radii {
    /// Frobenius radius of the token field.
    pub h: f64,
    /// Per-node radius of the node field.
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub m: f64,
}

/// Fixed finite architecture: sizes, delays, step, radii and both graphs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ArchitectureConfig {
    pub tokens: usize,
    pub nodes: usize,
    pub d_l: usize,
    pub d_r: usize,
    /// Number of routed subsystems, between 2 and 5.
    pub n_s: usize,
    pub n_y: usize,
    pub n_p: usize,
    pub n_m: usize,
    /// Dimension of the exogenous drive `u`.
    pub n_u: usize,
    pub policies: Vec<PolicySpec>,
    /// Delay of the right-to-left signal.
    pub tau_rl: f64,
    /// Delay of the left-to-right signal.
    pub tau_lr: f64,
    pub dt: f64,
    pub radii: Radii,
    pub eps_q: f64,
    pub r_q: f64,
    /// Sequence graph on the tokens; its weights multiply the precision field.
    pub graph_l: WeightedGraph,
    /// Scene graph on the nodes; its weights are the residual backbone.
    pub graph_r: WeightedGraph,
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: usize| {
            if v == 0 {
                Err(Error::invalid(name, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("tokens", self.tokens)?;
        positive("nodes", self.nodes)?;
        positive("d_l", self.d_l)?;
        positive("d_r", self.d_r)?;
        positive("n_y", self.n_y)?;
        positive("n_p", self.n_p)?;
        positive("n_u", self.n_u)?;
        if !(2..=5).contains(&self.n_s) {
            return Err(Error::invalid("n_s", "between 2 and 5 routed subsystems"));
        }
        if self.n_m == 0 && self.n_s == 5 {
            return Err(Error::invalid("n_m", "routing the memory subsystem needs n_m > 0"));
        }
        for (name, tau) in [("tau_rl", self.tau_rl), ("tau_lr", self.tau_lr)] {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::invalid(name, "delays must be finite and nonnegative"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "step must be positive and finite"));
        }
        let r = &self.radii;
        for (name, v) in [
            ("radii.h", r.h),
            ("radii.x", r.x),
            ("radii.y", r.y),
            ("radii.p", r.p),
            ("radii.m", r.m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "radii must be positive and finite"));
            }
        }
        if !(self.eps_q > 0.0 && self.eps_q < self.r_q && self.r_q.is_finite()) {
            return Err(Error::invalid("eps_q", "precision box needs 0 < eps_q < r_q < inf"));
        }
        for p in &self.policies {
            if p.actions < 2 {
                return Err(Error::invalid("policies", "a policy needs at least two actions"));
            }
            if !(p.r_z > 0.0 && p.r_theta > 0.0 && p.r_z.is_finite() && p.r_theta.is_finite()) {
                return Err(Error::invalid("policies", "trace and parameter radii must be positive"));
            }
        }
        if self.graph_l.node_count() != self.tokens {
            return Err(Error::dims("graph_l nodes", self.tokens, self.graph_l.node_count()));
        }
        if self.graph_r.node_count() != self.nodes {
            return Err(Error::dims("graph_r nodes", self.nodes, self.graph_r.node_count()));
        }
        if !self.graph_l.is_symmetric() || !self.graph_r.is_symmetric() {
            return Err(Error::invalid("graphs", "base graph weights must be symmetric"));
        }
        Ok(())
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_rl.max(self.tau_lr)
    }

    /// `(n_RL, n_LR)`, the integer taps of both delays.
    pub fn delay_indices(&self) -> (usize, usize) {
        (delay_index(self.tau_rl, self.dt), delay_index(self.tau_lr, self.dt))
    }

    /// History depth `K = ⌈τ_max / Δt⌉`, never below the largest tap and at
    /// least one so that one-step differences are always readable.
    pub fn history_depth(&self) -> usize {
        let (a, b) = self.delay_indices();
        let k = crate::math::ceil(self.tau_max() / self.dt - 1e-9).max(0.0) as usize;
        k.max(a).max(b).max(1)
    }

    /// Number of reliability errors, one per routed subsystem.
    pub fn subsystem_dims(&self) -> Vec<usize> {
        [self.d_l, self.d_r, self.n_y, self.n_p, self.n_m.max(1)][..self.n_s].to_vec()
    }
}

/// `⌊τ / Δt⌋`, robust to `τ` being an exact multiple of `Δt` up to rounding.
pub fn delay_index(tau: f64, dt: f64) -> usize {
    let ratio = tau / dt;
    floor(ratio + 1e-9 * ratio.max(1.0)).max(0.0) as usize
}

/// The full state `Z`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StateVector {
    /// Token field, `T × d_L`.
    pub h: Mat,
    /// Node field, `|V| × d_R`, row `i` is `e_i`.
    pub x: Mat,
    /// Precision weight per edge of the sequence graph.
    pub q: Vec<f64>,
    /// Awareness weight per edge `(i, j)` of the scene graph; the weights
    /// into each node form a simplex.
    pub w: Vec<f64>,
    /// Row-stochastic routing matrix, `n_s × n_s`.
    pub routing: Mat,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    pub rho: Vec<f64>,
    pub traces: Vec<Vec<f64>>,
    pub policies: Vec<Vec<f64>>,
}

/// One broken domain constraint.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Violation {
    pub component: &'static str,
    /// Row, edge, node or coordinate the violation refers to.
    pub index: usize,
    pub bound: String,
    pub observed: f64,
}

impl StateVector {
    /// The neutral point: zero fields, mid-box precision, uniform simplices,
    /// uniform routing, full reliability.
    pub fn neutral(arch: &ArchitectureConfig) -> Self {
        let mut w = vec![0.0; arch.graph_r.edge_count()];
        for group in arch.graph_r.in_edges() {
            let share = 1.0 / group.len().max(1) as f64;
            for e in group {
                w[e] = share;
            }
        }
        let s = arch.n_s;
        StateVector {
            h: Mat::zeros(arch.tokens, arch.d_l),
            x: Mat::zeros(arch.nodes, arch.d_r),
            q: vec![0.5 * (arch.eps_q + arch.r_q); arch.graph_l.edge_count()],
            w,
            routing: Mat::from_row_major(s, s, vec![1.0 / s as f64; s * s]).expect("square"),
            y: vec![0.0; arch.n_y],
            p: vec![0.0; arch.n_p],
            m: vec![0.0; arch.n_m],
            rho: vec![1.0; s],
            traces: arch.policies.iter().map(|p| vec![0.0; p.actions]).collect(),
            policies: arch.policies.iter().map(|p| vec![0.0; p.actions]).collect(),
        }
    }

    pub fn check_shape(&self, arch: &ArchitectureConfig) -> Result<()> {
        self.h.ensure_shape("state h", arch.tokens, arch.d_l)?;
        self.x.ensure_shape("state x", arch.nodes, arch.d_r)?;
        self.routing.ensure_shape("state routing", arch.n_s, arch.n_s)?;
        let lens = [
            ("state q", arch.graph_l.edge_count(), self.q.len()),
            ("state w", arch.graph_r.edge_count(), self.w.len()),
            ("state y", arch.n_y, self.y.len()),
            ("state p", arch.n_p, self.p.len()),
            ("state m", arch.n_m, self.m.len()),
            ("state rho", arch.n_s, self.rho.len()),
            ("state traces", arch.policies.len(), self.traces.len()),
            ("state policies", arch.policies.len(), self.policies.len()),
        ];
        for (what, expected, found) in lens {
            if expected != found {
                return Err(Error::dims(what, expected, found));
            }
        }
        for (k, spec) in arch.policies.iter().enumerate() {
            if self.traces[k].len() != spec.actions {
                return Err(Error::dims("trace", spec.actions, self.traces[k].len()));
            }
            if self.policies[k].len() != spec.actions {
                return Err(Error::dims("policy parameters", spec.actions, self.policies[k].len()));
            }
        }
        Ok(())
    }

    /// Every coordinate, in a fixed order matching [`StateVector::labels`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(self.h.as_slice());
        out.extend_from_slice(self.x.as_slice());
        out.extend_from_slice(&self.q);
        out.extend_from_slice(&self.w);
        out.extend_from_slice(self.routing.as_slice());
        out.extend_from_slice(&self.y);
        out.extend_from_slice(&self.p);
        out.extend_from_slice(&self.m);
        out.extend_from_slice(&self.rho);
        for t in &self.traces {
            out.extend_from_slice(t);
        }
        for t in &self.policies {
            out.extend_from_slice(t);
        }
        out
    }

    /// Column names for [`StateVector::flatten`].
    pub fn labels(arch: &ArchitectureConfig) -> Vec<String> {
        let mut out = Vec::new();
        for l in 0..arch.tokens {
            for c in 0..arch.d_l {
                out.push(format!("h_{l}_{c}"));
            }
        }
        for i in 0..arch.nodes {
            for c in 0..arch.d_r {
                out.push(format!("x_{i}_{c}"));
            }
        }
        for [a, b] in arch.graph_l.edges() {
            out.push(format!("q_{a}_{b}"));
        }
        for [a, b] in arch.graph_r.edges() {
            out.push(format!("w_{a}_{b}"));
        }
        for i in 0..arch.n_s {
            for j in 0..arch.n_s {
                out.push(format!("r_{i}_{j}"));
            }
        }
        let mut vector = |name: &str, n: usize| {
            for k in 0..n {
                out.push(format!("{name}_{k}"));
            }
        };
        vector("y", arch.n_y);
        vector("p", arch.n_p);
        vector("m", arch.n_m);
        vector("rho", arch.n_s);
        for (k, p) in arch.policies.iter().enumerate() {
            vector(&format!("z{k}"), p.actions);
        }
        for (k, p) in arch.policies.iter().enumerate() {
            vector(&format!("theta{k}"), p.actions);
        }
        out
    }

    /// Euclidean distance over the principal fields `(H, X, P)`.
    pub fn principal_distance(&self, other: &StateVector) -> f64 {
        let sq = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum() };
        sqrt(
            sq(self.h.as_slice(), other.h.as_slice())
                + sq(self.x.as_slice(), other.x.as_slice())
                + sq(&self.p, &other.p),
        )
    }

    /// Euclidean distance over every coordinate.
    pub fn distance(&self, other: &StateVector) -> f64 {
        dist(&self.flatten(), &other.flatten())
    }

    pub fn is_finite(&self) -> Option<&'static str> {
        let parts: [(&'static str, &[f64]); 9] = [
            ("h", self.h.as_slice()),
            ("x", self.x.as_slice()),
            ("q", &self.q),
            ("w", &self.w),
            ("routing", self.routing.as_slice()),
            ("y", &self.y),
            ("p", &self.p),
            ("m", &self.m),
            ("rho", &self.rho),
        ];
        for (name, v) in parts {
            if !crate::math::all_finite(v) {
                return Some(name);
            }
        }
        if self.traces.iter().any(|t| !crate::math::all_finite(t)) {
            return Some("traces");
        }
        if self.policies.iter().any(|t| !crate::math::all_finite(t)) {
            return Some("policies");
        }
        None
    }
}

/// All domain violations of `z`, empty iff `z` lies in the compact domain
/// within `tol`.
pub fn validate_state_tol(z: &StateVector, arch: &ArchitectureConfig, tol: f64) -> Result<Vec<Violation>> {
    z.check_shape(arch)?;
    let mut out = Vec::new();
    let mut ball = |component: &'static str, index: usize, v: &[f64], r: f64| {
        let n = norm(v);
        if !(n <= r + tol) {
            out.push(Violation {
                component,
                index,
                bound: format!("norm <= {r}"),
                observed: n,
            });
        }
    };
    let r = &arch.radii;
    ball("h", 0, z.h.as_slice(), r.h);
    for i in 0..arch.nodes {
        ball("x", i, z.x.row(i), r.x);
    }
    ball("y", 0, &z.y, r.y);
    ball("p", 0, &z.p, r.p);
    ball("m", 0, &z.m, r.m);
    for (k, spec) in arch.policies.iter().enumerate() {
        ball("traces", k, &z.traces[k], spec.r_z);
        ball("policies", k, &z.policies[k], spec.r_theta);
    }
    for (e, q) in z.q.iter().enumerate() {
        if !(*q >= arch.eps_q - tol && *q <= arch.r_q + tol) {
            out.push(Violation {
                component: "q",
                index: e,
                bound: format!("in [{}, {}]", arch.eps_q, arch.r_q),
                observed: *q,
            });
        }
    }
    for (i, rho) in z.rho.iter().enumerate() {
        if !(*rho >= -tol && *rho <= 1.0 + tol) {
            out.push(Violation {
                component: "rho",
                index: i,
                bound: String::from("in [0, 1]"),
                observed: *rho,
            });
        }
    }
    let mut simplex = |component: &'static str, index: usize, v: &mut dyn Iterator<Item = f64>| {
        let (mut sum, mut min) = (0.0, f64::INFINITY);
        for x in v {
            sum += x;
            min = min.min(x);
        }
        if !((sum - 1.0).abs() <= tol) {
            out.push(Violation {
                component,
                index,
                bound: String::from("sum = 1"),
                observed: sum,
            });
        }
        if !(min >= -tol) {
            out.push(Violation {
                component,
                index,
                bound: String::from("entries >= 0"),
                observed: min,
            });
        }
    };
    for (j, group) in arch.graph_r.in_edges().iter().enumerate() {
        if !group.is_empty() {
            simplex("w", j, &mut group.iter().map(|e| z.w[*e]));
        }
    }
    for i in 0..arch.n_s {
        simplex("routing", i, &mut z.routing.row(i).iter().copied());
    }
    Ok(out)
}

pub fn validate_state(z: &StateVector, arch: &ArchitectureConfig) -> Result<Vec<Violation>> {
    validate_state_tol(z, arch, DOMAIN_TOL)
}

/// Componentwise projection onto the domain: balls, boxes, simplices.
/// Idempotent and the identity on valid states, up to rounding in the
/// simplex rows.
pub fn project_state(z: &StateVector, arch: &ArchitectureConfig) -> Result<StateVector> {
    let mut out = z.clone();
    project_state_in_place(&mut out, arch)?;
    Ok(out)
}

pub fn project_state_in_place(z: &mut StateVector, arch: &ArchitectureConfig) -> Result<()> {
    z.check_shape(arch)?;
    let r = &arch.radii;
    project_ball_in_place(z.h.as_mut_slice(), r.h);
    for i in 0..arch.nodes {
        project_ball_in_place(z.x.row_mut(i), r.x);
    }
    project_ball_in_place(&mut z.y, r.y);
    project_ball_in_place(&mut z.p, r.p);
    project_ball_in_place(&mut z.m, r.m);
    for (k, spec) in arch.policies.iter().enumerate() {
        project_ball_in_place(&mut z.traces[k], spec.r_z);
        project_ball_in_place(&mut z.policies[k], spec.r_theta);
    }
    z.q.iter_mut().for_each(|q| *q = q.clamp(arch.eps_q, arch.r_q));
    z.rho.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    for group in arch.graph_r.in_edges() {
        project_group(&mut z.w, &group);
    }
    for i in 0..arch.n_s {
        let row = sparsemax(z.routing.row(i));
        z.routing.row_mut(i).copy_from_slice(&row);
    }
    Ok(())
}

/// Project the entries of `v` indexed by `group` onto their simplex. Points
/// already on the simplex are left bit-for-bit unchanged, which keeps the
/// projection idempotent in floating point.
pub(crate) fn project_group(v: &mut [f64], group: &[usize]) {
    if group.is_empty() {
        return;
    }
    let vals: Vec<f64> = group.iter().map(|e| v[*e]).collect();
    let sum: f64 = vals.iter().sum();
    if vals.iter().all(|x| *x >= 0.0) && (sum - 1.0).abs() <= 1e-14 {
        return;
    }
    let p = sparsemax(&vals);
    for (e, x) in group.iter().zip(p) {
        v[*e] = x;
    }
}

/// Uniform draw from a bounded box around the domain followed by projection,
/// so every sample is valid and boundary points occur with positive
/// probability.
pub fn random_state<R: Rng + ?Sized>(arch: &ArchitectureConfig, rng: &mut R) -> StateVector {
    let mut z = StateVector::neutral(arch);
    let fill = |v: &mut [f64], r: f64, rng: &mut R| {
        let s = r / sqrt(v.len().max(1) as f64);
        v.iter_mut().for_each(|x| *x = rng.gen_range(-1.2..1.2) * s);
    };
    fill(z.h.as_mut_slice(), arch.radii.h, rng);
    for i in 0..arch.nodes {
        fill(z.x.row_mut(i), arch.radii.x, rng);
    }
    fill(&mut z.y, arch.radii.y, rng);
    fill(&mut z.p, arch.radii.p, rng);
    fill(&mut z.m, arch.radii.m, rng);
    for (k, spec) in arch.policies.iter().enumerate() {
        fill(&mut z.traces[k], spec.r_z, rng);
        fill(&mut z.policies[k], spec.r_theta, rng);
    }
    let span = arch.r_q - arch.eps_q;
    z.q.iter_mut()
        .for_each(|q| *q = arch.eps_q + span * rng.gen_range(-0.1..1.1));
    z.rho.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..1.1));
    z.w.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
    z.routing
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(0.0..1.0));
    project_state_in_place(&mut z, arch).expect("shapes come from the architecture");
    z
}

/// Read access to a discretized history segment.
pub trait History {
    /// The state `n` grid steps before the current one.
    fn delayed(&self, n: usize) -> Result<&StateVector>;

    fn current(&self) -> &StateVector {
        self.delayed(0).expect("a history always holds its current state")
    }
}

/// The constant history `φ(s) ≡ z`, without storing copies.
#[derive(Debug, Clone, Copy)]
pub struct ConstantHistory<'a>(pub &'a StateVector);

impl History for ConstantHistory<'_> {
    fn delayed(&self, _n: usize) -> Result<&StateVector> {
        Ok(self.0)
    }
}

impl History for HistoryBuffer {
    fn delayed(&self, n: usize) -> Result<&StateVector> {
        self.get(n)
    }

    fn current(&self) -> &StateVector {
        HistoryBuffer::current(self)
    }
}

/// Ring of the most recent `K + 1` states, `get(0)` being the current one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistoryBuffer {
    capacity: usize,
    /// Oldest first.
    states: VecDeque<StateVector>,
}

impl HistoryBuffer {
    /// Constant history `φ(s) ≡ z` over `depth + 1` grid points.
    pub fn constant(z: StateVector, depth: usize) -> Self {
        let capacity = depth + 1;
        let mut states = VecDeque::with_capacity(capacity);
        for _ in 0..capacity {
            states.push_back(z.clone());
        }
        HistoryBuffer { capacity, states }
    }

    /// History from `depth + 1` states ordered oldest first.
    pub fn from_states(states: Vec<StateVector>, depth: usize) -> Result<Self> {
        if states.len() != depth + 1 {
            return Err(Error::InsufficientHistory {
                needed: depth + 1,
                available: states.len(),
            });
        }
        Ok(HistoryBuffer {
            capacity: depth + 1,
            states: states.into(),
        })
    }

    /// `K`, the largest readable delay index.
    pub fn depth(&self) -> usize {
        self.capacity - 1
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn current(&self) -> &StateVector {
        self.states.back().expect("history is never empty")
    }

    /// The state written `n` steps ago.
    pub fn get(&self, n: usize) -> Result<&StateVector> {
        if n >= self.states.len() {
            return Err(Error::InsufficientHistory {
                needed: n,
                available: self.states.len().saturating_sub(1),
            });
        }
        Ok(&self.states[self.states.len() - 1 - n])
    }

    /// Append `z`, dropping the oldest state. Reuses the evicted allocation.
    pub fn push(&mut self, z: &StateVector) {
        if self.states.len() == self.capacity {
            let mut slot = self.states.pop_front().expect("capacity is positive");
            slot.clone_from(z);
            self.states.push_back(slot);
        } else {
            self.states.push_back(z.clone());
        }
    }

    /// States oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &StateVector> {
        self.states.iter()
    }

    pub fn check(&self, arch: &ArchitectureConfig) -> Result<()> {
        let needed = arch.history_depth();
        if self.depth() < needed {
            return Err(Error::InsufficientHistory {
                needed,
                available: self.depth(),
            });
        }
        for z in &self.states {
            let v = validate_state(z, arch)?;
            if let Some(first) = v.first() {
                return Err(Error::invalid(
                    "history",
                    format!(
                        "stored state violates {} {}: {}",
                        first.component, first.bound, first.observed
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// `‖·‖²` of a principal difference, used by the functional on history.
pub(crate) fn principal_sq(a: &StateVector, b: &StateVector) -> (f64, f64, f64) {
    let sq = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum() };
    (
        sq(a.h.as_slice(), b.h.as_slice()),
        sq(a.x.as_slice(), b.x.as_slice()),
        sq(&a.p, &b.p),
    )
}
