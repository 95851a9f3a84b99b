//! Bipartite coupling kernels between the token field and the node field.
//!
//! A kernel assigns a `d_L × d_R` block `K(ℓ, i)` to every token-node pair.
//! The right-to-left signal is `C_ℓ = Σ_i α_ℓi K(ℓ, i) e_i` and the
//! left-to-right signal is `D_i = Σ_ℓ β_iℓ K(ℓ, i)ᵀ h_ℓ`. Kernel families
//! whose blocks depend on the state (gates, attention scores) are first
//! evaluated into an [`Operator`] for the current state; the operator itself
//! is state-free.

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::math::{dot, sqrt, tanh};
use crate::simplex::{check_simplex_row, sparsemax, sparsemax_into};

const SELECTION_TOL: f64 = 1e-9;

/// Scalar driving a state-dependent gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GateSignal {
    /// First valuative coordinate `Y_0`.
    Valuation,
    /// First executive coordinate `P_0`.
    Executive,
    Constant,
}

/// `g = base + slope · tanh(signal)`, confined to `[0, base + |slope|]`
/// by requiring `base ≥ |slope|`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Gate {
    pub base: f64,
    pub slope: f64,
    pub signal: GateSignal,
}

impl Gate {
    pub fn constant(value: f64) -> Self {
        Gate {
            base: value,
            slope: 0.0,
            signal: GateSignal::Constant,
        }
    }

    pub fn value(&self, inputs: GateInputs) -> f64 {
        let s = match self.signal {
            GateSignal::Valuation => inputs.valuation,
            GateSignal::Executive => inputs.executive,
            GateSignal::Constant => return self.base,
        };
        self.base + self.slope * tanh(s)
    }

    /// Uniform upper bound `ḡ`.
    pub fn bound(&self) -> f64 {
        match self.signal {
            GateSignal::Constant => self.base,
            _ => self.base + self.slope.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.base.is_finite() && self.slope.is_finite()) {
            return Err(Error::invalid("gate", "non-finite gate parameters"));
        }
        let lowest = match self.signal {
            GateSignal::Constant => self.base,
            _ => self.base - self.slope.abs(),
        };
        if lowest < 0.0 {
            return Err(Error::invalid("gate", "gate must stay nonnegative (base ≥ |slope|)"));
        }
        Ok(())
    }
}

/// The scalars gates read from the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GateInputs {
    pub valuation: f64,
    pub executive: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LowRankChannel {
    /// Token profile, `Σ_ℓ a(ℓ)² ≤ 1`.
    pub a: Vec<f64>,
    /// Node profile, `Σ_i b(i)² ≤ 1`.
    pub b: Vec<f64>,
    pub m: Mat,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GatedChannel {
    /// Gate on the right-to-left direction.
    pub forward: Gate,
    /// Gate on the left-to-right direction.
    pub adjoint: Gate,
    pub kernel: CouplingKernel,
}

/// One channel `g_r a_r(ℓ) b_r(i) A_r` whose profiles are sparsemax
/// attention over tokens and nodes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AttentionChannel {
    pub gate: Gate,
    /// Token score direction, length `d_L`.
    pub query: Vec<f64>,
    /// Node score direction, length `d_R`.
    pub key: Vec<f64>,
    pub m: Mat,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum CouplingKernel {
    /// Explicit blocks, `blocks[ℓ · nodes + i] = K(ℓ, i)`.
    Fixed {
        tokens: usize,
        nodes: usize,
        blocks: Vec<Mat>,
    },
    /// `K(ℓ, i) = W` for every pair.
    ConstantShared { tokens: usize, nodes: usize, w: Mat },
    /// `K(ℓ, i) = α_ℓi W_V` with `α_ℓ = sparsemax(q_ℓ · k_i / √d_K)`,
    /// `q_ℓ = W_Q h_ℓ`, `k_i = W_K e_i`.
    AttentionWeighted {
        tokens: usize,
        nodes: usize,
        w_v: Mat,
        w_q: Mat,
        w_k: Mat,
    },
    /// `K(ℓ, i) = Σ_r a_r(ℓ) b_r(i) A_r`.
    LowRank {
        tokens: usize,
        nodes: usize,
        channels: Vec<LowRankChannel>,
    },
    /// `K(ℓ, i; Z) = Σ_r g_r(Z) K_r(ℓ, i)`.
    GatedMixture { channels: Vec<GatedChannel> },
    /// `K(ℓ, i; Z) = Σ_r g_r(Z) a_r(ℓ, Z) b_r(i, Z) A_r`.
    LowRankGatedAttention {
        tokens: usize,
        nodes: usize,
        channels: Vec<AttentionChannel>,
    },
}

/// Which of the two coupling directions a realized operator serves. Gated
/// families may gate the directions differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    RightToLeft,
    LeftToRight,
}

/// State a kernel may depend on: gate scalars and the current fields that
/// produce attention scores.
#[derive(Debug, Clone, Copy)]
pub struct KernelState<'a> {
    pub gates: GateInputs,
    pub h: &'a Mat,
    pub x: &'a Mat,
}

/// Per-pair selection weights multiplying every block.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// `α ≡ 1`: every pair enters with full weight.
    Full,
    /// Row-stochastic weights; forward selections are `T × |V|`, adjoint
    /// selections `|V| × T`.
    Weights(Mat),
}

impl Selection {
    fn weight(&self, row: usize, col: usize) -> f64 {
        match self {
            Selection::Full => 1.0,
            Selection::Weights(w) => w[(row, col)],
        }
    }

    fn validate(&self, what: &'static str, rows: usize, cols: usize) -> Result<()> {
        if let Selection::Weights(w) = self {
            w.ensure_shape(what, rows, cols)?;
            for r in 0..rows {
                check_simplex_row(what, r, w.row(r), SELECTION_TOL)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Factor<'a> {
    Ones,
    Values(Cow<'a, [f64]>),
}

impl Factor<'_> {
    #[inline]
    fn at(&self, k: usize) -> f64 {
        match self {
            Factor::Ones => 1.0,
            Factor::Values(v) => v[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Term<'a> {
    /// `scale · B_ℓi`.
    Blocks { scale: f64, blocks: &'a [Mat] },
    /// `scale · a(ℓ) b(i) M`.
    Separable {
        scale: f64,
        a: Factor<'a>,
        b: Factor<'a>,
        m: &'a Mat,
    },
    /// `scale · ω_ℓi M`.
    Weighted { scale: f64, omega: Mat, m: &'a Mat },
}

/// A kernel evaluated at one state: a fixed bipartite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator<'a> {
    tokens: usize,
    nodes: usize,
    d_l: usize,
    d_r: usize,
    terms: Vec<Term<'a>>,
}

impl CouplingKernel {
    pub fn tokens(&self) -> usize {
        match self {
            CouplingKernel::Fixed { tokens, .. }
            | CouplingKernel::ConstantShared { tokens, .. }
            | CouplingKernel::AttentionWeighted { tokens, .. }
            | CouplingKernel::LowRank { tokens, .. }
            | CouplingKernel::LowRankGatedAttention { tokens, .. } => *tokens,
            CouplingKernel::GatedMixture { channels } => channels.first().map_or(0, |c| c.kernel.tokens()),
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            CouplingKernel::Fixed { nodes, .. }
            | CouplingKernel::ConstantShared { nodes, .. }
            | CouplingKernel::AttentionWeighted { nodes, .. }
            | CouplingKernel::LowRank { nodes, .. }
            | CouplingKernel::LowRankGatedAttention { nodes, .. } => *nodes,
            CouplingKernel::GatedMixture { channels } => channels.first().map_or(0, |c| c.kernel.nodes()),
        }
    }

    /// Zero kernel of the given shape.
    pub fn zero(tokens: usize, nodes: usize, d_l: usize, d_r: usize) -> Self {
        CouplingKernel::ConstantShared {
            tokens,
            nodes,
            w: Mat::zeros(d_l, d_r),
        }
    }

    /// Shape and admissibility checks against the architecture.
    pub fn validate(&self, tokens: usize, nodes: usize, d_l: usize, d_r: usize) -> Result<()> {
        let shape = |t: usize, n: usize| -> Result<()> {
            if t != tokens {
                return Err(Error::dims("kernel tokens", tokens, t));
            }
            if n != nodes {
                return Err(Error::dims("kernel nodes", nodes, n));
            }
            Ok(())
        };
        let finite = |m: &Mat| -> Result<()> {
            if m.as_slice().iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::invalid("kernel", "non-finite kernel entry"))
            }
        };
        match self {
            CouplingKernel::Fixed {
                tokens: t,
                nodes: n,
                blocks,
            } => {
                shape(*t, *n)?;
                if blocks.len() != t * n {
                    return Err(Error::dims("kernel blocks", t * n, blocks.len()));
                }
                for b in blocks {
                    b.ensure_shape("kernel block", d_l, d_r)?;
                    finite(b)?;
                }
            }
            CouplingKernel::ConstantShared { tokens: t, nodes: n, w } => {
                shape(*t, *n)?;
                w.ensure_shape("shared kernel", d_l, d_r)?;
                finite(w)?;
            }
            CouplingKernel::AttentionWeighted {
                tokens: t,
                nodes: n,
                w_v,
                w_q,
                w_k,
            } => {
                shape(*t, *n)?;
                w_v.ensure_shape("value projection", d_l, d_r)?;
                if w_q.rows() != w_k.rows() || w_q.rows() == 0 {
                    return Err(Error::dims("key projection rows", w_q.rows(), w_k.rows()));
                }
                w_q.ensure_shape("query projection", w_q.rows(), d_l)?;
                w_k.ensure_shape("key projection", w_k.rows(), d_r)?;
                finite(w_v)?;
                finite(w_q)?;
                finite(w_k)?;
            }
            CouplingKernel::LowRank {
                tokens: t,
                nodes: n,
                channels,
            } => {
                shape(*t, *n)?;
                for c in channels {
                    crate::error::ensure_len("low-rank token profile", *t, &c.a)?;
                    crate::error::ensure_len("low-rank node profile", *n, &c.b)?;
                    if crate::math::norm(&c.a) > 1.0 + 1e-12 || crate::math::norm(&c.b) > 1.0 + 1e-12 {
                        return Err(Error::invalid(
                            "low-rank channel",
                            "profiles must have norm at most one",
                        ));
                    }
                    c.m.ensure_shape("low-rank channel", d_l, d_r)?;
                    finite(&c.m)?;
                }
            }
            CouplingKernel::GatedMixture { channels } => {
                if channels.is_empty() {
                    return Err(Error::invalid("gated mixture", "needs at least one channel"));
                }
                for c in channels {
                    c.forward.validate()?;
                    c.adjoint.validate()?;
                    if matches!(c.kernel, CouplingKernel::GatedMixture { .. }) {
                        return Err(Error::invalid("gated mixture", "channels may not be mixtures"));
                    }
                    c.kernel.validate(tokens, nodes, d_l, d_r)?;
                }
            }
            CouplingKernel::LowRankGatedAttention {
                tokens: t,
                nodes: n,
                channels,
            } => {
                shape(*t, *n)?;
                for c in channels {
                    c.gate.validate()?;
                    crate::error::ensure_len("attention query", d_l, &c.query)?;
                    crate::error::ensure_len("attention key", d_r, &c.key)?;
                    c.m.ensure_shape("attention channel", d_l, d_r)?;
                    finite(&c.m)?;
                }
            }
        }
        Ok(())
    }

    /// True when the blocks depend on the state.
    pub fn is_state_dependent(&self) -> bool {
        match self {
            CouplingKernel::Fixed { .. } | CouplingKernel::ConstantShared { .. } | CouplingKernel::LowRank { .. } => {
                false
            }
            CouplingKernel::AttentionWeighted { .. } | CouplingKernel::LowRankGatedAttention { .. } => true,
            CouplingKernel::GatedMixture { channels } => channels.iter().any(|c| {
                c.forward.signal != GateSignal::Constant
                    || c.adjoint.signal != GateSignal::Constant
                    || c.kernel.is_state_dependent()
            }),
        }
    }

    fn block_dims(&self) -> (usize, usize) {
        match self {
            CouplingKernel::Fixed { blocks, .. } => blocks.first().map_or((0, 0), |b| (b.rows(), b.cols())),
            CouplingKernel::ConstantShared { w, .. } => (w.rows(), w.cols()),
            CouplingKernel::AttentionWeighted { w_v, .. } => (w_v.rows(), w_v.cols()),
            CouplingKernel::LowRank { channels, .. } => channels.first().map_or((0, 0), |c| (c.m.rows(), c.m.cols())),
            CouplingKernel::GatedMixture { channels } => channels.first().map_or((0, 0), |c| c.kernel.block_dims()),
            CouplingKernel::LowRankGatedAttention { channels, .. } => {
                channels.first().map_or((0, 0), |c| (c.m.rows(), c.m.cols()))
            }
        }
    }

    /// Evaluate the kernel at a state for one coupling direction.
    pub fn operator<'a>(&'a self, state: &KernelState<'_>, dir: Direction) -> Operator<'a> {
        let (d_l, d_r) = self.block_dims();
        let mut op = Operator {
            tokens: self.tokens(),
            nodes: self.nodes(),
            d_l,
            d_r,
            terms: Vec::new(),
        };
        self.push_terms(state, dir, 1.0, &mut op.terms);
        op
    }

    fn push_terms<'a>(&'a self, state: &KernelState<'_>, dir: Direction, scale: f64, out: &mut Vec<Term<'a>>) {
        match self {
            CouplingKernel::Fixed { blocks, .. } => out.push(Term::Blocks { scale, blocks }),
            CouplingKernel::ConstantShared { w, .. } => out.push(Term::Separable {
                scale,
                a: Factor::Ones,
                b: Factor::Ones,
                m: w,
            }),
            CouplingKernel::AttentionWeighted {
                tokens,
                nodes,
                w_v,
                w_q,
                w_k,
            } => {
                let omega = attention_weights(w_q, w_k, state.h, state.x, *tokens, *nodes);
                out.push(Term::Weighted { scale, omega, m: w_v });
            }
            CouplingKernel::LowRank { channels, .. } => {
                for c in channels {
                    out.push(Term::Separable {
                        scale,
                        a: Factor::Values(Cow::Borrowed(&c.a)),
                        b: Factor::Values(Cow::Borrowed(&c.b)),
                        m: &c.m,
                    });
                }
            }
            CouplingKernel::GatedMixture { channels } => {
                for c in channels {
                    let gate = match dir {
                        Direction::RightToLeft => &c.forward,
                        Direction::LeftToRight => &c.adjoint,
                    };
                    c.kernel.push_terms(state, dir, scale * gate.value(state.gates), out);
                }
            }
            CouplingKernel::LowRankGatedAttention { channels, .. } => {
                for c in channels {
                    let a = profile(state.h, &c.query);
                    let b = profile(state.x, &c.key);
                    out.push(Term::Separable {
                        scale: scale * c.gate.value(state.gates),
                        a: Factor::Values(Cow::Owned(a)),
                        b: Factor::Values(Cow::Owned(b)),
                        m: &c.m,
                    });
                }
            }
        }
    }

    /// Hilbert-Schmidt norm at the neutral state: gate signals zero and
    /// attention scores zero (uniform attention). Exact for state-free
    /// families.
    pub fn hs_norm(&self) -> f64 {
        let (d_l, d_r) = self.block_dims();
        let h = Mat::zeros(self.tokens(), d_l);
        let x = Mat::zeros(self.nodes(), d_r);
        let state = KernelState {
            gates: GateInputs::default(),
            h: &h,
            x: &x,
        };
        self.operator(&state, Direction::RightToLeft).hs_norm()
    }

    /// State-uniform upper bound on the Hilbert-Schmidt norm of the
    /// evaluated operator, in either direction.
    pub fn family_budget(&self) -> f64 {
        match self {
            CouplingKernel::Fixed { .. } => self.hs_norm(),
            CouplingKernel::ConstantShared { tokens, nodes, w } => sqrt((tokens * nodes) as f64) * w.frobenius(),
            CouplingKernel::AttentionWeighted { tokens, w_v, .. } => sqrt(*tokens as f64) * w_v.frobenius(),
            CouplingKernel::LowRank { channels, .. } => channels.iter().map(|c| c.m.frobenius()).sum(),
            CouplingKernel::GatedMixture { channels } => channels
                .iter()
                .map(|c| c.forward.bound().max(c.adjoint.bound()) * c.kernel.family_budget())
                .sum(),
            CouplingKernel::LowRankGatedAttention { channels, .. } => {
                channels.iter().map(|c| c.gate.bound() * c.m.frobenius()).sum()
            }
        }
    }
}

/// `softmax`-free attention: row `ℓ` is `sparsemax_i(q_ℓ · k_i / √d_K)`.
pub fn attention_weights(w_q: &Mat, w_k: &Mat, h: &Mat, x: &Mat, tokens: usize, nodes: usize) -> Mat {
    let d_k = w_q.rows().max(1);
    let scale = 1.0 / sqrt(d_k as f64);
    let keys: Vec<Vec<f64>> = (0..nodes).map(|i| w_k.mul_vec(x.row(i))).collect();
    let mut omega = Mat::zeros(tokens, nodes);
    let mut scores = vec![0.0; nodes];
    for l in 0..tokens {
        let q = w_q.mul_vec(h.row(l));
        for (s, k) in scores.iter_mut().zip(&keys) {
            *s = dot(&q, k) * scale;
        }
        sparsemax_into(&scores, omega.row_mut(l));
    }
    omega
}

/// Sparsemax attention profile over the rows of `field` along `direction`.
fn profile(field: &Mat, direction: &[f64]) -> Vec<f64> {
    let scale = 1.0 / sqrt(direction.len().max(1) as f64);
    let scores: Vec<f64> = (0..field.rows())
        .map(|r| dot(field.row(r), direction) * scale)
        .collect();
    sparsemax(&scores)
}

impl<'a> Operator<'a> {
    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Write the block `K(ℓ, i)` into `out` (`d_L × d_R`).
    pub fn block_into(&self, l: usize, i: usize, out: &mut Mat) {
        out.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        for t in &self.terms {
            match t {
                Term::Blocks { scale, blocks } => out.add_scaled(*scale, &blocks[l * self.nodes + i]),
                Term::Separable { scale, a, b, m } => out.add_scaled(scale * a.at(l) * b.at(i), m),
                Term::Weighted { scale, omega, m } => out.add_scaled(scale * omega[(l, i)], m),
            }
        }
    }

    pub fn hs_norm(&self) -> f64 {
        sqrt(self.hs_sq_with(None))
    }

    fn hs_sq_with(&self, other: Option<&Operator<'_>>) -> f64 {
        let mut a = Mat::zeros(self.d_l, self.d_r);
        let mut b = Mat::zeros(self.d_l, self.d_r);
        let mut total = 0.0;
        for l in 0..self.tokens {
            for i in 0..self.nodes {
                self.block_into(l, i, &mut a);
                if let Some(o) = other {
                    o.block_into(l, i, &mut b);
                    a.add_scaled(-1.0, &b);
                }
                total += crate::math::norm_sq(a.as_slice());
            }
        }
        total
    }

    /// `‖self − other‖_HS`; both operators must have the same shape.
    pub fn hs_distance(&self, other: &Operator<'_>) -> f64 {
        debug_assert_eq!((self.tokens, self.nodes), (other.tokens, other.nodes));
        sqrt(self.hs_sq_with(Some(other)))
    }

    /// Materialize as a [`CouplingKernel::Fixed`].
    pub fn to_fixed(&self) -> CouplingKernel {
        let mut blocks = Vec::with_capacity(self.tokens * self.nodes);
        let mut b = Mat::zeros(self.d_l, self.d_r);
        for l in 0..self.tokens {
            for i in 0..self.nodes {
                self.block_into(l, i, &mut b);
                blocks.push(b.clone());
            }
        }
        CouplingKernel::Fixed {
            tokens: self.tokens,
            nodes: self.nodes,
            blocks,
        }
    }

    /// Right-to-left signal `C_ℓ = Σ_i α_ℓi K(ℓ, i) e_i`, a `T × d_L` array.
    pub fn apply_forward(&self, alpha: &Selection, x: &Mat) -> Result<Mat> {
        x.ensure_shape("delayed node field", self.nodes, self.d_r)?;
        alpha.validate("forward selection", self.tokens, self.nodes)?;
        let mut out = Mat::zeros(self.tokens, self.d_l);
        let mut acc = vec![0.0; self.d_r];
        for t in &self.terms {
            match t {
                Term::Blocks { scale, blocks } => {
                    for l in 0..self.tokens {
                        for i in 0..self.nodes {
                            let w = scale * alpha.weight(l, i);
                            if w == 0.0 {
                                continue;
                            }
                            let b = &blocks[l * self.nodes + i];
                            let row = out.row_mut(l);
                            for (r, o) in row.iter_mut().enumerate() {
                                *o += w * dot(b.row(r), x.row(i));
                            }
                        }
                    }
                }
                Term::Separable { scale, a, b, m } => {
                    let shared = matches!(alpha, Selection::Full);
                    if shared {
                        node_sum(x, |i| b.at(i), &mut acc);
                    }
                    for l in 0..self.tokens {
                        if !shared {
                            node_sum(x, |i| alpha.weight(l, i) * b.at(i), &mut acc);
                        }
                        add_mul(out.row_mut(l), scale * a.at(l), m, &acc);
                    }
                }
                Term::Weighted { scale, omega, m } => {
                    for l in 0..self.tokens {
                        node_sum(x, |i| alpha.weight(l, i) * omega[(l, i)], &mut acc);
                        add_mul(out.row_mut(l), *scale, m, &acc);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Left-to-right signal `D_i = Σ_ℓ β_iℓ K(ℓ, i)ᵀ h_ℓ`, a `|V| × d_R`
    /// array.
    pub fn apply_adjoint(&self, beta: &Selection, h: &Mat) -> Result<Mat> {
        h.ensure_shape("delayed token field", self.tokens, self.d_l)?;
        beta.validate("adjoint selection", self.nodes, self.tokens)?;
        let mut out = Mat::zeros(self.nodes, self.d_r);
        let mut acc = vec![0.0; self.d_l];
        for t in &self.terms {
            match t {
                Term::Blocks { scale, blocks } => {
                    for i in 0..self.nodes {
                        for l in 0..self.tokens {
                            let w = scale * beta.weight(i, l);
                            if w == 0.0 {
                                continue;
                            }
                            let b = &blocks[l * self.nodes + i];
                            let row = out.row_mut(i);
                            for (r, hv) in h.row(l).iter().enumerate() {
                                for (o, bv) in row.iter_mut().zip(b.row(r)) {
                                    *o += w * bv * hv;
                                }
                            }
                        }
                    }
                }
                Term::Separable { scale, a, b, m } => {
                    let shared = matches!(beta, Selection::Full);
                    if shared {
                        node_sum(h, |l| a.at(l), &mut acc);
                    }
                    for i in 0..self.nodes {
                        if !shared {
                            node_sum(h, |l| beta.weight(i, l) * a.at(l), &mut acc);
                        }
                        add_mul_transposed(out.row_mut(i), scale * b.at(i), m, &acc);
                    }
                }
                Term::Weighted { scale, omega, m } => {
                    for i in 0..self.nodes {
                        node_sum(h, |l| beta.weight(i, l) * omega[(l, i)], &mut acc);
                        add_mul_transposed(out.row_mut(i), *scale, m, &acc);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `acc = Σ_k w(k) field_k`.
fn node_sum(field: &Mat, w: impl Fn(usize) -> f64, acc: &mut [f64]) {
    acc.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..field.rows() {
        let wk = w(k);
        if wk != 0.0 {
            crate::math::axpy(acc, wk, field.row(k));
        }
    }
}

/// `row += s · M v`.
fn add_mul(row: &mut [f64], s: f64, m: &Mat, v: &[f64]) {
    if s == 0.0 {
        return;
    }
    for (r, o) in row.iter_mut().enumerate() {
        *o += s * dot(m.row(r), v);
    }
}

/// `row += s · Mᵀ v`.
fn add_mul_transposed(row: &mut [f64], s: f64, m: &Mat, v: &[f64]) {
    if s == 0.0 {
        return;
    }
    for (r, vr) in v.iter().enumerate() {
        for (o, mv) in row.iter_mut().zip(m.row(r)) {
            *o += s * mv * vr;
        }
    }
}

/// Convenience for callers holding a kernel rather than an operator.
pub fn apply_forward(kernel: &CouplingKernel, state: &KernelState<'_>, alpha: &Selection, x: &Mat) -> Result<Mat> {
    kernel.operator(state, Direction::RightToLeft).apply_forward(alpha, x)
}

pub fn apply_adjoint(kernel: &CouplingKernel, state: &KernelState<'_>, beta: &Selection, h: &Mat) -> Result<Mat> {
    kernel.operator(state, Direction::LeftToRight).apply_adjoint(beta, h)
}

pub fn hs_norm(kernel: &CouplingKernel) -> f64 {
    kernel.hs_norm()
}

pub fn family_budget(kernel: &CouplingKernel) -> f64 {
    kernel.family_budget()
}

/// The translation channel of the K3/P3 example,
/// `[[1, ½, 0], [0, 1, ½], [½, 0, 1]]`, as scalar blocks.
pub fn example_channel() -> CouplingKernel {
    let k0 = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.5], [0.5, 0.0, 1.0]];
    let blocks = k0
        .iter()
        .flat_map(|row| {
            row.iter()
                .map(|v| Mat::from_row_major(1, 1, vec![*v]).expect("1x1 block"))
        })
        .collect();
    CouplingKernel::Fixed {
        tokens: 3,
        nodes: 3,
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> Mat {
        Mat::from_row_major(v.len(), 1, v.to_vec()).unwrap()
    }

    fn neutral<'a>(h: &'a Mat, x: &'a Mat) -> KernelState<'a> {
        KernelState {
            gates: GateInputs::default(),
            h,
            x,
        }
    }

    #[test]
    fn example_channel_norm() {
        let k = example_channel();
        assert!((k.hs_norm() - sqrt(15.0) / 2.0).abs() < 1e-12);
        assert!((k.family_budget() - sqrt(15.0) / 2.0).abs() < 1e-12);
        assert_eq!(CouplingKernel::zero(3, 4, 2, 2).hs_norm(), 0.0);
    }

    #[test]
    fn constant_shared_scaling() {
        let w = Mat::from_rows(&[&[0.3, 0.4]]).unwrap();
        let k = CouplingKernel::ConstantShared { tokens: 4, nodes: 9, w };
        assert!((k.hs_norm() - 6.0 * 0.5).abs() < 1e-12);
        assert!((k.family_budget() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn budgets_per_family() {
        let w_v = Mat::from_rows(&[&[0.3, 0.4]]).unwrap();
        let att = CouplingKernel::AttentionWeighted {
            tokens: 4,
            nodes: 2,
            w_v,
            w_q: Mat::identity(1),
            w_k: Mat::from_rows(&[&[1.0, 0.0]]).unwrap(),
        };
        assert!((att.family_budget() - 1.0).abs() < 1e-12);
        let lr = CouplingKernel::LowRank {
            tokens: 2,
            nodes: 2,
            channels: vec![LowRankChannel {
                a: vec![0.6, 0.8],
                b: vec![1.0, 0.0],
                m: Mat::from_rows(&[&[0.3]]).unwrap(),
            }],
        };
        assert!((lr.family_budget() - 0.3).abs() < 1e-12);
        let (k, s_a, s_b) = (0.05, 0.05, 0.03);
        let gated = CouplingKernel::GatedMixture {
            channels: vec![GatedChannel {
                forward: Gate {
                    base: k,
                    slope: s_a,
                    signal: GateSignal::Valuation,
                },
                adjoint: Gate {
                    base: k,
                    slope: s_b,
                    signal: GateSignal::Executive,
                },
                kernel: example_channel(),
            }],
        };
        assert!((gated.family_budget() - (k + s_a) * sqrt(15.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn example_signals() {
        let k = 0.05;
        let gated = CouplingKernel::GatedMixture {
            channels: vec![GatedChannel {
                forward: Gate {
                    base: k,
                    slope: 0.05,
                    signal: GateSignal::Valuation,
                },
                adjoint: Gate {
                    base: k,
                    slope: 0.05,
                    signal: GateSignal::Executive,
                },
                kernel: example_channel(),
            }],
        };
        let e1 = column(&[1.0, 0.0, 0.0]);
        let st = neutral(&e1, &e1);
        let c = apply_forward(&gated, &st, &Selection::Full, &e1).unwrap();
        assert_eq!(c.as_slice(), &[k, 0.0, 0.5 * k]);
        let d = apply_adjoint(&gated, &st, &Selection::Full, &e1).unwrap();
        assert_eq!(d.as_slice(), &[k, 0.5 * k, 0.0]);
        let z = Mat::zeros(3, 1);
        assert!(apply_forward(&gated, &st, &Selection::Full, &z).unwrap().is_zero());
    }

    #[test]
    fn shared_factorization_and_selection_checks() {
        let w = Mat::from_rows(&[&[1.0, 2.0], &[0.0, -1.0]]).unwrap();
        let k = CouplingKernel::ConstantShared {
            tokens: 2,
            nodes: 3,
            w: w.clone(),
        };
        let x = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0]]).unwrap();
        let alpha = Mat::from_rows(&[&[0.2, 0.3, 0.5], &[1.0, 0.0, 0.0]]).unwrap();
        let h = Mat::zeros(2, 2);
        let st = neutral(&h, &x);
        let c = apply_forward(&k, &st, &Selection::Weights(alpha.clone()), &x).unwrap();
        for l in 0..2 {
            let mut bar = [0.0; 2];
            for i in 0..3 {
                crate::math::axpy(&mut bar, alpha[(l, i)], x.row(i));
            }
            let expect = w.mul_vec(&bar);
            assert!(c.row(l).iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-14));
        }
        let bad = Mat::from_rows(&[&[0.5, 0.3, 0.1], &[1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            apply_forward(&k, &st, &Selection::Weights(bad), &x),
            Err(Error::OffSimplex { row: 0, .. })
        ));
    }

    #[test]
    fn adjoint_pairing_with_one_hot_weights() {
        let k = example_channel();
        let x = column(&[0.3, -1.0, 2.0]);
        let h = column(&[1.5, 0.2, -0.7]);
        let st = neutral(&h, &x);
        let op = k.operator(&st, Direction::RightToLeft);
        // one-hot α pairs token ℓ with node ℓ; the matched β is its transpose
        let alpha = Selection::Weights(Mat::identity(3));
        let lhs = dot(op.apply_forward(&alpha, &x).unwrap().as_slice(), h.as_slice());
        let rhs = dot(x.as_slice(), op.apply_adjoint(&alpha, &h).unwrap().as_slice());
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn gate_validation() {
        let g = Gate {
            base: 0.01,
            slope: 0.05,
            signal: GateSignal::Valuation,
        };
        assert!(g.validate().is_err());
        let k = CouplingKernel::GatedMixture {
            channels: vec![GatedChannel {
                forward: g.clone(),
                adjoint: g,
                kernel: example_channel(),
            }],
        };
        assert!(k.validate(3, 3, 1, 1).is_err());
    }
}
