//! Projections onto balls, boxes and probability simplices, and tangent-cone
//! membership tests for velocities on those sets.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, norm, sqrt};

/// Boundary classification tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// One elementary convex factor of the state domain.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexComponentSpec {
    /// Closed Euclidean ball of the given radius centred at the origin.
    Ball(f64),
    /// Componentwise box `[lower, upper]`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Probability simplex of the given dimension (number of coordinates).
    Simplex(usize),
}

impl ConvexComponentSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexComponentSpec::Ball(r) if !(*r > 0.0 && r.is_finite()) => {
                Err(Error::invalid("radius", "ball radius must be positive and finite"))
            }
            ConvexComponentSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::dims("box bounds", lower.len(), upper.len()));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
                    return Err(Error::invalid("box", "lower bound exceeds upper bound"));
                }
                Ok(())
            }
            ConvexComponentSpec::Simplex(0) => Err(Error::invalid("simplex", "dimension must be at least one")),
            _ => Ok(()),
        }
    }

    /// Euclidean projection onto the component.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            ConvexComponentSpec::Ball(r) => Ok(project_ball(x, *r)),
            ConvexComponentSpec::Box { lower, upper } => clamp_box(x, lower, upper),
            ConvexComponentSpec::Simplex(d) => {
                if x.len() != *d {
                    return Err(Error::dims("simplex point", *d, x.len()));
                }
                Ok(sparsemax(x))
            }
        }
    }

    /// Distance by which `x` lies outside the component (zero inside).
    pub fn excess(&self, x: &[f64]) -> f64 {
        match self {
            ConvexComponentSpec::Ball(r) => (norm(x) - r).max(0.0),
            ConvexComponentSpec::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (a, b))| (a - v).max(v - b).max(0.0))
                .fold(0.0, f64::max),
            ConvexComponentSpec::Simplex(_) => {
                let sum: f64 = x.iter().sum();
                let neg = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
                (sum - 1.0).abs().max(neg)
            }
        }
    }
}

/// `x` if `‖x‖ ≤ r`, otherwise `r x / ‖x‖`.
pub fn project_ball(x: &[f64], r: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    project_ball_in_place(&mut out, r);
    out
}

pub fn project_ball_in_place(x: &mut [f64], r: f64) {
    let n = norm(x);
    if n > r {
        let s = r / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

pub fn clamp_box(q: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if q.len() != a.len() || q.len() != b.len() {
        return Err(Error::dims("box point", a.len(), q.len()));
    }
    if let Some(k) = a.iter().zip(b).position(|(lo, hi)| lo > hi) {
        return Err(Error::invalid(
            "box",
            alloc::format!("lower bound {} exceeds upper bound {} at {k}", a[k], b[k]),
        ));
    }
    Ok(q.iter()
        .zip(a.iter().zip(b))
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect())
}

/// Euclidean projection onto the probability simplex.
///
/// Sorted-threshold algorithm: the support is every coordinate with
/// `z_i > τ`, where `τ` is the unique threshold making the clipped values sum
/// to one.
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    sparsemax_into(z, &mut out);
    out
}

pub fn sparsemax_into(z: &[f64], out: &mut [f64]) {
    debug_assert_eq!(z.len(), out.len());
    if z.is_empty() {
        return;
    }
    let tau = sparsemax_threshold(z);
    for (o, v) in out.iter_mut().zip(z) {
        *o = (v - tau).max(0.0);
    }
}

/// Threshold `τ` of the sparsemax projection of `z` (non-empty).
pub fn sparsemax_threshold(z: &[f64]) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - 1.0;
    for (k, v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if *v > t {
            tau = t;
        } else {
            break;
        }
    }
    tau
}

/// `Jᵀ g` for the sparsemax Jacobian at `z`; the Jacobian is symmetric,
/// `J = diag(s) − s sᵀ / |S|` with `s` the support indicator.
pub fn sparsemax_jacobian_apply(z: &[f64], g: &[f64]) -> Vec<f64> {
    let p = sparsemax(z);
    let support: Vec<bool> = p.iter().map(|v| *v > 0.0).collect();
    let size = support.iter().filter(|s| **s).count().max(1) as f64;
    let mean: f64 = g
        .iter()
        .zip(&support)
        .filter(|(_, s)| **s)
        .map(|(v, _)| *v)
        .sum::<f64>()
        / size;
    g.iter()
        .zip(&support)
        .map(|(v, s)| if *s { v - mean } else { 0.0 })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `(1 − ε) p + ε · uniform`.
pub fn epsilon_floor(p: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("epsilon", "floor must lie in (0, 1)"));
    }
    let u = 1.0 / p.len() as f64;
    Ok(p.iter().map(|v| (1.0 - eps) * v + eps * u).collect())
}

/// Row `row` of `what` is on the simplex within `tol`.
pub fn check_simplex_row(what: &'static str, row: usize, p: &[f64], tol: f64) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > tol || min < -tol {
        Err(Error::OffSimplex { what, row, sum, min })
    } else {
        Ok(())
    }
}

/// Nagumo condition for one convex factor: `v` lies in the tangent cone of
/// the component at `x`.
///
/// * ball: on the boundary the radial part must not point outward,
///   `⟨x, v⟩ ≤ tol`;
/// * box: at a lower face `v_k ≥ −tol`, at an upper face `v_k ≤ tol`;
/// * simplex: mass is conserved, `|Σ v| ≤ tol`, and `v_k ≥ −tol` wherever
///   `x_k = 0`.
///
/// Interior points of balls and boxes always pass.
pub fn tangent_cone_ok(spec: &ConvexComponentSpec, x: &[f64], v: &[f64], tol: f64) -> Result<bool> {
    spec.validate()?;
    if x.len() != v.len() {
        return Err(Error::dims("velocity", x.len(), v.len()));
    }
    let excess = spec.excess(x);
    if excess > tol {
        let what = match spec {
            ConvexComponentSpec::Ball(_) => "ball",
            ConvexComponentSpec::Box { .. } => "box",
            ConvexComponentSpec::Simplex(_) => "simplex",
        };
        return Err(Error::OutsideComponent { what, excess });
    }
    Ok(match spec {
        ConvexComponentSpec::Ball(r) => {
            if (norm(x) - r).abs() <= tol * r.max(1.0) {
                x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() <= tol
            } else {
                true
            }
        }
        ConvexComponentSpec::Box { lower, upper } => {
            if x.len() != lower.len() {
                return Err(Error::dims("box point", lower.len(), x.len()));
            }
            x.iter().zip(v).zip(lower.iter().zip(upper)).all(|((xi, vi), (a, b))| {
                let at_lower = (xi - a).abs() <= tol;
                let at_upper = (xi - b).abs() <= tol;
                (!at_lower || *vi >= -tol) && (!at_upper || *vi <= tol)
            })
        }
        ConvexComponentSpec::Simplex(d) => {
            if x.len() != *d {
                return Err(Error::dims("simplex point", *d, x.len()));
            }
            let mass: f64 = v.iter().sum();
            mass.abs() <= tol && x.iter().zip(v).all(|(xi, vi)| xi.abs() > tol || *vi >= -tol)
        }
    })
}

/// Normalised root-mean-square size of a vector, `‖v‖ / √dim` (zero for an
/// empty vector).
pub fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        norm(v) / sqrt(v.len() as f64)
    }
}
