//! Finite weighted graphs and their Laplacians.
//!
//! Edges are ordered pairs. An undirected edge is stored as both `(i, j)` and
//! `(j, i)`; an edge absent from the list has weight zero. Spectral routines
//! require symmetric weights and reject anything else, callers symmetrize
//! first with [`WeightedGraph::symmetrize_conductance`].

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Mat};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, try_from = "GraphRepr"))]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<[usize; 2]>,
    weights: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRepr {
    node_count: usize,
    edges: Vec<[usize; 2]>,
    weights: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<GraphRepr> for WeightedGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        WeightedGraph::new(r.node_count, r.edges, r.weights)
    }
}

impl WeightedGraph {
    pub fn new(node_count: usize, edges: Vec<[usize; 2]>, weights: Vec<f64>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid("node_count", "a graph needs at least one node"));
        }
        if edges.len() != weights.len() {
            return Err(Error::dims("edge weights", edges.len(), weights.len()));
        }
        let mut seen = BTreeMap::new();
        for (k, &[i, j]) in edges.iter().enumerate() {
            if i >= node_count || j >= node_count {
                return Err(Error::EdgeOutOfRange(i, j));
            }
            if i == j {
                return Err(Error::invalid("edges", "self loops carry no diffusion"));
            }
            if seen.insert((i, j), k).is_some() {
                return Err(Error::invalid("edges", "duplicate ordered edge"));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(
                "weights",
                alloc::format!("edge weights must be finite and nonnegative, got {w}"),
            ));
        }
        Ok(WeightedGraph {
            node_count,
            edges,
            weights,
        })
    }

    /// Complete graph `K_n`, both orientations of every edge carrying `weight`.
    pub fn complete(n: usize, weight: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edges.push([i, j]);
                }
            }
        }
        let w = vec![weight; edges.len()];
        WeightedGraph::new(n, edges, w)
    }

    /// Path graph `P_n` with edges `(i, i+1)` in both orientations.
    pub fn path(n: usize, weight: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n.saturating_sub(1) {
            edges.push([i, i + 1]);
            edges.push([i + 1, i]);
        }
        let w = vec![weight; edges.len()];
        WeightedGraph::new(n, edges, w)
    }

    /// Cycle graph `C_n` (`n >= 3`).
    pub fn cycle(n: usize, weight: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("node_count", "a cycle needs at least three nodes"));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            edges.push([i, j]);
            edges.push([j, i]);
        }
        let w = vec![weight; edges.len()];
        WeightedGraph::new(n, edges, w)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same support, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        WeightedGraph::new(self.node_count, self.edges.clone(), weights)
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.iter().position(|e| *e == [i, j])
    }

    /// Position of the reversed edge for every edge, if present.
    pub fn reverse_indices(&self) -> Vec<Option<usize>> {
        let index: BTreeMap<(usize, usize), usize> =
            self.edges.iter().enumerate().map(|(k, e)| ((e[0], e[1]), k)).collect();
        self.edges.iter().map(|e| index.get(&(e[1], e[0])).copied()).collect()
    }

    /// Edge indices grouped by target node: the in-neighbourhood of `j` is
    /// every edge `(i, j)`.
    pub fn in_edges(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.node_count];
        for (k, e) in self.edges.iter().enumerate() {
            groups[e[1]].push(k);
        }
        groups
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    fn first_asymmetry(&self) -> Option<(usize, usize)> {
        let rev = self.reverse_indices();
        for (k, e) in self.edges.iter().enumerate() {
            let back = rev[k].map_or(0.0, |r| self.weights[r]);
            if (self.weights[k] - back).abs() > SYMMETRY_TOL {
                return Some((e[0], e[1]));
            }
        }
        None
    }

    /// `W̄_ij = ½(W_ij + W_ji)`; missing reverse edges are added with the
    /// averaged weight.
    pub fn symmetrize_conductance(&self) -> WeightedGraph {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (e, w) in self.edges.iter().zip(&self.weights) {
            *map.entry((e[0], e[1])).or_insert(0.0) += 0.5 * w;
            *map.entry((e[1], e[0])).or_insert(0.0) += 0.5 * w;
        }
        // keep the original edge order, append new reverse edges afterwards
        let mut edges = self.edges.clone();
        let mut extra: Vec<[usize; 2]> = map
            .keys()
            .filter(|(i, j)| self.edge_index(*i, *j).is_none())
            .map(|(i, j)| [*i, *j])
            .collect();
        edges.append(&mut extra);
        let weights = edges.iter().map(|e| map[&(e[0], e[1])]).collect();
        WeightedGraph {
            node_count: self.node_count,
            edges,
            weights,
        }
    }

    /// Connectivity of the positive-weight support, ignoring orientation.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count;
        let mut adj = vec![Vec::new(); n];
        for (e, w) in self.edges.iter().zip(&self.weights) {
            if *w > 0.0 {
                adj[e[0]].push(e[1]);
                adj[e[1]].push(e[0]);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Dense Laplacian, row `s` holding `Σ_{(s,s')} w(s,s')(x_s - x_{s'})`.
    pub fn laplacian_matrix(&self) -> Mat {
        let n = self.node_count;
        let mut l = Mat::zeros(n, n);
        for (e, w) in self.edges.iter().zip(&self.weights) {
            l[(e[0], e[0])] += w;
            l[(e[0], e[1])] -= w;
        }
        l
    }

    /// Apply the Laplacian row-wise to a per-node field of vectors stored
    /// row-major (`node_count × dim`).
    pub fn laplacian_apply(&self, field: &[f64], dim: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; field.len()];
        self.laplacian_apply_into(field, dim, &mut out)?;
        Ok(out)
    }

    pub fn laplacian_apply_into(&self, field: &[f64], dim: usize, out: &mut [f64]) -> Result<()> {
        self.laplacian_apply_weighted(&self.weights, field, dim, out)
    }

    /// Laplacian of the same support with `weights` in place of the stored
    /// weights; used for state-dependent conductances.
    pub fn laplacian_apply_weighted(&self, weights: &[f64], field: &[f64], dim: usize, out: &mut [f64]) -> Result<()> {
        if weights.len() != self.edges.len() {
            return Err(Error::dims("conductance", self.edges.len(), weights.len()));
        }
        if field.len() != self.node_count * dim {
            return Err(Error::dims("field", self.node_count * dim, field.len()));
        }
        if out.len() != field.len() {
            return Err(Error::dims("output field", field.len(), out.len()));
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for (e, w) in self.edges.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            let (s, t) = (e[0], e[1]);
            for c in 0..dim {
                out[s * dim + c] += w * (field[s * dim + c] - field[t * dim + c]);
            }
        }
        Ok(())
    }

    /// All Laplacian eigenvalues, ascending. Requires symmetric weights.
    pub fn laplacian_spectrum(&self) -> Result<Vec<f64>> {
        if let Some((i, j)) = self.first_asymmetry() {
            return Err(Error::NonSymmetric(i, j));
        }
        Ok(symmetric_eigenvalues(&self.laplacian_matrix()))
    }

    /// Second-smallest Laplacian eigenvalue. Positive iff the positive-weight
    /// support is connected. A single node has gap zero.
    pub fn spectral_gap(&self) -> Result<f64> {
        let spec = self.laplacian_spectrum()?;
        Ok(spec.get(1).copied().unwrap_or(0.0).max(0.0))
    }

    /// Largest Laplacian eigenvalue (the operator norm for symmetric weights).
    pub fn laplacian_norm(&self) -> Result<f64> {
        let spec = self.laplacian_spectrum()?;
        Ok(spec.last().copied().unwrap_or(0.0).max(0.0))
    }
}

/// Block-diagonal Laplacian of the disjoint union `G_L ∪ G_R`, the diffusion
/// operator of the joint field `(H_L, X_R)`.
pub fn block_laplacian(left: &WeightedGraph, right: &WeightedGraph) -> Mat {
    let (n, m) = (left.node_count(), right.node_count());
    let mut out = Mat::zeros(n + m, n + m);
    let ll = left.laplacian_matrix();
    let lr = right.laplacian_matrix();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = ll[(i, j)];
        }
    }
    for i in 0..m {
        for j in 0..m {
            out[(n + i, n + j)] = lr[(i, j)];
        }
    }
    out
}

/// All node permutations `σ` with `(σ(i), σ(j))` an edge of equal weight for
/// every edge `(i, j)`. Brute force; only meant for graphs with at most eight
/// nodes.
pub fn automorphisms(graph: &WeightedGraph, edge_labels: Option<&[f64]>) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    assert!(n <= 8, "automorphism enumeration is brute force");
    let mut map: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (k, e) in graph.edges().iter().enumerate() {
        let label = edge_labels.map_or(0.0, |l| l[k]);
        map.insert((e[0], e[1]), (graph.weights()[k], label));
    }
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        let ok = map.iter().all(|((i, j), v)| map.get(&(p[*i], p[*j])) == Some(v));
        if ok {
            out.push(p.to_vec());
        }
    });
    out
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k3_and_p3_laplacians_match_hand_computed() {
        let k3 = WeightedGraph::complete(3, 1.0).unwrap();
        let p3 = WeightedGraph::path(3, 1.0).unwrap();
        assert_eq!(k3.laplacian_apply(&[1.0, 0.0, 0.0], 1).unwrap(), vec![2.0, -1.0, -1.0]);
        assert_eq!(p3.laplacian_apply(&[1.0, 0.0, 0.0], 1).unwrap(), vec![1.0, -1.0, 0.0]);
        let l = p3.laplacian_matrix();
        assert_eq!(l.row(1), &[-1.0, 2.0, -1.0]);
    }

    #[test]
    fn constant_field_is_in_the_kernel() {
        let k3 = WeightedGraph::complete(3, 0.7).unwrap();
        let f = [1.5, -2.0, 1.5, -2.0, 1.5, -2.0];
        assert!(k3.laplacian_apply(&f, 2).unwrap().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn spectral_gaps() {
        let k3 = WeightedGraph::complete(3, 1.0).unwrap();
        let p3 = WeightedGraph::path(3, 1.0).unwrap();
        assert!((k3.spectral_gap().unwrap() - 3.0).abs() < 1e-12);
        assert!((p3.spectral_gap().unwrap() - 1.0).abs() < 1e-12);
        let empty = WeightedGraph::new(2, vec![], vec![]).unwrap();
        assert_eq!(empty.spectral_gap().unwrap(), 0.0);
        assert!(!empty.is_connected());
    }

    #[test]
    fn symmetrize_averages_orientations() {
        let g = WeightedGraph::new(2, vec![[0, 1], [1, 0]], vec![1.0, 0.0]).unwrap();
        assert!(matches!(g.spectral_gap(), Err(Error::NonSymmetric(0, 1))));
        let s = g.symmetrize_conductance();
        assert_eq!(s.weights(), &[0.5, 0.5]);
        let one_way = WeightedGraph::new(2, vec![[0, 1]], vec![1.0]).unwrap();
        let s = one_way.symmetrize_conductance();
        assert_eq!(s.edges(), &[[0, 1], [1, 0]]);
        assert_eq!(s.weights(), &[0.5, 0.5]);
        let zero = WeightedGraph::complete(3, 0.0).unwrap();
        assert!(zero.symmetrize_conductance().weights().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            WeightedGraph::new(2, vec![[0, 2]], vec![1.0]),
            Err(Error::EdgeOutOfRange(0, 2))
        ));
        assert!(WeightedGraph::new(2, vec![[0, 1]], vec![-1.0]).is_err());
        let k3 = WeightedGraph::complete(3, 1.0).unwrap();
        assert!(k3.laplacian_apply(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn block_laplacian_is_block_diagonal() {
        let k3 = WeightedGraph::complete(3, 1.0).unwrap();
        let p3 = WeightedGraph::path(3, 1.0).unwrap();
        let b = block_laplacian(&k3, &p3);
        assert_eq!(b.rows(), 6);
        for i in 0..3 {
            for j in 3..6 {
                assert_eq!(b[(i, j)], 0.0);
                assert_eq!(b[(j, i)], 0.0);
            }
        }
        assert_eq!(b[(4, 4)], 2.0);
        assert!(b.mul_vec(&[1.0; 6]).iter().all(|x| *x == 0.0));
        let z = block_laplacian(
            &k3.with_weights(vec![0.0; 6]).unwrap(),
            &p3.with_weights(vec![0.0; 4]).unwrap(),
        );
        assert!(z.is_zero());
    }

    #[test]
    fn automorphisms_of_p3_and_k3() {
        let p3 = WeightedGraph::path(3, 1.0).unwrap();
        assert_eq!(automorphisms(&p3, None).len(), 2);
        let k3 = WeightedGraph::complete(3, 1.0).unwrap();
        assert_eq!(automorphisms(&k3, None).len(), 6);
    }
}
