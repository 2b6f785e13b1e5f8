//! Weighted graphs with an edge measure `mu` and vertex measure `pi`, and their
//! implicit Cartesian powers.
//!
//! Conventions: `mu` is a probability distribution on unordered vertex pairs,
//! `2 pi(v) = sum_u mu({u, v})`, and the Laplacian has `pi(i)` on the diagonal
//! and `-mu({i, j}) / 2` off it, so `f^T L f = 1/2 E_{uv ~ mu} (f(u) - f(v))^2`.
//!
//! The power `G^k` is never materialized as a matrix. Its vertex measure is the
//! product of `pi`, and the unordered edge `{x, y}` that differs only in
//! coordinate `j` (by base edge `{u, v}`) carries mass
//! `(1/k) * prod_{i != j} pi(x_i) * mu({u, v})`. Summed over both orientations
//! this is twice the per-ordered-pair mass `1/(2k) * ...`.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{compensated_sum, Scalar};

/// Products larger than this refuse dense operations unless the cap is raised.
pub const DEFAULT_DENSE_CAP: usize = 1 << 22;

/// Residual threshold used by [`WeightedGraph::validate_measures`].
pub const MEASURE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge<S> {
    pub u: usize,
    pub v: usize,
    pub mass: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph<S> {
    n: usize,
    edges: Vec<Edge<S>>,
    pi: Vec<S>,
    adjacency: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> WeightedGraph<S> {
    /// Builds a connected weighted graph. Weights are renormalized so the edge
    /// measure sums to one; the vertex measure follows from consistency.
    pub fn build(n: usize, edges: &[(usize, usize, S)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewVertices(n));
        }
        let mut seen = BTreeMap::new();
        for &(u, v, w) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !(w > S::zero()) || !w.is_finite() {
                return Err(Error::NonPositiveWeight {
                    u,
                    v,
                    weight: w.to_f64_lossy(),
                });
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key, w).is_some() {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
        }
        let total = compensated_sum(seen.values().copied());
        let edges: Vec<Edge<S>> = seen
            .into_iter()
            .map(|((u, v), w)| Edge { u, v, mass: w / total })
            .collect();

        let components = connected_components(n, &edges);
        if components.len() > 1 {
            return Err(Error::Disconnected(components));
        }

        let pi = vertex_measure_from_edges(n, &edges);
        Ok(Self::assemble(n, edges, pi))
    }

    /// Wraps raw measures without any checks. Meant for loading data that is
    /// then audited with [`validate_measures`](Self::validate_measures).
    pub fn from_measures_unchecked(n: usize, edges: Vec<Edge<S>>, pi: Vec<S>) -> Self {
        Self::assemble(n, edges, pi)
    }

    fn assemble(n: usize, edges: Vec<Edge<S>>, pi: Vec<S>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.u].push((e.v, e.mass));
            adjacency[e.v].push((e.u, e.mass));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(w, _)| w);
        }
        Self {
            n,
            edges,
            pi,
            adjacency,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges with `u < v`, sorted, masses summing to one.
    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn pi(&self) -> &[S] {
        &self.pi
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, S)] {
        &self.adjacency[v]
    }

    /// `mu({u, v})`, zero for non-edges.
    pub fn mu(&self, u: usize, v: usize) -> S {
        self.adjacency
            .get(u)
            .and_then(|list| list.binary_search_by_key(&v, |&(w, _)| w).ok().map(|i| list[i].1))
            .unwrap_or_else(S::zero)
    }

    /// Dense normalized Laplacian: `pi(i)` on the diagonal, `-mu/2` off it.
    pub fn laplacian(&self) -> Matrix<S> {
        let mut l = Matrix::zeros(self.n);
        for (i, &p) in self.pi.iter().enumerate() {
            l[(i, i)] = p;
        }
        let half = S::lit(0.5);
        for e in &self.edges {
            l[(e.u, e.v)] = -e.mass * half;
            l[(e.v, e.u)] = -e.mass * half;
        }
        l
    }

    /// `1/2 sum_{edges} mu(e) (f(u) - f(v))^2`.
    pub fn dirichlet_form(&self, f: &[S]) -> S {
        assert_eq!(f.len(), self.n);
        let half = S::lit(0.5);
        compensated_sum(self.edges.iter().map(|e| {
            let d = f[e.u] - f[e.v];
            half * e.mass * d * d
        }))
    }

    /// `E_pi[f]`.
    pub fn mean(&self, f: &[S]) -> S {
        compensated_sum(self.pi.iter().zip(f).map(|(&p, &x)| p * x))
    }

    /// `E_pi[f^2] - E_pi[f]^2`.
    pub fn variance(&self, f: &[S]) -> S {
        let m = self.mean(f);
        let sq = compensated_sum(self.pi.iter().zip(f).map(|(&p, &x)| p * x * x));
        sq - m * m
    }

    /// Residuals of the two measure identities.
    pub fn validate_measures(&self) -> MeasureReport {
        let mut incident = vec![S::zero(); self.n];
        for e in &self.edges {
            incident[e.u] += e.mass;
            incident[e.v] += e.mass;
        }
        let vertex_residuals: Vec<f64> = incident
            .iter()
            .zip(&self.pi)
            .map(|(&s, &p)| (S::lit(2.0) * p - s).abs().to_f64_lossy())
            .collect();
        let mass_residual =
            (compensated_sum(self.edges.iter().map(|e| e.mass)) - S::one()).to_f64_lossy();
        let worst_vertex = vertex_residuals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        let passed = mass_residual.abs() < MEASURE_TOLERANCE
            && vertex_residuals.iter().all(|&r| r < MEASURE_TOLERANCE);
        MeasureReport {
            vertex_residuals,
            mass_residual,
            worst_vertex,
            passed,
        }
    }

    /// Complete graph `K_q` with unit weights.
    pub fn complete(q: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..q {
            for v in (u + 1)..q {
                edges.push((u, v, S::one()));
            }
        }
        Self::build(q, &edges)
    }

    /// Path `P_n` on `n` vertices.
    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v, S::one())).collect();
        Self::build(n, &edges)
    }

    /// Cycle `C_n`, `n >= 3`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n, S::one())).collect();
        Self::build(n, &edges)
    }

    /// Converts weights to another scalar type.
    pub fn cast<T: Scalar>(&self) -> WeightedGraph<T> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: e.u,
                v: e.v,
                mass: T::lit(e.mass.to_f64_lossy()),
            })
            .collect();
        let pi = self.pi.iter().map(|p| T::lit(p.to_f64_lossy())).collect();
        WeightedGraph::assemble(self.n, edges, pi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    /// `|2 pi(v) - sum_u mu({u, v})|` per vertex.
    pub vertex_residuals: Vec<f64>,
    /// `sum mu - 1`.
    pub mass_residual: f64,
    pub worst_vertex: Option<usize>,
    pub passed: bool,
}

fn vertex_measure_from_edges<S: Scalar>(n: usize, edges: &[Edge<S>]) -> Vec<S> {
    let mut pi = vec![S::zero(); n];
    let half = S::lit(0.5);
    for e in edges {
        pi[e.u] += half * e.mass;
        pi[e.v] += half * e.mass;
    }
    pi
}

fn connected_components<S>(n: usize, edges: &[Edge<S>]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if label[y] == usize::MAX {
                    label[y] = id;
                    members.push(y);
                    queue.push_back(y);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Implicit `k`-fold Cartesian power of a base graph.
///
/// Vertices are `k`-tuples of base indices, flattened row-major (coordinate 0
/// is the most significant digit).
#[derive(Debug, Clone)]
pub struct ProductGraph<S> {
    base: Arc<WeightedGraph<S>>,
    k: usize,
    dense_cap: usize,
}

impl<S: Scalar> ProductGraph<S> {
    pub fn new(base: Arc<WeightedGraph<S>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroPower);
        }
        Ok(Self {
            base,
            k,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn base(&self) -> &WeightedGraph<S> {
        &self.base
    }

    pub fn base_arc(&self) -> &Arc<WeightedGraph<S>> {
        &self.base
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    /// `n^k`, saturating at `u128::MAX`.
    pub fn vertex_count(&self) -> u128 {
        (0..self.k).fold(1u128, |acc, _| acc.saturating_mul(self.n() as u128))
    }

    /// `n^k` as a length, if within the dense cap.
    pub fn dense_len(&self) -> Result<usize> {
        let count = self.vertex_count();
        if count > self.dense_cap as u128 {
            return Err(Error::DenseCapExceeded {
                vertices: count,
                cap: self.dense_cap,
            });
        }
        Ok(count as usize)
    }

    /// Distance in the flat index between neighbours along `coord`.
    pub fn stride(&self, coord: usize) -> usize {
        self.n().pow((self.k - 1 - coord) as u32)
    }

    pub fn check_tuple(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.k || x.iter().any(|&c| c >= self.n()) {
            return Err(Error::MalformedTuple(x.to_vec()));
        }
        Ok(())
    }

    pub fn index_of(&self, x: &[usize]) -> usize {
        x.iter().fold(0, |acc, &c| acc * self.n() + c)
    }

    pub fn tuple_of(&self, mut index: usize) -> Vec<usize> {
        let n = self.n();
        let mut x = vec![0; self.k];
        for slot in x.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        x
    }

    /// `prod_i pi(x_i)`.
    pub fn vertex_mass(&self, x: &[usize]) -> S {
        x.iter().map(|&c| self.base.pi()[c]).fold(S::one(), |a, b| a * b)
    }

    /// Unordered edge mass of `{x, y}`: zero unless the tuples differ in
    /// exactly one coordinate by a base edge.
    pub fn edge_mass(&self, x: &[usize], y: &[usize]) -> Result<S> {
        self.check_tuple(x)?;
        self.check_tuple(y)?;
        let mut differing = x.iter().zip(y).enumerate().filter(|(_, (a, b))| a != b);
        let Some((j, (&u, &v))) = differing.next() else {
            return Ok(S::zero());
        };
        if differing.next().is_some() {
            return Ok(S::zero());
        }
        let mu = self.base.mu(u, v);
        let rest = x
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, &c)| self.base.pi()[c])
            .fold(S::one(), |a, b| a * b);
        Ok(mu * rest / S::from_usize_lossy(self.k))
    }

    /// Dense product measure, one entry per flat index.
    pub fn vertex_measure(&self) -> Result<Vec<S>> {
        let len = self.dense_len()?;
        let mut out = vec![S::one(); len];
        for coord in 0..self.k {
            let stride = self.stride(coord);
            let n = self.n();
            for (idx, slot) in out.iter_mut().enumerate() {
                *slot *= self.base.pi()[(idx / stride) % n];
            }
        }
        Ok(out)
    }

    /// Product neighbours of `x` with their unordered edge masses.
    pub fn neighbors(&self, x: &[usize]) -> Vec<(Vec<usize>, S)> {
        let k = S::from_usize_lossy(self.k);
        let total = self.vertex_mass(x);
        let mut out = Vec::new();
        for j in 0..self.k {
            let rest = total / self.base.pi()[x[j]];
            for &(w, mu) in self.base.neighbors(x[j]) {
                let mut y = x.to_vec();
                y[j] = w;
                out.push((y, rest * mu / k));
            }
        }
        out
    }

    /// Explicit weighted graph on `n^k` vertices. Only for small products.
    pub fn materialize(&self) -> Result<WeightedGraph<S>> {
        let len = self.dense_len()?;
        let pi = self.vertex_measure()?;
        let k = S::from_usize_lossy(self.k);
        let mut edges = Vec::new();
        for idx in 0..len {
            let x = self.tuple_of(idx);
            for j in 0..self.k {
                let rest = self.product_rest(&x, j);
                for &(w, mu) in self.base.neighbors(x[j]) {
                    if w <= x[j] {
                        continue;
                    }
                    let other = idx + (w - x[j]) * self.stride(j);
                    edges.push(Edge {
                        u: idx,
                        v: other,
                        mass: rest * mu / k,
                    });
                }
            }
        }
        edges.sort_by_key(|e| (e.u, e.v));
        Ok(WeightedGraph::assemble(len, edges, pi))
    }

    fn product_rest(&self, x: &[usize], j: usize) -> S {
        x.iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .map(|(_, &c)| self.base.pi()[c])
            .fold(S::one(), |a, b| a * b)
    }
}

/// `G^{□k}` as an implicit product handle.
pub fn cartesian_power<S: Scalar>(base: &Arc<WeightedGraph<S>>, k: usize) -> Result<ProductGraph<S>> {
    ProductGraph::new(Arc::clone(base), k)
}
