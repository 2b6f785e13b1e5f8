//! Sparsest-cut SDP verifiers: the basic relaxation (solved spectrally),
//! direct-sum lifting to `G^{□k}`, triangle inequalities, and the
//! Sherali-Adams and Lasserre liftings of supplied feasible solutions.
//!
//! Direct sums are scaled by `1/sqrt(k)` so that
//! `<v_x, v_y> = avg_j <v_{x_j}, v_{y_j}>`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{cartesian_power, ProductGraph, WeightedGraph};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::{compensated_sum, Scalar};
use crate::spectral::eigendecompose;

pub const SDP_TOLERANCE: f64 = 1e-9;

/// Ordered triples enumerated before the triangle check falls back to sampling.
pub const TRIANGLE_BUDGET: u64 = 1 << 24;

/// Ordered vertex pairs enumerated by the direct-sum Gram check.
pub const PAIR_BUDGET: u64 = 1 << 24;

/// Subsets of a product vertex set a lifting may enumerate.
pub const MAX_LIFTED_SETS: u64 = 1 << 16;

fn sq_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// One vector per vertex, with objective and spread measured on `graph`.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution<S> {
    pub d: usize,
    pub vectors: Vec<Vec<S>>,
    /// `E_{e ~ mu} |v_x - v_y|^2`.
    pub objective: S,
    /// `E_{x,y ~ pi x pi} |v_x - v_y|^2`.
    pub spread: S,
}

impl<S: Scalar> SdpSolution<S> {
    pub fn new(graph: &WeightedGraph<S>, vectors: Vec<Vec<S>>) -> Result<Self> {
        if vectors.len() != graph.n() {
            return Err(Error::LengthMismatch {
                expected: graph.n(),
                got: vectors.len(),
            });
        }
        let d = vectors.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::InvalidSolution("vectors must have dimension >= 1".into()));
        }
        if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::LengthMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSolution("non-finite coordinate".into()));
        }
        let objective = objective(graph, &vectors);
        let spread = spread(graph.pi(), &vectors);
        Ok(Self {
            d,
            vectors,
            objective,
            spread,
        })
    }

    pub fn is_feasible(&self) -> bool {
        (self.spread.to_f64_lossy() - 1.0).abs() <= S::tolerance(SDP_TOLERANCE)
    }

    /// Rescales so the spread is exactly 1.
    pub fn normalized(&self, graph: &WeightedGraph<S>) -> Result<Self> {
        if self.spread <= S::zero() {
            return Err(Error::InvalidSolution("all vectors coincide, spread is 0".into()));
        }
        let c = S::one() / self.spread.sqrt();
        Self::new(
            graph,
            self.vectors
                .iter()
                .map(|v| v.iter().map(|&x| x * c).collect())
                .collect(),
        )
    }
}

pub fn objective<S: Scalar>(graph: &WeightedGraph<S>, vectors: &[Vec<S>]) -> S {
    compensated_sum(
        graph
            .edges()
            .iter()
            .map(|e| e.mass * sq_dist(&vectors[e.u], &vectors[e.v])),
    )
}

/// `2 (E |v|^2 - |E v|^2)`.
pub fn spread<S: Scalar>(pi: &[S], vectors: &[Vec<S>]) -> S {
    let d = vectors.first().map_or(0, Vec::len);
    let second: S = compensated_sum(pi.iter().zip(vectors).map(|(&p, v)| p * dot(v, v)));
    let mean_sq: S = (0..d)
        .map(|c| {
            let m: S = compensated_sum(pi.iter().zip(vectors).map(|(&p, v)| p * v[c]));
            m * m
        })
        .sum();
    S::lit(2.0) * (second - mean_sq)
}

/// Optimum of the basic relaxation, equal to `lambda_1`, with the
/// one-dimensional witness `v_1 / sqrt(2)`.
pub fn basic_sdp_opt<S: Scalar>(graph: &WeightedGraph<S>) -> Result<(S, SdpSolution<S>)> {
    let basis = eigendecompose(graph)?;
    let scale = S::one() / S::lit(2.0).sqrt();
    let vectors = basis.eigenfunctions[1].iter().map(|&x| vec![x * scale]).collect();
    let sol = SdpSolution::new(graph, vectors)?;
    Ok((basis.eigenvalues[1], sol))
}

fn direct_sum<S: Scalar>(product: &ProductGraph<S>, base: &[Vec<S>]) -> Result<Vec<Vec<S>>> {
    let len = product.dense_len()?;
    let k = product.k();
    let d = base[0].len();
    let scale = S::one() / S::from_usize_lossy(k).sqrt();
    Ok((0..len)
        .into_par_iter()
        .map(|idx| {
            let x = product.tuple_of(idx);
            let mut v = Vec::with_capacity(k * d);
            for &c in &x {
                v.extend(base[c].iter().map(|&a| a * scale));
            }
            v
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct VectorLift<S> {
    pub k: usize,
    pub solution: SdpSolution<S>,
    pub base_objective: f64,
    /// Worst `|<v_x, v_y> - avg_j <v_{x_j}, v_{y_j}>|`.
    pub gram_error: f64,
    pub pairs_checked: u64,
    pub spread_error: f64,
    /// `|objective - base_objective / k|`.
    pub objective_error: f64,
    /// Gram identity checked on sampled pairs only.
    pub partial: bool,
    pub passed: bool,
}

/// `v_x = (1/sqrt k) (v_{x_1} ⊕ ... ⊕ v_{x_k})` with all three identities verified.
pub fn lift_vectors<S: Scalar>(
    sol: &SdpSolution<S>,
    base: &Arc<WeightedGraph<S>>,
    k: usize,
    seed: u64,
) -> Result<VectorLift<S>> {
    if sol.vectors.len() != base.n() {
        return Err(Error::LengthMismatch {
            expected: base.n(),
            got: sol.vectors.len(),
        });
    }
    if !sol.is_feasible() {
        return Err(Error::Infeasible(format!(
            "spread is {} instead of 1",
            sol.spread.to_f64_lossy()
        )));
    }
    let product = cartesian_power(base, k)?;
    let lifted = direct_sum(&product, &sol.vectors)?;
    let materialized = product.materialize()?;
    let solution = SdpSolution::new(&materialized, lifted)?;

    let kf = S::from_usize_lossy(k);
    let len = solution.vectors.len();
    let gram_at = |a: usize, b: usize| -> f64 {
        let (x, y) = (product.tuple_of(a), product.tuple_of(b));
        let avg = x
            .iter()
            .zip(&y)
            .map(|(&p, &q)| dot(&sol.vectors[p], &sol.vectors[q]))
            .sum::<S>()
            / kf;
        (dot(&solution.vectors[a], &solution.vectors[b]) - avg)
            .abs()
            .to_f64_lossy()
    };
    let total_pairs = (len as u64) * (len as u64);
    let (gram_error, pairs_checked, partial) = if total_pairs <= PAIR_BUDGET {
        let worst = (0..len)
            .into_par_iter()
            .map(|a| (0..len).map(|b| gram_at(a, b)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
        (worst, total_pairs, false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let worst = (0..PAIR_BUDGET)
            .map(|_| gram_at(rng.gen_range(0..len), rng.gen_range(0..len)))
            .fold(0.0, f64::max);
        (worst, PAIR_BUDGET, true)
    };

    let base_objective = sol.objective.to_f64_lossy();
    let spread_error = (solution.spread.to_f64_lossy() - 1.0).abs();
    let objective_error = (solution.objective.to_f64_lossy() - base_objective / k as f64).abs();
    let tol = S::tolerance(SDP_TOLERANCE);
    let passed = gram_error <= tol && spread_error <= tol && objective_error <= tol;
    Ok(VectorLift {
        k,
        solution,
        base_objective,
        gram_error,
        pairs_checked,
        spread_error,
        objective_error,
        partial,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangleViolation {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `|v_x - v_z|^2 - |v_x - v_y|^2 - |v_y - v_z|^2`.
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangleReport {
    pub triples_checked: u64,
    pub violations: Vec<TriangleViolation>,
    /// Sampled rather than exhaustive.
    pub partial: bool,
}

impl TriangleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Ordered triples of distinct vertices violating
/// `|v_x - v_y|^2 + |v_y - v_z|^2 >= |v_x - v_z|^2` by more than the slack.
/// Above `budget` triples, `budget` seeded samples are checked instead.
pub fn check_triangle<S: Scalar>(vectors: &[Vec<S>], budget: u64, seed: u64) -> TriangleReport {
    let n = vectors.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| (0..n).map(|b| sq_dist(&vectors[a], &vectors[b]).to_f64_lossy()).collect())
        .collect();
    let excess = |x: usize, y: usize, z: usize| dist[x][z] - dist[x][y] - dist[y][z];
    let total = (n as u64).saturating_mul(n as u64).saturating_mul(n as u64);
    if total <= budget {
        let violations: Vec<TriangleViolation> = (0..n)
            .into_par_iter()
            .flat_map_iter(|x| {
                let excess = &excess;
                (0..n).flat_map(move |y| {
                    (0..n).filter_map(move |z| {
                        if x == y || y == z || x == z {
                            return None;
                        }
                        let e = excess(x, y, z);
                        (e > S::tolerance(SDP_TOLERANCE)).then_some(TriangleViolation { x, y, z, excess: e })
                    })
                })
            })
            .collect();
        TriangleReport {
            triples_checked: total,
            violations,
            partial: false,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = Vec::new();
        for _ in 0..budget {
            let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            if x == y || y == z || x == z {
                continue;
            }
            let e = excess(x, y, z);
            if e > S::tolerance(SDP_TOLERANCE) {
                violations.push(TriangleViolation { x, y, z, excess: e });
            }
        }
        violations.sort_by_key(|v| (v.x, v.y, v.z));
        violations.dedup_by_key(|v| (v.x, v.y, v.z));
        TriangleReport {
            triples_checked: budget,
            violations,
            partial: true,
        }
    }
}

/// `{x in T : the j-th coordinates occur an odd number of times}` projected
/// to coordinate `j`, ascending.
pub fn parity_projection(set: &[Vec<usize>], j: usize) -> Vec<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for x in set {
        *counts.entry(x[j]).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c % 2 == 1)
        .map(|(y, _)| y)
        .collect()
}

/// All ascending subsets of `0..n` of size at most `t`, by size then lexicographically.
fn small_subsets(n: usize, t: usize) -> Result<Vec<Vec<usize>>> {
    let mut count: u64 = 0;
    let mut binom: u64 = 1;
    for s in 0..=t.min(n) {
        if s > 0 {
            binom = binom.saturating_mul((n - s + 1) as u64) / s as u64;
        }
        count = count.saturating_add(binom);
    }
    if count > MAX_LIFTED_SETS {
        return Err(Error::TooManyVertices {
            vertices: n,
            limit: MAX_LIFTED_SETS as usize,
        });
    }
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..t.min(n) {
        let mut next = Vec::new();
        for s in &layer {
            let start = s.last().map_or(0, |&l| l + 1);
            for v in start..n {
                let mut w = s.clone();
                w.push(v);
                next.push(w);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

fn check_set(set: &[usize], n: usize) -> Result<()> {
    if set.windows(2).any(|w| w[0] >= w[1]) || set.iter().any(|&v| v >= n) {
        return Err(Error::InvalidSolution(format!(
            "set {set:?} must be strictly ascending vertices below {n}"
        )));
    }
    Ok(())
}

/// Local distributions `D_T` over `{-1,+1}^T` for vertex sets `|T| <= t`.
///
/// A table has `2^|T|` entries; bit `i` of the entry index is set when
/// `z_{T[i]} = +1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDistributions<S> {
    pub t: usize,
    pub n: usize,
    pub tables: BTreeMap<Vec<usize>, Vec<S>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub tables: usize,
    /// Worst `|sum - 1|` over tables.
    pub sum_error: f64,
    pub min_probability: f64,
    /// Worst disagreement between marginals on a common subset.
    pub marginal_error: f64,
    /// Worst `|<v_x, v_y> - E[z_x z_y]|`.
    pub vector_error: f64,
    pub vector_pairs: usize,
    pub passed: bool,
}

impl<S: Scalar> LocalDistributions<S> {
    pub fn new(t: usize, n: usize, tables: BTreeMap<Vec<usize>, Vec<S>>) -> Result<Self> {
        for (set, probs) in &tables {
            check_set(set, n)?;
            if set.len() > t {
                return Err(Error::LevelMismatch {
                    have: set.len(),
                    want: t,
                });
            }
            if probs.len() != 1 << set.len() {
                return Err(Error::LengthMismatch {
                    expected: 1 << set.len(),
                    got: probs.len(),
                });
            }
        }
        Ok(Self { t, n, tables })
    }

    /// Distributions induced by a mixture of cuts `(p_c, z_c)` on every set of size `1..=t`.
    pub fn from_cut_mixture(n: usize, t: usize, cuts: &[(S, Vec<bool>)]) -> Result<Self> {
        check_cuts(n, cuts)?;
        let mut tables = BTreeMap::new();
        for set in small_subsets(n, t)?.into_iter().filter(|s| !s.is_empty()) {
            let mut probs = vec![S::zero(); 1 << set.len()];
            for (p, z) in cuts {
                let idx = set
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &x)| acc | (usize::from(z[x]) << i));
                probs[idx] += *p;
            }
            tables.insert(set, probs);
        }
        Self::new(t, n, tables)
    }

    /// `E[z_x z_y]` from the table on `{x, y}` (or `{x}` when equal).
    pub fn correlation(&self, x: usize, y: usize) -> Option<S> {
        if x == y {
            return self.tables.get(&vec![x]).map(|p| p.iter().copied().sum());
        }
        let (a, b) = (x.min(y), x.max(y));
        self.tables.get(&vec![a, b]).map(|p| {
            p.iter()
                .enumerate()
                .map(|(idx, &q)| if (idx & 1) == ((idx >> 1) & 1) { q } else { -q })
                .sum()
        })
    }

    /// `E[z_x z_y]` for all pairs; needs every pair table (or `t >= 2`).
    pub fn gram(&self) -> Result<Matrix<S>> {
        let mut g = Matrix::zeros(self.n);
        for x in 0..self.n {
            for y in 0..self.n {
                g[(x, y)] = self.correlation(x, y).ok_or_else(|| {
                    Error::InvalidSolution(format!("no distribution covers the pair {{{x}, {y}}}"))
                })?;
            }
        }
        Ok(g)
    }

    /// Sums, nonnegativity, marginal agreement on every common subset, and
    /// `<v_x, v_y> = E[z_x z_y]` for every tabulated pair.
    pub fn verify(&self, vectors: &[Vec<S>]) -> Result<ConsistencyReport> {
        if vectors.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: vectors.len(),
            });
        }
        let mut sum_error: f64 = 0.0;
        let mut min_probability = f64::INFINITY;
        let mut marginal_error: f64 = 0.0;
        let mut seen: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for (set, probs) in &self.tables {
            let total: S = compensated_sum(probs.iter().copied());
            sum_error = sum_error.max((total.to_f64_lossy() - 1.0).abs());
            for &p in probs {
                min_probability = min_probability.min(p.to_f64_lossy());
            }
            let m = set.len();
            for sub in 1u32..(1 << m) {
                let keep: Vec<usize> = (0..m).filter(|&i| sub >> i & 1 == 1).collect();
                let mut marg = vec![0.0f64; 1 << keep.len()];
                for (idx, &p) in probs.iter().enumerate() {
                    let proj = keep
                        .iter()
                        .enumerate()
                        .fold(0usize, |acc, (r, &i)| acc | (((idx >> i) & 1) << r));
                    marg[proj] += p.to_f64_lossy();
                }
                let key: Vec<usize> = keep.iter().map(|&i| set[i]).collect();
                match seen.get(&key) {
                    Some(prev) => {
                        for (a, b) in prev.iter().zip(&marg) {
                            marginal_error = marginal_error.max((a - b).abs());
                        }
                    }
                    None => {
                        seen.insert(key, marg);
                    }
                }
            }
        }
        let mut vector_error: f64 = 0.0;
        let mut vector_pairs = 0;
        for set in self.tables.keys().filter(|s| s.len() <= 2) {
            let (x, y) = (set[0], *set.last().expect("non-empty set"));
            if let Some(c) = self.correlation(x, y) {
                vector_error = vector_error.max((dot(&vectors[x], &vectors[y]) - c).abs().to_f64_lossy());
                vector_pairs += 1;
            }
        }
        if self.tables.is_empty() {
            min_probability = 0.0;
        }
        let tol = S::tolerance(SDP_TOLERANCE);
        Ok(ConsistencyReport {
            tables: self.tables.len(),
            passed: sum_error <= tol && min_probability >= -tol && marginal_error <= tol && vector_error <= tol,
            sum_error,
            min_probability,
            marginal_error,
            vector_error,
            vector_pairs,
        })
    }
}

/// Vectors with Gram matrix `gram`, read off its eigendecomposition.
/// Eigenvalues down to `-1e-9` are rounded to zero; anything more negative
/// means the matrix is not PSD.
pub fn gram_vectors<S: Scalar>(gram: &Matrix<S>) -> Result<Vec<Vec<S>>> {
    let n = gram.dim();
    if gram.max_abs_asymmetry().to_f64_lossy() > S::tolerance(SDP_TOLERANCE) {
        return Err(Error::InvalidSolution("Gram matrix is not symmetric".into()));
    }
    let eig = symmetric_eigen(gram)?;
    if let Some(&low) = eig.values.first() {
        if low.to_f64_lossy() < -S::tolerance(SDP_TOLERANCE) {
            return Err(Error::Infeasible(format!(
                "Gram matrix has eigenvalue {} < 0",
                low.to_f64_lossy()
            )));
        }
    }
    let roots: Vec<S> = eig.values.iter().map(|&l| l.max(S::zero()).sqrt()).collect();
    Ok((0..n)
        .map(|x| (0..n).map(|c| eig.vectors[c][x] * roots[c]).collect())
        .collect())
}

fn check_cuts<S: Scalar>(n: usize, cuts: &[(S, Vec<bool>)]) -> Result<()> {
    if cuts.is_empty() {
        return Err(Error::InvalidSolution("empty cut mixture".into()));
    }
    for (p, z) in cuts {
        if z.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: z.len() });
        }
        if *p < S::zero() {
            return Err(Error::InvalidSolution("negative cut probability".into()));
        }
    }
    let total: S = cuts.iter().map(|(p, _)| *p).sum();
    if (total.to_f64_lossy() - 1.0).abs() > S::tolerance(SDP_TOLERANCE) {
        return Err(Error::InvalidSolution(format!("cut probabilities sum to {}", total.to_f64_lossy())));
    }
    Ok(())
}

/// Largest vertex count for which cut mixtures are generated.
pub const MAX_CUT_MIXTURE_VERTICES: usize = 20;

/// Up to `max_cuts` distinct non-trivial cuts (vertex 0 always on the `true`
/// side) with random positive weights summing to 1.
pub fn random_cut_mixture<S: Scalar, R: Rng + ?Sized>(
    n: usize,
    max_cuts: usize,
    rng: &mut R,
) -> Result<Vec<(S, Vec<bool>)>> {
    if !(2..=MAX_CUT_MIXTURE_VERTICES).contains(&n) {
        return Err(Error::TooManyVertices {
            vertices: n,
            limit: MAX_CUT_MIXTURE_VERTICES,
        });
    }
    // Bit i of a mask puts vertex i + 1 on the `true` side; the full mask is the trivial cut.
    let available = (1usize << (n - 1)) - 1;
    let chosen: Vec<usize> = if available <= max_cuts {
        (0..available).collect()
    } else {
        let mut c = rand::seq::index::sample(rng, available, max_cuts).into_vec();
        c.sort_unstable();
        c
    };
    let weights: Vec<f64> = chosen.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Ok(chosen
        .into_iter()
        .zip(weights)
        .map(|(mask, w)| {
            let z = (0..n).map(|x| x == 0 || (mask >> (x - 1)) & 1 == 1).collect();
            (S::lit(w / total), z)
        })
        .collect())
}

/// Unit vectors `v_x = ⊕_c sqrt(p_c) z_c(x)` of a cut mixture.
pub fn cut_mixture_vectors<S: Scalar>(n: usize, cuts: &[(S, Vec<bool>)]) -> Result<Vec<Vec<S>>> {
    check_cuts(n, cuts)?;
    Ok((0..n)
        .map(|x| {
            cuts.iter()
                .map(|(p, z)| if z[x] { p.sqrt() } else { -p.sqrt() })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SaLift<S> {
    pub k: usize,
    pub distributions: LocalDistributions<S>,
    pub vectors: Vec<Vec<S>>,
    pub report: ConsistencyReport,
}

/// Lifted `D_T` is the uniform mixture over `j` of the base distribution on the
/// coordinate-`j` projection of `T`, each `x` reading `z_{x_j}`.
pub fn lift_sherali_adams<S: Scalar>(
    ld: &LocalDistributions<S>,
    vectors: &[Vec<S>],
    base: &Arc<WeightedGraph<S>>,
    k: usize,
) -> Result<SaLift<S>> {
    if ld.n != base.n() {
        return Err(Error::LengthMismatch {
            expected: base.n(),
            got: ld.n,
        });
    }
    if vectors.is_empty() || vectors.len() != ld.n {
        return Err(Error::LengthMismatch {
            expected: ld.n,
            got: vectors.len(),
        });
    }
    for (x, v) in vectors.iter().enumerate() {
        let norm = dot(v, v).to_f64_lossy();
        if (norm - 1.0).abs() > S::tolerance(SDP_TOLERANCE) {
            return Err(Error::InvalidSolution(format!(
                "base vector {x} has squared norm {norm}; lifting needs unit vectors so a \
                 collapsed coordinate (z_{{x_j}} = z_{{y_j}}) matches <v, v> = 1"
            )));
        }
    }
    let base_report = ld.verify(vectors)?;
    if !base_report.passed {
        return Err(Error::Infeasible(format!("base local distributions inconsistent: {base_report:?}")));
    }
    let product = cartesian_power(base, k)?;
    let len = product.dense_len()?;
    let inv_k = S::one() / S::from_usize_lossy(k);
    let mut tables = BTreeMap::new();
    for set in small_subsets(len, ld.t)?.into_iter().filter(|s| !s.is_empty()) {
        let tuples: Vec<Vec<usize>> = set.iter().map(|&i| product.tuple_of(i)).collect();
        let mut probs = vec![S::zero(); 1 << set.len()];
        for j in 0..k {
            let mut proj: Vec<usize> = tuples.iter().map(|x| x[j]).collect();
            proj.sort_unstable();
            proj.dedup();
            let pos: Vec<usize> = tuples
                .iter()
                .map(|x| proj.binary_search(&x[j]).expect("projected vertex"))
                .collect();
            let table = ld.tables.get(&proj).ok_or_else(|| {
                Error::Infeasible(format!("base distribution on {proj:?} missing"))
            })?;
            for (b, &p) in table.iter().enumerate() {
                let idx = pos
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &q)| acc | (((b >> q) & 1) << i));
                probs[idx] += p * inv_k;
            }
        }
        tables.insert(set, probs);
    }
    let distributions = LocalDistributions::new(ld.t, len, tables)?;
    let lifted = direct_sum(&product, vectors)?;
    let report = distributions.verify(&lifted)?;
    Ok(SaLift {
        k,
        distributions,
        vectors: lifted,
        report,
    })
}

/// Vectors `v_S` for vertex sets `|S| <= t`, the empty set included.
#[derive(Debug, Clone, PartialEq)]
pub struct LasserreSolution<S> {
    pub t: usize,
    pub n: usize,
    pub sets: BTreeMap<Vec<usize>, Vec<S>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub sets: usize,
    /// Distinct symmetric differences among pairs.
    pub groups: usize,
    /// Ordered quadruples `(S1, S2, T1, T2)` with `S1 Δ S2 = T1 Δ T2`.
    pub quadruples: u64,
    pub max_error: f64,
    pub passed: bool,
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                out.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

impl<S: Scalar> LasserreSolution<S> {
    pub fn new(t: usize, n: usize, sets: BTreeMap<Vec<usize>, Vec<S>>) -> Result<Self> {
        if !sets.contains_key(&Vec::new()) {
            return Err(Error::InvalidSolution("the empty set needs a vector".into()));
        }
        let d = sets.values().next().map_or(0, Vec::len);
        for (set, v) in &sets {
            check_set(set, n)?;
            if set.len() > t {
                return Err(Error::LevelMismatch {
                    have: set.len(),
                    want: t,
                });
            }
            if v.len() != d {
                return Err(Error::LengthMismatch { expected: d, got: v.len() });
            }
        }
        Ok(Self { t, n, sets })
    }

    /// `v_S = ⊕_c sqrt(p_c) chi_S(z_c)` for every set of size `<= t`.
    pub fn from_cut_mixture(n: usize, t: usize, cuts: &[(S, Vec<bool>)]) -> Result<Self> {
        check_cuts(n, cuts)?;
        let sets = small_subsets(n, t)?
            .into_iter()
            .map(|s| {
                let v = cuts
                    .iter()
                    .map(|(p, z)| {
                        let odd = s.iter().filter(|&&x| !z[x]).count() % 2 == 1;
                        if odd {
                            -p.sqrt()
                        } else {
                            p.sqrt()
                        }
                    })
                    .collect();
                (s, v)
            })
            .collect();
        Self::new(t, n, sets)
    }

    /// Groups all ordered pairs by symmetric difference; every group must
    /// share one inner product.
    pub fn verify_delta(&self) -> DeltaReport {
        let entries: Vec<(&Vec<usize>, &Vec<S>)> = self.sets.iter().collect();
        let mut groups: BTreeMap<Vec<usize>, (f64, f64, u64)> = BTreeMap::new();
        for (a, va) in &entries {
            for (b, vb) in &entries {
                let ip = dot(va, vb).to_f64_lossy();
                let g = groups
                    .entry(symmetric_difference(a, b))
                    .or_insert((f64::INFINITY, f64::NEG_INFINITY, 0));
                g.0 = g.0.min(ip);
                g.1 = g.1.max(ip);
                g.2 += 1;
            }
        }
        let max_error = groups.values().map(|g| g.1 - g.0).fold(0.0, f64::max);
        DeltaReport {
            sets: entries.len(),
            groups: groups.len(),
            quadruples: groups.values().map(|g| g.2 * g.2).sum(),
            max_error,
            passed: max_error <= S::tolerance(SDP_TOLERANCE),
        }
    }

    /// Singleton vectors `v_{x}`.
    pub fn singletons(&self) -> Result<Vec<Vec<S>>> {
        (0..self.n)
            .map(|x| {
                self.sets
                    .get(&vec![x])
                    .cloned()
                    .ok_or_else(|| Error::InvalidSolution(format!("singleton {{{x}}} missing")))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LasserreLift<S> {
    pub k: usize,
    pub solution: LasserreSolution<S>,
    pub delta: DeltaReport,
    pub base_objective: f64,
    pub lifted_objective: f64,
    pub objective_error: f64,
    pub passed: bool,
}

/// `v_T = (1/sqrt k) ⊕_j v_{T_j}` with `T_j` the parity projection.
pub fn lift_lasserre<S: Scalar>(
    ls: &LasserreSolution<S>,
    base: &Arc<WeightedGraph<S>>,
    k: usize,
    t: usize,
) -> Result<LasserreLift<S>> {
    if t != ls.t {
        return Err(Error::LevelMismatch { have: ls.t, want: t });
    }
    if ls.n != base.n() {
        return Err(Error::LengthMismatch {
            expected: base.n(),
            got: ls.n,
        });
    }
    let base_delta = ls.verify_delta();
    if !base_delta.passed {
        return Err(Error::Infeasible(format!(
            "base solution violates symmetric-difference consistency by {}",
            base_delta.max_error
        )));
    }
    let product = cartesian_power(base, k)?;
    let len = product.dense_len()?;
    let scale = S::one() / S::from_usize_lossy(k).sqrt();
    let mut sets = BTreeMap::new();
    for set in small_subsets(len, t)? {
        let tuples: Vec<Vec<usize>> = set.iter().map(|&i| product.tuple_of(i)).collect();
        let mut v = Vec::new();
        for j in 0..k {
            let tj = parity_projection(&tuples, j);
            let base_vec = ls
                .sets
                .get(&tj)
                .ok_or_else(|| Error::Infeasible(format!("base vector for {tj:?} missing")))?;
            v.extend(base_vec.iter().map(|&a| a * scale));
        }
        sets.insert(set, v);
    }
    let solution = LasserreSolution::new(t, len, sets)?;
    let delta = solution.verify_delta();

    let (base_objective, lifted_objective) = if t >= 1 {
        let materialized = product.materialize()?;
        (
            objective(base, &ls.singletons()?).to_f64_lossy(),
            objective(&materialized, &solution.singletons()?).to_f64_lossy(),
        )
    } else {
        (0.0, 0.0)
    };
    let objective_error = (lifted_objective - base_objective / k as f64).abs();
    Ok(LasserreLift {
        k,
        passed: delta.passed && objective_error <= S::tolerance(SDP_TOLERANCE),
        solution,
        delta,
        base_objective,
        lifted_objective,
        objective_error,
    })
}

/// `{"d": .., "vectors": [[..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SdpFile {
    pub d: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl SdpFile {
    pub fn vectors<S: Scalar>(&self) -> Result<Vec<Vec<S>>> {
        if let Some(bad) = self.vectors.iter().find(|v| v.len() != self.d) {
            return Err(Error::LengthMismatch {
                expected: self.d,
                got: bad.len(),
            });
        }
        Ok(self
            .vectors
            .iter()
            .map(|v| v.iter().map(|&x| S::lit(x)).collect())
            .collect())
    }

    pub fn from_vectors<S: Scalar>(vectors: &[Vec<S>]) -> Self {
        Self {
            d: vectors.first().map_or(0, Vec::len),
            vectors: vectors
                .iter()
                .map(|v| v.iter().map(|x| x.to_f64_lossy()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LasserreEntry {
    #[serde(rename = "S")]
    pub set: Vec<usize>,
    pub vec: Vec<f64>,
}

/// `{"t": .., "sets": [{"S": [..], "vec": [..]}, ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LasserreFile {
    pub t: usize,
    pub sets: Vec<LasserreEntry>,
}

impl LasserreFile {
    pub fn solution<S: Scalar>(&self, n: usize) -> Result<LasserreSolution<S>> {
        let mut sets = BTreeMap::new();
        for e in &self.sets {
            let v = e.vec.iter().map(|&x| S::lit(x)).collect();
            if sets.insert(e.set.clone(), v).is_some() {
                return Err(Error::InvalidSolution(format!("set {:?} listed twice", e.set)));
            }
        }
        LasserreSolution::new(self.t, n, sets)
    }

    pub fn from_solution<S: Scalar>(ls: &LasserreSolution<S>) -> Self {
        Self {
            t: ls.t,
            sets: ls
                .sets
                .iter()
                .map(|(s, v)| LasserreEntry {
                    set: s.clone(),
                    vec: v.iter().map(|x| x.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SaEntry {
    #[serde(rename = "T")]
    pub set: Vec<usize>,
    /// Keys are sign strings over `T` in order, e.g. `"+-"` for `z_{T[0]} = +1, z_{T[1]} = -1`.
    pub probs: BTreeMap<String, f64>,
}

/// `{"t": .., "dists": [{"T": [..], "probs": {"+-": .., ..}}, ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SaFile {
    pub t: usize,
    pub dists: Vec<SaEntry>,
}

fn sign_key(idx: usize, m: usize) -> String {
    (0..m).map(|i| if (idx >> i) & 1 == 1 { '+' } else { '-' }).collect()
}

impl SaFile {
    /// Missing sign patterns have probability 0.
    pub fn distributions<S: Scalar>(&self, n: usize) -> Result<LocalDistributions<S>> {
        let mut tables = BTreeMap::new();
        for e in &self.dists {
            let m = e.set.len();
            let mut probs = vec![S::zero(); 1 << m];
            for (key, &p) in &e.probs {
                if key.chars().count() != m || key.chars().any(|c| c != '+' && c != '-') {
                    return Err(Error::InvalidSolution(format!(
                        "probability key {key:?} is not a sign string of length {m}"
                    )));
                }
                let idx = key
                    .chars()
                    .enumerate()
                    .fold(0usize, |acc, (i, c)| acc | (usize::from(c == '+') << i));
                probs[idx] = S::lit(p);
            }
            if tables.insert(e.set.clone(), probs).is_some() {
                return Err(Error::InvalidSolution(format!("set {:?} listed twice", e.set)));
            }
        }
        LocalDistributions::new(self.t, n, tables)
    }

    pub fn from_distributions<S: Scalar>(ld: &LocalDistributions<S>) -> Self {
        Self {
            t: ld.t,
            dists: ld
                .tables
                .iter()
                .map(|(s, p)| SaEntry {
                    set: s.clone(),
                    probs: p
                        .iter()
                        .enumerate()
                        .map(|(i, q)| (sign_key(i, s.len()), q.to_f64_lossy()))
                        .collect(),
                })
                .collect(),
        }
    }
}
