//! Tightness gadgets: the q-ary cube, the necklace graph, the consecutive-ones
//! function on necklace tuples, and Monte-Carlo estimators for functions too
//! large to tabulate.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::FunctionTable;
use crate::graph::{cartesian_power, ProductGraph, WeightedGraph};
use crate::scalar::Scalar;

pub const MIN_NECKLACE_BITS: usize = 3;
pub const MAX_NECKLACE_BITS: usize = 20;

/// Independent sampling streams; stream `s` is seeded with `seed + s`.
pub const MC_STREAMS: u64 = 8;

/// `K_q^{□k}`.
pub fn build_qary_cube<S: Scalar>(q: usize, k: usize) -> Result<ProductGraph<S>> {
    if q < 2 {
        return Err(Error::AlphabetSize(q));
    }
    cartesian_power(&Arc::new(WeightedGraph::complete(q)?), k)
}

fn rotate_left(x: u32, bits: usize) -> u32 {
    let mask = (1u32 << bits) - 1;
    ((x << 1) | (x >> (bits - 1))) & mask
}

/// Bit 0 of the string is the most significant bit, so the lexicographically
/// minimal rotation is the numerically smallest one.
fn canonical_rotation(x: u32, bits: usize) -> u32 {
    let mut best = x;
    let mut y = x;
    for _ in 1..bits {
        y = rotate_left(y, bits);
        best = best.min(y);
    }
    best
}

fn longest_cyclic_run(x: u32, bits: usize) -> usize {
    let mask = (1u32 << bits) - 1;
    if x & mask == mask {
        return bits;
    }
    let mut best = 0;
    let mut run = 0;
    // Two passes around the cycle catch runs that wrap.
    for i in 0..2 * bits {
        if (x >> (i % bits)) & 1 == 1 {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best.min(bits)
}

/// Quotient of `{0,1}^R` minus the two constant strings by cyclic rotation.
#[derive(Debug, Clone)]
pub struct Necklace<S> {
    bits: usize,
    graph: WeightedGraph<S>,
    /// Canonical representative of each class, ascending.
    reps: Vec<u32>,
    orbit_sizes: Vec<usize>,
    longest_run: Vec<usize>,
}

impl<S: Scalar> Necklace<S> {
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn graph(&self) -> &WeightedGraph<S> {
        &self.graph
    }

    pub fn into_graph(self) -> WeightedGraph<S> {
        self.graph
    }

    pub fn representatives(&self) -> &[u32] {
        &self.reps
    }

    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit_sizes
    }

    /// Longest cyclic run of ones in each class.
    pub fn longest_runs(&self) -> &[usize] {
        &self.longest_run
    }

    /// Representative rendered as a bit string, bit 0 first.
    pub fn label(&self, class: usize) -> String {
        let x = self.reps[class];
        (0..self.bits)
            .map(|i| if (x >> (self.bits - 1 - i)) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn class_of(&self, string: u32) -> Option<usize> {
        let mask = (1u32 << self.bits) - 1;
        if string & !mask != 0 || string == 0 || string == mask {
            return None;
        }
        self.reps
            .binary_search(&canonical_rotation(string, self.bits))
            .ok()
    }
}

/// Necklace graph on `R`-bit strings, with edge mass proportional to the
/// number of hypercube edges joining two classes.
pub fn build_necklace<S: Scalar>(bits: usize) -> Result<Necklace<S>> {
    if !(MIN_NECKLACE_BITS..=MAX_NECKLACE_BITS).contains(&bits) {
        return Err(Error::NecklaceSize(bits));
    }
    let full = (1u32 << bits) - 1;
    let canon: Vec<u32> = (0..=full).map(|x| canonical_rotation(x, bits)).collect();
    let mut reps: Vec<u32> = (1..full).filter(|&x| canon[x as usize] == x).collect();
    reps.sort_unstable();
    let index_of = |x: u32| reps.binary_search(&canon[x as usize]).expect("non-constant string");

    let mut orbit_sizes = vec![0usize; reps.len()];
    let mut multiplicity: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for x in 1..full {
        let cx = index_of(x);
        orbit_sizes[cx] += 1;
        for b in 0..bits {
            let y = x ^ (1 << b);
            if y <= x || y == 0 || y == full {
                continue;
            }
            let cy = index_of(y);
            if cx != cy {
                *multiplicity.entry((cx.min(cy), cx.max(cy))).or_insert(0) += 1;
            }
        }
    }
    let edges: Vec<(usize, usize, S)> = multiplicity
        .into_iter()
        .map(|((a, b), m)| (a, b, S::from_usize_lossy(m as usize)))
        .collect();
    let graph = WeightedGraph::build(reps.len(), &edges)?;
    let longest_run = reps.iter().map(|&x| longest_cyclic_run(x, bits)).collect();
    Ok(Necklace {
        bits,
        graph,
        reps,
        orbit_sizes,
        longest_run,
    })
}

/// Pure evaluator from a vertex tuple to `{-1, +1}`.
pub trait BooleanOracle: Sync {
    fn k(&self) -> usize;
    /// `true` for `+1`, `false` for `-1`.
    fn eval(&self, x: &[usize]) -> bool;

    fn value(&self, x: &[usize]) -> f64 {
        if self.eval(x) {
            1.0
        } else {
            -1.0
        }
    }
}

impl<S: Scalar> BooleanOracle for FunctionTable<S> {
    fn k(&self) -> usize {
        self.graph().k()
    }

    fn eval(&self, x: &[usize]) -> bool {
        self.value_at(x) > S::zero()
    }
}

/// `+1` iff some coordinate's class has `ceil(log2(kR))` cyclically
/// consecutive ones.
#[derive(Debug, Clone)]
pub struct ConsecutiveOnes {
    k: usize,
    run_length: usize,
    has_run: Vec<bool>,
}

impl ConsecutiveOnes {
    pub fn new<S: Scalar>(necklace: &Necklace<S>, k: usize) -> Result<Self> {
        let kr = k * necklace.bits();
        if k == 0 || kr < 4 {
            return Err(Error::InvalidParameter(format!("consecutive-ones needs kR >= 4, got {kr}")));
        }
        let run_length = run_length(kr);
        let has_run = necklace.longest_runs().iter().map(|&r| r >= run_length).collect();
        Ok(Self { k, run_length, has_run })
    }

    pub fn run_length(&self) -> usize {
        self.run_length
    }

    pub fn class_has_run(&self, class: usize) -> bool {
        self.has_run[class]
    }
}

/// `ceil(log2(m))` for `m >= 1`.
pub fn run_length(m: usize) -> usize {
    (usize::BITS - (m - 1).leading_zeros()) as usize
}

impl BooleanOracle for ConsecutiveOnes {
    fn k(&self) -> usize {
        self.k
    }

    fn eval(&self, x: &[usize]) -> bool {
        x.iter().any(|&c| self.has_run[c])
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn stream_sizes(samples: usize) -> Vec<(u64, usize)> {
    let streams = MC_STREAMS as usize;
    (0..streams)
        .map(|s| (s as u64, samples / streams + usize::from(s < samples % streams)))
        .filter(|&(_, m)| m > 0)
        .collect()
}

fn run_streams(samples: usize, seed: u64, draw: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> McEstimate {
    let parts: Vec<(f64, f64)> = stream_sizes(samples)
        .into_par_iter()
        .map(|(s, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s));
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..m {
                let v = draw(&mut rng);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = parts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let std_error = (var / n).sqrt();
    McEstimate {
        estimate: mean,
        half_width: 1.96 * std_error,
        std_error,
        samples,
    }
}

fn pi_sampler<S: Scalar>(g: &WeightedGraph<S>) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(g.pi().iter().map(|p| p.to_f64_lossy()))
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Estimates `<f, L_j f>` by sampling `x_{-j}` from the product measure and a
/// base edge from `mu`.
pub fn influence_monte_carlo<S: Scalar, F: BooleanOracle + ?Sized>(
    f: &F,
    g: &WeightedGraph<S>,
    k: usize,
    coord: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if k == 0 {
        return Err(Error::ZeroPower);
    }
    if coord >= k {
        return Err(Error::CoordinateOutOfRange { coord, k });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let vertices = pi_sampler(g)?;
    let edges = WeightedIndex::new(g.edges().iter().map(|e| e.mass.to_f64_lossy()))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let base = g.edges();
    Ok(run_streams(samples, seed, |rng| {
        let mut x: Vec<usize> = (0..k).map(|_| vertices.sample(rng)).collect();
        let e = &base[edges.sample(rng)];
        x[coord] = e.u;
        let a = f.eval(&x);
        x[coord] = e.v;
        let b = f.eval(&x);
        // ½ (Δf)^2 with Δf ∈ {0, ±2}.
        if a == b {
            0.0
        } else {
            2.0
        }
    }))
}

/// Estimates `Pr[f = -1]` under the product measure.
pub fn negative_probability_monte_carlo<S: Scalar, F: BooleanOracle + ?Sized>(
    f: &F,
    g: &WeightedGraph<S>,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let vertices = pi_sampler(g)?;
    Ok(run_streams(samples, seed, |rng| {
        let x: Vec<usize> = (0..k).map(|_| vertices.sample(rng)).collect();
        if f.eval(&x) {
            0.0
        } else {
            1.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn necklace_class_counts() {
        let n3 = build_necklace::<f64>(3).unwrap();
        assert_eq!(n3.representatives(), &[0b001, 0b011]);
        let n4 = build_necklace::<f64>(4).unwrap();
        assert_eq!(n4.representatives(), &[0b0001, 0b0011, 0b0101, 0b0111]);
        assert_eq!(n4.orbit_sizes(), &[4, 4, 2, 4]);
        assert_eq!(n4.label(1), "0011");
        assert_eq!(build_necklace::<f64>(5).unwrap().graph().n(), 6);
        assert!(n4.graph().validate_measures().passed);
    }

    #[test]
    fn necklace_size_limits() {
        assert_eq!(build_necklace::<f64>(2).unwrap_err(), Error::NecklaceSize(2));
        assert_eq!(build_necklace::<f64>(21).unwrap_err(), Error::NecklaceSize(21));
    }

    #[test]
    fn class_lookup() {
        let n = build_necklace::<f64>(4).unwrap();
        assert_eq!(n.class_of(0b1000), Some(0));
        assert_eq!(n.class_of(0b1010), Some(2));
        assert_eq!(n.class_of(0), None);
        assert_eq!(n.class_of(0b1111), None);
    }

    #[test]
    fn runs_wrap_around() {
        assert_eq!(longest_cyclic_run(0b1001, 4), 2);
        assert_eq!(longest_cyclic_run(0b0110, 4), 2);
        assert_eq!(longest_cyclic_run(0b0101, 4), 1);
        assert_eq!(run_length(4), 2);
        assert_eq!(run_length(5), 3);
        assert_eq!(run_length(64), 6);
        assert_eq!(run_length(65), 7);
    }

    #[test]
    fn consecutive_ones_examples() {
        let n = build_necklace::<f64>(8).unwrap();
        let f = ConsecutiveOnes::new(&n, 4).unwrap();
        assert_eq!(f.run_length(), 5);
        let no_run = n.class_of(0b0000_0001).unwrap();
        assert!(!f.eval(&[no_run; 4]));
        let run = n.class_of(0b1111_1000).unwrap();
        assert!(f.eval(&[no_run, run, no_run, no_run]));
        assert!(ConsecutiveOnes::new(&build_necklace::<f64>(3).unwrap(), 1).is_err());
    }

    #[test]
    fn qary_cube_is_product() {
        let p = build_qary_cube::<f64>(2, 3).unwrap();
        assert_eq!(p.vertex_count(), 8);
        assert!(build_qary_cube::<f64>(1, 3).is_err());
    }

    #[test]
    fn constant_influence_is_exactly_zero() {
        let p = build_qary_cube::<f64>(2, 4).unwrap();
        let c = FunctionTable::constant(&p, 1.0).unwrap();
        let est = influence_monte_carlo(&c, p.base(), 4, 1, 1000, 3).unwrap();
        assert_eq!((est.estimate, est.half_width), (0.0, 0.0));
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let n = build_necklace::<f64>(6).unwrap();
        let f = ConsecutiveOnes::new(&n, 3).unwrap();
        let a = influence_monte_carlo(&f, n.graph(), 3, 0, 5000, 11).unwrap();
        let b = influence_monte_carlo(&f, n.graph(), 3, 0, 5000, 11).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.half_width.to_bits(), b.half_width.to_bits());
    }
}
