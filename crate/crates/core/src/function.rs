//! Dense real functions on a product graph and the variance/entropy
//! primitives built on them.
//!
//! All expectations are under the product vertex measure. The directional
//! variance `var_j` is the expected conditional variance over coordinate `j`;
//! as a quadratic form it is `f^T K_j f` with
//! `K_j = Pi ⊗ .. ⊗ (Pi - pi pi^T) ⊗ .. ⊗ Pi`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::ProductGraph;
use crate::linalg::Matrix;
use crate::scalar::{compensated_sum, Scalar};
use crate::spectral::{fourier_transform, inverse_transform, SpectralBasis};
use crate::tensor::{apply_along, dot, power_measure, scale_along, Shape};

/// Slack used by the inequality checks in this module.
pub const CHECK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FunctionTable<S> {
    graph: ProductGraph<S>,
    values: Vec<S>,
    measure: Vec<S>,
    boolean_pm1: bool,
}

impl<S: Scalar> FunctionTable<S> {
    /// Wraps `n^k` values in row-major tuple order. Refuses products above the
    /// dense cap before allocating anything.
    pub fn new(graph: &ProductGraph<S>, values: Vec<S>) -> Result<Self> {
        let len = graph.dense_len()?;
        if values.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                got: values.len(),
            });
        }
        let boolean_pm1 = values.iter().all(|&v| v == S::one() || v == -S::one());
        Ok(Self {
            graph: graph.clone(),
            measure: graph.vertex_measure()?,
            values,
            boolean_pm1,
        })
    }

    pub fn from_fn(graph: &ProductGraph<S>, f: impl Fn(&[usize]) -> S) -> Result<Self> {
        let len = graph.dense_len()?;
        let values = (0..len).map(|idx| f(&graph.tuple_of(idx))).collect();
        Self::new(graph, values)
    }

    pub fn constant(graph: &ProductGraph<S>, c: S) -> Result<Self> {
        Self::new(graph, vec![c; graph.dense_len()?])
    }

    /// `+1` where coordinate `coord` is vertex 0, `-1` elsewhere.
    pub fn dictator(graph: &ProductGraph<S>, coord: usize) -> Result<Self> {
        if coord >= graph.k() {
            return Err(Error::CoordinateOutOfRange {
                coord,
                k: graph.k(),
            });
        }
        Self::from_fn(graph, |x| if x[coord] == 0 { S::one() } else { -S::one() })
    }

    /// Product of the per-coordinate signs `+1` at vertex 0, `-1` elsewhere.
    pub fn parity(graph: &ProductGraph<S>) -> Result<Self> {
        Self::from_fn(graph, |x| {
            if x.iter().filter(|&&c| c != 0).count() % 2 == 0 {
                S::one()
            } else {
                -S::one()
            }
        })
    }

    /// Independent uniform signs.
    pub fn random_boolean<R: Rng + ?Sized>(graph: &ProductGraph<S>, rng: &mut R) -> Result<Self> {
        let len = graph.dense_len()?;
        let values = (0..len)
            .map(|_| if rng.gen::<bool>() { S::one() } else { -S::one() })
            .collect();
        Self::new(graph, values)
    }

    /// Exactly `floor(len / 2)` entries equal to `+1`, at random positions.
    pub fn random_balanced<R: Rng + ?Sized>(graph: &ProductGraph<S>, rng: &mut R) -> Result<Self> {
        use rand::seq::SliceRandom;
        let len = graph.dense_len()?;
        let mut values: Vec<S> = (0..len)
            .map(|i| if i < len / 2 { S::one() } else { -S::one() })
            .collect();
        values.shuffle(rng);
        Self::new(graph, values)
    }

    /// Dictator on `coord` with `round(fraction * len)` distinct random
    /// vertices flipped.
    pub fn noisy_dictator<R: Rng + ?Sized>(
        graph: &ProductGraph<S>,
        coord: usize,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!("noise fraction {fraction} outside [0, 1]")));
        }
        let mut f = Self::dictator(graph, coord)?;
        let len = f.values.len();
        let flips = (fraction * len as f64).round() as usize;
        for idx in rand::seq::index::sample(rng, len, flips) {
            f.values[idx] = -f.values[idx];
        }
        Ok(f)
    }

    /// Independent uniform values in `[-1, 1]`.
    pub fn random_real<R: Rng + ?Sized>(graph: &ProductGraph<S>, rng: &mut R) -> Result<Self> {
        let len = graph.dense_len()?;
        let values = (0..len)
            .map(|_| S::lit(rng.gen_range(-1.0..=1.0)))
            .collect();
        Self::new(graph, values)
    }

    pub fn graph(&self) -> &ProductGraph<S> {
        &self.graph
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// Product vertex measure aligned with [`values`](Self::values).
    pub fn measure(&self) -> &[S] {
        &self.measure
    }

    pub fn is_boolean(&self) -> bool {
        self.boolean_pm1
    }

    pub fn value_at(&self, x: &[usize]) -> S {
        self.values[self.graph.index_of(x)]
    }

    fn shape(&self) -> Shape {
        Shape {
            n: self.graph.n(),
            k: self.graph.k(),
        }
    }

    fn expect(&self, h: impl Fn(S) -> S) -> S {
        compensated_sum(self.values.iter().zip(&self.measure).map(|(&v, &p)| p * h(v)))
    }

    pub fn mean(&self) -> S {
        self.expect(|v| v)
    }

    /// `E[f^2]`.
    pub fn norm2_sq(&self) -> S {
        self.expect(|v| v * v)
    }

    /// `E|f|`.
    pub fn norm1(&self) -> S {
        self.expect(|v| v.abs())
    }

    pub fn variance(&self) -> S {
        let m = self.mean();
        self.norm2_sq() - m * m
    }

    /// `E_{x \ x_j} [ Var_{x_j} f ]` from the conditional-variance formula.
    pub fn variance_along(&self, coord: usize) -> Result<S> {
        let k = self.graph.k();
        if coord >= k {
            return Err(Error::CoordinateOutOfRange { coord, k });
        }
        let pi = self.graph.base().pi();
        let prefix = power_measure(pi, coord);
        let suffix = power_measure(pi, k - 1 - coord);
        let mut terms = Vec::with_capacity(prefix.len() * suffix.len());
        self.shape().for_each_fiber(coord, |start, stride, o, i| {
            let mut m1 = S::zero();
            let mut m2 = S::zero();
            for (a, &p) in pi.iter().enumerate() {
                let v = self.values[start + a * stride];
                m1 += p * v;
                m2 += p * v * v;
            }
            terms.push(prefix[o] * suffix[i] * (m2 - m1 * m1));
        });
        Ok(compensated_sum(terms))
    }

    /// `f^T K_j f`, the same quantity as a tensor quadratic form.
    pub fn variance_along_form(&self, coord: usize) -> Result<S> {
        let k = self.graph.k();
        if coord >= k {
            return Err(Error::CoordinateOutOfRange { coord, k });
        }
        let pi = self.graph.base().pi();
        let n = pi.len();
        let mut centered = Matrix::diagonal(pi);
        for a in 0..n {
            for b in 0..n {
                centered[(a, b)] -= pi[a] * pi[b];
            }
        }
        let shape = self.shape();
        let mut g = self.values.clone();
        for axis in 0..k {
            g = if axis == coord {
                apply_along(&g, shape, axis, &centered)
            } else {
                scale_along(&g, shape, axis, pi)
            };
        }
        Ok(dot(&self.values, &g))
    }

    /// `E[f^2 ln f^2] - |f|^2 ln |f|^2`, natural log, `0 ln 0 = 0`.
    pub fn entropy_sq(&self) -> S {
        entropy_sq(&self.values, &self.measure)
    }

    /// `E|f - g|^2`.
    pub fn distance_sq(&self, other: &FunctionTable<S>) -> S {
        compensated_sum(
            self.values
                .iter()
                .zip(&other.values)
                .zip(&self.measure)
                .map(|((&a, &b), &p)| p * (a - b) * (a - b)),
        )
    }

    /// `E[f g]`.
    pub fn inner(&self, other: &FunctionTable<S>) -> S {
        compensated_sum(
            self.values
                .iter()
                .zip(&other.values)
                .zip(&self.measure)
                .map(|((&a, &b), &p)| p * a * b),
        )
    }

    pub fn map(&self, h: impl Fn(S) -> S) -> Self {
        Self {
            graph: self.graph.clone(),
            values: self.values.iter().map(|&v| h(v)).collect(),
            measure: self.measure.clone(),
            boolean_pm1: false,
        }
        .recheck_boolean()
    }

    fn recheck_boolean(mut self) -> Self {
        self.boolean_pm1 = self.values.iter().all(|&v| v == S::one() || v == -S::one());
        self
    }
}

/// `Ent(f^2)` under an arbitrary measure.
///
/// Evaluated as `m * E[h(f^2/m - 1)]` with `m = E f^2` and
/// `h(d) = (1+d) ln(1+d) - d`, which avoids the cancellation of the textbook
/// form for nearly constant `f`.
pub fn entropy_sq<S: Scalar>(values: &[S], measure: &[S]) -> S {
    let m = compensated_sum(values.iter().zip(measure).map(|(&v, &p)| p * v * v));
    if m <= S::zero() {
        return S::zero();
    }
    let sum = compensated_sum(
        values
            .iter()
            .zip(measure)
            .map(|(&v, &p)| p * relative_entropy_term(v * v / m - S::one())),
    );
    m * sum
}

/// `(1+d) ln(1+d) - d`, by its alternating series near 0.
fn relative_entropy_term<S: Scalar>(d: S) -> S {
    if d.abs() < S::lit(1e-2) {
        let mut power = d * d;
        let mut acc = S::zero();
        for n in 2..10 {
            let term = power / S::from_usize_lossy(n * (n - 1));
            acc += if n % 2 == 0 { term } else { -term };
            power *= d;
        }
        acc
    } else {
        (S::one() + d).xlogx() - d
    }
}

/// `f = f_0 + sum_j f_j`, where `f_j` keeps the Fourier mass on multi-indices
/// with `i_j != 0` and `i_l = 0` for every `l > j`.
#[derive(Debug, Clone)]
pub struct Decomposition<S> {
    /// Coefficient on the constant eigenfunction (the mean).
    pub constant: S,
    pub components: Vec<FunctionTable<S>>,
}

impl<S: Scalar> Decomposition<S> {
    /// `max_{j1 != j2} |<f_j1, f_j2>|`.
    pub fn max_cross_inner(&self) -> S {
        let mut worst = S::zero();
        for (a, fa) in self.components.iter().enumerate() {
            for fb in &self.components[a + 1..] {
                worst = worst.max(fa.inner(fb).abs());
            }
        }
        worst
    }

    /// `sum_j |f_j|_2^2`.
    pub fn total_norm_sq(&self) -> S {
        compensated_sum(self.components.iter().map(|c| c.norm2_sq()))
    }

    /// Pointwise `f_0 + sum_j f_j`.
    pub fn reconstruct(&self) -> Vec<S> {
        let len = self.components.first().map_or(0, |c| c.values().len());
        (0..len)
            .map(|i| {
                self.constant
                    + compensated_sum(self.components.iter().map(|c| c.values()[i]))
            })
            .collect()
    }
}

pub fn decompose<S: Scalar>(f: &FunctionTable<S>, basis: &SpectralBasis<S>) -> Result<Decomposition<S>> {
    let coeffs = fourier_transform(f, basis)?;
    let k = f.graph().k();
    let components = (0..k)
        .map(|j| {
            let part = coeffs.filtered(|idx| idx[j] != 0 && idx[j + 1..].iter().all(|&i| i == 0));
            inverse_transform(&part, basis, f.graph())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Decomposition {
        constant: coeffs.coeffs[0],
        components,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateBound {
    pub coord: usize,
    pub var_j: f64,
    pub l2_sq: f64,
    pub l1: f64,
    /// `var_j - |f_j|_2^2`.
    pub l2_slack: f64,
    /// `var_j - |f_j|_1`.
    pub l1_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormBoundReport {
    pub coords: Vec<CoordinateBound>,
    pub passed: bool,
}

/// `|f_j|_2^2 <= var_j(f)` and `|f_j|_1 <= var_j(f)` for a `{-1,+1}` function.
pub fn check_l2_l1_bounds<S: Scalar>(
    f: &FunctionTable<S>,
    dec: &Decomposition<S>,
) -> Result<NormBoundReport> {
    if !f.is_boolean() {
        return Err(Error::NotBoolean);
    }
    let mut coords = Vec::with_capacity(dec.components.len());
    for (j, fj) in dec.components.iter().enumerate() {
        let var_j = f.variance_along(j)?.to_f64_lossy();
        let l2_sq = fj.norm2_sq().to_f64_lossy();
        let l1 = fj.norm1().to_f64_lossy();
        coords.push(CoordinateBound {
            coord: j,
            var_j,
            l2_sq,
            l1,
            l2_slack: var_j - l2_sq,
            l1_slack: var_j - l1,
        });
    }
    let passed = coords
        .iter()
        .all(|c| c.l2_slack >= -CHECK_SLACK && c.l1_slack >= -CHECK_SLACK);
    Ok(NormBoundReport { coords, passed })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EfronStein {
    /// `sum_j E var_j f`.
    pub lhs: f64,
    /// `var f`.
    pub rhs: f64,
    pub passed: bool,
}

pub fn efron_stein_check<S: Scalar>(f: &FunctionTable<S>) -> Result<EfronStein> {
    let parts = (0..f.graph().k())
        .map(|j| f.variance_along(j))
        .collect::<Result<Vec<_>>>()?;
    let lhs = compensated_sum(parts).to_f64_lossy();
    let rhs = f.variance().to_f64_lossy();
    Ok(EfronStein {
        lhs,
        rhs,
        passed: lhs >= rhs - CHECK_SLACK,
    })
}
