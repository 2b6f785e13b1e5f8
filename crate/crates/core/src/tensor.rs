//! Axis-wise operations on dense row-major tables over `{0..n}^k`.

use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Table shape: `k` axes of extent `n`, axis 0 most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub k: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.n.pow(self.k as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.k - 1 - axis) as u32)
    }

    /// Number of fibers along `axis` before it (`n^axis`) and the stride.
    pub fn split(&self, axis: usize) -> (usize, usize) {
        (self.n.pow(axis as u32), self.stride(axis))
    }

    /// Digit of `index` on `axis`.
    #[inline]
    pub fn digit(&self, index: usize, axis: usize) -> usize {
        (index / self.stride(axis)) % self.n
    }

    /// Visits every fiber along `axis` as `(first_index, stride)`.
    pub fn for_each_fiber(&self, axis: usize, mut visit: impl FnMut(usize, usize, usize, usize)) {
        let (outer, stride) = self.split(axis);
        let block = stride * self.n;
        for o in 0..outer {
            for i in 0..stride {
                visit(o * block + i, stride, o, i);
            }
        }
    }
}

/// `out[.., a, ..] = sum_b m[a][b] * input[.., b, ..]` along `axis`.
pub fn apply_along<S: Scalar>(input: &[S], shape: Shape, axis: usize, m: &Matrix<S>) -> Vec<S> {
    assert_eq!(m.dim(), shape.n);
    let n = shape.n;
    let mut out = vec![S::zero(); input.len()];
    let mut fiber = vec![S::zero(); n];
    shape.for_each_fiber(axis, |start, stride, _, _| {
        for (b, slot) in fiber.iter_mut().enumerate() {
            *slot = input[start + b * stride];
        }
        for a in 0..n {
            let row = m.row(a);
            let mut acc = S::zero();
            for (&w, &x) in row.iter().zip(&fiber) {
                acc += w * x;
            }
            out[start + a * stride] = acc;
        }
    });
    out
}

/// Scales every entry by the measure of its digit on `axis`.
pub fn scale_along<S: Scalar>(input: &[S], shape: Shape, axis: usize, weights: &[S]) -> Vec<S> {
    input
        .iter()
        .enumerate()
        .map(|(idx, &x)| x * weights[shape.digit(idx, axis)])
        .collect()
}

/// Product measure of `pi` over `m` axes, flattened row-major.
pub fn power_measure<S: Scalar>(pi: &[S], m: usize) -> Vec<S> {
    let mut out = vec![S::one()];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * pi.len());
        for &a in &out {
            for &p in pi {
                next.push(a * p);
            }
        }
        out = next;
    }
    out
}

/// Euclidean dot product.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    crate::scalar::compensated_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}
