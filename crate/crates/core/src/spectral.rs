//! Generalized eigenbasis of the base Laplacian and Fourier analysis on the
//! product in the tensor eigenbasis.
//!
//! The base problem is `L v = lambda Pi v` with `Pi = diag(pi)`. It is solved
//! through the symmetric matrix `Pi^{-1/2} L Pi^{-1/2}` and back-transformed,
//! which makes the eigenfunctions orthonormal under `<f, g> = E_pi[f g]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::FunctionTable;
use crate::graph::{ProductGraph, WeightedGraph};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::{compensated_sum, Scalar};
use crate::tensor::{apply_along, power_measure, Shape};

/// Residual and orthonormality tolerance for a computed basis.
pub const BASIS_TOLERANCE: f64 = 1e-9;

/// Largest base graph handed to the dense Jacobi solver.
pub const MAX_EIGEN_VERTICES: usize = 512;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralBasis<S> {
    /// Ascending, `eigenvalues[0] == 0`.
    pub eigenvalues: Vec<S>,
    /// `eigenfunctions[i][x] = v_i(x)`; `v_0` is the all-ones function.
    pub eigenfunctions: Vec<Vec<S>>,
    pub pi: Vec<S>,
}

/// Solves the generalized problem for a connected graph.
///
/// Eigenfunctions are sign-normalized so their first entry that is not
/// numerically zero is positive.
pub fn eigendecompose<S: Scalar>(g: &WeightedGraph<S>) -> Result<SpectralBasis<S>> {
    let n = g.n();
    if n > MAX_EIGEN_VERTICES {
        return Err(Error::TooManyVertices {
            vertices: n,
            limit: MAX_EIGEN_VERTICES,
        });
    }
    let pi = g.pi().to_vec();
    let inv_sqrt: Vec<S> = pi.iter().map(|&p| S::one() / p.sqrt()).collect();
    let l = g.laplacian();
    let mut sym = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = inv_sqrt[i] * l[(i, j)] * inv_sqrt[j];
        }
    }
    let eig = symmetric_eigen(&sym)?;

    let sign_tol = S::lit(1e-9);
    let mut eigenvalues = eig.values;
    let mut eigenfunctions: Vec<Vec<S>> = eig
        .vectors
        .into_iter()
        .map(|w| {
            let mut v: Vec<S> = w.iter().zip(&inv_sqrt).map(|(&a, &b)| a * b).collect();
            let flip = v
                .iter()
                .find(|x| x.abs() > sign_tol)
                .is_some_and(|&x| x < S::zero());
            if flip {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();

    // The kernel of a connected graph's Laplacian is exactly the constants.
    eigenvalues[0] = S::zero();
    eigenfunctions[0] = vec![S::one(); n];

    let basis = SpectralBasis {
        eigenvalues,
        eigenfunctions,
        pi,
    };
    let residual = basis.max_residual(g);
    let tol = S::lit(BASIS_TOLERANCE).max(S::epsilon().sqrt());
    if !(residual <= tol) {
        return Err(Error::EigenNoConvergence(residual.to_f64_lossy()));
    }
    Ok(basis)
}

impl<S: Scalar> SpectralBasis<S> {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `lambda_1`, the spectral gap.
    pub fn gap(&self) -> S {
        self.eigenvalues[1]
    }

    /// `max_i |L v_i - lambda_i Pi v_i|_inf`.
    pub fn max_residual(&self, g: &WeightedGraph<S>) -> S {
        let l = g.laplacian();
        let mut worst = S::zero();
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            for (x, lv) in l.mul_vec(v).into_iter().enumerate() {
                worst = worst.max((lv - *lam * self.pi[x] * v[x]).abs());
            }
        }
        worst
    }

    /// `max_{i,j} |<v_i, v_j>_pi - delta_ij|`.
    pub fn orthonormality_defect(&self) -> S {
        let mut worst = S::zero();
        for (i, a) in self.eigenfunctions.iter().enumerate() {
            for (j, b) in self.eigenfunctions.iter().enumerate() {
                let ip = compensated_sum(
                    a.iter().zip(b).zip(&self.pi).map(|((&x, &y), &p)| x * y * p),
                );
                let want = if i == j { S::one() } else { S::zero() };
                worst = worst.max((ip - want).abs());
            }
        }
        worst
    }

    /// `avg_j lambda_{i_j}` for a multi-index.
    pub fn product_eigenvalue(&self, idx: &[usize]) -> Result<S> {
        let n = self.n();
        if idx.is_empty() {
            return Err(Error::MalformedTuple(idx.to_vec()));
        }
        if idx.iter().any(|&i| i >= n) {
            return Err(Error::MalformedTuple(idx.to_vec()));
        }
        let total = compensated_sum(idx.iter().map(|&i| self.eigenvalues[i]));
        Ok(total / S::from_usize_lossy(idx.len()))
    }

    /// Smallest nonzero product eigenvalue of the `k`-th power: `lambda_1 / k`.
    pub fn product_gap(&self, k: usize) -> S {
        self.gap() / S::from_usize_lossy(k)
    }

    /// `A[i][x] = v_i(x) pi(x)`, maps values to coefficients.
    pub fn analysis_matrix(&self) -> Matrix<S> {
        let n = self.n();
        let mut a = Matrix::zeros(n);
        for i in 0..n {
            for x in 0..n {
                a[(i, x)] = self.eigenfunctions[i][x] * self.pi[x];
            }
        }
        a
    }

    /// `B[x][i] = v_i(x)`, maps coefficients back to values.
    pub fn synthesis_matrix(&self) -> Matrix<S> {
        let n = self.n();
        let mut b = Matrix::zeros(n);
        for x in 0..n {
            for i in 0..n {
                b[(x, i)] = self.eigenfunctions[i][x];
            }
        }
        b
    }

    /// Dense tensor eigenfunction `v_(i)` on the product. Test-scale only.
    pub fn tensor_eigenfunction(&self, idx: &[usize]) -> Vec<S> {
        let k = idx.len();
        let shape = Shape { n: self.n(), k };
        (0..shape.len())
            .map(|flat| {
                (0..k)
                    .map(|axis| self.eigenfunctions[idx[axis]][shape.digit(flat, axis)])
                    .fold(S::one(), |a, b| a * b)
            })
            .collect()
    }
}

/// Coefficients `f_(i) = <f, v_(i)>` stored densely, row-major over multi-indices.
#[derive(Debug, Clone, Serialize)]
pub struct FourierCoefficients<S> {
    pub n: usize,
    pub k: usize,
    pub coeffs: Vec<S>,
}

impl<S: Scalar> FourierCoefficients<S> {
    fn shape(&self) -> Shape {
        Shape { n: self.n, k: self.k }
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let shape = self.shape();
        (0..self.k).map(|axis| shape.digit(flat, axis)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> S {
        self.coeffs[self.flat_index(idx)]
    }

    /// `sum f_(i)^2`, equal to `|f|_2^2` by Parseval.
    pub fn norm_sq(&self) -> S {
        compensated_sum(self.coeffs.iter().map(|&c| c * c))
    }

    /// `sum f_(i)^2 * avg_j lambda_{i_j}`, the Dirichlet form in the eigenbasis.
    pub fn dirichlet_form(&self, basis: &SpectralBasis<S>) -> S {
        let shape = self.shape();
        let k = S::from_usize_lossy(self.k);
        compensated_sum(self.coeffs.iter().enumerate().map(|(flat, &c)| {
            let lam: S = (0..self.k)
                .map(|axis| basis.eigenvalues[shape.digit(flat, axis)])
                .sum();
            c * c * lam / k
        }))
    }

    /// Keeps coefficients whose multi-index satisfies `keep`; zeroes the rest.
    pub fn filtered(&self, keep: impl Fn(&[usize]) -> bool) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, &c)| if keep(&self.multi_index(flat)) { c } else { S::zero() })
            .collect();
        Self {
            n: self.n,
            k: self.k,
            coeffs,
        }
    }
}

/// Forward transform by applying the analysis matrix along every axis.
pub fn fourier_transform<S: Scalar>(
    f: &FunctionTable<S>,
    basis: &SpectralBasis<S>,
) -> Result<FourierCoefficients<S>> {
    let graph = f.graph();
    let shape = Shape {
        n: graph.n(),
        k: graph.k(),
    };
    graph.dense_len()?;
    let a = basis.analysis_matrix();
    let mut data = f.values().to_vec();
    for axis in 0..shape.k {
        data = apply_along(&data, shape, axis, &a);
    }
    Ok(FourierCoefficients {
        n: shape.n,
        k: shape.k,
        coeffs: data,
    })
}

/// Inverse transform onto the given product.
pub fn inverse_transform<S: Scalar>(
    coeffs: &FourierCoefficients<S>,
    basis: &SpectralBasis<S>,
    graph: &ProductGraph<S>,
) -> Result<FunctionTable<S>> {
    let shape = Shape {
        n: coeffs.n,
        k: coeffs.k,
    };
    let b = basis.synthesis_matrix();
    let mut data = coeffs.coeffs.clone();
    for axis in 0..shape.k {
        data = apply_along(&data, shape, axis, &b);
    }
    FunctionTable::new(graph, data)
}

/// `<f, L_j f>`: the influence of coordinate `j`, summed over base edges.
///
/// Equals `k` times the direction-`j` share of the product Dirichlet form.
pub fn directional_form<S: Scalar>(f: &FunctionTable<S>, coord: usize) -> Result<S> {
    let graph = f.graph();
    let k = graph.k();
    if coord >= k {
        return Err(Error::CoordinateOutOfRange { coord, k });
    }
    let base = graph.base();
    let shape = Shape { n: graph.n(), k };
    let prefix = power_measure(base.pi(), coord);
    let suffix = power_measure(base.pi(), k - 1 - coord);
    let values = f.values();
    let half = S::lit(0.5);
    let mut terms = Vec::with_capacity(prefix.len() * suffix.len());
    shape.for_each_fiber(coord, |start, stride, o, i| {
        let weight = prefix[o] * suffix[i];
        let local: S = base
            .edges()
            .iter()
            .map(|e| {
                let d = values[start + e.u * stride] - values[start + e.v * stride];
                e.mass * d * d
            })
            .sum();
        terms.push(weight * half * local);
    });
    Ok(compensated_sum(terms))
}

/// `<f, L f>` on the product, the average of the directional forms.
pub fn dirichlet_form<S: Scalar>(f: &FunctionTable<S>) -> Result<S> {
    let k = f.graph().k();
    let parts = (0..k)
        .map(|j| directional_form(f, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(parts) / S::from_usize_lossy(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::cartesian_power;
    use std::sync::Arc;

    fn k2() -> Arc<WeightedGraph<f64>> {
        Arc::new(WeightedGraph::complete(2).unwrap())
    }

    #[test]
    fn k2_spectrum() {
        let b = eigendecompose(k2().as_ref()).unwrap();
        assert_eq!(b.eigenvalues[0], 0.0);
        assert!((b.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert!((b.eigenfunctions[1][0] - 1.0).abs() < 1e-12);
        assert!((b.eigenfunctions[1][1] + 1.0).abs() < 1e-12);
        assert!(b.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn k3_spectrum() {
        let g = WeightedGraph::<f64>::complete(3).unwrap();
        let b = eigendecompose(&g).unwrap();
        assert!((b.eigenvalues[1] - 1.5).abs() < 1e-12);
        assert!((b.eigenvalues[2] - 1.5).abs() < 1e-12);
        assert!(b.max_residual(&g) < 1e-12);
    }

    #[test]
    fn irregular_path_is_orthonormal() {
        let g = WeightedGraph::<f64>::build(4, &[(0, 1, 1.0), (1, 2, 3.0), (2, 3, 0.5)]).unwrap();
        let b = eigendecompose(&g).unwrap();
        assert!(b.orthonormality_defect() < 1e-12);
        assert!(b.max_residual(&g) < 1e-12);
        assert!(b.gap() > 0.0);
    }

    #[test]
    fn product_eigenvalues_k2() {
        let b = eigendecompose(k2().as_ref()).unwrap();
        assert_eq!(b.product_eigenvalue(&[0, 0]).unwrap(), 0.0);
        assert!((b.product_eigenvalue(&[1, 0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((b.product_eigenvalue(&[1, 1]).unwrap() - 2.0).abs() < 1e-12);
        assert!(b.product_eigenvalue(&[2, 0]).is_err());
    }

    #[test]
    fn dictator_and_parity_on_k2_squared() {
        let g = k2();
        let p = cartesian_power(&g, 2).unwrap();
        let b = eigendecompose(g.as_ref()).unwrap();

        let dictator = FunctionTable::dictator(&p, 0).unwrap();
        let c = fourier_transform(&dictator, &b).unwrap();
        assert!((c.get(&[1, 0]) - 1.0).abs() < 1e-12);
        assert!(c.coeffs.iter().map(|x| x.abs()).sum::<f64>() - 1.0 < 1e-12);
        assert!((directional_form(&dictator, 0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(directional_form(&dictator, 1).unwrap(), 0.0);

        let parity = FunctionTable::parity(&p).unwrap();
        let c = fourier_transform(&parity, &b).unwrap();
        assert!((c.get(&[1, 1]) - 1.0).abs() < 1e-12);
        for j in 0..2 {
            assert!((directional_form(&parity, j).unwrap() - 2.0).abs() < 1e-12);
        }
        assert!((dirichlet_form(&parity).unwrap() - 2.0).abs() < 1e-12);

        let one = FunctionTable::constant(&p, 1.0).unwrap();
        let c = fourier_transform(&one, &b).unwrap();
        assert!((c.get(&[0, 0]) - 1.0).abs() < 1e-12);
        assert!(c.norm_sq() - 1.0 < 1e-12);
        assert_eq!(dirichlet_form(&one).unwrap(), 0.0);
        assert!(directional_form(&one, 2).is_err());
    }
}
