//! Isoperimetry, log-Sobolev, KKL/junta and sparsest-cut SDP analysis on
//! weighted graphs and their Cartesian powers `G^{□k}`.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the tolerances are tuned for.

pub mod error;
pub mod function;
pub mod graph;
pub mod isoperimetry;
pub mod kkl;
pub mod linalg;
pub mod scalar;
pub mod sdp;
pub mod spectral;
pub mod tensor;
pub mod tightness;

pub use error::{Error, Result};
pub use function::{decompose, Decomposition, FunctionTable};
pub use graph::{cartesian_power, ProductGraph, WeightedGraph, DEFAULT_DENSE_CAP};
pub use isoperimetry::{
    chain_check, conductance_bruteforce, log_sobolev_estimate, product_scaling_report, LogSobolevOptions,
};
pub use kkl::{corollary_check, friedgut_extract, kkl_report, main_lemma_check};
pub use scalar::Scalar;
pub use sdp::{basic_sdp_opt, check_triangle, lift_lasserre, lift_sherali_adams, lift_vectors, parity_projection};
pub use spectral::{eigendecompose, fourier_transform, inverse_transform, SpectralBasis};
pub use tightness::{build_necklace, build_qary_cube, influence_monte_carlo, BooleanOracle, ConsecutiveOnes};

pub type Graph = WeightedGraph<f64>;
pub type Product = ProductGraph<f64>;
pub type Function = FunctionTable<f64>;
pub type Basis = SpectralBasis<f64>;

pub type Graph32 = WeightedGraph<f32>;
pub type Product32 = ProductGraph<f32>;
pub type Function32 = FunctionTable<f32>;
pub type Basis32 = SpectralBasis<f32>;
