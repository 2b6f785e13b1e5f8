//! Log-Sobolev lemma chain, KKL influence report and constructive junta
//! extraction for `{-1,+1}` functions on Cartesian powers.
//!
//! `alpha` is always the log-Sobolev constant of the base graph; the power
//! `G^k` has constant `alpha / k`, which is where the `alpha / 2k` factors
//! below come from.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{decompose, Decomposition, FunctionTable, CHECK_SLACK};
use crate::scalar::{compensated_sum, Scalar};
use crate::spectral::{dirichlet_form, directional_form, fourier_transform, inverse_transform, SpectralBasis};
use crate::tensor::Shape;

/// Directional variances below this are treated as exact zeros when choosing
/// the junta.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Constant in the junta-size guarantee `exp(C k I / (eps alpha))`.
pub const JUNTA_EXPONENT: f64 = 50.0;

fn check_t(t: f64) -> Result<()> {
    let max_t = (-2.0f64).exp();
    if !(t > 0.0 && t <= max_t * (1.0 + 1e-15)) {
        return Err(Error::TOutOfRange(t));
    }
    Ok(())
}

/// `(alpha / 2k) (sqrt(t) ln t * a + ln t * b - b ln b)`.
fn lemma_rhs(alpha: f64, k: usize, t: f64, l1_like: f64, l2_sq: f64) -> f64 {
    let lt = t.ln();
    let b_log_b = if l2_sq > 0.0 { l2_sq * l2_sq.ln() } else { 0.0 };
    alpha / (2.0 * k as f64) * (t.sqrt() * lt * l1_like + lt * l2_sq - b_log_b)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// `<h, L h> >= (alpha/2k)(sqrt(t) ln t |h|_1 + ln t |h|_2^2 - |h|_2^2 ln |h|_2^2)`.
pub fn main_lemma_check<S: Scalar>(h: &FunctionTable<S>, t: f64, alpha: f64) -> Result<LemmaCheck> {
    check_t(t)?;
    let lhs = dirichlet_form(h)?.to_f64_lossy();
    let rhs = lemma_rhs(
        alpha,
        h.graph().k(),
        t,
        h.norm1().to_f64_lossy(),
        h.norm2_sq().to_f64_lossy(),
    );
    Ok(LemmaCheck {
        lhs,
        rhs,
        passed: lhs >= rhs - CHECK_SLACK,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryTerm {
    pub coord: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    pub t: f64,
    pub alpha: f64,
    pub terms: Vec<CorollaryTerm>,
    pub passed: bool,
}

/// For each `j`: `<f_j, L f_j> >= (alpha/2k)(sqrt(t) ln t var_j + ln t |f_j|^2 - |f_j|^2 ln |f_j|^2)`.
pub fn corollary_check<S: Scalar>(
    f: &FunctionTable<S>,
    dec: &Decomposition<S>,
    t: f64,
    alpha: f64,
) -> Result<CorollaryReport> {
    if !f.is_boolean() {
        return Err(Error::NotBoolean);
    }
    check_t(t)?;
    let k = f.graph().k();
    let mut terms = Vec::with_capacity(k);
    for (j, fj) in dec.components.iter().enumerate() {
        let lhs = dirichlet_form(fj)?.to_f64_lossy();
        let var_j = f.variance_along(j)?.to_f64_lossy();
        let rhs = lemma_rhs(alpha, k, t, var_j, fj.norm2_sq().to_f64_lossy());
        terms.push(CorollaryTerm { coord: j, lhs, rhs });
    }
    let passed = terms.iter().all(|c| c.lhs >= c.rhs - CHECK_SLACK);
    Ok(CorollaryReport {
        t,
        alpha,
        terms,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KklReport {
    /// `<f, L_j f>` per coordinate.
    pub influences: Vec<f64>,
    pub max_influence: f64,
    pub argmax: usize,
    /// `<f, L f>`, the average influence.
    pub total: f64,
    pub variance: f64,
    /// `alpha * var(f) * ln k / k`.
    pub bound_expr: f64,
    /// `max_influence / bound_expr`.
    pub ratio: f64,
    /// Balancing parameter `(var / (e k V))^2`, with `V = max_j var_j`.
    pub t_star: f64,
    pub max_ge_avg: bool,
}

pub fn kkl_report<S: Scalar>(f: &FunctionTable<S>, alpha: f64) -> Result<KklReport> {
    if !f.is_boolean() {
        return Err(Error::NotBoolean);
    }
    let k = f.graph().k();
    if k < 2 {
        return Err(Error::InvalidParameter("KKL report needs k >= 2".into()));
    }
    let variance = f.variance().to_f64_lossy();
    if variance <= 0.0 {
        return Err(Error::ConstantFunction);
    }
    let influences = (0..k)
        .map(|j| directional_form(f, j).map(|v| v.to_f64_lossy()))
        .collect::<Result<Vec<_>>>()?;
    let (argmax, max_influence) = influences
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    let total = dirichlet_form(f)?.to_f64_lossy();
    let kf = k as f64;
    let bound_expr = alpha * variance * kf.ln() / kf;
    let max_var = (0..k)
        .map(|j| f.variance_along(j).map(|v| v.to_f64_lossy()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let t_star = (variance / (std::f64::consts::E * kf * max_var)).powi(2);
    Ok(KklReport {
        max_ge_avg: max_influence >= total - CHECK_SLACK,
        influences,
        max_influence,
        argmax,
        total,
        variance,
        bound_expr,
        ratio: max_influence / bound_expr,
        t_star,
    })
}

/// Invariants recomputed on every extraction.
#[derive(Debug, Clone, Serialize)]
pub struct FriedgutChecks {
    /// `|f - g~|^2 <= eps`.
    pub distance_within_epsilon: bool,
    /// `|J| <= exp(50 k I / (eps alpha))`.
    pub junta_within_bound: bool,
    /// `g~` constant along every coordinate outside `J`.
    pub depends_only_on_junta: bool,
    /// `|f - g~|^2 <= 4 |f - g|^2`.
    pub sign_rounding_within_four: bool,
    /// `sum_{j not in J} <f_j, L f_j> <= <f, L f>`.
    pub tail_energy_bounded: bool,
    /// `sum_j var_j(f) <= (k / 2 Phi) <f, L f>`.
    pub variance_sum_bounded: bool,
}

impl FriedgutChecks {
    pub fn all(&self) -> bool {
        self.distance_within_epsilon
            && self.junta_within_bound
            && self.depends_only_on_junta
            && self.sign_rounding_within_four
            && self.tail_energy_bounded
            && self.variance_sum_bounded
    }
}

#[derive(Debug, Clone)]
pub struct FriedgutResult<S> {
    /// Junta coordinates, ascending.
    pub junta: Vec<usize>,
    /// Coordinates by non-increasing `var_j`.
    pub order: Vec<usize>,
    pub variances: Vec<f64>,
    /// Real truncation `g`.
    pub g: FunctionTable<S>,
    /// `sign(g)`, with `sign(0) = +1`.
    pub g_tilde: FunctionTable<S>,
    /// `|f - g~|^2`.
    pub distance: f64,
    /// `|f - g|^2`.
    pub distance_real: f64,
    /// `ln V = F(eps / 4)`.
    pub log_threshold: f64,
    pub threshold: f64,
    /// `I = <f, L f>`.
    pub energy: f64,
    /// `ln` of the junta-size guarantee.
    pub log_bound: f64,
    pub bound: f64,
    pub checks: FriedgutChecks,
}

/// `F(x) = 2(1 + 1/e) ln(2 Phi x / (e k I)) - 2 k I / (alpha x)`.
pub fn friedgut_log_threshold(x: f64, k: usize, energy: f64, alpha: f64, phi: f64) -> f64 {
    let e = std::f64::consts::E;
    let kf = k as f64;
    2.0 * (1.0 + 1.0 / e) * (2.0 * phi * x / (e * kf * energy)).ln() - 2.0 * kf * energy / (alpha * x)
}

fn sign_with_zero_up<S: Scalar>(v: S) -> S {
    if v < -S::lit(1e-12) {
        -S::one()
    } else {
        S::one()
    }
}

/// `true` when `table` is constant along every coordinate not in `junta`.
pub fn depends_only_on<S: Scalar>(table: &FunctionTable<S>, junta: &[usize]) -> bool {
    let graph = table.graph();
    let shape = Shape {
        n: graph.n(),
        k: graph.k(),
    };
    let values = table.values();
    (0..graph.k()).filter(|c| !junta.contains(c)).all(|axis| {
        let mut constant = true;
        shape.for_each_fiber(axis, |start, stride, _, _| {
            let first = values[start];
            constant &= (1..shape.n).all(|a| values[start + a * stride] == first);
        });
        constant
    })
}

/// Applies random permutations of the base vertices along each coordinate
/// outside `junta` and checks the table is unchanged.
pub fn permutation_invariant<S: Scalar, R: Rng + ?Sized>(
    table: &FunctionTable<S>,
    junta: &[usize],
    rng: &mut R,
    trials: usize,
) -> bool {
    let graph = table.graph();
    let n = graph.n();
    let k = graph.k();
    let len = table.values().len();
    (0..trials).all(|_| {
        let perms: Vec<Vec<usize>> = (0..k)
            .map(|c| {
                let mut p: Vec<usize> = (0..n).collect();
                if !junta.contains(&c) {
                    p.shuffle(rng);
                }
                p
            })
            .collect();
        (0..len).all(|idx| {
            let x = graph.tuple_of(idx);
            let y: Vec<usize> = x.iter().enumerate().map(|(c, &v)| perms[c][v]).collect();
            table.values()[idx] == table.value_at(&y)
        })
    })
}

/// Constructive junta approximation of a `{-1,+1}` function.
///
/// Runs with `eps' = eps / 4`: threshold `V = exp(F(eps'))`, junta
/// `J = {j : var_j >= V}`, `g` = Fourier truncation to multi-indices supported
/// on `J`, and `g~ = sign(g)`.
pub fn friedgut_extract<S: Scalar>(
    f: &FunctionTable<S>,
    basis: &SpectralBasis<S>,
    epsilon: f64,
    alpha: f64,
    phi: f64,
) -> Result<FriedgutResult<S>> {
    if !f.is_boolean() {
        return Err(Error::NotBoolean);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if !(alpha > 0.0 && phi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} and phi = {phi} must be positive"
        )));
    }
    let graph = f.graph();
    let k = graph.k();
    let energy = dirichlet_form(f)?.to_f64_lossy();
    let variances = (0..k)
        .map(|j| f.variance_along(j).map(|v| v.to_f64_lossy()))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));

    let log_bound = JUNTA_EXPONENT * k as f64 * energy / (epsilon * alpha);
    let variance = f.variance().to_f64_lossy();

    if variance <= VARIANCE_FLOOR {
        // Constant function: empty junta, majority constant.
        let majority = sign_with_zero_up(f.mean());
        let g_tilde = FunctionTable::constant(graph, majority)?;
        let distance = f.distance_sq(&g_tilde).to_f64_lossy();
        let checks = FriedgutChecks {
            distance_within_epsilon: distance <= epsilon + CHECK_SLACK,
            junta_within_bound: true,
            depends_only_on_junta: true,
            sign_rounding_within_four: true,
            tail_energy_bounded: true,
            variance_sum_bounded: true,
        };
        return Ok(FriedgutResult {
            junta: Vec::new(),
            order,
            variances,
            g: g_tilde.clone(),
            g_tilde,
            distance,
            distance_real: distance,
            log_threshold: f64::INFINITY,
            threshold: f64::INFINITY,
            energy,
            log_bound,
            bound: log_bound.exp(),
            checks,
        });
    }
    assert!(energy > 0.0, "non-constant function with zero energy on a connected graph");

    let eps_inner = epsilon / 4.0;
    let log_threshold = friedgut_log_threshold(eps_inner, k, energy, alpha, phi);
    let threshold = log_threshold.exp();
    let mut junta: Vec<usize> = (0..k)
        .filter(|&j| variances[j] > VARIANCE_FLOOR && variances[j].ln() >= log_threshold)
        .collect();
    junta.sort_unstable();

    let coeffs = fourier_transform(f, basis)?;
    let kept = coeffs.filtered(|idx| {
        idx.iter()
            .enumerate()
            .all(|(j, &i)| i == 0 || junta.binary_search(&j).is_ok())
    });
    let g = inverse_transform(&kept, basis, graph)?;
    let g_tilde = g.map(sign_with_zero_up);
    let distance = f.distance_sq(&g_tilde).to_f64_lossy();
    let distance_real = f.distance_sq(&g).to_f64_lossy();

    let dec = decompose(f, basis)?;
    let tail_energy = compensated_sum(
        dec.components
            .iter()
            .enumerate()
            .filter(|(j, _)| junta.binary_search(j).is_err())
            .map(|(_, fj)| dirichlet_form(fj))
            .collect::<Result<Vec<_>>>()?,
    )
    .to_f64_lossy();
    let var_sum: f64 = variances.iter().sum();

    let checks = FriedgutChecks {
        distance_within_epsilon: distance <= epsilon + CHECK_SLACK,
        junta_within_bound: junta.is_empty() || (junta.len() as f64).ln() <= log_bound,
        depends_only_on_junta: depends_only_on(&g_tilde, &junta),
        sign_rounding_within_four: distance <= 4.0 * distance_real + CHECK_SLACK,
        tail_energy_bounded: tail_energy <= energy + CHECK_SLACK,
        variance_sum_bounded: var_sum <= k as f64 / (2.0 * phi) * energy + CHECK_SLACK,
    };

    Ok(FriedgutResult {
        junta,
        order,
        variances,
        g,
        g_tilde,
        distance,
        distance_real,
        log_threshold,
        threshold,
        energy,
        log_bound,
        bound: log_bound.exp(),
        checks,
    })
}
