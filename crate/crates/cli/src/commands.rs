use std::sync::Arc;

use anyhow::Result;
use cartesian_influence::function::{check_l2_l1_bounds, CHECK_SLACK};
use cartesian_influence::isoperimetry::{
    self, conductance_bruteforce, log_sobolev_estimate, product_scaling_report, LogSobolevOptions,
};
use cartesian_influence::kkl::{self, permutation_invariant};
use cartesian_influence::tightness::{self, ConsecutiveOnes};
use cartesian_influence::{
    corollary_check, decompose, eigendecompose, friedgut_extract, kkl_report, Function, Product,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::input::{load_base, load_function, BaseGraph};
use crate::report::Report;
use crate::{FriedgutArgs, FunctionKind, GraphArgs, KklArgs};

pub fn isoperimetry(args: &GraphArgs) -> Result<Report> {
    let mut report = Report::new("isoperimetry", args)?;
    report.tolerance("phi_ratio", isoperimetry::PHI_RATIO_TOLERANCE);
    report.tolerance("lambda1_ratio", isoperimetry::LAMBDA_RATIO_TOLERANCE);
    report.tolerance("alpha_ratio_advisory", isoperimetry::ALPHA_RATIO_TOLERANCE);
    report.tolerance("chain_alpha_relative", isoperimetry::CHAIN_ALPHA_TOLERANCE);
    report.tolerance("chain_phi", isoperimetry::CHAIN_PHI_TOLERANCE);
    report.tolerance("conductance_tie_relative", isoperimetry::TIE_TOLERANCE);

    let base = load_base(args.graph.as_deref(), args.builtin)?;
    let opts = LogSobolevOptions {
        seed: args.seed,
        ..LogSobolevOptions::default()
    };
    let product = Product::new(Arc::clone(&base.graph), args.k_or_default())?.with_dense_cap(args.max_dense);
    match product_scaling_report(&product, &opts) {
        Ok(scaling) => {
            if let Some(ok) = scaling.phi_ratio_ok {
                report.check("phi_ratio", ok);
            }
            report.check("lambda1_ratio", scaling.lambda1_ratio_ok);
            report.result("scaling", &scaling)?;
            report.result("expected_ratio", 1.0 / scaling.k as f64)?;
        }
        Err(err) => report.fail_with(err),
    }
    if base.graph.n() <= isoperimetry::MAX_BRUTE_FORCE_VERTICES && report.error.is_none() {
        match isoperimetry::chain_check(base.graph.as_ref(), &opts) {
            Ok(chain) => {
                report.check("chain", chain.passed);
                report.result("chain", &chain)?;
            }
            Err(err) => report.fail_with(err),
        }
    }
    if let Some(alpha) = base.known_alpha {
        report.result("alpha_exact_base", alpha)?;
    }
    Ok(report.finish())
}

#[derive(Serialize)]
struct AlphaChoice {
    value: f64,
    /// `user`, `exact` or `estimate` (optimizer upper bound, advisory).
    source: &'static str,
}

fn choose_alpha(explicit: Option<f64>, base: &BaseGraph, seed: u64) -> Result<AlphaChoice> {
    if let Some(value) = explicit {
        return Ok(AlphaChoice { value, source: "user" });
    }
    if let Some(value) = base.known_alpha {
        return Ok(AlphaChoice { value, source: "exact" });
    }
    let basis = eigendecompose(base.graph.as_ref())?;
    let opts = LogSobolevOptions {
        seed,
        ..LogSobolevOptions::default()
    };
    let value = log_sobolev_estimate(base.graph.as_ref(), &basis, &opts)?.alpha_hat;
    Ok(AlphaChoice {
        value,
        source: "estimate",
    })
}

fn build_functions(
    kind: FunctionKind,
    product: &Product,
    count: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> cartesian_influence::Result<Vec<Function>> {
    Ok(match kind {
        FunctionKind::Dictator => vec![Function::dictator(product, 0)?],
        FunctionKind::NoisyDictator => vec![Function::noisy_dictator(product, 0, noise, rng)?],
        FunctionKind::Parity => vec![Function::parity(product)?],
        FunctionKind::Constant => vec![Function::constant(product, 1.0)?],
        FunctionKind::Random => (0..count)
            .map(|_| Function::random_boolean(product, rng))
            .collect::<cartesian_influence::Result<_>>()?,
        FunctionKind::Balanced => (0..count)
            .map(|_| Function::random_balanced(product, rng))
            .collect::<cartesian_influence::Result<_>>()?,
        FunctionKind::ConsecutiveOnes => unreachable!("handled by the Monte-Carlo path"),
    })
}

fn default_ts() -> Vec<f64> {
    vec![(-2.0f64).exp(), 0.05, 0.01]
}

pub fn kkl(args: &KklArgs) -> Result<Report> {
    let mut report = Report::new("kkl", args)?;
    report.tolerance("check_slack", CHECK_SLACK);
    let base = load_base(args.graph.graph.as_deref(), args.graph.builtin)?;
    if matches!(args.kind, FunctionKind::ConsecutiveOnes) && args.function.is_none() {
        consecutive_ones(args, &base, &mut report)?;
        return Ok(report.finish());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.graph.seed);
    let functions = match &args.function {
        Some(path) => vec![load_function(path, &base.graph, args.graph.k, args.graph.max_dense)?],
        None => {
            let product = Product::new(Arc::clone(&base.graph), args.graph.k_or_default())?
                .with_dense_cap(args.graph.max_dense);
            match build_functions(args.kind, &product, args.samples.unwrap_or(32), args.noise, &mut rng) {
                Ok(fs) => fs,
                Err(err) => {
                    report.fail_with(err);
                    return Ok(report.finish());
                }
            }
        }
    };
    if let Err(err) = sweep(args, &base, &functions, &mut report) {
        report.fail_with(format!("{err:#}"));
    }
    Ok(report.finish())
}

fn sweep(args: &KklArgs, base: &BaseGraph, functions: &[Function], report: &mut Report) -> Result<()> {
    let ts = if args.t.is_empty() { default_ts() } else { args.t.clone() };
    let alpha = choose_alpha(args.alpha, base, args.graph.seed)?;
    let basis = eigendecompose(base.graph.as_ref())?;
    report.result("alpha", &alpha)?;
    report.result("t_values", &ts)?;

    let mut rows = Vec::new();
    let (mut max_ge_avg, mut corollary_ok, mut norms_ok) = (true, true, true);
    let mut min_ratio = f64::INFINITY;
    let mut skipped_constant = 0usize;
    for f in functions {
        // Random draws can be constant; only an explicitly chosen function is an error.
        let kkl = match kkl_report(f, alpha.value) {
            Err(cartesian_influence::Error::ConstantFunction) if functions.len() > 1 => {
                skipped_constant += 1;
                continue;
            }
            other => other?,
        };
        let dec = decompose(f, &basis)?;
        let norms = check_l2_l1_bounds(f, &dec)?;
        let corollaries = ts
            .iter()
            .map(|&t| corollary_check(f, &dec, t, alpha.value))
            .collect::<cartesian_influence::Result<Vec<_>>>()?;
        let cor_passed = corollaries.iter().all(|c| c.passed);
        max_ge_avg &= kkl.max_ge_avg;
        corollary_ok &= cor_passed;
        norms_ok &= norms.passed;
        min_ratio = min_ratio.min(kkl.ratio);
        rows.push(json!({
            "kkl": kkl,
            "corollary_passed": cor_passed,
            "corollary_worst_slack": corollaries
                .iter()
                .flat_map(|c| c.terms.iter().map(|t| t.lhs - t.rhs))
                .fold(f64::INFINITY, f64::min),
            "norm_bounds_passed": norms.passed,
        }));
    }
    report.check("max_influence_ge_average", max_ge_avg);
    report.check("corollary", corollary_ok);
    report.check("l2_l1_bounds", norms_ok);
    if rows.is_empty() {
        anyhow::bail!("every sampled function is constant");
    }
    report.result("functions", rows)?;
    report.result("skipped_constant", skipped_constant)?;
    report.result("min_ratio", min_ratio)?;
    Ok(())
}

fn consecutive_ones(args: &KklArgs, base: &BaseGraph, report: &mut Report) -> Result<()> {
    let Some(neck) = &base.necklace else {
        report.fail_with("consecutive-ones is defined on the necklace builtin (necklace:R)");
        return Ok(());
    };
    let k = args.graph.k_or_default();
    let samples = args.samples.unwrap_or(100_000);
    let f = match ConsecutiveOnes::new(neck, k) {
        Ok(f) => f,
        Err(err) => {
            report.fail_with(err);
            return Ok(());
        }
    };
    let seed = args.graph.seed;
    let influence = tightness::influence_monte_carlo(&f, neck.graph(), k, 0, samples, seed)?;
    let negative = tightness::negative_probability_monte_carlo(&f, neck.graph(), k, samples, seed ^ 1)?;
    let run_mass: f64 = (0..neck.graph().n())
        .filter(|&c| f.class_has_run(c))
        .map(|c| neck.graph().pi()[c])
        .sum();
    let kr = (k * neck.bits()) as f64;
    let target = (1.0 - 1.0 / k as f64).powi(k as i32);
    report.result("classes", neck.graph().n())?;
    report.result("run_length", f.run_length())?;
    report.result("influence_coord0", influence)?;
    report.result("log_kr_over_kr", kr.log2() / kr)?;
    report.result("influence_over_log_kr_ratio", influence.estimate / (kr.log2() / kr))?;
    report.result("negative_probability", negative)?;
    report.result("negative_probability_exact", (1.0 - run_mass).powi(k as i32))?;
    report.result("negative_probability_target", target)?;
    report.tolerance("negative_probability_standard_errors", 3.0);
    report.check(
        "negative_probability_within_3se",
        (negative.estimate - target).abs() <= 3.0 * negative.std_error,
    );
    Ok(())
}

pub fn friedgut(args: &FriedgutArgs) -> Result<Report> {
    let mut report = Report::new("friedgut", args)?;
    report.tolerance("check_slack", CHECK_SLACK);
    report.tolerance("variance_floor", kkl::VARIANCE_FLOOR);
    let base = load_base(args.graph.graph.as_deref(), args.graph.builtin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.graph.seed);
    let f = match &args.function {
        Some(path) => load_function(path, &base.graph, args.graph.k, args.graph.max_dense)?,
        None => {
            let product = Product::new(Arc::clone(&base.graph), args.graph.k.unwrap_or(8))?
                .with_dense_cap(args.graph.max_dense);
            if matches!(
                args.kind,
                FunctionKind::Random | FunctionKind::Balanced | FunctionKind::ConsecutiveOnes
            ) {
                anyhow::bail!("friedgut takes one function: dictator, noisy-dictator, parity, constant or a file");
            }
            match build_functions(args.kind, &product, 1, args.noise, &mut rng) {
                Ok(mut fs) => fs.remove(0),
                Err(err) => {
                    report.fail_with(err);
                    return Ok(report.finish());
                }
            }
        }
    };
    if let Err(err) = extract(args, &base, &f, &mut rng, &mut report) {
        report.fail_with(format!("{err:#}"));
    }
    Ok(report.finish())
}

fn extract(
    args: &FriedgutArgs,
    base: &BaseGraph,
    f: &Function,
    rng: &mut ChaCha8Rng,
    report: &mut Report,
) -> Result<()> {
    let alpha = choose_alpha(args.alpha, base, args.graph.seed)?;
    let phi = conductance_bruteforce(base.graph.as_ref())?;
    let basis = eigendecompose(base.graph.as_ref())?;
    let result = friedgut_extract(f, &basis, args.epsilon, alpha.value, phi.phi)?;
    let invariant = permutation_invariant(&result.g_tilde, &result.junta, rng, args.samples);
    let checks = &result.checks;
    report.check("distance_within_epsilon", checks.distance_within_epsilon);
    report.check("junta_within_bound", checks.junta_within_bound);
    report.check("depends_only_on_junta", checks.depends_only_on_junta);
    report.check("permutation_invariant", invariant);
    report.check("sign_rounding_within_four", checks.sign_rounding_within_four);
    report.check("tail_energy_bounded", checks.tail_energy_bounded);
    report.check("variance_sum_bounded", checks.variance_sum_bounded);
    report.result(
        "extraction",
        json!({
            "junta": result.junta,
            "order": result.order,
            "variances": result.variances,
            "distance": result.distance,
            "distance_real": result.distance_real,
            "log_threshold": finite_or_null(result.log_threshold),
            "threshold": finite_or_null(result.threshold),
            "energy": result.energy,
            "log_bound": result.log_bound,
            "bound": finite_or_null(result.bound),
            "k": f.graph().k(),
            "g_tilde": result.g_tilde.values(),
        }),
    )?;
    report.result("alpha", &alpha)?;
    report.result("phi", json!({"phi": phi.phi, "witness": phi.witness}))?;
    Ok(())
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}
