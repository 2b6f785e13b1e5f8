//! Acceptance gate: ten criteria, one PASS/FAIL line each. Exits non-zero when
//! any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cartesian_influence::function::{check_l2_l1_bounds, efron_stein_check, CHECK_SLACK};
use cartesian_influence::isoperimetry::{chain_check, complete_graph_log_sobolev};
use cartesian_influence::kkl::permutation_invariant;
use cartesian_influence::sdp::{
    self, basic_sdp_opt, check_triangle, cut_mixture_vectors, gram_vectors, lift_lasserre, lift_sherali_adams,
    lift_vectors, random_cut_mixture, LasserreSolution, LocalDistributions, SdpSolution,
};
use cartesian_influence::tightness::{
    build_necklace, influence_monte_carlo, negative_probability_monte_carlo, ConsecutiveOnes,
};
use cartesian_influence::{
    conductance_bruteforce, corollary_check, decompose, eigendecompose, friedgut_extract, kkl_report,
    log_sobolev_estimate, Function, Graph, LogSobolevOptions, Product,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const TOL: f64 = 1e-9;

fn family() -> Vec<(&'static str, Graph)> {
    vec![
        ("K2", Graph::complete(2).unwrap()),
        ("K3", Graph::complete(3).unwrap()),
        ("P3", Graph::path(3).unwrap()),
        ("C5", Graph::cycle(5).unwrap()),
    ]
}

/// `(name, base, k)` pairs for the scaling criteria.
fn scaling_cases() -> Vec<(String, Arc<Graph>, usize)> {
    let mut cases: Vec<_> = family()
        .into_iter()
        .map(|(name, g)| (name.to_string(), Arc::new(g), 2))
        .collect();
    let k2 = Arc::new(Graph::complete(2).unwrap());
    cases.extend([3, 4].map(|k| ("K2".to_string(), Arc::clone(&k2), k)));
    cases
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let elapsed = start.elapsed();
    ensure(elapsed < budget, || format!("took {elapsed:.1?}, budget {budget:?}"))
}

fn conductance_scaling() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (name, g, k) in scaling_cases() {
        let product = Product::new(Arc::clone(&g), k).map_err(|e| e.to_string())?;
        let base = conductance_bruteforce(g.as_ref()).map_err(|e| e.to_string())?.phi;
        let lifted = conductance_bruteforce(&product.materialize().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?
            .phi;
        let err = (lifted - base / k as f64).abs();
        worst = worst.max(err);
        ensure(err <= TOL, || format!("{name}^{k}: Phi = {lifted}, Phi(G)/k = {}", base / k as f64))?;
    }
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!("max |Phi(G^k) - Phi(G)/k| = {worst:.1e} over 6 cases"))
}

fn spectral_scaling() -> Outcome {
    let mut worst = 0.0f64;
    for (name, g, k) in scaling_cases() {
        let basis = eigendecompose(g.as_ref()).map_err(|e| e.to_string())?;
        let product = Product::new(Arc::clone(&g), k).map_err(|e| e.to_string())?;
        let dense = product.materialize().map_err(|e| e.to_string())?;
        let direct = eigendecompose(&dense).map_err(|e| e.to_string())?;
        let tensor = basis.product_gap(k);
        let err = (tensor - basis.gap() / k as f64)
            .abs()
            .max((direct.gap() - tensor).abs())
            .max(direct.max_residual(&dense))
            .max(basis.max_residual(g.as_ref()));
        worst = worst.max(err);
        ensure(err < TOL, || format!("{name}^{k}: tensor {tensor}, direct {}", direct.gap()))?;
    }
    Ok(format!("max residual {worst:.1e} over 6 cases"))
}

fn log_sobolev_scaling() -> Outcome {
    let start = Instant::now();
    let opts = LogSobolevOptions::default();
    let alpha_of = |g: &Graph| -> Result<f64, String> {
        let basis = eigendecompose(g).map_err(|e| e.to_string())?;
        Ok(log_sobolev_estimate(g, &basis, &opts).map_err(|e| e.to_string())?.alpha_hat)
    };
    let k2 = Arc::new(Graph::complete(2).unwrap());
    let a1 = alpha_of(&k2)?;
    let k2sq = Product::new(Arc::clone(&k2), 2).unwrap().materialize().map_err(|e| e.to_string())?;
    let a2 = alpha_of(&k2sq)?;
    ensure((a1 - 2.0).abs() <= 0.02, || format!("alpha(K2) = {a1}"))?;
    ensure((a2 - 1.0).abs() <= 0.05, || format!("alpha(K2^2) = {a2}"))?;

    let mut graphs: Vec<(String, Graph)> = family().into_iter().map(|(n, g)| (n.to_string(), g)).collect();
    for (name, g) in family() {
        let p = Product::new(Arc::new(g), 2).unwrap().materialize().map_err(|e| e.to_string())?;
        graphs.push((format!("{name}^2"), p));
    }
    for (name, g) in &graphs {
        let chain = chain_check(g, &opts).map_err(|e| e.to_string())?;
        ensure(chain.passed, || {
            format!("{name}: alpha {} lambda1 {} phi {}", chain.alpha_hat, chain.lambda1, chain.phi)
        })?;
    }
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!("alpha(K2) = {a1:.6}, alpha(K2^2) = {a2:.6}, chain holds on {} graphs", graphs.len()))
}

fn lemma_suite() -> Outcome {
    const FUNCTIONS: usize = 200;
    let start = Instant::now();
    let ts = [(-2.0f64).exp(), 0.05, 0.01];
    let k2 = Arc::new(Graph::complete(2).unwrap());
    let k3 = Arc::new(Graph::complete(3).unwrap());
    let cases = [
        (Arc::clone(&k2), 1, complete_graph_log_sobolev(2)),
        (Arc::clone(&k2), 2, complete_graph_log_sobolev(2)),
        (Arc::clone(&k2), 3, complete_graph_log_sobolev(2)),
        (Arc::clone(&k3), 2, complete_graph_log_sobolev(3)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for (g, k, alpha) in cases {
        let alpha = alpha.map_err(|e| e.to_string())?;
        let basis = eigendecompose(g.as_ref()).map_err(|e| e.to_string())?;
        let product = Product::new(Arc::clone(&g), k).unwrap();
        let label = format!("K{}^{k}", g.n());
        let mut done = 0;
        while done < FUNCTIONS {
            let f = Function::random_boolean(&product, &mut rng).map_err(|e| e.to_string())?;
            if f.variance() <= 0.0 {
                continue;
            }
            let dec = decompose(&f, &basis).map_err(|e| e.to_string())?;
            let norms = check_l2_l1_bounds(&f, &dec).map_err(|e| e.to_string())?;
            ensure(norms.passed, || format!("{label}: norm bound violated"))?;
            let cross = dec.max_cross_inner();
            ensure(cross <= CHECK_SLACK, || format!("{label}: <f_i, f_j> = {cross}"))?;
            let sum_err = (dec.total_norm_sq() - f.variance()).abs();
            ensure(sum_err <= CHECK_SLACK, || format!("{label}: sum |f_j|^2 - var = {sum_err}"))?;
            for t in ts {
                let cor = corollary_check(&f, &dec, t, alpha).map_err(|e| e.to_string())?;
                ensure(cor.passed, || format!("{label}: corollary fails at t = {t}"))?;
            }
            done += 1;
        }
        checked += done;
    }
    within_budget(start, Duration::from_secs(180))?;
    Ok(format!("{checked} functions, zero violations"))
}

fn efron_stein() -> Outcome {
    let product = Product::new(Arc::new(Graph::complete(3).unwrap()), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_gap = f64::INFINITY;
    for i in 0..500 {
        let f = Function::random_real(&product, &mut rng).map_err(|e| e.to_string())?;
        let es = efron_stein_check(&f).map_err(|e| e.to_string())?;
        min_gap = min_gap.min(es.lhs - es.rhs);
        ensure(es.passed, || format!("function {i}: {} < {}", es.lhs, es.rhs))?;
    }
    Ok(format!("500 functions, min(sum E var_j - var) = {min_gap:.3e}"))
}

fn friedgut() -> Outcome {
    let start = Instant::now();
    let k2 = Arc::new(Graph::complete(2).unwrap());
    let basis = eigendecompose(k2.as_ref()).map_err(|e| e.to_string())?;
    let phi = conductance_bruteforce(k2.as_ref()).map_err(|e| e.to_string())?.phi;
    let alpha = complete_graph_log_sobolev(2).map_err(|e| e.to_string())?;
    let cube = Product::new(Arc::clone(&k2), 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let dictator = Function::dictator(&cube, 0).unwrap();
    let a = friedgut_extract(&dictator, &basis, 0.1, alpha, phi).map_err(|e| e.to_string())?;
    ensure(a.junta == [0], || format!("dictator junta {:?}", a.junta))?;
    ensure(a.distance.abs() <= TOL, || format!("dictator distance {}", a.distance))?;

    let noisy = Function::noisy_dictator(&cube, 0, 0.01, &mut rng).map_err(|e| e.to_string())?;
    let b = friedgut_extract(&noisy, &basis, 0.2, alpha, phi).map_err(|e| e.to_string())?;
    ensure(b.distance <= 0.2, || format!("noisy distance {}", b.distance))?;
    ensure((b.junta.len() as f64).ln() <= b.log_bound, || {
        format!("|J| = {} above exp({})", b.junta.len(), b.log_bound)
    })?;

    for (name, r) in [("dictator", &a), ("noisy", &b)] {
        ensure(permutation_invariant(&r.g_tilde, &r.junta, &mut rng, 32), || {
            format!("{name}: g~ changes under permutations outside J")
        })?;
    }
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "dictator J = {:?}, noisy J = {:?} distance {:.4} (ln bound {:.1})",
        a.junta, b.junta, b.distance, b.log_bound
    ))
}

fn kkl_trend() -> Outcome {
    const TRIALS: usize = 50;
    let k2 = Arc::new(Graph::complete(2).unwrap());
    let basis = eigendecompose(k2.as_ref()).map_err(|e| e.to_string())?;
    let alpha = log_sobolev_estimate(k2.as_ref(), &basis, &LogSobolevOptions::default())
        .map_err(|e| e.to_string())?
        .alpha_hat;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut minima = Vec::new();
    for k in [4, 8, 16] {
        let product = Product::new(Arc::clone(&k2), k).unwrap();
        let mut min_ratio = f64::INFINITY;
        for _ in 0..TRIALS {
            let f = Function::random_balanced(&product, &mut rng).map_err(|e| e.to_string())?;
            let report = kkl_report(&f, alpha).map_err(|e| e.to_string())?;
            ensure(report.max_ge_avg, || {
                format!("k = {k}: max influence {} < {}", report.max_influence, report.total)
            })?;
            min_ratio = min_ratio.min(report.ratio);
        }
        minima.push((k, min_ratio));
    }
    ensure(minima.iter().all(|&(_, r)| r > 0.0 && r.is_finite()), || format!("{minima:?}"))?;
    ensure(minima.windows(2).all(|w| w[1].1 >= w[0].1), || {
        format!("minimum ratio decreases in k: {minima:?}")
    })?;
    let shown: Vec<String> = minima.iter().map(|(k, r)| format!("k={k}: {r:.3}")).collect();
    Ok(format!("alpha_hat = {alpha:.4}, min ratio {}", shown.join(", ")))
}

fn sdp_lifting() -> Outcome {
    let start = Instant::now();
    let k2 = Arc::new(Graph::complete(2).unwrap());
    let (opt, witness) = basic_sdp_opt(k2.as_ref()).map_err(|e| e.to_string())?;
    ensure((opt - 2.0).abs() <= TOL, || format!("opt(K2) = {opt}"))?;
    let lift = lift_vectors(&witness, &k2, 2, 8).map_err(|e| e.to_string())?;
    ensure(lift.passed && !lift.partial, || "vector lift identities fail".into())?;
    ensure((lift.solution.objective - 1.0).abs() <= TOL, || {
        format!("lifted objective {}", lift.solution.objective)
    })?;
    ensure((lift.solution.spread - 1.0).abs() <= TOL, || format!("lifted spread {}", lift.solution.spread))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let small: Vec<(&str, Graph)> = vec![
        ("K2", Graph::complete(2).unwrap()),
        ("K3", Graph::complete(3).unwrap()),
        ("K4", Graph::complete(4).unwrap()),
        ("P3", Graph::path(3).unwrap()),
        ("P4", Graph::path(4).unwrap()),
        ("C4", Graph::cycle(4).unwrap()),
    ];
    let mut triples = 0;
    for (name, g) in small {
        let g = Arc::new(g);
        let cuts = random_cut_mixture::<f64, _>(g.n(), 8, &mut rng).map_err(|e| e.to_string())?;
        let vectors = cut_mixture_vectors(g.n(), &cuts).map_err(|e| e.to_string())?;
        let sol = SdpSolution::new(g.as_ref(), vectors)
            .and_then(|s| s.normalized(g.as_ref()))
            .map_err(|e| e.to_string())?;
        let before = check_triangle(&sol.vectors, sdp::TRIANGLE_BUDGET, 8);
        ensure(before.passed() && !before.partial, || format!("{name}: base violates triangle"))?;
        let lifted = lift_vectors(&sol, &g, 2, 8).map_err(|e| e.to_string())?;
        let after = check_triangle(&lifted.solution.vectors, sdp::TRIANGLE_BUDGET, 8);
        ensure(!after.partial, || format!("{name}^2: triangle check sampled"))?;
        ensure(after.passed(), || format!("{name}^2: {} violations", after.violations.len()))?;
        triples += after.triples_checked;
    }

    let cuts = random_cut_mixture::<f64, _>(2, 8, &mut rng).map_err(|e| e.to_string())?;
    let ls = LasserreSolution::from_cut_mixture(2, 2, &cuts).map_err(|e| e.to_string())?;
    let las = lift_lasserre(&ls, &k2, 2, 2).map_err(|e| e.to_string())?;
    ensure(las.delta.passed && las.delta.quadruples > 0, || {
        format!("Lasserre delta error {}", las.delta.max_error)
    })?;

    let ld = LocalDistributions::from_cut_mixture(2, 2, &cuts).map_err(|e| e.to_string())?;
    let vectors = gram_vectors(&ld.gram().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let sa = lift_sherali_adams(&ld, &vectors, &k2, 2).map_err(|e| e.to_string())?;
    let r = &sa.report;
    ensure(r.passed && r.marginal_error <= TOL && r.vector_error <= TOL, || {
        format!("SA marginal {} vector {}", r.marginal_error, r.vector_error)
    })?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "opt 2, lifted objective {:.12}, {triples} lifted triples, {} Lasserre quadruples, SA error {:.1e}",
        lift.solution.objective,
        las.delta.quadruples,
        r.marginal_error.max(r.vector_error)
    ))
}

/// Binary necklaces of length `r` by Burnside, minus the two monochromatic ones.
fn burnside_necklaces(r: usize) -> usize {
    let phi = |n: usize| (1..=n).filter(|&a| gcd(a, n) == 1).count();
    let total: usize = (1..=r).filter(|d| r % d == 0).map(|d| phi(d) << (r / d)).sum();
    total / r - 2
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn tightness() -> Outcome {
    const SAMPLES: usize = 100_000;
    let start = Instant::now();
    let mut failures = Vec::new();
    for r in [3, 4, 5] {
        let n = build_necklace::<f64>(r).map_err(|e| e.to_string())?.graph().n();
        if n != burnside_necklaces(r) {
            failures.push(format!("R={r}: {n} classes, expected {}", burnside_necklaces(r)));
        }
    }

    let neck16 = build_necklace::<f64>(16).map_err(|e| e.to_string())?;
    let mut probs = Vec::new();
    for k in [4, 8] {
        let f = ConsecutiveOnes::new(&neck16, k).map_err(|e| e.to_string())?;
        let est = negative_probability_monte_carlo(&f, neck16.graph(), k, SAMPLES, 9).map_err(|e| e.to_string())?;
        let target = (1.0 - 1.0 / k as f64).powi(k as i32);
        if (est.estimate - target).abs() > 3.0 * est.std_error {
            failures.push(format!("k={k}: Pr[f=-1] more than 3 SE from (1-1/k)^k"));
        }
        probs.push(format!("k={k}: {:.4} +- {:.4} vs {target:.4}", est.estimate, est.std_error));
    }

    let mut ratios = Vec::new();
    for r in [8, 12, 16] {
        let neck = build_necklace::<f64>(r).map_err(|e| e.to_string())?;
        let mut previous = f64::INFINITY;
        for k in [2, 4, 8, 16] {
            let f = ConsecutiveOnes::new(&neck, k).map_err(|e| e.to_string())?;
            let est = influence_monte_carlo(&f, neck.graph(), k, 0, SAMPLES, 9).map_err(|e| e.to_string())?;
            if est.estimate >= previous {
                failures.push(format!("R={r}: influence does not decrease at k={k}"));
            }
            previous = est.estimate;
            let kr = (k * r) as f64;
            ratios.push((k * r, est.estimate / (kr.log2() / kr)));
        }
    }
    ratios.sort_by_key(|&(kr, _)| kr);
    let (first, last) = (ratios[0].1, ratios[ratios.len() - 1].1);
    if !(first > 0.0 && last <= 2.0 * first) {
        failures.push(format!("influence / (log kR / kR) grows from {first:.3} to {last:.3}"));
    }
    if let Err(e) = within_budget(start, Duration::from_secs(300)) {
        failures.push(e);
    }
    let summary = format!(
        "Pr[f=-1] {}; influence ratio {first:.3} at kR={} to {last:.3} at kR={}",
        probs.join(", "),
        ratios[0].0,
        ratios[ratios.len() - 1].0
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn run_cli(bin: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
    if out.status.code() == Some(1) {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_analyze"));
    let runs: [&[&str]; 7] = [
        &["isoperimetry", "--builtin", "cycle:5", "--seed", "3"],
        &["kkl", "--builtin", "kq:3", "--k", "2", "--fn", "random", "--samples", "16", "--seed", "3"],
        &["kkl", "--builtin", "k2", "--k", "6", "--fn", "balanced", "--samples", "8", "--seed", "3"],
        &["kkl", "--builtin", "necklace:10", "--k", "4", "--fn", "consecutive-ones", "--samples", "20000", "--seed", "3"],
        &["friedgut", "--builtin", "k2", "--seed", "3"],
        &["sdp-lift", "--builtin", "path:4", "--seed", "3"],
        &["sdp-lift", "--builtin", "kq:3", "--k", "3", "--seed", "3"],
    ];
    for args in runs {
        let a = run_cli(bin, args)?;
        let b = run_cli(bin, args)?;
        ensure(!a.is_empty() && a == b, || format!("{args:?}: reports differ"))?;
    }
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_cli(bin, &["examples", "--out", d.path().to_str().unwrap()])?;
    }
    let mut files = 0;
    for entry in std::fs::read_dir(dirs[0].path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = std::fs::read(dirs[0].path().join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(&name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("examples: {name:?} differs"))?;
        files += 1;
    }
    Ok(format!("{} commands and {files} example files byte-identical", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("conductance scaling", conductance_scaling),
        ("spectral scaling", spectral_scaling),
        ("log-Sobolev scaling", log_sobolev_scaling),
        ("decomposition lemmas", lemma_suite),
        ("Efron-Stein", efron_stein),
        ("junta extraction", friedgut),
        ("KKL trend", kkl_trend),
        ("SDP lifting", sdp_lifting),
        ("necklace tightness", tightness),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("acceptance {} {name}: PASS ({detail}) [{elapsed:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {} {name}: FAIL ({detail}) [{elapsed:.1?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
