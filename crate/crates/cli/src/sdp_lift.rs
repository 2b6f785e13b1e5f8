use std::sync::Arc;

use anyhow::Result;
use cartesian_influence::sdp::{
    self, basic_sdp_opt, check_triangle, cut_mixture_vectors, gram_vectors, lift_lasserre, lift_sherali_adams,
    lift_vectors, random_cut_mixture, LasserreFile, LasserreSolution, LocalDistributions, SaFile, SdpFile,
    SdpSolution, VectorLift,
};
use cartesian_influence::Graph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::input::{load_base, read_json};
use crate::report::Report;
use crate::SdpArgs;

/// Cuts drawn for the default triangle, Lasserre and Sherali-Adams inputs.
const DEFAULT_CUTS: usize = 8;

type Section<'a> = Box<dyn FnOnce(&mut Report, &mut ChaCha8Rng) -> Result<()> + 'a>;

fn lift_summary(lift: &VectorLift<f64>) -> Value {
    json!({
        "k": lift.k,
        "base_objective": lift.base_objective,
        "objective": lift.solution.objective,
        "spread": lift.solution.spread,
        "dimension": lift.solution.d,
        "gram_error": lift.gram_error,
        "pairs_checked": lift.pairs_checked,
        "spread_error": lift.spread_error,
        "objective_error": lift.objective_error,
        "partial": lift.partial,
    })
}

pub fn run(args: &SdpArgs) -> Result<Report> {
    let mut report = Report::new("sdp-lift", args)?;
    report.tolerance("sdp", sdp::SDP_TOLERANCE);
    let base = load_base(args.graph.graph.as_deref(), args.graph.builtin)?.graph;
    let n = base.n();
    let k = args.graph.k_or_default();
    let seed = args.graph.seed;

    // Parse every supplied file up front so schema problems are usage errors.
    let sdp_file: Option<SdpFile> = args.sdp.as_deref().map(read_json).transpose()?;
    let lasserre_file: Option<LasserreFile> = args.lasserre.as_deref().map(read_json).transpose()?;
    let sa_file: Option<SaFile> = args.sa.as_deref().map(read_json).transpose()?;
    let supplied = match &sdp_file {
        Some(file) => Some(SdpSolution::new(base.as_ref(), file.vectors()?)?),
        None => None,
    };
    let lasserre = match &lasserre_file {
        Some(file) => Some(file.solution::<f64>(n)?),
        None => None,
    };
    let sa = match &sa_file {
        Some(file) => Some(file.distributions::<f64>(n)?),
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sections: [(&str, Section); 4] = [
        ("vectors", Box::new(|r, _| vectors(r, &base, k, seed, supplied.clone()))),
        ("triangle", Box::new(|r, rng| triangle(r, &base, k, seed, supplied.clone(), rng))),
        ("lasserre", Box::new(|r, rng| lasserre_section(r, &base, k, args.t_level, lasserre, rng))),
        ("sherali_adams", Box::new(|r, rng| sa_section(r, &base, k, args.t_level, sa, rng))),
    ];
    let mut errors = Vec::new();
    for (name, section) in sections {
        if let Err(err) = section(&mut report, &mut rng) {
            report.check(format!("{name}_completed"), false);
            errors.push(format!("{name}: {err:#}"));
        }
    }
    if !errors.is_empty() {
        report.fail_with(errors.join("; "));
    }
    Ok(report.finish())
}

fn vectors(report: &mut Report, base: &Arc<Graph>, k: usize, seed: u64, supplied: Option<SdpSolution<f64>>) -> Result<()> {
    let (opt, witness) = basic_sdp_opt(base.as_ref())?;
    report.result(
        "basic",
        json!({"opt": opt, "objective": witness.objective, "spread": witness.spread, "opt_over_k": opt / k as f64}),
    )?;
    let (source, sol) = match supplied {
        Some(sol) => ("file", sol),
        None => ("basic_optimum", witness),
    };
    report.result("vector_source", source)?;
    report.result("input_objective_ge_opt", sol.objective >= opt - sdp::SDP_TOLERANCE)?;
    let lift = lift_vectors(&sol, base, k, seed)?;
    report.check("vector_lift", lift.passed);
    report.result("vector_lift", lift_summary(&lift))?;
    Ok(())
}

fn triangle(
    report: &mut Report,
    base: &Arc<Graph>,
    k: usize,
    seed: u64,
    supplied: Option<SdpSolution<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (source, sol) = match supplied {
        Some(sol) => ("file", sol),
        None => {
            let cuts = random_cut_mixture::<f64, _>(base.n(), DEFAULT_CUTS, rng)?;
            let raw = SdpSolution::new(base.as_ref(), cut_mixture_vectors(base.n(), &cuts)?)?;
            ("cut_mixture", raw.normalized(base.as_ref())?)
        }
    };
    let before = check_triangle(&sol.vectors, sdp::TRIANGLE_BUDGET, seed);
    let lift = lift_vectors(&sol, base, k, seed)?;
    let after = check_triangle(&lift.solution.vectors, sdp::TRIANGLE_BUDGET, seed);
    let preserved = !before.passed() || after.passed();
    report.check("triangle_preserved", preserved);
    report.check("triangle_vector_lift", lift.passed);
    report.result(
        "triangle",
        json!({
            "source": source,
            "base": {"triples": before.triples_checked, "violations": before.violations.len(), "partial": before.partial},
            "lifted": {"triples": after.triples_checked, "violations": after.violations.len(), "partial": after.partial},
            "first_lifted_violations": after.violations.iter().take(10).collect::<Vec<_>>(),
            "vector_lift": lift_summary(&lift),
        }),
    )?;
    Ok(())
}

fn lasserre_section(
    report: &mut Report,
    base: &Arc<Graph>,
    k: usize,
    t_level: Option<usize>,
    supplied: Option<LasserreSolution<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (source, ls) = match supplied {
        Some(ls) => ("file", ls),
        None => {
            let cuts = random_cut_mixture::<f64, _>(base.n(), DEFAULT_CUTS, rng)?;
            ("cut_mixture", LasserreSolution::from_cut_mixture(base.n(), t_level.unwrap_or(2), &cuts)?)
        }
    };
    let t = t_level.unwrap_or(ls.t);
    let base_delta = ls.verify_delta();
    let lift = lift_lasserre(&ls, base, k, t)?;
    report.check("lasserre_delta", lift.delta.passed);
    report.check("lasserre_objective", lift.objective_error <= sdp::SDP_TOLERANCE);
    report.result(
        "lasserre",
        json!({
            "source": source,
            "t": t,
            "base_delta": base_delta,
            "lifted_delta": lift.delta,
            "base_objective": lift.base_objective,
            "lifted_objective": lift.lifted_objective,
            "objective_error": lift.objective_error,
        }),
    )?;
    Ok(())
}

fn sa_section(
    report: &mut Report,
    base: &Arc<Graph>,
    k: usize,
    t_level: Option<usize>,
    supplied: Option<LocalDistributions<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (source, ld) = match supplied {
        Some(ld) => ("file", ld),
        None => {
            let cuts = random_cut_mixture::<f64, _>(base.n(), DEFAULT_CUTS, rng)?;
            ("cut_mixture", LocalDistributions::from_cut_mixture(base.n(), t_level.unwrap_or(2), &cuts)?)
        }
    };
    if let Some(t) = t_level {
        if t != ld.t {
            anyhow::bail!("level {t} requested but the distributions have level {}", ld.t);
        }
    }
    let vectors = gram_vectors(&ld.gram()?)?;
    let base_report = ld.verify(&vectors)?;
    let lift = lift_sherali_adams(&ld, &vectors, base, k)?;
    report.check("sa_consistency", lift.report.passed);
    report.result(
        "sherali_adams",
        json!({
            "source": source,
            "t": ld.t,
            "base": base_report,
            "lifted": lift.report,
        }),
    )?;
    Ok(())
}
