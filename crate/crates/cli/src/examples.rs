use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use cartesian_influence::sdp::{
    basic_sdp_opt, LasserreFile, LasserreSolution, LocalDistributions, SaFile, SdpFile,
};
use cartesian_influence::{Function, Graph, Product};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::input::{FunctionFile, GraphFile};
use crate::report::Report;
use crate::ExamplesArgs;

fn write(dir: &Path, name: &str, value: &impl Serialize, written: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(name.to_string());
    Ok(())
}

fn function_file(f: &Function) -> FunctionFile {
    FunctionFile {
        k: f.graph().k(),
        values: f.values().to_vec(),
    }
}

/// Sample inputs for every command, all on small graphs.
pub fn run(args: &ExamplesArgs) -> Result<Report> {
    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();

    let weighted = GraphFile {
        n: 4,
        edges: vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 0.5)],
    };
    write(dir, "graph_weighted_c4.json", &weighted, &mut written)?;

    let k2 = Arc::new(Graph::complete(2)?);
    let cube = Product::new(Arc::clone(&k2), 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    write(dir, "function_dictator_k2_8.json", &function_file(&Function::dictator(&cube, 0)?), &mut written)?;
    write(
        dir,
        "function_noisy_dictator_k2_8.json",
        &function_file(&Function::noisy_dictator(&cube, 0, 0.01, &mut rng)?),
        &mut written,
    )?;
    write(dir, "function_constant_k2_8.json", &function_file(&Function::constant(&cube, 1.0)?), &mut written)?;

    let (_, witness) = basic_sdp_opt(k2.as_ref())?;
    write(dir, "sdp_k2.json", &SdpFile::from_vectors(&witness.vectors), &mut written)?;

    let cuts = vec![(0.5, vec![true, false]), (0.5, vec![false, true])];
    let ls = LasserreSolution::from_cut_mixture(2, 2, &cuts)?;
    write(dir, "lasserre_k2_t2.json", &LasserreFile::from_solution(&ls), &mut written)?;
    let ld = LocalDistributions::from_cut_mixture(2, 2, &cuts)?;
    write(dir, "sa_k2_t2.json", &SaFile::from_distributions(&ld), &mut written)?;

    let mut report = Report::new("examples", args)?;
    report.result("files", written)?;
    Ok(report.finish())
}
