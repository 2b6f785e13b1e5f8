use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cartesian_influence::isoperimetry::complete_graph_log_sobolev;
use cartesian_influence::tightness::{build_necklace, Necklace};
use cartesian_influence::{Function, Graph, Product};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    K2,
    Kq(usize),
    Cycle(usize),
    Path(usize),
    Necklace(usize),
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "k2" {
            return Ok(Builtin::K2);
        }
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("unknown builtin {s:?}; expected k2, kq:Q, cycle:N, path:N or necklace:R"))?;
        let n: usize = arg.parse().map_err(|_| format!("builtin {s:?}: {arg:?} is not a count"))?;
        match name {
            "kq" => Ok(Builtin::Kq(n)),
            "cycle" => Ok(Builtin::Cycle(n)),
            "path" => Ok(Builtin::Path(n)),
            "necklace" => Ok(Builtin::Necklace(n)),
            _ => Err(format!("unknown builtin family {name:?}")),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::K2 => write!(f, "k2"),
            Builtin::Kq(q) => write!(f, "kq:{q}"),
            Builtin::Cycle(n) => write!(f, "cycle:{n}"),
            Builtin::Path(n) => write!(f, "path:{n}"),
            Builtin::Necklace(r) => write!(f, "necklace:{r}"),
        }
    }
}

impl Serialize for Builtin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `{"n": .., "edges": [[u, v, w], ..]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// `{"k": .., "values": [..]}`, values in row-major tuple order with
/// coordinate 0 most significant.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    pub k: usize,
    pub values: Vec<f64>,
}

pub struct BaseGraph {
    pub graph: Arc<Graph>,
    pub necklace: Option<Necklace<f64>>,
    /// Exact log-Sobolev constant when the family has a closed form.
    pub known_alpha: Option<f64>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_base(graph: Option<&Path>, builtin: Option<Builtin>) -> Result<BaseGraph> {
    if let Some(path) = graph {
        let file: GraphFile = read_json(path)?;
        let g = Graph::build(file.n, &file.edges).with_context(|| format!("graph in {}", path.display()))?;
        return Ok(BaseGraph {
            graph: Arc::new(g),
            necklace: None,
            known_alpha: None,
        });
    }
    let builtin = builtin.unwrap_or(Builtin::K2);
    let (graph, necklace, known_alpha) = match builtin {
        Builtin::K2 => (Graph::complete(2)?, None, Some(complete_graph_log_sobolev(2)?)),
        Builtin::Kq(q) => (Graph::complete(q)?, None, Some(complete_graph_log_sobolev(q)?)),
        Builtin::Cycle(n) => (Graph::cycle(n)?, None, None),
        Builtin::Path(n) => (Graph::path(n)?, None, None),
        Builtin::Necklace(r) => {
            let neck = build_necklace(r)?;
            (neck.graph().clone(), Some(neck), None)
        }
    };
    Ok(BaseGraph {
        graph: Arc::new(graph),
        necklace,
        known_alpha,
    })
}

pub fn load_function(path: &Path, base: &Arc<Graph>, k: Option<usize>, cap: usize) -> Result<Function> {
    let file: FunctionFile = read_json(path)?;
    if let Some(k) = k {
        if k != file.k {
            bail!("--k {k} disagrees with k = {} in {}", file.k, path.display());
        }
    }
    let product = Product::new(Arc::clone(base), file.k)?.with_dense_cap(cap);
    Function::new(&product, file.values).with_context(|| format!("function in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_roundtrip() {
        for s in ["k2", "kq:3", "cycle:5", "path:3", "necklace:8"] {
            assert_eq!(s.parse::<Builtin>().unwrap().to_string(), s);
        }
        assert!("kq".parse::<Builtin>().is_err());
        assert!("torus:3".parse::<Builtin>().is_err());
        assert!("cycle:x".parse::<Builtin>().is_err());
    }
}
