use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{CpInstance, Objective};
use crate::rng::{RngStream, StreamPhase};

/// Graph families the harness can build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphSpec {
    /// Each ordered pair is an arc with probability `p` (unordered pairs for
    /// undirected graphs).
    Gnp { n: usize, p: f64 },
    /// `rows × cols` grid; both arcs per grid edge when directed.
    Grid { rows: usize, cols: usize },
    /// `0 → 1 → … → n-1 → 0`.
    Cycle { n: usize },
    File { path: PathBuf },
}

impl GraphSpec {
    pub fn node_count(&self) -> Option<usize> {
        match *self {
            GraphSpec::Gnp { n, .. } | GraphSpec::Cycle { n } => Some(n),
            GraphSpec::Grid { rows, cols } => Some(rows * cols),
            GraphSpec::File { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Gnp { n, p } => format!("gnp(n={n},p={p})"),
            GraphSpec::Grid { rows, cols } => format!("grid({rows}x{cols})"),
            GraphSpec::Cycle { n } => format!("cycle({n})"),
            GraphSpec::File { path } => format!("file({})", path.display()),
        }
    }
}

pub fn gnp(n: usize, p: f64, directed: bool, rng: &mut RngStream) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges, directed)
}

pub fn grid(rows: usize, cols: usize, directed: bool) -> Result<Graph> {
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let mut nbrs = Vec::new();
            if c + 1 < cols {
                nbrs.push(id(r, c + 1));
            }
            if r + 1 < rows {
                nbrs.push(id(r + 1, c));
            }
            for w in nbrs {
                edges.push((id(r, c), w));
                if directed {
                    edges.push((w, id(r, c)));
                }
            }
        }
    }
    Graph::new(rows * cols, edges, directed)
}

pub fn cycle(n: usize, directed: bool) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
    }
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect(), directed)
}

/// Builds the graph of `spec`; `index` separates independent draws under one
/// seed.
pub fn generate_graph(spec: &GraphSpec, directed: bool, seed: u64, index: u64) -> Result<Graph> {
    match spec {
        GraphSpec::Gnp { n, p } => {
            let mut rng = RngStream::new(seed, StreamPhase::Generator, index, 0);
            gnp(*n, *p, directed, &mut rng)
        }
        GraphSpec::Grid { rows, cols } => grid(*rows, *cols, directed),
        GraphSpec::Cycle { n } => cycle(*n, directed),
        GraphSpec::File { path } => {
            let g = Graph::from_text(&std::fs::read_to_string(path)?)?;
            if g.is_directed() != directed && directed {
                return Err(Error::InvalidParameter(format!(
                    "{} holds an undirected graph",
                    path.display()
                )));
            }
            Ok(g)
        }
    }
}

/// Demands covering every node: each node in random order is paired with a
/// random node it reaches (or, if it reaches none, one that reaches it) and
/// gets bound `d(u, v) + slack`. Returns `None` when some node has no partner.
pub fn spanning_demands(g: &Graph, slack: usize, rng: &mut RngStream) -> Result<Option<Vec<(usize, usize, usize)>>> {
    let n = g.node_count();
    let mut covered = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out = Vec::new();
    for &u in &order {
        if covered[u] {
            continue;
        }
        let reach: Vec<usize> = (0..n)
            .filter(|&v| v != u && g.directed_distance(u, v).ok().flatten().is_some())
            .collect();
        let (s, t) = if !reach.is_empty() {
            (u, reach[rng.gen_range(0..reach.len())])
        } else {
            let from: Vec<usize> = (0..n)
                .filter(|&w| w != u && g.directed_distance(w, u).ok().flatten().is_some())
                .collect();
            if from.is_empty() {
                return Ok(None);
            }
            (from[rng.gen_range(0..from.len())], u)
        };
        let d = g.directed_distance(s, t)?.expect("reachable by construction");
        covered[s] = true;
        covered[t] = true;
        out.push((s, t, d + slack));
    }
    out.sort_unstable();
    out.dedup();
    Ok(Some(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    DirectedSpanner,
    LowDegreeSpanner,
    Dsn,
    RawCp,
}

impl ProblemKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "directed-spanner" | "spanner" => ProblemKind::DirectedSpanner,
            "low-degree-spanner" | "low-degree" => ProblemKind::LowDegreeSpanner,
            "dsn" => ProblemKind::Dsn,
            "raw-cp" => ProblemKind::RawCp,
            other => return Err(Error::InvalidParameter(format!("unknown problem `{other}`"))),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ProblemKind::DirectedSpanner => "directed-spanner",
            ProblemKind::LowDegreeSpanner => "low-degree-spanner",
            ProblemKind::Dsn => "dsn",
            ProblemKind::RawCp => "raw-cp",
        }
    }

    pub fn default_objective(&self) -> Objective {
        match self {
            ProblemKind::LowDegreeSpanner => Objective::MaxDegree(crate::model::DegreeMode::InOut),
            _ => Objective::LinearSum,
        }
    }
}

pub const GENERATOR_RETRIES: u64 = 20;

/// Generates the graph and instance for one trial. Random graphs whose demand
/// construction fails are redrawn up to [`GENERATOR_RETRIES`] times.
#[allow(clippy::too_many_arguments)]
pub fn generate_instance(
    spec: &GraphSpec,
    problem: ProblemKind,
    k: usize,
    demands: Option<&[(usize, usize, usize)]>,
    objective: Objective,
    seed: u64,
    trial: u64,
) -> Result<CpInstance> {
    let random = matches!(spec, GraphSpec::Gnp { .. });
    let attempts = if random { GENERATOR_RETRIES } else { 1 };
    let mut last = None;
    for attempt in 0..attempts {
        let g = Arc::new(generate_graph(spec, true, seed, trial * GENERATOR_RETRIES + attempt)?);
        let built = match problem {
            ProblemKind::DirectedSpanner | ProblemKind::LowDegreeSpanner => {
                CpInstance::spanner(g.clone(), k, objective)
            }
            ProblemKind::Dsn | ProblemKind::RawCp => {
                let list = match demands {
                    Some(d) => Some(d.to_vec()),
                    None => {
                        let mut rng = RngStream::new(seed, StreamPhase::Demands, trial, attempt);
                        spanning_demands(&g, k.saturating_sub(1), &mut rng)?
                    }
                };
                match list {
                    Some(list) => CpInstance::dsn(g.clone(), &list, objective),
                    None => Err(Error::InvalidGraph("some node has no demand partner".into())),
                }
            }
        };
        match built {
            Ok(inst) if !inst.demands.is_empty() || problem == ProblemKind::RawCp => return Ok(inst),
            Ok(_) => last = Some(Error::InvalidGraph("generated graph has no edges".into())),
            Err(e @ Error::PathCapExceeded { .. }) => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::InvalidGraph("generator produced nothing".into())))
}
