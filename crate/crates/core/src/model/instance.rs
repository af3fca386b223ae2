use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::objective::Objective;
use super::paths::{enumerate_paths_capped, Path};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_PATH_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub source: usize,
    pub target: usize,
    /// Maximum allowed path length `L(u, v)`.
    pub bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandSet {
    pub pairs: Vec<Demand>,
    /// Whether every node is an endpoint of some demand.
    pub spanning: bool,
}

impl DemandSet {
    /// `D`: the largest allowed path length.
    pub fn max_bound(&self) -> usize {
        self.pairs.iter().map(|d| d.bound).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Demand indices grouped by source node (demands live at their source).
    pub fn by_source(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (i, d) in self.pairs.iter().enumerate() {
            out[d.source].push(i);
        }
        out
    }

    /// All demands ask for shortest paths only.
    pub fn is_distance_preserver(&self, g: &Graph) -> bool {
        self.pairs
            .iter()
            .all(|d| g.directed_distance(d.source, d.target).ok().flatten() == Some(d.bound))
    }

    /// All demands share one length bound.
    pub fn is_uniform(&self) -> bool {
        self.pairs.windows(2).all(|w| w[0].bound == w[1].bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFamily {
    /// `paths[d]` lists the allowed paths of demand `d`.
    pub paths: Vec<Vec<Path>>,
}

impl PathFamily {
    pub fn of(&self, demand: usize) -> &[Path] {
        &self.paths[demand]
    }

    pub fn total(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }

    /// Longest allowed path over all demands.
    pub fn longest(&self) -> usize {
        self.paths.iter().flatten().map(Path::len).max().unwrap_or(0)
    }
}

fn spanning_flag(n: usize, pairs: &[Demand]) -> bool {
    let mut seen = vec![false; n];
    for d in pairs {
        seen[d.source] = true;
        seen[d.target] = true;
    }
    seen.into_iter().all(|s| s)
}

fn families(g: &Graph, pairs: &[Demand], cap: usize) -> Result<PathFamily> {
    let paths = pairs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            enumerate_paths_capped(g, d.source, d.target, d.bound, cap).map_err(|e| match e {
                Error::PathCapExceeded { cap, .. } => Error::PathCapExceeded { demand: i, cap },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathFamily { paths })
}

/// Directed `k`-spanner relaxation: one demand per edge, paths of length ≤ k.
pub fn build_spanner_instance(g: &Graph, k: usize) -> Result<(DemandSet, PathFamily)> {
    build_spanner_instance_capped(g, k, DEFAULT_PATH_CAP)
}

pub fn build_spanner_instance_capped(
    g: &Graph,
    k: usize,
    cap: usize,
) -> Result<(DemandSet, PathFamily)> {
    if k == 0 {
        return Err(Error::InvalidParameter("stretch k must be >= 1".into()));
    }
    let pairs: Vec<Demand> = g
        .edges()
        .iter()
        .map(|&(u, v)| Demand {
            source: u,
            target: v,
            bound: k,
        })
        .collect();
    let family = families(g, &pairs, cap)?;
    let spanning = spanning_flag(g.node_count(), &pairs);
    Ok((DemandSet { pairs, spanning }, family))
}

/// Directed Steiner network with per-demand distance bounds.
pub fn build_dsn_instance(g: &Graph, demands: &[(usize, usize, usize)]) -> Result<(DemandSet, PathFamily)> {
    build_dsn_instance_capped(g, demands, DEFAULT_PATH_CAP)
}

pub fn build_dsn_instance_capped(
    g: &Graph,
    demands: &[(usize, usize, usize)],
    cap: usize,
) -> Result<(DemandSet, PathFamily)> {
    let mut pairs = Vec::with_capacity(demands.len());
    for &(u, v, bound) in demands {
        g.check_node(u)?;
        g.check_node(v)?;
        if u == v {
            return Err(Error::DegenerateDemand(u));
        }
        let distance = g.directed_distance(u, v)?;
        if distance.map_or(true, |d| bound < d) {
            return Err(Error::InfeasibleDemand {
                source_node: u,
                target: v,
                bound,
                distance,
            });
        }
        pairs.push(Demand {
            source: u,
            target: v,
            bound,
        });
    }
    let family = families(g, &pairs, cap)?;
    let spanning = spanning_flag(g.node_count(), &pairs);
    Ok((DemandSet { pairs, spanning }, family))
}

/// A validated distance-bounded network design program.
#[derive(Debug, Clone)]
pub struct CpInstance {
    pub graph: Arc<Graph>,
    pub demands: DemandSet,
    pub paths: PathFamily,
    pub objective: Objective,
}

impl CpInstance {
    pub fn new(
        graph: Arc<Graph>,
        demands: DemandSet,
        paths: PathFamily,
        objective: Objective,
    ) -> Result<Self> {
        objective.validate()?;
        if paths.paths.len() != demands.len() {
            return Err(Error::SizeMismatch {
                expected: demands.len(),
                got: paths.paths.len(),
            });
        }
        for (i, (d, fam)) in demands.pairs.iter().zip(&paths.paths).enumerate() {
            if d.source == d.target {
                return Err(Error::DegenerateDemand(d.source));
            }
            if fam.is_empty() {
                return Err(Error::InfeasibleDemand {
                    source_node: d.source,
                    target: d.target,
                    bound: d.bound,
                    distance: graph.directed_distance(d.source, d.target)?,
                });
            }
            for p in fam {
                let ok = p.nodes.first() == Some(&d.source)
                    && p.nodes.last() == Some(&d.target)
                    && p.len() <= d.bound
                    && p.edges.iter().zip(p.nodes.windows(2)).all(|(&e, w)| {
                        graph.find_edge(w[0], w[1]) == Some(e)
                    });
                if !ok {
                    return Err(Error::InvalidParameter(format!(
                        "path {:?} is not allowed for demand {i}",
                        p.nodes
                    )));
                }
            }
        }
        Ok(Self {
            graph,
            demands,
            paths,
            objective,
        })
    }

    pub fn spanner(graph: Arc<Graph>, k: usize, objective: Objective) -> Result<Self> {
        let (demands, paths) = build_spanner_instance(&graph, k)?;
        Self::new(graph, demands, paths, objective)
    }

    pub fn dsn(graph: Arc<Graph>, demands: &[(usize, usize, usize)], objective: Objective) -> Result<Self> {
        let (demands, paths) = build_dsn_instance(&graph, demands)?;
        Self::new(graph, demands, paths, objective)
    }

    /// `D` as used by the distributed solver.
    pub fn max_path_length(&self) -> usize {
        self.demands.max_bound()
    }

    pub fn to_file(&self, graph_ref: &str) -> InstanceFile {
        InstanceFile {
            graph: graph_ref.to_string(),
            objective: self.objective.label(),
            demands: self
                .demands
                .pairs
                .iter()
                .map(|d| (d.source, d.target, d.bound))
                .collect(),
        }
    }
}

/// On-disk instance description. The graph is referenced by path, relative to
/// the instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub graph: String,
    pub objective: String,
    pub demands: Vec<(usize, usize, usize)>,
}

impl InstanceFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance file serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &FsPath) -> Result<CpInstance> {
        let file = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or_else(|| FsPath::new("."));
        let graph = Graph::from_text(&std::fs::read_to_string(base.join(&file.graph))?)?;
        CpInstance::dsn(Arc::new(graph), &file.demands, Objective::parse(&file.objective)?)
    }
}
