use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Which incident edges count toward a node's fractional degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeMode {
    Out,
    In,
    InOut,
}

/// Convex-partitionable objectives over edge vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `Σ_e x_e`; combiner is the unweighted sum.
    LinearSum,
    /// `max_v deg(v)`; combiner is the maximum.
    MaxDegree(DegreeMode),
    /// `(Σ_e x_e^p)^{1/p}` for `p ≥ 1`, including `p = ∞`; combiner is the
    /// same norm of the per-cluster values.
    PNorm(f64),
}

impl Default for Objective {
    fn default() -> Self {
        Objective::LinearSum
    }
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Objective::PNorm(p) if !(p >= 1.0) => Err(Error::InvalidParameter(format!(
                "p-norm needs p >= 1, got {p}"
            ))),
            _ => Ok(()),
        }
    }

    /// Parses `linear`, `max-degree`, `max-out-degree`, `max-in-degree`,
    /// `p<value>` or `pinf`.
    pub fn parse(s: &str) -> Result<Self> {
        let obj = match s {
            "linear" | "linear-sum" => Objective::LinearSum,
            "max-degree" => Objective::MaxDegree(DegreeMode::InOut),
            "max-out-degree" => Objective::MaxDegree(DegreeMode::Out),
            "max-in-degree" => Objective::MaxDegree(DegreeMode::In),
            "pinf" => Objective::PNorm(f64::INFINITY),
            other => match other.strip_prefix('p').map(str::parse::<f64>) {
                Some(Ok(p)) => Objective::PNorm(p),
                _ => {
                    return Err(Error::InvalidParameter(format!("unknown objective `{s}`")))
                }
            },
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn label(&self) -> String {
        match *self {
            Objective::LinearSum => "linear".into(),
            Objective::MaxDegree(DegreeMode::InOut) => "max-degree".into(),
            Objective::MaxDegree(DegreeMode::Out) => "max-out-degree".into(),
            Objective::MaxDegree(DegreeMode::In) => "max-in-degree".into(),
            Objective::PNorm(p) if p.is_infinite() => "pinf".into(),
            Objective::PNorm(p) => format!("p{p}"),
        }
    }

    pub fn evaluate(&self, g: &Graph, x: &[f64]) -> Result<f64> {
        if x.len() != g.edge_count() {
            return Err(Error::SizeMismatch {
                expected: g.edge_count(),
                got: x.len(),
            });
        }
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry { index, value });
        }
        Ok(self.evaluate_unchecked(g, x))
    }

    pub(crate) fn evaluate_unchecked(&self, g: &Graph, x: &[f64]) -> f64 {
        match *self {
            Objective::LinearSum => x.iter().sum(),
            Objective::MaxDegree(mode) => fractional_degrees(g, x, mode)
                .into_iter()
                .fold(0.0, f64::max),
            Objective::PNorm(p) => p_norm(x, p),
        }
    }

    /// The combiner `h_σ` applied to per-cluster objective values.
    pub fn combine(&self, cluster_values: &[f64]) -> f64 {
        match *self {
            Objective::LinearSum => cluster_values.iter().sum(),
            Objective::MaxDegree(_) => cluster_values.iter().copied().fold(0.0, f64::max),
            Objective::PNorm(p) => p_norm(cluster_values, p),
        }
    }
}

/// Fractional degree of every node under `mode`. Undirected edges count at
/// both endpoints whatever the mode.
pub fn fractional_degrees(g: &Graph, x: &[f64], mode: DegreeMode) -> Vec<f64> {
    let mut deg = vec![0.0; g.node_count()];
    for (&(u, v), &xe) in g.edges().iter().zip(x) {
        if !g.is_directed() {
            deg[u] += xe;
            deg[v] += xe;
            continue;
        }
        if mode != DegreeMode::In {
            deg[u] += xe;
        }
        if mode != DegreeMode::Out {
            deg[v] += xe;
        }
    }
    deg
}

fn p_norm(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().copied().fold(0.0, f64::max)
    } else if p == 1.0 {
        values.iter().sum()
    } else {
        values.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}
