//! Sampling from `(k, ε)`-padded decompositions by exponential ball carving.
//!
//! Each node `v` draws a radius `r_v` from a truncated exponential with mean
//! parameter `r = 2k/ε`, and every node joins the cluster of the first node
//! (in a permutation `π`) whose ball covers it. The centralized sampler works
//! with any permutation; the distributed protocol uses ascending node ID.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{RngStream, StreamPhase};
use crate::sim::{NodeContext, Outbox, Payload, Protocol, RunStats, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaddedDecompositionParams {
    pub k: usize,
    pub epsilon: f64,
    pub n: usize,
}

impl PaddedDecompositionParams {
    pub fn new(k: usize, epsilon: f64, n: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("empty graph".into()));
        }
        Ok(Self { k, epsilon, n })
    }

    /// Exponential scale `r = (2/ε)·k`.
    pub fn scale(&self) -> f64 {
        (2.0 / self.epsilon) * self.k as f64
    }

    /// `r·ln n + k`; no sampled radius exceeds it.
    pub fn radius_cap(&self) -> f64 {
        self.scale() * (self.n as f64).ln() + self.k as f64
    }

    /// Worst-case hop budget of the flooding protocol.
    pub fn hop_cap(&self) -> usize {
        self.radius_cap().floor() as usize
    }

    /// Cluster diameter bound `2·(r·ln n + k)`.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.radius_cap()
    }
}

/// Inverse CDF of the density `n/(n-1) · e^{-z/r} / r` on `[0, r ln n]`,
/// evaluated at `u ∈ [0,1)`.
pub fn radius_from_uniform(params: &PaddedDecompositionParams, u: f64) -> Result<f64> {
    let n = params.n;
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "radius distribution needs n >= 2, got {n}"
        )));
    }
    let r = params.scale();
    let frac = (n - 1) as f64 / n as f64;
    let z = -r * (1.0 - u * frac).ln();
    Ok(z.min(params.radius_cap()))
}

pub fn sample_radius(params: &PaddedDecompositionParams, rng: &mut RngStream) -> Result<f64> {
    let u = rng.uniform();
    radius_from_uniform(params, u)
}

/// Radius of node `v` in decomposition `iteration` under `seed`.
pub(crate) fn node_radius(
    params: &PaddedDecompositionParams,
    seed: u64,
    iteration: usize,
    v: usize,
) -> f64 {
    if params.n < 2 {
        return 0.0;
    }
    let mut rng = RngStream::new(seed, StreamPhase::Radius, iteration as u64, v as u64);
    sample_radius(params, &mut rng).expect("n >= 2 checked above")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationSource {
    /// Seeded Fisher–Yates shuffle.
    Random,
    /// `π(v) = v`, matching the distributed protocol.
    IdOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    /// `assignment[u]` is the cluster id of node `u`.
    pub assignment: Vec<usize>,
    /// `centers[c]` is the center node of cluster `c`. Cluster ids follow the
    /// π-order of their centers.
    pub centers: Vec<usize>,
    /// Sampled radius `r_v` of every node.
    pub radii: Vec<f64>,
    /// `rank[v] = π(v)`.
    pub rank: Vec<usize>,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.centers.len()
    }

    pub fn center_of(&self, u: usize) -> usize {
        self.centers[self.assignment[u]]
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&u| self.assignment[u] == cluster)
            .collect()
    }

    pub fn all_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (u, &c) in self.assignment.iter().enumerate() {
            out[c].push(u);
        }
        out
    }

    /// Whether every node of `B(u, k)` shares `u`'s cluster.
    pub fn is_padded(&self, g: &Graph, u: usize, k: usize) -> bool {
        let row = g.distances().row(u);
        let c = self.assignment[u];
        (0..g.node_count()).all(|w| row[w] as u64 > k as u64 || self.assignment[w] == c)
    }

    /// Largest weak diameter over all clusters (`None` if some cluster spans
    /// disconnected components, which the sampler never produces).
    pub fn max_diameter(&self, g: &Graph) -> Option<usize> {
        self.all_members()
            .iter()
            .map(|m| g.weak_diameter(m))
            .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
    }

    /// Checks totality, center distances, and the diameter bound.
    pub fn validate(&self, g: &Graph, params: &PaddedDecompositionParams) -> Result<()> {
        let n = g.node_count();
        let bad = |msg: String| Err(Error::Protocol(msg));
        if self.assignment.len() != n || self.radii.len() != n {
            return bad("clustering does not cover every node".into());
        }
        let dist = g.distances();
        let cap = params.radius_cap();
        for u in 0..n {
            let c = self.assignment[u];
            if c >= self.centers.len() {
                return bad(format!("node {u} has unknown cluster {c}"));
            }
            let v = self.centers[c];
            if !dist.within(v, u, self.radii[v]) {
                return bad(format!("node {u} lies outside the ball of its center {v}"));
            }
            if self.radii[v] > cap {
                return bad(format!("radius of {v} exceeds the cap {cap}"));
            }
        }
        match self.max_diameter(g) {
            Some(d) if d as f64 <= params.diameter_bound() => Ok(()),
            Some(d) => bad(format!(
                "cluster diameter {d} exceeds {}",
                params.diameter_bound()
            )),
            None => bad("cluster spans disconnected nodes".into()),
        }
    }

    /// CSV with columns `node,cluster_id,center,r_v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,cluster_id,center,r_v\n");
        for (u, &c) in self.assignment.iter().enumerate() {
            let _ = writeln!(out, "{u},{c},{},{}", self.centers[c], self.radii[u]);
        }
        out
    }
}

/// Assigns every node to the π-first center whose ball covers it.
fn carve(g: &Graph, radii: Vec<f64>, rank: Vec<usize>) -> Clustering {
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| rank[v]);
    let dist = g.distances();
    let mut center_of = vec![usize::MAX; n];
    let mut remaining = n;
    for &v in &order {
        if remaining == 0 {
            break;
        }
        for u in 0..n {
            if center_of[u] == usize::MAX && dist.within(v, u, radii[v]) {
                center_of[u] = v;
                remaining -= 1;
            }
        }
    }
    finish_clustering(center_of, radii, rank)
}

/// Numbers clusters by the π-rank of their centers.
fn finish_clustering(center_of: Vec<usize>, radii: Vec<f64>, rank: Vec<usize>) -> Clustering {
    let mut centers: Vec<usize> = center_of.clone();
    centers.sort_by_key(|&v| rank[v]);
    centers.dedup();
    let mut id = vec![usize::MAX; center_of.len()];
    for (c, &v) in centers.iter().enumerate() {
        id[v] = c;
    }
    Clustering {
        assignment: center_of.iter().map(|&v| id[v]).collect(),
        centers,
        radii,
        rank,
    }
}

fn sample_radii(params: &PaddedDecompositionParams, seed: u64, iteration: usize) -> Vec<f64> {
    (0..params.n)
        .map(|v| node_radius(params, seed, iteration, v))
        .collect()
}

/// Centralized sampler with a seeded random permutation.
pub fn sample_decomposition_centralized(
    g: &Graph,
    params: &PaddedDecompositionParams,
    seed: u64,
) -> Result<Clustering> {
    sample_decomposition_with(g, params, seed, 0, PermutationSource::Random)
}

pub fn sample_decomposition_with(
    g: &Graph,
    params: &PaddedDecompositionParams,
    seed: u64,
    iteration: usize,
    permutation: PermutationSource,
) -> Result<Clustering> {
    let n = g.node_count();
    if params.n != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: params.n,
        });
    }
    let rank = match permutation {
        PermutationSource::IdOrder => (0..n).collect(),
        PermutationSource::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = RngStream::new(seed, StreamPhase::Permutation, iteration as u64, 0);
            order.shuffle(&mut rng);
            let mut rank = vec![0; n];
            for (pos, &v) in order.iter().enumerate() {
                rank[v] = pos;
            }
            rank
        }
    };
    Ok(carve(g, sample_radii(params, seed, iteration), rank))
}

/// Flooding protocol for `iterations` independent decompositions at once.
///
/// Each node keeps, per iteration, the Pareto front of `(source, remaining
/// hops)` pairs it has heard: a source is dropped when a smaller ID with at
/// least as much remaining budget has already arrived, since the smaller ID
/// reaches every node the larger one could reach from here.
struct DecompositionFlood {
    hop_cap: usize,
}

struct DecompState {
    fronts: Vec<Vec<(u32, u32)>>,
    own: Vec<u32>,
}

#[derive(Clone)]
struct DecompMessage(Vec<(u32, u32, u32)>);

impl Payload for DecompMessage {
    fn size_bytes(&self) -> usize {
        12 * self.0.len()
    }
}

fn insert_front(front: &mut Vec<(u32, u32)>, source: u32, budget: u32) -> bool {
    if front.iter().any(|&(s, b)| s <= source && b >= budget) {
        return false;
    }
    front.retain(|&(s, b)| !(s >= source && b <= budget));
    front.push((source, budget));
    true
}

impl Protocol for DecompositionFlood {
    type State = DecompState;
    type Message = DecompMessage;

    fn step(
        &self,
        ctx: &NodeContext<'_>,
        state: &mut DecompState,
        inbox: &[(usize, DecompMessage)],
        outbox: &mut Outbox<DecompMessage>,
    ) -> bool {
        let mut forward = Vec::new();
        if ctx.round == 0 {
            let me = ctx.node as u32;
            for (i, &b) in state.own.iter().enumerate() {
                insert_front(&mut state.fronts[i], me, b);
                if b >= 1 {
                    forward.push((i as u32, me, b - 1));
                }
            }
        }
        for (_, DecompMessage(entries)) in inbox {
            for &(i, s, b) in entries {
                if insert_front(&mut state.fronts[i as usize], s, b) && b >= 1 {
                    forward.push((i, s, b - 1));
                }
            }
        }
        if ctx.round < self.hop_cap && !forward.is_empty() {
            outbox.broadcast(ctx.neighbors, DecompMessage(forward));
        }
        ctx.round >= self.hop_cap
    }
}

/// Runs `iterations` bundled decompositions on the simulator. Iteration `i`
/// uses the radius streams of `(seed, i)` and π = ascending ID, so each output
/// equals `sample_decomposition_with(.., i, IdOrder)`.
pub fn sample_decompositions_distributed(
    g: &Graph,
    params: &PaddedDecompositionParams,
    seed: u64,
    iterations: usize,
    sim: &Simulator,
) -> Result<(Vec<Clustering>, RunStats)> {
    let n = g.node_count();
    if params.n != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: params.n,
        });
    }
    let radii: Vec<Vec<f64>> = (0..iterations)
        .map(|i| sample_radii(params, seed, i))
        .collect();
    let states = (0..n)
        .map(|v| DecompState {
            fronts: vec![Vec::new(); iterations],
            own: radii.iter().map(|r| r[v].floor() as u32).collect(),
        })
        .collect();
    let protocol = DecompositionFlood {
        hop_cap: params.hop_cap(),
    };
    let (states, stats) = sim.run(g, &protocol, states, params.hop_cap())?;
    let clusterings = radii
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let center_of = states
                .iter()
                .map(|s| s.fronts[i].iter().map(|&(src, _)| src as usize).min().unwrap())
                .collect();
            finish_clustering(center_of, r, (0..n).collect())
        })
        .collect();
    Ok((clusterings, stats))
}

pub fn sample_decomposition_distributed(
    g: &Graph,
    params: &PaddedDecompositionParams,
    seed: u64,
    sim: &Simulator,
) -> Result<(Clustering, RunStats)> {
    let (mut all, stats) = sample_decompositions_distributed(g, params, seed, 1, sim)?;
    Ok((all.pop().unwrap(), stats))
}
