//! Local rounding of fractional solutions into subgraphs.
//!
//! Spanner rounding keeps every edge with probability `min(√n·ln n·x_e, 1)`
//! and adds truncated in- and out-arborescences around randomly chosen roots.
//! The smaller endpoint of each edge owns its coin, and coins are drawn from
//! per-owner streams in edge-index order, so the simulated protocol and the
//! centralized function produce the same output for the same seed.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{truncated_arborescence, Graph, Orientation};
use crate::model::CpInstance;
use crate::rng::{RngStream, StreamPhase};
use crate::sim::{NodeContext, Outbox, Payload, Protocol, RunStats, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SampledThin,
    Arborescence,
    Both,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::SampledThin => "sampled-thin",
            Provenance::Arborescence => "arborescence",
            Provenance::Both => "both",
        }
    }

    fn from_flags(sampled: bool, tree: bool) -> Option<Self> {
        match (sampled, tree) {
            (true, true) => Some(Provenance::Both),
            (true, false) => Some(Provenance::SampledThin),
            (false, true) => Some(Provenance::Arborescence),
            (false, false) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpannerOutput {
    /// Kept edges, ascending.
    pub edges: Vec<usize>,
    /// Provenance of `edges[i]`.
    pub provenance: Vec<Provenance>,
    pub roots: Vec<usize>,
}

impl SpannerOutput {
    fn from_flags(sampled: &[bool], tree: &[bool], roots: Vec<usize>) -> Self {
        let mut edges = Vec::new();
        let mut provenance = Vec::new();
        for e in 0..sampled.len() {
            if let Some(p) = Provenance::from_flags(sampled[e], tree[e]) {
                edges.push(e);
                provenance.push(p);
            }
        }
        Self {
            edges,
            provenance,
            roots,
        }
    }

    pub fn mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &e in &self.edges {
            mask[e] = true;
        }
        mask
    }

    /// Edge list in the graph file format.
    pub fn to_graph_text(&self, g: &Graph) -> String {
        g.subgraph_text(&self.mask(g.edge_count()))
    }

    /// CSV with columns `edge,u,v,provenance`.
    pub fn provenance_csv(&self, g: &Graph) -> String {
        let mut out = String::from("edge,u,v,provenance\n");
        for (&e, p) in self.edges.iter().zip(&self.provenance) {
            let (u, v) = g.edge(e);
            let _ = writeln!(out, "{e},{u},{v},{}", p.label());
        }
        out
    }
}

/// `min(√n·ln n·x_e, 1)`.
pub fn edge_probability(n: usize, x_e: f64) -> f64 {
    let n = n as f64;
    (n.sqrt() * n.ln() * x_e).clamp(0.0, 1.0)
}

/// `min(3·ln n/√n, 1)`.
pub fn root_probability(n: usize) -> f64 {
    let n = n as f64;
    if n < 2.0 {
        return 0.0;
    }
    (3.0 * n.ln() / n.sqrt()).min(1.0)
}

fn owner(g: &Graph, e: usize) -> usize {
    let (u, v) = g.edge(e);
    u.min(v)
}

fn owned_edges(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); g.node_count()];
    for e in 0..g.edge_count() {
        out[owner(g, e)].push(e);
    }
    out
}

/// Coin outcomes of the edges owned by `v`, in edge-index order.
fn owner_coins(g: &Graph, x: &[f64], v: usize, owned: &[usize], seed: u64) -> Vec<(usize, bool)> {
    let mut rng = RngStream::new(seed, StreamPhase::EdgeCoin, 0, v as u64);
    let n = g.node_count();
    owned
        .iter()
        .map(|&e| (e, rng.uniform() < edge_probability(n, x[e])))
        .collect()
}

fn root_coin(n: usize, v: usize, seed: u64) -> bool {
    RngStream::new(seed, StreamPhase::RootCoin, 0, v as u64).uniform() < root_probability(n)
}

fn check_x(g: &Graph, x: &[f64]) -> Result<()> {
    if x.len() != g.edge_count() {
        return Err(Error::SizeMismatch {
            expected: g.edge_count(),
            got: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeEntry { index, value });
    }
    Ok(())
}

/// Centralized spanner rounding. `depth` is `k` for spanners and the largest
/// demand bound for network design instances.
pub fn round_spanner(g: &Graph, x: &[f64], depth: usize, seed: u64) -> Result<SpannerOutput> {
    check_x(g, x)?;
    let n = g.node_count();
    let m = g.edge_count();
    let mut sampled = vec![false; m];
    for (v, owned) in owned_edges(g).iter().enumerate() {
        for (e, keep) in owner_coins(g, x, v, owned, seed) {
            sampled[e] = keep;
        }
    }
    let roots: Vec<usize> = (0..n).filter(|&v| root_coin(n, v, seed)).collect();
    let mut tree = vec![false; m];
    for &r in &roots {
        for orientation in [Orientation::Out, Orientation::In] {
            for e in truncated_arborescence(g, r, depth, orientation)?.edges() {
                tree[e] = true;
            }
        }
    }
    Ok(SpannerOutput::from_flags(&sampled, &tree, roots))
}

#[derive(Clone, Copy)]
enum RoundingItem {
    Coin { edge: usize, keep: bool },
    Token { root: usize, out: bool, level: usize, edge: usize },
}

impl Payload for RoundingItem {
    fn size_bytes(&self) -> usize {
        match self {
            RoundingItem::Coin { .. } => 9,
            RoundingItem::Token { .. } => 25,
        }
    }
}

struct RoundingState {
    owned: Vec<usize>,
    sampled: Vec<usize>,
    tree: Vec<usize>,
    is_root: bool,
    // (root, out) -> level
    joined: BTreeMap<(usize, bool), usize>,
}

struct RoundingProtocol<'a> {
    g: &'a Graph,
    x: &'a [f64],
    depth: usize,
    seed: u64,
}

impl RoundingProtocol<'_> {
    fn forward(&self, node: usize, root: usize, out: bool, level: usize, outbox: &mut Outbox<RoundingItem>) {
        if level >= self.depth {
            return;
        }
        let arcs = if out { self.g.out_arcs(node) } else { self.g.in_arcs(node) };
        for &(z, e) in arcs {
            outbox.send(
                z,
                RoundingItem::Token {
                    root,
                    out,
                    level: level + 1,
                    edge: e,
                },
            );
        }
    }
}

impl Protocol for RoundingProtocol<'_> {
    type State = RoundingState;
    type Message = RoundingItem;

    fn step(
        &self,
        ctx: &NodeContext<'_>,
        state: &mut RoundingState,
        inbox: &[(usize, RoundingItem)],
        outbox: &mut Outbox<RoundingItem>,
    ) -> bool {
        let v = ctx.node;
        if ctx.round == 0 {
            for (e, keep) in owner_coins(self.g, self.x, v, &state.owned, self.seed) {
                if keep {
                    state.sampled.push(e);
                }
                let (a, b) = self.g.edge(e);
                outbox.send(if a == v { b } else { a }, RoundingItem::Coin { edge: e, keep });
            }
            if state.is_root {
                for out in [true, false] {
                    state.joined.insert((v, out), 0);
                    self.forward(v, v, out, 0, outbox);
                }
            }
        }
        // lowest sender first: the simulator delivers in sender order
        let mut claimed: BTreeMap<(usize, bool), (usize, usize, usize)> = BTreeMap::new();
        for &(from, item) in inbox {
            match item {
                RoundingItem::Coin { edge, keep } => {
                    if keep {
                        state.sampled.push(edge);
                    }
                }
                RoundingItem::Token { root, out, level, edge } => {
                    if state.joined.contains_key(&(root, out)) {
                        continue;
                    }
                    let slot = claimed.entry((root, out)).or_insert((from, level, edge));
                    if from < slot.0 {
                        *slot = (from, level, edge);
                    }
                }
            }
        }
        for ((root, out), (_, level, edge)) in claimed {
            state.joined.insert((root, out), level);
            state.tree.push(edge);
            self.forward(v, root, out, level, outbox);
        }
        ctx.round >= self.depth.max(1)
    }
}

/// The same rounding run as a LOCAL protocol: owners announce coin outcomes
/// to the other endpoint, and roots grow their trees one level per round.
pub fn round_spanner_distributed(
    g: &Graph,
    x: &[f64],
    depth: usize,
    seed: u64,
    sim: &Simulator,
) -> Result<(SpannerOutput, RunStats)> {
    check_x(g, x)?;
    let n = g.node_count();
    let m = g.edge_count();
    let states = owned_edges(g)
        .into_iter()
        .enumerate()
        .map(|(v, owned)| RoundingState {
            owned,
            sampled: Vec::new(),
            tree: Vec::new(),
            is_root: root_coin(n, v, seed),
            joined: BTreeMap::new(),
        })
        .collect();
    let protocol = RoundingProtocol { g, x, depth, seed };
    let (states, stats) = sim.run(g, &protocol, states, depth.max(1))?;
    let mut sampled = vec![false; m];
    let mut tree = vec![false; m];
    let mut roots = Vec::new();
    for (v, s) in states.iter().enumerate() {
        for &e in &s.sampled {
            sampled[e] = true;
        }
        for &e in &s.tree {
            tree[e] = true;
        }
        if s.is_root {
            roots.push(v);
        }
    }
    Ok((SpannerOutput::from_flags(&sampled, &tree, roots), stats))
}

/// Keeps each edge independently with probability `x_e^{1/k}`.
pub fn round_low_degree(g: &Graph, x: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    check_x(g, x)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| **v > 1.0) {
        return Err(Error::EntryAboveOne { index, value });
    }
    let mut keep = Vec::new();
    for (v, owned) in owned_edges(g).iter().enumerate() {
        let mut rng = RngStream::new(seed, StreamPhase::LowDegree, 0, v as u64);
        for &e in owned {
            if rng.uniform() < x[e].powf(1.0 / k as f64) {
                keep.push(e);
            }
        }
    }
    keep.sort_unstable();
    Ok(keep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StretchReport {
    pub valid: bool,
    /// Demand indices with `d_H(u, v) > L(u, v)`.
    pub violations: Vec<usize>,
}

/// Checks every demand's distance bound in the subgraph formed by `edges`.
pub fn verify_stretch(g: &Graph, edges: &[usize], instance: &CpInstance) -> Result<StretchReport> {
    let n = g.node_count();
    let mut adj = vec![Vec::new(); n];
    for &e in edges {
        if e >= g.edge_count() {
            return Err(Error::InvalidParameter(format!("edge {e} not in graph")));
        }
        let (u, v) = g.edge(e);
        adj[u].push(v);
        if !g.is_directed() {
            adj[v].push(u);
        }
    }
    let mut violations = Vec::new();
    let mut dist_from: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    for (i, d) in instance.demands.pairs.iter().enumerate() {
        let dist = dist_from.entry(d.source).or_insert_with(|| bfs(&adj, d.source));
        if dist[d.target].map_or(true, |h| h > d.bound) {
            violations.push(i);
        }
    }
    Ok(StretchReport {
        valid: violations.is_empty(),
        violations,
    })
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(w) = queue.pop_front() {
        let d = dist[w].unwrap();
        for &z in &adj[w] {
            if dist[z].is_none() {
                dist[z] = Some(d + 1);
                queue.push_back(z);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeClass {
    Thick,
    Thin,
}

/// Per demand: thick iff the allowed paths touch at least `√n` nodes.
pub fn classify_edges(instance: &CpInstance) -> Vec<EdgeClass> {
    let n = instance.graph.node_count();
    (0..instance.demands.len())
        .map(|d| {
            let mut nodes: Vec<usize> = instance.paths.of(d).iter().flat_map(|p| p.nodes.iter().copied()).collect();
            nodes.sort_unstable();
            nodes.dedup();
            if nodes.len() * nodes.len() >= n {
                EdgeClass::Thick
            } else {
                EdgeClass::Thin
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::Objective;

    fn bidirected_cycle(n: usize) -> Graph {
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        edges.extend((0..n).map(|i| ((i + 1) % n, i)));
        Graph::new(n, edges, true).unwrap()
    }

    #[test]
    fn probabilities() {
        assert_eq!(edge_probability(16, 1.0), 1.0);
        let x = 1.0 / (4.0 * 16f64.ln());
        assert!((edge_probability(16, x) - 1.0).abs() < 1e-12);
        assert_eq!(edge_probability(16, 0.0), 0.0);
        assert_eq!(root_probability(16), 1.0);
        assert!(root_probability(10_000) < 1.0);
    }

    #[test]
    fn capped_coins_keep_everything() {
        let g = bidirected_cycle(6);
        let x = vec![1.0; g.edge_count()];
        let out = round_spanner(&g, &x, 2, 1).unwrap();
        assert_eq!(out.edges, (0..g.edge_count()).collect::<Vec<_>>());
    }

    #[test]
    fn centralized_and_distributed_agree() {
        let g = bidirected_cycle(9);
        let x: Vec<f64> = (0..g.edge_count()).map(|e| (e % 5) as f64 * 0.02).collect();
        for seed in 0..5 {
            let a = round_spanner(&g, &x, 2, seed).unwrap();
            let (b, stats) = round_spanner_distributed(&g, &x, 2, seed, &Simulator::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(stats.rounds, 2);
        }
    }

    #[test]
    fn stretch_examples() {
        let g = Arc::new(bidirected_cycle(4));
        let inst = CpInstance::spanner(g.clone(), 3, Objective::LinearSum).unwrap();
        let all: Vec<usize> = (0..g.edge_count()).collect();
        assert!(verify_stretch(&g, &all, &inst).unwrap().valid);
        let missing_one: Vec<usize> = (1..g.edge_count()).collect();
        assert!(verify_stretch(&g, &missing_one, &inst).unwrap().valid);
        let none = verify_stretch(&g, &[], &inst).unwrap();
        assert_eq!(none.violations.len(), g.edge_count());
    }

    #[test]
    fn low_degree_extremes() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)], true).unwrap();
        assert_eq!(round_low_degree(&g, &[1.0, 0.0, 1.0], 2, 4).unwrap(), vec![0, 2]);
        assert!(round_low_degree(&g, &[1.5, 0.0, 1.0], 2, 4).is_err());
    }

    #[test]
    fn thick_and_thin() {
        let g = Arc::new(Graph::new(6, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], true).unwrap());
        let inst = CpInstance::spanner(g, 1, Objective::LinearSum).unwrap();
        assert!(classify_edges(&inst).iter().all(|&c| c == EdgeClass::Thin));
        let edges = (0..9).flat_map(|u| (0..9).filter(move |&v| v != u).map(move |v| (u, v))).collect();
        let k9 = Arc::new(Graph::new(9, edges, true).unwrap());
        let inst = CpInstance::dsn(k9, &[(0, 1, 2)], Objective::LinearSum).unwrap();
        assert_eq!(classify_edges(&inst), vec![EdgeClass::Thick]);
        let g4 = Arc::new(Graph::new(4, vec![(0, 1), (2, 3)], true).unwrap());
        let inst = CpInstance::spanner(g4, 1, Objective::LinearSum).unwrap();
        assert_eq!(classify_edges(&inst), vec![EdgeClass::Thick; 2]);
    }
}
