//! The distributed approximation scheme for distance-bounded network design
//! programs.
//!
//! `t` padded decompositions with parameters `(D, λ)` are sampled at once.
//! Every cluster center gathers its cluster, solves CP(C) over the demands
//! whose `D`-ball stays inside the cluster, and sends the solution back. Each
//! edge finally averages the solutions of the iterations in which both of
//! its endpoints shared a cluster and scales the sum by `(1+ε)/t`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::decomp::{sample_decompositions_distributed, Clustering, PaddedDecompositionParams};
use crate::error::{Error, Result};
use crate::graph::{EdgeVector, Graph};
use crate::lp::{build_cluster_cp_for, solve_lp, CpSolution, DEFAULT_TOL};
use crate::model::CpInstance;
use crate::sim::{KnowledgeFlood, Payload, RoundPhase, RoundTranscript, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub seed: u64,
    /// Replaces the derived iteration count `t` when set.
    pub iterations: Option<usize>,
    pub tol: f64,
}

impl SolverConfig {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            seed,
            iterations: None,
            tol: DEFAULT_TOL,
        })
    }

    pub fn with_iterations(mut self, t: usize) -> Self {
        self.iterations = Some(t.max(1));
        self
    }

    /// `λ = ε(1−ε) / ((2−ε)(1+ε))`.
    pub fn lambda(&self) -> f64 {
        let e = self.epsilon;
        e * (1.0 - e) / ((2.0 - e) * (1.0 + e))
    }

    /// `t = ⌈16(1−ε/2)(1+ε)·ln n / ε²⌉`, at least 1.
    pub fn t(&self, n: usize) -> usize {
        if let Some(t) = self.iterations {
            return t;
        }
        let e = self.epsilon;
        let t = (16.0 * (1.0 - e / 2.0) * (1.0 + e) * (n.max(1) as f64).ln() / (e * e)).ceil();
        (t as usize).max(1)
    }

    /// The round bound `5·((2D/λ)·ln n + D) + 10`.
    pub fn round_bound(&self, n: usize, d: usize) -> f64 {
        5.0 * ((2.0 * d as f64 / self.lambda()) * (n.max(1) as f64).ln() + d as f64) + 10.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub index: usize,
    pub clustering: Clustering,
    /// `padded[u]`: whether `B(u, D)` lies inside `u`'s cluster, i.e. `i ∈ I_u`.
    pub padded: Vec<bool>,
    /// Solution of CP(C) per cluster id.
    pub solutions: Vec<Arc<CpSolution>>,
}

impl IterationRecord {
    /// `i ∈ I_{u,v}`.
    pub fn shares_cluster(&self, u: usize, v: usize) -> bool {
        self.clustering.assignment[u] == self.clustering.assignment[v]
    }

    pub fn solution_at(&self, u: usize) -> &CpSolution {
        &self.solutions[self.clustering.assignment[u]]
    }

    /// `x̃^i`: cluster solutions glued together, zero on cut edges.
    pub fn glued(&self, g: &Graph) -> Vec<f64> {
        g.edges()
            .iter()
            .enumerate()
            .map(|(e, &(u, v))| {
                if self.shares_cluster(u, v) {
                    self.solution_at(u).x.get(e)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub solution: CpSolution,
    pub transcript: RoundTranscript,
    pub records: Vec<IterationRecord>,
    pub config: SolverConfig,
    pub t: usize,
    /// `D`, the largest demand bound.
    pub d: usize,
    /// Distinct cluster programs actually solved.
    pub distinct_solves: usize,
}

struct ProbeRecord(Vec<u32>);

impl Payload for ProbeRecord {
    fn size_bytes(&self) -> usize {
        4 * self.0.len()
    }
}

/// What a node contributes to its center's view of the cluster.
struct NodeRecord {
    arcs: Vec<(usize, usize)>,
    demands: Vec<(usize, usize, usize)>,
    padded: Vec<bool>,
    centers: Vec<u32>,
}

impl Payload for NodeRecord {
    fn size_bytes(&self) -> usize {
        16 * self.arcs.len() + 24 * self.demands.len() + self.padded.len() + 4 * self.centers.len()
    }
}

/// Solutions a center sends back, one per iteration it leads.
struct CenterRecord(Vec<(usize, Arc<CpSolution>)>);

impl Payload for CenterRecord {
    fn size_bytes(&self) -> usize {
        self.0
            .iter()
            .map(|(_, s)| 8 + 8 * s.x.len() + s.flows.iter().map(|f| 8 + 8 * f.values.len()).sum::<usize>())
            .sum()
    }
}

pub fn solve_distributed(
    instance: &CpInstance,
    config: &SolverConfig,
    sim: &Simulator,
) -> Result<DistributedRun> {
    SolverConfig::new(config.epsilon, config.seed)?;
    let config = *config;
    let g: &Graph = &instance.graph;
    let n = g.node_count();
    let m = g.edge_count();
    let d = instance.max_path_length();
    let t = config.t(n);
    let mut transcript = RoundTranscript::default();
    if instance.demands.is_empty() {
        return Ok(DistributedRun {
            solution: CpSolution::empty(m),
            transcript,
            records: Vec::new(),
            config,
            t,
            d,
            distinct_solves: 0,
        });
    }
    let params = PaddedDecompositionParams::new(d, config.lambda(), n)?;

    let (clusterings, stats) = sample_decompositions_distributed(g, &params, config.seed, t, sim)?;
    transcript.record(RoundPhase::Decomposition, &stats);

    // each node learns whether its D-ball stays inside its cluster
    let probe: Vec<_> = (0..n)
        .map(|u| Some(Arc::new(ProbeRecord(clusterings.iter().map(|c| c.assignment[u] as u32).collect()))))
        .collect();
    let (seen, stats) = KnowledgeFlood { depth: d }.run(g, sim, probe)?;
    transcript.record(RoundPhase::Gather, &stats);
    let padded: Vec<Vec<bool>> = (0..n)
        .map(|u| {
            let own = seen[u][u].as_ref().expect("own record");
            (0..t)
                .map(|i| seen[u].iter().flatten().all(|r| r.0[i] == own.0[i]))
                .collect()
        })
        .collect();

    // gather: centers collect the records of their members
    let by_source = instance.demands.by_source(n);
    let records: Vec<_> = (0..n)
        .map(|u| {
            let mut arcs: Vec<(usize, usize)> = g.out_arcs(u).to_vec();
            arcs.extend_from_slice(g.in_arcs(u));
            Some(Arc::new(NodeRecord {
                arcs,
                demands: by_source[u]
                    .iter()
                    .map(|&i| {
                        let dm = instance.demands.pairs[i];
                        (i, dm.target, dm.bound)
                    })
                    .collect(),
                padded: padded[u].clone(),
                centers: clusterings.iter().map(|c| c.center_of(u) as u32).collect(),
            }))
        })
        .collect();
    let (views, stats) = KnowledgeFlood { depth: params.hop_cap() }.run(g, sim, records)?;
    transcript.record(RoundPhase::Gather, &stats);

    // each center derives (members, N(C)) from what it gathered
    let mut jobs: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut job_index: HashMap<(Vec<usize>, Vec<usize>), usize> = HashMap::new();
    let mut cluster_job: Vec<Vec<usize>> = Vec::with_capacity(t);
    for (i, clustering) in clusterings.iter().enumerate() {
        let mut per_cluster = Vec::with_capacity(clustering.cluster_count());
        for &center in &clustering.centers {
            let view = &views[center];
            let mut members = Vec::new();
            let mut demands = Vec::new();
            for (w, rec) in view.iter().enumerate() {
                let Some(rec) = rec else { continue };
                if rec.centers[i] as usize != center {
                    continue;
                }
                members.push(w);
                if rec.padded[i] {
                    demands.extend(rec.demands.iter().map(|&(di, _, _)| di));
                }
            }
            demands.sort_unstable();
            let key = (members, demands);
            let next = jobs.len();
            let job = *job_index.entry(key.clone()).or_insert_with(|| {
                jobs.push(key);
                next
            });
            per_cluster.push(job);
        }
        cluster_job.push(per_cluster);
    }
    let solved = solve_jobs(instance, &jobs, config.tol, sim.parallel)?;

    // centers send their solutions back out
    let mut led: Vec<Vec<(usize, Arc<CpSolution>)>> = vec![Vec::new(); n];
    for (i, clustering) in clusterings.iter().enumerate() {
        for (c, &center) in clustering.centers.iter().enumerate() {
            led[center].push((i, solved[cluster_job[i][c]].clone()));
        }
    }
    let outgoing: Vec<_> = led
        .into_iter()
        .map(|l| (!l.is_empty()).then(|| Arc::new(CenterRecord(l))))
        .collect();
    let (received, stats) = KnowledgeFlood { depth: params.hop_cap() }.run(g, sim, outgoing)?;
    transcript.record(RoundPhase::SolveBroadcast, &stats);

    // per-node view of x^{C_{u,i}, i}
    let local: Vec<Vec<Arc<CpSolution>>> = (0..n)
        .map(|u| {
            (0..t)
                .map(|i| {
                    let center = clusterings[i].center_of(u);
                    let rec = received[u][center].as_ref().ok_or_else(|| {
                        Error::Protocol(format!("node {u} never heard from its center {center}"))
                    })?;
                    let pos = rec.0.binary_search_by_key(&i, |(j, _)| *j).map_err(|_| {
                        Error::Protocol(format!("center {center} sent no solution for iteration {i}"))
                    })?;
                    Ok(rec.0[pos].1.clone())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = (1.0 + config.epsilon) / t as f64;
    let endpoint_value = |u: usize, v: usize, e: usize| -> f64 {
        let sum: f64 = (0..t)
            .filter(|&i| clusterings[i].assignment[u] == clusterings[i].assignment[v])
            .map(|i| local[u][i].x.get(e))
            .sum();
        (scale * sum).min(1.0)
    };
    let mut x = vec![0.0; m];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let at_u = endpoint_value(u, v, e);
        let at_v = endpoint_value(v, u, e);
        if at_u.to_bits() != at_v.to_bits() {
            return Err(Error::Protocol(format!(
                "endpoints of edge {e} disagree: {at_u} vs {at_v}"
            )));
        }
        x[e] = at_u;
    }

    let records: Vec<IterationRecord> = clusterings
        .into_iter()
        .enumerate()
        .map(|(i, clustering)| IterationRecord {
            index: i,
            solutions: cluster_job[i].iter().map(|&j| solved[j].clone()).collect(),
            padded: padded.iter().map(|p| p[i]).collect(),
            clustering,
        })
        .collect();

    let objective = instance.objective.evaluate_unchecked(g, &x);
    Ok(DistributedRun {
        solution: CpSolution {
            x: EdgeVector::new(x)?,
            flows: Vec::new(),
            objective,
            status: crate::lp::SolveStatus::Optimal,
            residual: records
                .iter()
                .flat_map(|r| r.solutions.iter().map(|s| s.residual))
                .fold(0.0, f64::max),
            iterations: 0,
        },
        transcript,
        records,
        config,
        t,
        d,
        distinct_solves: jobs.len(),
    })
}

fn solve_jobs(
    instance: &CpInstance,
    jobs: &[(Vec<usize>, Vec<usize>)],
    tol: f64,
    parallel: bool,
) -> Result<Vec<Arc<CpSolution>>> {
    let solve = |(members, demands): &(Vec<usize>, Vec<usize>)| {
        let problem = build_cluster_cp_for(instance, members, demands);
        solve_lp(&problem, &instance.graph, tol).map(Arc::new)
    };
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return jobs.par_iter().map(solve).collect();
    }
    let _ = parallel;
    jobs.iter().map(solve).collect()
}

/// `f̃ = (1/|I_u|) Σ_{i ∈ I_u} f^{C_{u,i}, i}` for demand `demand` with source
/// `u`, in path-family order.
pub fn implied_flow(instance: &CpInstance, records: &[IterationRecord], demand: usize) -> Result<Vec<f64>> {
    let dm = instance.demands.pairs.get(demand).ok_or_else(|| {
        Error::InvalidParameter(format!("unknown demand {demand}"))
    })?;
    let u = dm.source;
    let mut sum = vec![0.0; instance.paths.of(demand).len()];
    let mut count = 0usize;
    for r in records.iter().filter(|r| r.padded[u]) {
        let flow = r.solution_at(u).flow(demand).ok_or_else(|| {
            Error::Protocol(format!("padded source {u} has no flow for demand {demand} in iteration {}", r.index))
        })?;
        for (s, f) in sum.iter_mut().zip(flow) {
            *s += f;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoCertificate(u));
    }
    Ok(sum.into_iter().map(|s| s / count as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    /// `t/(1+ε)`.
    pub threshold: f64,
    /// `|I_u|` per node.
    pub counts: Vec<usize>,
    /// `|I_u| > t/(1+ε)` per node.
    pub passes: Vec<bool>,
    /// Nodes that are the source of some demand.
    pub sources: Vec<usize>,
}

impl ConcentrationReport {
    pub fn all_sources_pass(&self) -> bool {
        self.sources.iter().all(|&u| self.passes[u])
    }

    pub fn node_pass_fraction(&self) -> f64 {
        if self.passes.is_empty() {
            return 1.0;
        }
        self.passes.iter().filter(|&&p| p).count() as f64 / self.passes.len() as f64
    }
}

pub fn concentration_report(
    instance: &CpInstance,
    records: &[IterationRecord],
    config: &SolverConfig,
) -> ConcentrationReport {
    let n = instance.graph.node_count();
    let t = records.len().max(1);
    let threshold = t as f64 / (1.0 + config.epsilon);
    let mut counts = vec![0usize; n];
    for r in records {
        for (u, &p) in r.padded.iter().enumerate() {
            counts[u] += usize::from(p);
        }
    }
    let mut sources: Vec<usize> = instance.demands.pairs.iter().map(|d| d.source).collect();
    sources.sort_unstable();
    sources.dedup();
    ConcentrationReport {
        threshold,
        passes: counts.iter().map(|&c| c as f64 > threshold).collect(),
        counts,
        sources,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationSummary {
    pub index: usize,
    pub clusters: usize,
    pub max_diameter: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub n: usize,
    pub m: usize,
    pub demands: usize,
    pub objective: String,
    pub epsilon: f64,
    pub lambda: f64,
    pub t: usize,
    pub seed: u64,
    #[serde(rename = "D")]
    pub d: usize,
    pub iterations: Vec<IterationSummary>,
    pub concentration_threshold: f64,
    pub concentration_node_fraction: f64,
    pub concentration_sources_pass: bool,
    pub objective_value: f64,
    pub cp_star: Option<f64>,
    pub ratio: Option<f64>,
    pub rounds: RoundTranscript,
    pub round_bound: f64,
    pub distinct_solves: usize,
}

impl DistributedRun {
    pub fn manifest(&self, instance: &CpInstance, cp_star: Option<f64>) -> RunManifest {
        let g = &instance.graph;
        let conc = concentration_report(instance, &self.records, &self.config);
        RunManifest {
            n: g.node_count(),
            m: g.edge_count(),
            demands: instance.demands.len(),
            objective: instance.objective.label(),
            epsilon: self.config.epsilon,
            lambda: self.config.lambda(),
            t: self.t,
            seed: self.config.seed,
            d: self.d,
            iterations: self
                .records
                .iter()
                .map(|r| IterationSummary {
                    index: r.index,
                    clusters: r.clustering.cluster_count(),
                    max_diameter: r.clustering.max_diameter(g),
                })
                .collect(),
            concentration_threshold: conc.threshold,
            concentration_node_fraction: conc.node_pass_fraction(),
            concentration_sources_pass: conc.all_sources_pass(),
            objective_value: self.solution.objective,
            cp_star,
            ratio: cp_star.map(|c| ratio(self.solution.objective, c)),
            rounds: self.transcript.clone(),
            round_bound: self.config.round_bound(g.node_count(), self.d),
            distinct_solves: self.distinct_solves,
        }
    }
}

/// `value / optimum`, with `0/0 = 1`.
pub fn ratio(value: f64, optimum: f64) -> f64 {
    if optimum == 0.0 {
        if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / optimum
    }
}
