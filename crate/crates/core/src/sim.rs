//! Synchronous LOCAL-model engine.
//!
//! A run is a sequence of steps `0, 1, 2, ...`. At step `r` every node sees the
//! messages its neighbors sent at step `r - 1`, updates its state, and queues
//! messages for step `r + 1`. The run ends at the first step after which every
//! node reports done; the number of rounds is the index of that step, i.e. the
//! number of message exchanges that happened.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Estimated wire size of a message, used for the payload statistics.
pub trait Payload {
    fn size_bytes(&self) -> usize;
}

impl<T: Payload> Payload for Vec<T> {
    fn size_bytes(&self) -> usize {
        self.iter().map(Payload::size_bytes).sum()
    }
}

impl<T: Payload> Payload for Arc<T> {
    fn size_bytes(&self) -> usize {
        (**self).size_bytes()
    }
}

pub struct NodeContext<'a> {
    pub node: usize,
    pub round: usize,
    pub n: usize,
    pub neighbors: &'a [usize],
}

pub struct Outbox<M> {
    messages: Vec<(usize, M)>,
}

impl<M: Clone> Outbox<M> {
    fn new() -> Self {
        Self {
            messages: Vec::new(),
        }
    }

    pub fn send(&mut self, to: usize, msg: M) {
        self.messages.push((to, msg));
    }

    pub fn broadcast(&mut self, neighbors: &[usize], msg: M) {
        for &to in neighbors {
            self.messages.push((to, msg.clone()));
        }
    }
}

pub trait Protocol: Sync {
    type State: Send;
    type Message: Payload + Clone + Send + Sync;

    /// Runs one step at a node. Returns `true` once the node is done.
    fn step(
        &self,
        ctx: &NodeContext<'_>,
        state: &mut Self::State,
        inbox: &[(usize, Self::Message)],
        outbox: &mut Outbox<Self::Message>,
    ) -> bool;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub rounds: usize,
    pub messages: u64,
    pub max_payload_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundPhase {
    Decomposition,
    Gather,
    SolveBroadcast,
    Rounding,
}

/// Round accounting across the phases of a composed run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundTranscript {
    pub decomposition_rounds: usize,
    pub gather_rounds: usize,
    pub solve_broadcast_rounds: usize,
    pub rounding_rounds: usize,
    pub messages: u64,
    pub max_payload_bytes: usize,
}

impl RoundTranscript {
    pub fn rounds_elapsed(&self) -> usize {
        self.decomposition_rounds
            + self.gather_rounds
            + self.solve_broadcast_rounds
            + self.rounding_rounds
    }

    pub fn record(&mut self, phase: RoundPhase, stats: &RunStats) {
        let slot = match phase {
            RoundPhase::Decomposition => &mut self.decomposition_rounds,
            RoundPhase::Gather => &mut self.gather_rounds,
            RoundPhase::SolveBroadcast => &mut self.solve_broadcast_rounds,
            RoundPhase::Rounding => &mut self.rounding_rounds,
        };
        *slot += stats.rounds;
        self.messages += stats.messages;
        self.max_payload_bytes = self.max_payload_bytes.max(stats.max_payload_bytes);
    }

    pub const CSV_HEADER: &'static str = "seed,n,m,epsilon,D,decomposition_rounds,gather_rounds,solve_broadcast_rounds,rounding_rounds,total_rounds,messages,max_payload_bytes";

    pub fn csv_row(&self, seed: u64, n: usize, m: usize, epsilon: f64, d: usize) -> String {
        format!(
            "{seed},{n},{m},{epsilon},{d},{},{},{},{},{},{},{}",
            self.decomposition_rounds,
            self.gather_rounds,
            self.solve_broadcast_rounds,
            self.rounding_rounds,
            self.rounds_elapsed(),
            self.messages,
            self.max_payload_bytes
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    /// Step nodes of one round on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            parallel: cfg!(feature = "parallel"),
        }
    }
}

impl Simulator {
    pub fn sequential() -> Self {
        Self { parallel: false }
    }

    pub fn run<P: Protocol>(
        &self,
        g: &Graph,
        protocol: &P,
        mut states: Vec<P::State>,
        max_rounds: usize,
    ) -> Result<(Vec<P::State>, RunStats)> {
        let n = g.node_count();
        if states.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: states.len(),
            });
        }
        let mut inboxes: Vec<Vec<(usize, P::Message)>> = (0..n).map(|_| Vec::new()).collect();
        let mut stats = RunStats::default();
        for round in 0..=max_rounds {
            let results = self.step_all(g, protocol, &mut states, &inboxes, round);
            if results.iter().all(|(done, _)| *done) {
                stats.rounds = round;
                return Ok((states, stats));
            }
            if round == max_rounds {
                break;
            }
            for inbox in inboxes.iter_mut() {
                inbox.clear();
            }
            // serial barrier: deliver in sender order
            for (from, (_, outbox)) in results.into_iter().enumerate() {
                for (to, msg) in outbox.messages {
                    if g.neighbors(from).binary_search(&to).is_err() {
                        return Err(Error::NonNeighbor { from, to });
                    }
                    stats.messages += 1;
                    stats.max_payload_bytes = stats.max_payload_bytes.max(msg.size_bytes());
                    inboxes[to].push((from, msg));
                }
            }
        }
        Err(Error::Timeout { max_rounds })
    }

    fn step_all<P: Protocol>(
        &self,
        g: &Graph,
        protocol: &P,
        states: &mut [P::State],
        inboxes: &[Vec<(usize, P::Message)>],
        round: usize,
    ) -> Vec<(bool, Outbox<P::Message>)> {
        let n = g.node_count();
        let one = |node: usize, state: &mut P::State| {
            let ctx = NodeContext {
                node,
                round,
                n,
                neighbors: g.neighbors(node),
            };
            let mut outbox = Outbox::new();
            let done = protocol.step(&ctx, state, &inboxes[node], &mut outbox);
            (done, outbox)
        };
        #[cfg(feature = "parallel")]
        if self.parallel {
            use rayon::prelude::*;
            return states
                .par_iter_mut()
                .enumerate()
                .map(|(node, state)| one(node, state))
                .collect();
        }
        states
            .iter_mut()
            .enumerate()
            .map(|(node, state)| one(node, state))
            .collect()
    }
}

/// Records known by a node after a [`KnowledgeFlood`]: `known[origin]`.
pub type Knowledge<R> = Vec<Option<Arc<R>>>;

/// Every node starts with at most one record and forwards each newly learned
/// record once, for exactly `depth` rounds. Afterwards each node holds the
/// records of every node within communication distance `depth`.
pub struct KnowledgeFlood {
    pub depth: usize,
}

pub struct FloodState<R> {
    pub known: Knowledge<R>,
    fresh: Vec<(usize, Arc<R>)>,
}

impl<R> FloodState<R> {
    pub fn new(n: usize, node: usize, record: Option<Arc<R>>) -> Self {
        let mut known = vec![None; n];
        let mut fresh = Vec::new();
        if let Some(r) = record {
            known[node] = Some(r.clone());
            fresh.push((node, r));
        }
        Self { known, fresh }
    }
}

pub struct FloodMessage<R>(pub Vec<(usize, Arc<R>)>);

impl<R> Clone for FloodMessage<R> {
    fn clone(&self) -> Self {
        FloodMessage(self.0.clone())
    }
}

impl<R: Payload> Payload for FloodMessage<R> {
    fn size_bytes(&self) -> usize {
        self.0.iter().map(|(_, r)| 8 + r.size_bytes()).sum()
    }
}

impl<R: Payload + Send + Sync> Protocol for FloodProtocol<R> {
    type State = FloodState<R>;
    type Message = FloodMessage<R>;

    fn step(
        &self,
        ctx: &NodeContext<'_>,
        state: &mut Self::State,
        inbox: &[(usize, Self::Message)],
        outbox: &mut Outbox<Self::Message>,
    ) -> bool {
        for (_, FloodMessage(records)) in inbox {
            for (origin, record) in records {
                if state.known[*origin].is_none() {
                    state.known[*origin] = Some(record.clone());
                    state.fresh.push((*origin, record.clone()));
                }
            }
        }
        if ctx.round < self.depth && !state.fresh.is_empty() {
            let batch = std::mem::take(&mut state.fresh);
            outbox.broadcast(ctx.neighbors, FloodMessage(batch));
        } else {
            state.fresh.clear();
        }
        ctx.round >= self.depth
    }
}

pub struct FloodProtocol<R> {
    depth: usize,
    _marker: std::marker::PhantomData<fn() -> R>,
}

impl KnowledgeFlood {
    /// Runs the flood; `records[u]` is node `u`'s initial record.
    pub fn run<R: Payload + Send + Sync>(
        &self,
        g: &Graph,
        sim: &Simulator,
        records: Vec<Option<Arc<R>>>,
    ) -> Result<(Vec<Knowledge<R>>, RunStats)> {
        let n = g.node_count();
        let states = records
            .into_iter()
            .enumerate()
            .map(|(u, r)| FloodState::new(n, u, r))
            .collect();
        let protocol = FloodProtocol {
            depth: self.depth,
            _marker: std::marker::PhantomData,
        };
        let (states, stats) = sim.run(g, &protocol, states, self.depth)?;
        Ok((states.into_iter().map(|s| s.known).collect(), stats))
    }
}

struct ClusterBroadcast<'a> {
    mask: &'a [bool],
}

struct Token<T>(Arc<T>);

impl<T> Clone for Token<T> {
    fn clone(&self) -> Self {
        Token(self.0.clone())
    }
}

impl<T: Payload> Payload for Token<T> {
    fn size_bytes(&self) -> usize {
        self.0.size_bytes()
    }
}

impl<T: Payload + Send + Sync> Protocol for (ClusterBroadcast<'_>, std::marker::PhantomData<T>) {
    type State = Option<Arc<T>>;
    type Message = Token<T>;

    fn step(
        &self,
        ctx: &NodeContext<'_>,
        state: &mut Self::State,
        inbox: &[(usize, Self::Message)],
        outbox: &mut Outbox<Self::Message>,
    ) -> bool {
        let mask = self.0.mask;
        if !mask[ctx.node] {
            return true;
        }
        let newly = if state.is_none() {
            inbox.first().map(|(_, Token(p))| p.clone())
        } else {
            None
        };
        let forward = match (ctx.round, &newly) {
            (0, _) => state.clone(),
            (_, Some(p)) => Some(p.clone()),
            _ => None,
        };
        if newly.is_some() {
            *state = newly;
        }
        if let Some(p) = forward {
            for &w in ctx.neighbors {
                if mask[w] {
                    outbox.send(w, Token(p.clone()));
                }
            }
        }
        state.is_some()
    }
}

/// Delivers `payload` from `center` to every node of `cluster` along edges
/// inside the cluster. Returns the per-node copies and the rounds used, which
/// equal the eccentricity of `center` in the cluster subgraph.
pub fn broadcast_in_cluster<T: Payload + Send + Sync>(
    g: &Graph,
    sim: &Simulator,
    cluster: &[usize],
    center: usize,
    payload: T,
) -> Result<(Vec<Option<Arc<T>>>, RunStats)> {
    let n = g.node_count();
    g.check_node(center)?;
    let mut mask = vec![false; n];
    for &u in cluster {
        g.check_node(u)?;
        mask[u] = true;
    }
    if !mask[center] {
        return Err(Error::Protocol(format!("center {center} not in cluster")));
    }
    // connectivity inside the cluster subgraph
    let mut seen = vec![false; n];
    let mut stack = vec![center];
    seen[center] = true;
    while let Some(w) = stack.pop() {
        for &z in g.neighbors(w) {
            if mask[z] && !seen[z] {
                seen[z] = true;
                stack.push(z);
            }
        }
    }
    if cluster.iter().any(|&u| !seen[u]) {
        return Err(Error::DisconnectedCluster);
    }
    let payload = Arc::new(payload);
    let states = (0..n)
        .map(|u| (u == center).then(|| payload.clone()))
        .collect();
    let protocol = (ClusterBroadcast { mask: &mask }, std::marker::PhantomData::<T>);
    sim.run(g, &protocol, states, cluster.len())
}

impl Payload for () {
    fn size_bytes(&self) -> usize {
        0
    }
}

impl Payload for u64 {
    fn size_bytes(&self) -> usize {
        8
    }
}
