//! Graph representation with a materialized undirected communication shadow.
//!
//! Nodes are dense indices `0..n`. Every distance used by the decomposition
//! and the LOCAL simulator is a hop distance in the undirected shadow; the
//! only direction-aware traversals are path enumeration and arborescences.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel for "unreachable" inside [`DistanceMatrix`].
const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    directed: bool,
    // (neighbor, edge index); for undirected graphs both lists hold every incident edge
    out_adj: Vec<Vec<(usize, usize)>>,
    in_adj: Vec<Vec<(usize, usize)>>,
    comm_adj: Vec<Vec<usize>>,
    edge_index: HashMap<(usize, usize), usize>,
    distances: OnceLock<DistanceMatrix>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, directed: bool) -> Result<Self> {
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut comm_adj = vec![Vec::new(); n];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (idx, &(u, v)) in edges.iter().enumerate() {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::InvalidNode { node: w, n });
                }
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            if edge_index.insert(key, idx).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
            out_adj[u].push((v, idx));
            in_adj[v].push((u, idx));
            if !directed {
                out_adj[v].push((u, idx));
                in_adj[u].push((v, idx));
            }
            comm_adj[u].push(v);
            comm_adj[v].push(u);
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        for list in comm_adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            n,
            edges,
            directed,
            out_adj,
            in_adj,
            comm_adj,
            edge_index,
            distances: OnceLock::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Edge index of `(u, v)`; for undirected graphs the orientation is ignored.
    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        let key = if self.directed { (u, v) } else { (u.min(v), u.max(v)) };
        self.edge_index.get(&key).copied()
    }

    /// Arcs leaving `u` as `(head, edge)` pairs sorted by head.
    pub fn out_arcs(&self, u: usize) -> &[(usize, usize)] {
        &self.out_adj[u]
    }

    /// Arcs entering `u` as `(tail, edge)` pairs sorted by tail.
    pub fn in_arcs(&self, u: usize) -> &[(usize, usize)] {
        &self.in_adj[u]
    }

    /// Neighbors in the undirected communication graph, sorted, deduplicated.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.comm_adj[u]
    }

    /// Edge indices incident to `u` in either direction.
    pub fn incident_edges(&self, u: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.out_adj[u]
            .iter()
            .chain(self.in_adj[u].iter())
            .map(|&(_, e)| e)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn check_node(&self, u: usize) -> Result<()> {
        if u < self.n {
            Ok(())
        } else {
            Err(Error::InvalidNode { node: u, n: self.n })
        }
    }

    /// All-pairs hop distances in the communication graph, computed once.
    pub fn distances(&self) -> &DistanceMatrix {
        self.distances.get_or_init(|| DistanceMatrix::compute(self))
    }

    /// Hop distance ignoring edge directions; `None` means disconnected.
    pub fn undirected_distance(&self, u: usize, v: usize) -> Result<Option<usize>> {
        self.check_node(u)?;
        self.check_node(v)?;
        Ok(self.distances().get(u, v))
    }

    /// Hop distance respecting edge directions.
    pub fn directed_distance(&self, u: usize, v: usize) -> Result<Option<usize>> {
        self.check_node(u)?;
        self.check_node(v)?;
        let levels = self.directed_bfs(u, Orientation::Out, usize::MAX);
        Ok(levels[v])
    }

    /// `B(u, radius)`: nodes within undirected distance `radius`, ascending.
    pub fn ball(&self, u: usize, radius: f64) -> Result<Vec<usize>> {
        self.check_node(u)?;
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {radius}")));
        }
        let row = self.distances().row(u);
        Ok((0..self.n)
            .filter(|&w| row[w] != UNREACHABLE && f64::from(row[w]) <= radius)
            .collect())
    }

    /// Edges with both endpoints inside `members` (given as a membership mask).
    pub fn induced_edges(&self, mask: &[bool]) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &(u, v))| mask[u] && mask[v])
            .map(|(e, _)| e)
            .collect()
    }

    /// Largest pairwise communication distance among `members`
    /// (`None` if two members are disconnected). This is the weak diameter:
    /// shortest paths may leave the set.
    pub fn weak_diameter(&self, members: &[usize]) -> Option<usize> {
        let dist = self.distances();
        let mut best = 0;
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                best = best.max(dist.get(a, b)?);
            }
        }
        Some(best)
    }

    /// Directed BFS levels from `root`, cut at `max_depth`.
    pub(crate) fn directed_bfs(
        &self,
        root: usize,
        orientation: Orientation,
        max_depth: usize,
    ) -> Vec<Option<usize>> {
        let mut level = vec![None; self.n];
        level[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(w) = queue.pop_front() {
            let d = level[w].unwrap();
            if d >= max_depth {
                continue;
            }
            let arcs = match orientation {
                Orientation::Out => &self.out_adj[w],
                Orientation::In => &self.in_adj[w],
            };
            for &(z, _) in arcs {
                if level[z].is_none() {
                    level[z] = Some(d + 1);
                    queue.push_back(z);
                }
            }
        }
        level
    }

    /// Parses the `n m directed|undirected` header format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: "header must be `n m directed|undirected`".into(),
            });
        }
        let parse = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("{s}: {e}"),
            })
        };
        let n = parse(fields[0], line_no)?;
        let m = parse(fields[1], line_no)?;
        let directed = match fields[2] {
            "directed" => true,
            "undirected" => false,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown directedness `{other}`"),
                })
            }
        };
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse {
                    line,
                    msg: "edge line must be `u v`".into(),
                });
            }
            edges.push((parse(parts[0], line)?, parse(parts[1], line)?));
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Graph::new(n, edges, directed)
    }

    pub fn to_text(&self) -> String {
        self.subgraph_text(&vec![true; self.edge_count()])
    }

    /// Same format as [`Graph::to_text`], listing only the selected edges.
    pub fn subgraph_text(&self, selected: &[bool]) -> String {
        let kept: Vec<_> = self
            .edges
            .iter()
            .zip(selected)
            .filter(|(_, &s)| s)
            .map(|(e, _)| *e)
            .collect();
        let mut out = format!(
            "{} {} {}\n",
            self.n,
            kept.len(),
            if self.directed { "directed" } else { "undirected" }
        );
        for (u, v) in kept {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<u32>,
}

impl DistanceMatrix {
    fn compute(g: &Graph) -> Self {
        let n = g.n;
        let mut dist = vec![UNREACHABLE; n * n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            let row = &mut dist[s * n..(s + 1) * n];
            row[s] = 0;
            queue.clear();
            queue.push_back(s);
            while let Some(w) = queue.pop_front() {
                let d = row[w];
                for &z in &g.comm_adj[w] {
                    if row[z] == UNREACHABLE {
                        row[z] = d + 1;
                        queue.push_back(z);
                    }
                }
            }
        }
        Self { n, dist }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<usize> {
        match self.dist[u * self.n + v] {
            UNREACHABLE => None,
            d => Some(d as usize),
        }
    }

    /// Raw row; unreachable entries are `u32::MAX`.
    pub fn row(&self, u: usize) -> &[u32] {
        &self.dist[u * self.n..(u + 1) * self.n]
    }

    /// Whether `d(u, v) <= radius`.
    pub fn within(&self, u: usize, v: usize, radius: f64) -> bool {
        let d = self.dist[u * self.n + v];
        d != UNREACHABLE && f64::from(d) <= radius
    }
}

/// Nonnegative vector indexed by edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeVector(Vec<f64>);

impl EdgeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::NegativeEntry { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn for_graph(g: &Graph, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.edge_count() {
            return Err(Error::SizeMismatch {
                expected: g.edge_count(),
                got: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, e: usize) -> f64 {
        self.0[e]
    }

    /// Restriction `x^S`: keeps entries on `E(S)`, zeroes the rest.
    pub fn restrict(&self, cluster: &[usize], g: &Graph) -> Result<Self> {
        if self.len() != g.edge_count() {
            return Err(Error::SizeMismatch {
                expected: g.edge_count(),
                got: self.len(),
            });
        }
        let mut mask = vec![false; g.node_count()];
        for &u in cluster {
            g.check_node(u)?;
            mask[u] = true;
        }
        Ok(self.restrict_mask(&mask, g))
    }

    pub(crate) fn restrict_mask(&self, mask: &[bool], g: &Graph) -> Self {
        Self(
            self.0
                .iter()
                .zip(g.edges())
                .map(|(&x, &(u, v))| if mask[u] && mask[v] { x } else { 0.0 })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    /// Tree edges point away from the root.
    Out,
    /// Tree edges point toward the root.
    In,
}

/// Shortest-path arborescence truncated at `depth_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arborescence {
    pub root: usize,
    pub depth_bound: usize,
    pub orientation: Orientation,
    /// `parent[w] = Some((p, e))` for every non-root tree node.
    pub parent: Vec<Option<(usize, usize)>>,
    pub depth: Vec<Option<usize>>,
}

impl Arborescence {
    /// Tree edges in ascending index order.
    pub fn edges(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.parent.iter().flatten().map(|&(_, e)| e).collect();
        out.sort_unstable();
        out
    }

    pub fn nodes(&self) -> Vec<usize> {
        (0..self.depth.len())
            .filter(|&w| self.depth[w].is_some())
            .collect()
    }

    /// Tree path from the root side to `w` (for `In`, from `w` to the root).
    pub fn path_to(&self, w: usize) -> Option<Vec<usize>> {
        self.depth[w]?;
        let mut path = vec![w];
        let mut cur = w;
        while let Some((p, _)) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        if self.orientation == Orientation::Out {
            path.reverse();
        }
        Some(path)
    }
}

/// BFS arborescence respecting edge directions, cut at `depth`.
/// Each node's parent is the lowest-index node on the previous level with an
/// arc to (out) or from (in) it.
pub fn truncated_arborescence(
    g: &Graph,
    root: usize,
    depth: usize,
    orientation: Orientation,
) -> Result<Arborescence> {
    g.check_node(root)?;
    let n = g.node_count();
    let mut level = vec![None; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    level[root] = Some(0);
    let mut frontier = vec![root];
    for d in 0..depth {
        let mut next = Vec::new();
        // frontier is ascending, so the first claim on a node is the lowest-index parent
        for &w in &frontier {
            let arcs = match orientation {
                Orientation::Out => g.out_arcs(w),
                Orientation::In => g.in_arcs(w),
            };
            for &(z, e) in arcs {
                if level[z].is_none() {
                    level[z] = Some(d + 1);
                    parent[z] = Some((w, e));
                    next.push(z);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        frontier = next;
    }
    Ok(Arborescence {
        root,
        depth_bound: depth,
        orientation,
        parent,
        depth: level,
    })
}
