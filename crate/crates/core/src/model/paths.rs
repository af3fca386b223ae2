use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Simple directed path; `edges[i]` joins `nodes[i]` and `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// All simple `source → target` paths with at most `max_len` edges, in
/// lexicographic order of their node sequences. Fails once more than `cap`
/// paths are found.
pub fn enumerate_paths_capped(
    g: &Graph,
    source: usize,
    target: usize,
    max_len: usize,
    cap: usize,
) -> Result<Vec<Path>> {
    g.check_node(source)?;
    g.check_node(target)?;
    if max_len == 0 {
        return Err(Error::InvalidParameter("max path length must be >= 1".into()));
    }
    let mut out = Vec::new();
    if source == target {
        return Ok(out);
    }
    let mut on_path = vec![false; g.node_count()];
    let mut nodes = vec![source];
    let mut edges = Vec::new();
    on_path[source] = true;
    dfs(g, target, max_len, cap, &mut on_path, &mut nodes, &mut edges, &mut out)?;
    Ok(out)
}

pub fn enumerate_paths(g: &Graph, source: usize, target: usize, max_len: usize) -> Result<Vec<Path>> {
    enumerate_paths_capped(g, source, target, max_len, usize::MAX)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    g: &Graph,
    target: usize,
    max_len: usize,
    cap: usize,
    on_path: &mut [bool],
    nodes: &mut Vec<usize>,
    edges: &mut Vec<usize>,
    out: &mut Vec<Path>,
) -> Result<()> {
    let here = *nodes.last().unwrap();
    // out-arcs are sorted by head, so paths come out in lexicographic order
    for &(next, e) in g.out_arcs(here) {
        if on_path[next] {
            continue;
        }
        nodes.push(next);
        edges.push(e);
        if next == target {
            if out.len() == cap {
                return Err(Error::PathCapExceeded { demand: usize::MAX, cap });
            }
            out.push(Path {
                nodes: nodes.clone(),
                edges: edges.clone(),
            });
        } else if edges.len() < max_len {
            on_path[next] = true;
            dfs(g, target, max_len, cap, on_path, nodes, edges, out)?;
            on_path[next] = false;
        }
        nodes.pop();
        edges.pop();
    }
    Ok(())
}
