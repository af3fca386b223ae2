use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use proptest::prelude::*;

use padnet::decomp::{
    sample_decomposition_distributed, sample_decomposition_with, PaddedDecompositionParams, PermutationSource,
};
use padnet::distributed::{concentration_report, solve_distributed, SolverConfig};
use padnet::graph::{truncated_arborescence, Orientation};
use padnet::lp::{check_feasibility, solve_global_oracle};
use padnet::model::{enumerate_paths, CpInstance, DegreeMode, DemandSet, Objective, PathFamily};
use padnet::rng::{RngStream, StreamPhase};
use padnet::rounding::{round_low_degree, round_spanner, round_spanner_distributed};
use padnet::sim::Simulator;
use padnet::{EdgeVector, Graph};

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n, any::<bool>()).prop_flat_map(|(n, directed)| {
        proptest::collection::vec((0..n, 0..n), 0..n * 3).prop_map(move |pairs| {
            let mut seen = BTreeSet::new();
            let edges: Vec<(usize, usize)> = pairs
                .into_iter()
                .filter(|&(u, v)| u != v)
                .map(|(u, v)| if directed || u < v { (u, v) } else { (v, u) })
                .filter(|e| seen.insert(*e))
                .collect();
            Graph::new(n, edges, directed).unwrap()
        })
    })
}

fn directed_bfs(g: &Graph, s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &(u2, v) in g.edges() {
            let next = if u2 == u {
                Some(v)
            } else if !g.is_directed() && v == u {
                Some(u2)
            } else {
                None
            };
            if let Some(w) = next {
                if dist[w].is_none() {
                    dist[w] = Some(dist[u].unwrap() + 1);
                    q.push_back(w);
                }
            }
        }
    }
    dist
}

/// Brute-force simple paths: every node sequence, checked arc by arc.
fn brute_paths(g: &Graph, s: usize, t: usize, max_len: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut stack = vec![vec![s]];
    while let Some(p) = stack.pop() {
        let last = *p.last().unwrap();
        if last == t {
            out.insert(p);
            continue;
        }
        if p.len() > max_len {
            continue;
        }
        for w in 0..g.node_count() {
            if !p.contains(&w) && g.find_edge(last, w).is_some() {
                let mut q = p.clone();
                q.push(w);
                stack.push(q);
            }
        }
    }
    out
}

fn spanner_instance(seed: u64, n: usize, p: f64) -> Option<CpInstance> {
    let mut rng = RngStream::new(seed, StreamPhase::Generator, 0, 0);
    let g = padnet::harness::gnp(n, p, true, &mut rng).ok()?;
    if g.edge_count() == 0 {
        return None;
    }
    CpInstance::spanner(Arc::new(g), 2, Objective::LinearSum).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_invariants(g in graph_strategy(12)) {
        let n = g.node_count();
        let mut seen = BTreeSet::new();
        for &(u, v) in g.edges() {
            prop_assert!(u < n && v < n && u != v);
            prop_assert!(seen.insert((u, v)));
        }
        prop_assert_eq!(g.edge_count(), g.edges().len());
    }

    #[test]
    fn balls_grow_with_radius(g in graph_strategy(12), r1 in 0.0f64..4.0, extra in 0.0f64..3.0) {
        for u in 0..g.node_count() {
            let small: BTreeSet<_> = g.ball(u, r1).unwrap().into_iter().collect();
            let big: BTreeSet<_> = g.ball(u, r1 + extra).unwrap().into_iter().collect();
            prop_assert!(small.is_subset(&big));
        }
    }

    #[test]
    fn undirected_distance_is_a_metric(g in graph_strategy(10)) {
        let n = g.node_count();
        let d = |u, v| g.undirected_distance(u, v).unwrap();
        for u in 0..n {
            prop_assert_eq!(d(u, u), Some(0));
            for v in 0..n {
                prop_assert_eq!(d(u, v), d(v, u));
                for w in 0..n {
                    if let (Some(a), Some(b)) = (d(u, v), d(v, w)) {
                        prop_assert!(d(u, w).unwrap() <= a + b);
                    }
                }
            }
        }
    }

    #[test]
    fn restrict_is_idempotent(g in graph_strategy(12), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, StreamPhase::Generator, 0, 0);
        let x = EdgeVector::for_graph(&g, (0..g.edge_count()).map(|_| rng.uniform()).collect()).unwrap();
        let members: Vec<usize> = (0..g.node_count()).filter(|_| rng.bernoulli(0.5)).collect();
        let once = x.restrict(&members, &g).unwrap();
        let twice = once.restrict(&members, &g).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn arborescence_paths_are_shortest(g in graph_strategy(12), depth in 0usize..5) {
        for root in 0..g.node_count() {
            let tree = truncated_arborescence(&g, root, depth, Orientation::Out).unwrap();
            let dist = directed_bfs(&g, root);
            prop_assert!(tree.edges().len() < g.node_count());
            for w in 0..g.node_count() {
                let reach = matches!(dist[w], Some(d) if d <= depth);
                prop_assert_eq!(tree.depth[w].is_some(), reach);
                if let Some(path) = tree.path_to(w) {
                    prop_assert_eq!(path.len() - 1, dist[w].unwrap());
                    prop_assert_eq!(path[0], root);
                    for pair in path.windows(2) {
                        prop_assert!(g.find_edge(pair[0], pair[1]).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn equal_keys_give_equal_streams(seed in any::<u64>(), it in 0u64..100, node in 0u64..100) {
        let mut a = RngStream::new(seed, StreamPhase::Radius, it, node);
        let mut b = RngStream::new(seed, StreamPhase::Radius, it, node);
        let mut c = RngStream::new(seed, StreamPhase::Radius, it, node + 1);
        let xa: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..8).map(|_| c.uniform()).collect();
        prop_assert_eq!(&xa, &xb);
        prop_assert_ne!(xa, xc);
    }

    #[test]
    fn decomposition_invariants(g in graph_strategy(16), k in 0usize..3, eps in 0.1f64..1.0, seed in any::<u64>()) {
        let params = PaddedDecompositionParams::new(k, eps, g.node_count()).unwrap();
        let c = sample_decomposition_with(&g, &params, seed, 0, PermutationSource::Random).unwrap();
        prop_assert!(c.validate(&g, &params).is_ok());
        for u in 0..g.node_count() {
            let v = c.center_of(u);
            let d = g.undirected_distance(u, v).unwrap().unwrap();
            prop_assert!(d as f64 <= c.radii[v] && c.radii[v] <= params.radius_cap());
        }
        let cap = 2.0 * params.radius_cap();
        prop_assert!(c.max_diameter(&g).unwrap() as f64 <= cap);
    }

    #[test]
    fn distributed_decomposition_matches(g in graph_strategy(16), k in 1usize..3, seed in any::<u64>()) {
        let params = PaddedDecompositionParams::new(k, 0.5, g.node_count()).unwrap();
        let central = sample_decomposition_with(&g, &params, seed, 0, PermutationSource::IdOrder).unwrap();
        let (dist, stats) = sample_decomposition_distributed(&g, &params, seed, &Simulator::default()).unwrap();
        prop_assert_eq!(central.assignment, dist.assignment);
        prop_assert!(stats.rounds <= params.hop_cap());
    }

    #[test]
    fn path_enumeration_matches_brute_force(g in graph_strategy(7), max_len in 1usize..5) {
        let n = g.node_count();
        for s in 0..n {
            for t in 0..n {
                if s == t {
                    continue;
                }
                let got: BTreeSet<Vec<usize>> =
                    enumerate_paths(&g, s, t, max_len).unwrap().into_iter().map(|p| p.nodes).collect();
                prop_assert_eq!(got, brute_paths(&g, s, t, max_len));
            }
        }
    }

    #[test]
    fn objectives_are_monotone_and_scale(g in graph_strategy(10), seed in any::<u64>(), c in 0.01f64..1.0) {
        let mut rng = RngStream::new(seed, StreamPhase::Generator, 0, 0);
        let x: Vec<f64> = (0..g.edge_count()).map(|_| 3.0 * rng.uniform()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.uniform()).collect();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        for obj in [
            Objective::LinearSum,
            Objective::MaxDegree(DegreeMode::InOut),
            Objective::MaxDegree(DegreeMode::Out),
            Objective::PNorm(1.0),
            Objective::PNorm(2.0),
            Objective::PNorm(3.5),
            Objective::PNorm(f64::INFINITY),
        ] {
            let gx = obj.evaluate(&g, &x).unwrap();
            prop_assert_eq!(obj.evaluate(&g, &vec![0.0; g.edge_count()]).unwrap(), 0.0);
            prop_assert!(gx <= obj.evaluate(&g, &y).unwrap() + 1e-12);
            prop_assert!(obj.evaluate(&g, &scaled).unwrap() <= c * gx + 1e-12);
        }
    }

    #[test]
    fn partition_identity(g in graph_strategy(12), seed in any::<u64>(), parts in 1usize..4) {
        let n = g.node_count();
        let mut rng = RngStream::new(seed, StreamPhase::Generator, 0, 0);
        let label: Vec<usize> = (0..n).map(|_| (rng.uniform() * parts as f64) as usize).collect();
        let x: Vec<f64> = g
            .edges()
            .iter()
            .map(|&(u, v)| if label[u] == label[v] { 2.0 * rng.uniform() } else { 0.0 })
            .collect();
        let xv = EdgeVector::for_graph(&g, x.clone()).unwrap();
        for obj in [
            Objective::LinearSum,
            Objective::MaxDegree(DegreeMode::InOut),
            Objective::PNorm(2.0),
            Objective::PNorm(f64::INFINITY),
        ] {
            let per: Vec<f64> = (0..parts)
                .map(|c| {
                    let members: Vec<usize> = (0..n).filter(|&u| label[u] == c).collect();
                    obj.evaluate(&g, xv.restrict(&members, &g).unwrap().values()).unwrap()
                })
                .collect();
            let whole = obj.evaluate(&g, &x).unwrap();
            prop_assert!((whole - obj.combine(&per)).abs() <= 1e-12 * whole.max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dropping_demands_never_raises_the_optimum(seed in any::<u64>(), keep in 0.2f64..1.0) {
        let Some(inst) = spanner_instance(seed, 8, 0.35) else { return Ok(()) };
        let full = solve_global_oracle(&inst).unwrap().objective;
        let mut rng = RngStream::new(seed, StreamPhase::Demands, 0, 0);
        let kept: Vec<usize> = (0..inst.demands.len()).filter(|_| rng.bernoulli(keep)).collect();
        let sub = CpInstance::new(
            inst.graph.clone(),
            DemandSet {
                pairs: kept.iter().map(|&d| inst.demands.pairs[d]).collect(),
                spanning: false,
            },
            PathFamily { paths: kept.iter().map(|&d| inst.paths.paths[d].clone()).collect() },
            inst.objective,
        )
        .unwrap();
        let partial = solve_global_oracle(&sub).unwrap().objective;
        prop_assert!(partial <= full + 1e-9);
    }

    #[test]
    fn distributed_solver_properties(seed in any::<u64>()) {
        let Some(inst) = spanner_instance(seed, 10, 0.3) else { return Ok(()) };
        let oracle = solve_global_oracle(&inst).unwrap();
        let config = SolverConfig::new(0.5, seed).unwrap();
        let a = solve_distributed(&inst, &config, &Simulator::default()).unwrap();
        let b = solve_distributed(&inst, &config, &Simulator::sequential()).unwrap();
        prop_assert_eq!(a.solution.x.values(), b.solution.x.values());
        prop_assert_eq!(&a.transcript, &b.transcript);
        let g = &inst.graph;
        for r in &a.records {
            let glued = inst.objective.evaluate(g, &r.glued(g)).unwrap();
            prop_assert!(glued <= oracle.objective + 1e-9);
        }
        prop_assert!(a.solution.objective <= 1.5 * oracle.objective + 1e-6);
        prop_assert!(a.transcript.rounds_elapsed() as f64 <= config.round_bound(10, a.d));
        let t = &a.transcript;
        prop_assert_eq!(
            t.rounds_elapsed(),
            t.decomposition_rounds + t.gather_rounds + t.solve_broadcast_rounds + t.rounding_rounds
        );
        if concentration_report(&inst, &a.records, &config).all_sources_pass() {
            prop_assert!(check_feasibility(&inst, a.solution.x.values(), 1e-9).unwrap().feasible);
        }
    }

    #[test]
    fn distributed_rounding_matches(g in graph_strategy(14), seed in any::<u64>(), depth in 1usize..4) {
        let mut rng = RngStream::new(seed, StreamPhase::Generator, 0, 0);
        let x: Vec<f64> = (0..g.edge_count()).map(|_| rng.uniform() * 0.3).collect();
        let central = round_spanner(&g, &x, depth, seed).unwrap();
        let (dist, stats) = round_spanner_distributed(&g, &x, depth, seed, &Simulator::default()).unwrap();
        prop_assert_eq!(central, dist);
        prop_assert!(stats.rounds <= 2 * depth + 5);
    }
}

#[test]
fn low_degree_rounding_expected_degree() {
    let mut rng = RngStream::new(3, StreamPhase::Generator, 0, 0);
    let g = padnet::harness::gnp(12, 0.4, true, &mut rng).unwrap();
    let x: Vec<f64> = (0..g.edge_count()).map(|_| rng.uniform()).collect();
    let k = 2;
    let runs = 2000;
    let n = g.node_count();
    let mut totals = vec![0.0; n];
    for s in 0..runs {
        for e in round_low_degree(&g, &x, k, s).unwrap() {
            let (u, v) = g.edge(e);
            totals[u] += 1.0;
            totals[v] += 1.0;
        }
    }
    for v in 0..n {
        let probs: Vec<f64> = g
            .edges()
            .iter()
            .zip(&x)
            .filter(|(&(a, b), _)| a == v || b == v)
            .map(|(_, &xe)| xe.powf(1.0 / k as f64))
            .collect();
        let bound: f64 = probs.iter().sum();
        let var: f64 = probs.iter().map(|p| p * (1.0 - p)).sum();
        let sigma = (var / runs as f64).sqrt();
        let mean = totals[v] / runs as f64;
        assert!(mean <= bound + 3.0 * sigma + 1e-12, "node {v}: {mean} > {bound}");
    }
}

#[test]
fn instance_helper_is_not_vacuous() {
    let built = (0..20).filter(|&s| spanner_instance(s, 10, 0.3).is_some()).count();
    assert!(built >= 18, "only {built} of 20 seeds produced an instance");
}
