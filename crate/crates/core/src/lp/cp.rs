use std::fmt::Write as _;

use serde::Serialize;

use super::simplex::{LinearProgram, LpSolution, Sense};
use crate::error::{Error, Result};
use crate::graph::{EdgeVector, Graph};
use crate::model::{CpInstance, DegreeMode, Objective, DEFAULT_PATH_CAP};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Programs with at most this many variables are re-solved in exact
/// arithmetic when the floating-point solve stalls or misses the tolerance.
pub const EXACT_FALLBACK_VARS: usize = 200;
const MAX_CUTS: usize = 400;

/// The program CP(C) for one cluster, in (x, f) variables.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub program: LinearProgram,
    pub objective: Objective,
    /// Instance demand indices in N(C), ascending.
    pub demands: Vec<usize>,
    /// Variable `j` for `j < edge_vars.len()` is `x_{edge_vars[j]}`.
    pub edge_vars: Vec<usize>,
    /// `(demand, path)` per flow variable, placed after the edge variables.
    pub path_vars: Vec<(usize, usize)>,
    pub aux: Option<usize>,
    pub capacity_rows: usize,
    pub flow_rows: usize,
    path_edges: Vec<Vec<usize>>,
    edge_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Solved in exact rational arithmetic after the floating-point attempt
    /// failed.
    OptimalExact,
    /// Cutting planes stopped before the gap closed.
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandFlow {
    pub demand: usize,
    /// One value per allowed path of the demand, in path-family order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpSolution {
    pub x: EdgeVector,
    pub flows: Vec<DemandFlow>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Largest row violation of the raw simplex point.
    pub residual: f64,
    pub iterations: usize,
}

impl CpSolution {
    pub fn empty(m: usize) -> Self {
        Self {
            x: EdgeVector::zeros(m),
            flows: Vec::new(),
            objective: 0.0,
            status: SolveStatus::Optimal,
            residual: 0.0,
            iterations: 0,
        }
    }

    pub fn flow(&self, demand: usize) -> Option<&[f64]> {
        self.flows
            .binary_search_by_key(&demand, |f| f.demand)
            .ok()
            .map(|i| self.flows[i].values.as_slice())
    }
}

/// Demands `(u, v)` whose ball `B(u, D)` lies inside the cluster.
pub fn cluster_demands(instance: &CpInstance, members: &[usize]) -> Vec<usize> {
    let g = &instance.graph;
    let mut inside = vec![false; g.node_count()];
    for &u in members {
        inside[u] = true;
    }
    let d = instance.max_path_length() as f64;
    let dist = g.distances();
    let mut padded = vec![None::<bool>; g.node_count()];
    let mut out = Vec::new();
    for (i, dem) in instance.demands.pairs.iter().enumerate() {
        let u = dem.source;
        if !inside[u] {
            continue;
        }
        let ok = *padded[u].get_or_insert_with(|| {
            (0..g.node_count()).all(|w| inside[w] || !dist.within(u, w, d))
        });
        if ok {
            out.push(i);
        }
    }
    out
}

/// Builds CP(C) with N(C) computed from the instance's distances.
pub fn build_cluster_cp(instance: &CpInstance, members: &[usize]) -> LpProblem {
    let demands = cluster_demands(instance, members);
    build_cluster_cp_for(instance, members, &demands)
}

/// Builds CP(C) over the given demands, which must all lie in N(C).
pub fn build_cluster_cp_for(instance: &CpInstance, members: &[usize], demands: &[usize]) -> LpProblem {
    let g: &Graph = &instance.graph;
    let m = g.edge_count();
    let mut inside = vec![false; g.node_count()];
    for &u in members {
        inside[u] = true;
    }
    let mut used = vec![false; m];
    for &d in demands {
        for p in instance.paths.of(d) {
            for &e in &p.edges {
                let (a, b) = g.edge(e);
                debug_assert!(inside[a] && inside[b], "path of demand {d} leaves the cluster");
                used[e] = true;
            }
        }
    }
    let mut program = LinearProgram::default();
    let linear_cost = matches!(instance.objective, Objective::LinearSum)
        || instance.objective == Objective::PNorm(1.0);
    let edge_vars: Vec<usize> = (0..m).filter(|&e| used[e]).collect();
    let mut var_of_edge = vec![usize::MAX; m];
    for &e in &edge_vars {
        var_of_edge[e] = program.add_var(format!("x_{e}"), if linear_cost { 1.0 } else { 0.0 });
    }
    let mut path_vars = Vec::new();
    let mut path_edges = Vec::new();
    let mut first_var = Vec::with_capacity(demands.len());
    for &d in demands {
        first_var.push(program.num_vars());
        for (pi, p) in instance.paths.of(d).iter().enumerate() {
            program.add_var(format!("f_{d}_{pi}"), 0.0);
            path_vars.push((d, pi));
            path_edges.push(p.edges.clone());
        }
    }
    let aux = match instance.objective {
        Objective::MaxDegree(_) => Some(program.add_var("lambda", 1.0)),
        Objective::PNorm(p) if p > 1.0 => Some(program.add_var("s", 1.0)),
        _ => None,
    };

    let mut capacity_rows = 0;
    for (k, &d) in demands.iter().enumerate() {
        let paths = instance.paths.of(d);
        let mut on_edge: Vec<(usize, Vec<usize>)> = Vec::new();
        for (pi, p) in paths.iter().enumerate() {
            for &e in &p.edges {
                match on_edge.binary_search_by_key(&e, |(e, _)| *e) {
                    Ok(i) => on_edge[i].1.push(pi),
                    Err(i) => on_edge.insert(i, (e, vec![pi])),
                }
            }
        }
        for (e, through) in on_edge {
            let mut coeffs: Vec<(usize, f64)> =
                through.iter().map(|&pi| (first_var[k] + pi, 1.0)).collect();
            coeffs.push((var_of_edge[e], -1.0));
            program.add_row(format!("cap_{d}_{e}"), coeffs, Sense::Le, 0.0);
            capacity_rows += 1;
        }
    }
    for (k, &d) in demands.iter().enumerate() {
        let coeffs = (0..instance.paths.of(d).len()).map(|pi| (first_var[k] + pi, 1.0)).collect();
        program.add_row(format!("flow_{d}"), coeffs, Sense::Ge, 1.0);
    }

    match (instance.objective, aux) {
        (Objective::MaxDegree(mode), Some(lambda)) => {
            let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.node_count()];
            for &e in &edge_vars {
                let (u, v) = g.edge(e);
                if !g.is_directed() || mode != DegreeMode::In {
                    incident[u].push(var_of_edge[e]);
                }
                if !g.is_directed() || mode != DegreeMode::Out {
                    incident[v].push(var_of_edge[e]);
                }
            }
            for (v, vars) in incident.into_iter().enumerate() {
                if vars.is_empty() {
                    continue;
                }
                let mut coeffs: Vec<(usize, f64)> = vars.into_iter().map(|j| (j, 1.0)).collect();
                coeffs.push((lambda, -1.0));
                program.add_row(format!("deg_{v}"), coeffs, Sense::Le, 0.0);
            }
        }
        (Objective::PNorm(p), Some(s)) if p.is_infinite() => {
            for &e in &edge_vars {
                program.add_row(format!("inf_{e}"), vec![(var_of_edge[e], 1.0), (s, -1.0)], Sense::Le, 0.0);
            }
        }
        (Objective::PNorm(p), Some(s)) if !edge_vars.is_empty() => {
            // ||x||_p >= m^{1/p - 1} ||x||_1 seeds the outer approximation
            let a = (edge_vars.len() as f64).powf(1.0 / p - 1.0);
            let mut coeffs: Vec<(usize, f64)> = (0..edge_vars.len()).map(|j| (j, a)).collect();
            coeffs.push((s, -1.0));
            program.add_row("cut_0", coeffs, Sense::Le, 0.0);
        }
        _ => {}
    }

    LpProblem {
        flow_rows: demands.len(),
        program,
        objective: instance.objective,
        demands: demands.to_vec(),
        edge_vars,
        path_vars,
        aux,
        capacity_rows,
        path_edges,
        edge_count: m,
    }
}

fn solve_program(program: &LinearProgram, tol: f64) -> Result<(LpSolution, f64, bool)> {
    let attempt = program.solve();
    let small = program.num_vars() <= EXACT_FALLBACK_VARS;
    match attempt {
        Ok(sol) => {
            let residual = program.max_violation(&sol.values);
            if residual <= tol || !small {
                return Ok((sol, residual, false));
            }
        }
        Err(Error::IterationLimit(limit)) if !small => return Err(Error::IterationLimit(limit)),
        Err(Error::IterationLimit(_)) => {}
        Err(e) => return Err(e),
    }
    let sol = program.solve_exact()?;
    let residual = program.max_violation(&sol.values);
    Ok((sol, residual, true))
}

/// Solves CP(C). The returned flows sum to exactly one per demand and `x` is
/// the smallest vector they fit under, so the solution is feasible by
/// construction.
pub fn solve_lp(problem: &LpProblem, g: &Graph, tol: f64) -> Result<CpSolution> {
    if problem.demands.is_empty() {
        return Ok(CpSolution::empty(problem.edge_count));
    }
    let mut program = problem.program.clone();
    let mut status = SolveStatus::Optimal;
    let mut iterations = 0;
    let (mut sol, mut residual, mut exact);
    loop {
        (sol, residual, exact) = solve_program(&program, tol)?;
        iterations += sol.iterations;
        let Objective::PNorm(p) = problem.objective else { break };
        if !(p > 1.0) || p.is_infinite() {
            break;
        }
        let s = problem.aux.expect("p-norm program has an auxiliary variable");
        let x = &sol.values[..problem.edge_vars.len()];
        let norm = x.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
        if norm - sol.values[s] <= 1e-7 * norm.max(1.0) {
            break;
        }
        let cuts = program.rows.len() - problem.capacity_rows - problem.flow_rows;
        if cuts >= MAX_CUTS {
            status = SolveStatus::Approximate;
            break;
        }
        let mut coeffs: Vec<(usize, f64)> = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(j, &v)| (j, (v / norm).powf(p - 1.0)))
            .collect();
        coeffs.push((s, -1.0));
        program.add_row(format!("cut_{cuts}"), coeffs, Sense::Le, 0.0);
    }
    if exact && status == SolveStatus::Optimal {
        status = SolveStatus::OptimalExact;
    }

    let nx = problem.edge_vars.len();
    let mut flows: Vec<DemandFlow> = Vec::with_capacity(problem.demands.len());
    let mut x = vec![0.0; problem.edge_count];
    let mut j = nx;
    for &d in &problem.demands {
        let start = j;
        while j < nx + problem.path_vars.len() && problem.path_vars[j - nx].0 == d {
            j += 1;
        }
        let mut values: Vec<f64> = sol.values[start..j].iter().map(|v| v.max(0.0)).collect();
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Infeasible);
        }
        for v in &mut values {
            *v /= total;
        }
        let mut load = std::collections::BTreeMap::<usize, f64>::new();
        for (k, &v) in values.iter().enumerate() {
            for &e in &problem.path_edges[start - nx + k] {
                *load.entry(e).or_default() += v;
            }
        }
        for (e, l) in load {
            x[e] = f64::max(x[e], l.min(1.0));
        }
        flows.push(DemandFlow { demand: d, values });
    }
    let objective = problem.objective.evaluate_unchecked(g, &x);
    Ok(CpSolution {
        x: EdgeVector::new(x)?,
        flows,
        objective,
        status,
        residual,
        iterations,
    })
}

/// The whole-graph program CP(G), solved exactly enough to serve as the
/// comparison baseline.
pub fn solve_global_oracle(instance: &CpInstance) -> Result<CpSolution> {
    let total = instance.paths.total();
    if total > DEFAULT_PATH_CAP {
        return Err(Error::InstanceTooLarge(format!(
            "{total} allowed paths exceed the cap of {DEFAULT_PATH_CAP}"
        )));
    }
    let all: Vec<usize> = (0..instance.graph.node_count()).collect();
    let demands: Vec<usize> = (0..instance.demands.len()).collect();
    let problem = build_cluster_cp_for(instance, &all, &demands);
    solve_lp(&problem, &instance.graph, DEFAULT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Per demand, the largest flow (capped at 1) routable under `x`.
    pub flows: Vec<f64>,
}

impl FeasibilityReport {
    pub fn violated(&self, tol: f64) -> Vec<usize> {
        (0..self.flows.len()).filter(|&d| self.flows[d] < 1.0 - tol).collect()
    }
}

/// Checks that every demand can route one unit over its allowed paths with
/// capacities `x`.
pub fn check_feasibility(instance: &CpInstance, x: &[f64], tol: f64) -> Result<FeasibilityReport> {
    let m = instance.graph.edge_count();
    if x.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: x.len() });
    }
    let mut flows = Vec::with_capacity(instance.demands.len());
    for d in 0..instance.demands.len() {
        let paths = instance.paths.of(d);
        let single = paths
            .iter()
            .map(|p| p.edges.iter().map(|&e| x[e]).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        if single >= 1.0 {
            flows.push(1.0);
            continue;
        }
        let mut program = LinearProgram::default();
        for pi in 0..paths.len() {
            program.add_var(format!("f_{d}_{pi}"), -1.0);
        }
        let mut edges: Vec<(usize, Vec<usize>)> = Vec::new();
        for (pi, p) in paths.iter().enumerate() {
            for &e in &p.edges {
                match edges.binary_search_by_key(&e, |(e, _)| *e) {
                    Ok(i) => edges[i].1.push(pi),
                    Err(i) => edges.insert(i, (e, vec![pi])),
                }
            }
        }
        for (e, through) in edges {
            let coeffs = through.into_iter().map(|pi| (pi, 1.0)).collect();
            program.add_row(format!("cap_{e}"), coeffs, Sense::Le, x[e].max(0.0));
        }
        program.add_row("unit", (0..paths.len()).map(|pi| (pi, 1.0)).collect(), Sense::Le, 1.0);
        let sol = program.solve()?;
        flows.push((-sol.objective).clamp(0.0, 1.0));
    }
    let feasible = flows.iter().all(|&f| f >= 1.0 - tol);
    Ok(FeasibilityReport { feasible, flows })
}

/// Renders a program in CPLEX LP text format.
pub fn write_lp_format(program: &LinearProgram) -> String {
    let mut out = String::from("\\ padnet distance-bounded network design program\nMinimize\n obj:");
    write_terms(&mut out, program.objective.iter().copied().enumerate(), &program.var_names);
    out.push_str("\nSubject To\n");
    for row in &program.rows {
        let _ = write!(out, " {}:", row.name);
        write_terms(&mut out, row.coeffs.iter().copied(), &program.var_names);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("End\n");
    out
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) {
    let mut any = false;
    for (j, a) in terms.filter(|(_, a)| *a != 0.0) {
        let sign = if a < 0.0 { '-' } else { '+' };
        let mag = a.abs();
        if !any && sign == '+' {
            out.push(' ');
        } else {
            let _ = write!(out, " {sign} ");
        }
        if mag != 1.0 {
            let _ = write!(out, "{mag} ");
        }
        out.push_str(&names[j]);
        any = true;
    }
    if !any {
        out.push_str(" 0");
    }
}
