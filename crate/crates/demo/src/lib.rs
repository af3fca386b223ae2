//! Browser bindings for the decomposition and spanner pipeline.
//!
//! Every export returns a JSON string; errors come back as `{"error": ...}`.

use std::sync::Arc;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use padnet::decomp::{sample_decomposition_with, PaddedDecompositionParams, PermutationSource};
use padnet::distributed::{solve_distributed, SolverConfig};
use padnet::harness::{gnp, grid};
use padnet::lp::solve_global_oracle;
use padnet::model::{CpInstance, Objective};
use padnet::rng::{RngStream, StreamPhase};
use padnet::rounding::{round_spanner, verify_stretch};
use padnet::sim::Simulator;

fn render(result: padnet::Result<Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

pub fn decompose_grid_value(side: usize, k: usize, epsilon: f64, seed: u64) -> padnet::Result<Value> {
    let g = grid(side, side, false)?;
    let params = PaddedDecompositionParams::new(k, epsilon, g.node_count())?;
    let c = sample_decomposition_with(&g, &params, seed, 0, PermutationSource::Random)?;
    let padded: Vec<bool> = (0..g.node_count()).map(|u| c.is_padded(&g, u, k)).collect();
    Ok(json!({
        "side": side,
        "assignment": c.assignment,
        "centers": c.centers,
        "padded": padded,
        "max_diameter": c.max_diameter(&g),
        "diameter_bound": params.diameter_bound(),
    }))
}

pub fn padding_frequencies_value(
    side: usize,
    k: usize,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> padnet::Result<Value> {
    let g = grid(side, side, false)?;
    let n = g.node_count();
    let params = PaddedDecompositionParams::new(k, epsilon, n)?;
    let mut hits = vec![0usize; n];
    for s in 0..samples {
        let c = sample_decomposition_with(&g, &params, seed, s, PermutationSource::Random)?;
        for (u, h) in hits.iter_mut().enumerate() {
            *h += usize::from(c.is_padded(&g, u, k));
        }
    }
    let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / samples.max(1) as f64).collect();
    Ok(json!({
        "side": side,
        "samples": samples,
        "frequency": freq,
        "target": 1.0 - epsilon,
    }))
}

pub fn spanner_pipeline_value(n: usize, p: f64, epsilon: f64, seed: u64) -> padnet::Result<Value> {
    if n > 24 {
        return Err(padnet::Error::InvalidParameter("the demo keeps n <= 24".into()));
    }
    let mut rng = RngStream::new(seed, StreamPhase::Generator, 0, 0);
    let g = Arc::new(gnp(n, p, true, &mut rng)?);
    let inst = CpInstance::spanner(g.clone(), 2, Objective::LinearSum)?;
    let oracle = solve_global_oracle(&inst)?;
    let run = solve_distributed(&inst, &SolverConfig::new(epsilon, seed)?, &Simulator::sequential())?;
    let x = run.solution.x.values();
    let out = round_spanner(&g, x, 2, seed)?;
    let stretch = verify_stretch(&g, &out.edges, &inst)?;
    let provenance: Vec<&str> = out.provenance.iter().map(|p| p.label()).collect();
    Ok(json!({
        "n": n,
        "edges": g.edges(),
        "x": x,
        "kept": out.edges,
        "provenance": provenance,
        "cp_star": oracle.objective,
        "objective": run.solution.objective,
        "t": run.t,
        "rounds": run.transcript.rounds_elapsed(),
        "stretch_valid": stretch.valid,
    }))
}

#[wasm_bindgen]
pub fn decompose_grid(side: usize, k: usize, epsilon: f64, seed: u32) -> String {
    render(decompose_grid_value(side, k, epsilon, seed as u64))
}

#[wasm_bindgen]
pub fn padding_frequencies(side: usize, k: usize, epsilon: f64, samples: usize, seed: u32) -> String {
    render(padding_frequencies_value(side, k, epsilon, samples, seed as u64))
}

#[wasm_bindgen]
pub fn spanner_pipeline(n: usize, p: f64, epsilon: f64, seed: u32) -> String {
    render(spanner_pipeline_value(n, p, epsilon, seed as u64))
}
