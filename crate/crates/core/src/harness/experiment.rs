use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::{generate_instance, GraphSpec, ProblemKind};
use super::report::{RunReport, TrialResult};
use crate::distributed::{
    concentration_report, implied_flow, ratio, solve_distributed, RunManifest, SolverConfig,
};
use crate::error::{Error, Result};
use crate::lp::{check_feasibility, solve_global_oracle};
use crate::model::{fractional_degrees, CpInstance, DegreeMode, Objective};
use crate::rng::{derive_seed, StreamPhase};
use crate::rounding::{round_low_degree, round_spanner, round_spanner_distributed, verify_stretch};
use crate::sim::Simulator;

/// Retries after a failed concentration event.
pub const MAX_RETRIES: usize = 3;
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub graph: GraphSpec,
    /// Stretch for spanners; for generated network design demands the bound
    /// is `d(u, v) + k − 1`.
    pub k: usize,
    pub demands: Option<Vec<(usize, usize, usize)>>,
    #[serde(with = "objective_label")]
    pub objective: Objective,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind, graph: GraphSpec, seed: u64) -> Self {
        Self {
            problem,
            graph,
            k: 2,
            demands: None,
            objective: problem.default_objective(),
            epsilon: 0.5,
            trials: 1,
            seed,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        SolverConfig::new(self.epsilon, self.seed)?;
        self.objective.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        match self.graph {
            GraphSpec::Gnp { n, p } if n < 2 || !(0.0..=1.0).contains(&p) => Err(Error::InvalidParameter(
                format!("G(n, p) needs n >= 2 and p in [0, 1], got n={n} p={p}"),
            )),
            GraphSpec::Grid { rows, cols } if rows * cols < 2 => {
                Err(Error::InvalidParameter("grid needs at least 2 nodes".into()))
            }
            GraphSpec::Cycle { n } if n < 3 => Err(Error::InvalidParameter("cycle needs n >= 3".into())),
            _ => Ok(()),
        }
    }
}

/// Everything a single trial produced, including the per-run manifest.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub result: TrialResult,
    pub manifest: RunManifest,
    pub rounds_csv_row: String,
}

pub fn run_trial(config: &ExperimentConfig, trial: usize, sim: &Simulator) -> Result<TrialOutcome> {
    let instance = generate_instance(
        &config.graph,
        config.problem,
        config.k,
        config.demands.as_deref(),
        config.objective,
        config.seed,
        trial as u64,
    )?;
    run_on_instance(config, &instance, trial, sim)
}

pub fn run_on_instance(
    config: &ExperimentConfig,
    instance: &CpInstance,
    trial: usize,
    sim: &Simulator,
) -> Result<TrialOutcome> {
    let g = &instance.graph;
    let n = g.node_count();
    let trial_seed = derive_seed(config.seed, StreamPhase::Trial, trial as u64);
    let oracle = solve_global_oracle(instance)?;
    let cp_star = oracle.objective;

    let mut attempts = 0;
    let (run, solver, conc) = loop {
        let seed = if attempts == 0 {
            trial_seed
        } else {
            derive_seed(trial_seed, StreamPhase::Trial, attempts as u64)
        };
        let solver = SolverConfig::new(config.epsilon, seed)?;
        let run = solve_distributed(instance, &solver, sim)?;
        let conc = concentration_report(instance, &run.records, &solver);
        attempts += 1;
        if conc.all_sources_pass() || attempts > MAX_RETRIES {
            break (run, solver, conc);
        }
    };
    let x = run.solution.x.values();
    let feasibility = check_feasibility(instance, x, FEASIBILITY_TOL)?;

    // the averaged flow must fit under x̃ whenever every source concentrated
    let certificate = if conc.all_sources_pass() {
        let mut ok = true;
        for d in 0..instance.demands.len() {
            let f = implied_flow(instance, &run.records, d)?;
            if f.iter().sum::<f64>() < 1.0 - FEASIBILITY_TOL {
                ok = false;
            }
            let mut load = vec![0.0; g.edge_count()];
            for (p, &fp) in instance.paths.of(d).iter().zip(&f) {
                for &e in &p.edges {
                    load[e] += fp;
                }
            }
            if load.iter().zip(x).any(|(l, xe)| *l > xe + FEASIBILITY_TOL) {
                ok = false;
            }
        }
        Some(ok)
    } else {
        None
    };

    // cluster optimum against the restricted global optimum, and the glued
    // per-iteration vectors against the global optimum
    let mut lemma5_excess = f64::NEG_INFINITY;
    let mut iteration_excess = f64::NEG_INFINITY;
    for r in &run.records {
        for (c, members) in r.clustering.all_members().iter().enumerate() {
            let mut mask = vec![false; n];
            for &u in members {
                mask[u] = true;
            }
            let restricted = oracle.x.restrict_mask(&mask, g);
            let bound = instance.objective.evaluate_unchecked(g, restricted.values());
            lemma5_excess = lemma5_excess.max(r.solutions[c].objective - bound);
        }
        let glued = instance.objective.evaluate_unchecked(g, &r.glued(g));
        iteration_excess = iteration_excess.max(glued - cp_star);
    }

    let round_seed = derive_seed(trial_seed, StreamPhase::EdgeCoin, 0);
    let mut result = TrialResult {
        trial,
        seed: trial_seed,
        n,
        m: g.edge_count(),
        demands: instance.demands.len(),
        t: run.t,
        cp_star,
        objective: run.solution.objective,
        ratio: ratio(run.solution.objective, cp_star),
        rounds: run.transcript.rounds_elapsed(),
        round_bound: solver.round_bound(n, run.d),
        attempts,
        concentration_fraction: conc.node_pass_fraction(),
        concentration_pass: conc.all_sources_pass(),
        feasible: feasibility.feasible,
        certificate,
        lemma5_excess,
        iteration_excess,
        rounding_rounds: None,
        e_out: None,
        stretch_valid: None,
        size_ratio: None,
        max_degree: None,
    };
    if run.records.is_empty() {
        result.lemma5_excess = 0.0;
        result.iteration_excess = 0.0;
    }

    let mut transcript = run.transcript.clone();
    match config.problem {
        ProblemKind::DirectedSpanner | ProblemKind::Dsn => {
            let depth = instance.max_path_length();
            let central = round_spanner(g, x, depth, round_seed)?;
            let (out, stats) = round_spanner_distributed(g, x, depth, round_seed, sim)?;
            if out != central {
                return Err(Error::Protocol("distributed rounding diverged from the centralized one".into()));
            }
            transcript.record(crate::sim::RoundPhase::Rounding, &stats);
            let stretch = verify_stretch(g, &out.edges, instance)?;
            let nf = n as f64;
            result.rounding_rounds = Some(stats.rounds);
            result.e_out = Some(out.edges.len());
            result.stretch_valid = Some(stretch.valid);
            result.size_ratio = Some(out.edges.len() as f64 / (nf.sqrt() * nf.ln() * (nf + cp_star)));
        }
        ProblemKind::LowDegreeSpanner => {
            let kept = round_low_degree(g, x, config.k, round_seed)?;
            let stretch = verify_stretch(g, &kept, instance)?;
            let mut ind = vec![0.0; g.edge_count()];
            for &e in &kept {
                ind[e] = 1.0;
            }
            let mode = match config.objective {
                Objective::MaxDegree(mode) => mode,
                _ => DegreeMode::InOut,
            };
            let max_deg = fractional_degrees(g, &ind, mode).into_iter().fold(0.0, f64::max);
            result.e_out = Some(kept.len());
            result.stretch_valid = Some(stretch.valid);
            result.max_degree = Some(max_deg as usize);
        }
        ProblemKind::RawCp => {}
    }
    let manifest = run.manifest(instance, Some(cp_star));
    let rounds_csv_row = transcript.csv_row(trial_seed, n, g.edge_count(), config.epsilon, run.d);
    Ok(TrialOutcome {
        result,
        manifest,
        rounds_csv_row,
    })
}

/// Runs every trial and, if `config.out` is set, writes `trials.csv`,
/// `rounds.csv` and `manifest.json` there. Trials that finished are written
/// even when a later one fails.
pub fn run_experiment(config: &ExperimentConfig, sim: &Simulator) -> Result<RunReport> {
    config.validate()?;
    let run = |trial: usize| {
        run_trial(config, trial, sim).map_err(|e| Error::Trial {
            trial,
            source: Box::new(e),
        })
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<TrialOutcome>> = if sim.parallel {
        use rayon::prelude::*;
        (0..config.trials).into_par_iter().map(run).collect()
    } else {
        (0..config.trials).map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<TrialOutcome>> = (0..config.trials).map(run).collect();

    let mut done = Vec::new();
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(t) => done.push(t),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let report = RunReport::new(config.clone(), done);
    if let Some(dir) = &config.out {
        report.write(dir)?;
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

mod objective_label {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::model::Objective;

    pub fn serialize<S: Serializer>(obj: &Objective, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&obj.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Objective, D::Error> {
        let text = String::deserialize(d)?;
        Objective::parse(&text).map_err(serde::de::Error::custom)
    }
}
