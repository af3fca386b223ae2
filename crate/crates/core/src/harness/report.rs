use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::experiment::{write_file, ExperimentConfig, TrialOutcome};
use crate::distributed::RunManifest;
use crate::error::Result;
use crate::sim::RoundTranscript;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub demands: usize,
    pub t: usize,
    pub cp_star: f64,
    pub objective: f64,
    pub ratio: f64,
    pub rounds: usize,
    pub round_bound: f64,
    pub attempts: usize,
    pub concentration_fraction: f64,
    pub concentration_pass: bool,
    pub feasible: bool,
    /// Whether the averaged flow fits under x̃; absent when some source
    /// missed the concentration threshold.
    pub certificate: Option<bool>,
    /// Largest `g(x^C) − g(x*|_C)` over all clusters.
    pub lemma5_excess: f64,
    /// Largest `g(x̃^i) − CP*` over all iterations.
    pub iteration_excess: f64,
    pub rounding_rounds: Option<usize>,
    pub e_out: Option<usize>,
    pub stretch_valid: Option<bool>,
    /// `|E_out| / (√n·ln n·(n + LP*))`.
    pub size_ratio: Option<f64>,
    pub max_degree: Option<usize>,
}

pub const TRIALS_HEADER: &str = "trial,seed,n,m,demands,t,cp_star,objective,ratio,rounds,round_bound,attempts,concentration_fraction,concentration_pass,feasible,certificate,lemma5_excess,iteration_excess,rounding_rounds,e_out,stretch_valid,size_ratio,max_degree";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl TrialResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.n,
            self.m,
            self.demands,
            self.t,
            self.cp_star,
            self.objective,
            self.ratio,
            self.rounds,
            self.round_bound,
            self.attempts,
            self.concentration_fraction,
            self.concentration_pass,
            self.feasible,
            opt(&self.certificate),
            self.lemma5_excess,
            self.iteration_excess,
            opt(&self.rounding_rounds),
            opt(&self.e_out),
            opt(&self.stretch_valid),
            opt(&self.size_ratio),
            opt(&self.max_degree),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub mean_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub feasible_fraction: Option<f64>,
    pub concentration_fraction: Option<f64>,
    pub stretch_valid_fraction: Option<f64>,
    pub max_size_ratio: Option<f64>,
    pub rounds_within_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub trials: Vec<TrialResult>,
    pub runs: Vec<RunManifest>,
    #[serde(skip)]
    rounds_rows: Vec<String>,
}

fn fraction(items: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut yes, mut all) = (0usize, 0usize);
    for b in items {
        all += 1;
        yes += usize::from(b);
    }
    (all > 0).then(|| yes as f64 / all as f64)
}

impl RunReport {
    pub fn new(config: ExperimentConfig, mut outcomes: Vec<TrialOutcome>) -> Self {
        outcomes.sort_by_key(|o| o.result.trial);
        let trials: Vec<TrialResult> = outcomes.iter().map(|o| o.result.clone()).collect();
        let ratios: Vec<f64> = trials.iter().map(|t| t.ratio).collect();
        let summary = Summary {
            trials: trials.len(),
            mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            max_ratio: ratios.iter().copied().reduce(f64::max),
            feasible_fraction: fraction(trials.iter().map(|t| t.feasible)),
            concentration_fraction: fraction(trials.iter().map(|t| t.concentration_pass)),
            stretch_valid_fraction: fraction(trials.iter().filter_map(|t| t.stretch_valid)),
            max_size_ratio: trials.iter().filter_map(|t| t.size_ratio).reduce(f64::max),
            rounds_within_bound: trials.iter().all(|t| t.rounds as f64 <= t.round_bound),
        };
        Self {
            config,
            summary,
            trials,
            runs: outcomes.iter().map(|o| o.manifest.clone()).collect(),
            rounds_rows: outcomes.into_iter().map(|o| o.rounds_csv_row).collect(),
        }
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from(TRIALS_HEADER);
        out.push('\n');
        for t in &self.trials {
            let _ = writeln!(out, "{}", t.csv_row());
        }
        out
    }

    pub fn rounds_csv(&self) -> String {
        let mut out = String::from(RoundTranscript::CSV_HEADER);
        out.push('\n');
        for row in &self.rounds_rows {
            let _ = writeln!(out, "{row}");
        }
        out
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Whether every check the problem kind supports passed in every trial.
    pub fn all_checks_pass(&self) -> bool {
        let eps = self.config.epsilon;
        self.trials.iter().all(|t| {
            t.feasible
                && t.ratio <= 1.0 + eps + 1e-6
                && t.rounds as f64 <= t.round_bound
                && t.stretch_valid != Some(false)
                && t.certificate != Some(false)
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(dir, "trials.csv", &self.trials_csv())?;
        write_file(dir, "rounds.csv", &self.rounds_csv())?;
        write_file(dir, "manifest.json", &self.manifest_json())
    }
}
