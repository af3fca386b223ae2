//! Instance generation, experiment orchestration and reports.

mod experiment;
mod generate;
mod report;

pub use experiment::{
    run_experiment, run_on_instance, run_trial, ExperimentConfig, TrialOutcome, FEASIBILITY_TOL,
    MAX_RETRIES,
};
pub use generate::{
    cycle, generate_graph, generate_instance, gnp, grid, spanning_demands, GraphSpec, ProblemKind,
    GENERATOR_RETRIES,
};
pub use report::{RunReport, Summary, TrialResult, TRIALS_HEADER};
