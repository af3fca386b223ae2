//! Linear programming: a small simplex kernel and the CP(C) programs built on it.

mod cp;
mod simplex;

pub use cp::{
    build_cluster_cp, build_cluster_cp_for, check_feasibility, cluster_demands, solve_global_oracle,
    solve_lp, write_lp_format, CpSolution, DemandFlow, FeasibilityReport, LpProblem, SolveStatus,
    DEFAULT_TOL, EXACT_FALLBACK_VARS,
};
pub use simplex::{Field, LinearProgram, LpSolution, Row, Sense};
