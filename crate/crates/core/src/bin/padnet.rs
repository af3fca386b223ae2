use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use padnet::decomp::{
    sample_decomposition_centralized, sample_decomposition_distributed, PaddedDecompositionParams,
};
use padnet::distributed::{solve_distributed, SolverConfig};
use padnet::harness::{generate_graph, run_experiment, ExperimentConfig, GraphSpec, ProblemKind};
use padnet::lp::{build_cluster_cp, check_feasibility, solve_global_oracle, write_lp_format};
use padnet::model::{CpInstance, InstanceFile, Objective};
use padnet::rounding::{round_low_degree, round_spanner, verify_stretch};
use padnet::sim::Simulator;
use padnet::{Error, Graph};

#[derive(Parser)]
#[command(name = "padnet", version, about = "Padded decompositions and distributed network design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a padded decomposition and print it as CSV.
    Decompose {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        /// Use the message-passing protocol (ID order) instead of a random permutation.
        #[arg(long)]
        distributed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a network design program with the distributed solver and compare with the exact optimum.
    SolveCp {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        /// Directory for x.csv, manifest.json, rounds.csv and program.lp.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round a fractional edge vector into a subgraph.
    Round {
        #[command(flatten)]
        problem: ProblemArgs,
        /// CSV with columns `edge,x` (extra columns are ignored).
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Directory for edges.txt and provenance.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded trials end to end and write reports.
    Experiment {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the distance bounds of a subgraph.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Subgraph in the graph file format, over the same node ids.
        #[arg(long)]
        subgraph: PathBuf,
    },
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Graph file (`n m directed|undirected` header, then one edge per line).
    #[arg(long, conflicts_with = "gen")]
    graph: Option<PathBuf>,
    /// Generator: gnp, grid (square, n nodes) or cycle.
    #[arg(long)]
    gen: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Seed of the graph generator (defaults to --seed).
    #[arg(long)]
    graph_seed: Option<u64>,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// directed-spanner, low-degree-spanner, dsn or raw-cp.
    #[arg(long, default_value = "directed-spanner")]
    problem: String,
    /// Stretch; for generated network design demands the bound is d(u,v) + k - 1.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// linear, max-degree, max-out-degree, max-in-degree, p<value> or pinf.
    #[arg(long)]
    objective: Option<String>,
    /// Instance JSON with explicit demands; overrides the graph flags.
    #[arg(long)]
    instance: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl GraphArgs {
    fn spec(&self) -> Result<GraphSpec, Error> {
        if let Some(path) = &self.graph {
            return Ok(GraphSpec::File { path: path.clone() });
        }
        let gen = self.gen.as_deref().ok_or_else(|| usage("give --graph or --gen"))?;
        let n = self.n.ok_or_else(|| usage("--gen needs --n"))?;
        match gen {
            "gnp" => Ok(GraphSpec::Gnp {
                n,
                p: self.p.ok_or_else(|| usage("--gen gnp needs --p"))?,
            }),
            "cycle" => Ok(GraphSpec::Cycle { n }),
            "grid" => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(usage(format!("--gen grid needs a square --n, got {n}")));
                }
                Ok(GraphSpec::Grid { rows: side, cols: side })
            }
            other => Err(usage(format!("unknown generator `{other}`"))),
        }
    }

    fn build(&self, seed: u64) -> Result<Graph, Error> {
        generate_graph(&self.spec()?, true, self.graph_seed.unwrap_or(seed), 0)
    }
}

impl ProblemArgs {
    fn kind(&self) -> Result<ProblemKind, Error> {
        ProblemKind::parse(&self.problem)
    }

    fn objective(&self) -> Result<Objective, Error> {
        match &self.objective {
            Some(s) => Objective::parse(s),
            None => Ok(self.kind()?.default_objective()),
        }
    }

    fn instance(&self, seed: u64) -> Result<CpInstance, Error> {
        if let Some(path) = &self.instance {
            let mut inst = InstanceFile::load(path)?;
            if self.objective.is_some() {
                inst.objective = self.objective()?;
            }
            return Ok(inst);
        }
        let kind = self.kind()?;
        let spec = self.graph.spec()?;
        padnet::harness::generate_instance(
            &spec,
            kind,
            self.k,
            None,
            self.objective()?,
            self.graph.graph_seed.unwrap_or(seed),
            0,
        )
    }
}

enum Outcome {
    Pass,
    Fail(String),
}

fn write_or_print(out: Option<&Path>, name: &str, contents: &str) -> Result<(), Error> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), contents)?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn read_x(path: &Path, m: usize) -> Result<Vec<f64>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut x = vec![0.0; m];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("edge")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse_err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let e: usize = cols[0].trim().parse().map_err(|_| parse_err("bad edge index"))?;
        let v: f64 = cols
            .last()
            .unwrap()
            .trim()
            .parse()
            .map_err(|_| parse_err("bad value"))?;
        if e >= m {
            return Err(parse_err("edge index out of range"));
        }
        x[e] = v;
    }
    Ok(x)
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let sim = Simulator::default();
    match cli.command {
        Command::Decompose {
            graph,
            k,
            epsilon,
            seed,
            distributed,
            out,
        } => {
            let g = graph.build(seed)?;
            let params = PaddedDecompositionParams::new(k, epsilon, g.node_count())?;
            let clustering = if distributed {
                sample_decomposition_distributed(&g, &params, seed, &sim)?.0
            } else {
                sample_decomposition_centralized(&g, &params, seed)?
            };
            write_or_print(out.as_deref(), "clustering.csv", &clustering.to_csv())?;
            match clustering.validate(&g, &params) {
                Ok(()) => Ok(Outcome::Pass),
                Err(e) => Ok(Outcome::Fail(e.to_string())),
            }
        }
        Command::SolveCp {
            problem,
            epsilon,
            seed,
            out,
        } => {
            let inst = problem.instance(seed)?;
            let config = SolverConfig::new(epsilon, seed)?;
            let oracle = solve_global_oracle(&inst)?;
            let run = solve_distributed(&inst, &config, &sim)?;
            let feas = check_feasibility(&inst, run.solution.x.values(), 1e-9)?;
            let manifest = run.manifest(&inst, Some(oracle.objective));
            let g = &inst.graph;
            let mut x_csv = String::from("edge,u,v,x\n");
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                x_csv.push_str(&format!("{e},{u},{v},{}\n", run.solution.x.get(e)));
            }
            if let Some(dir) = out.as_deref() {
                write_or_print(Some(dir), "x.csv", &x_csv)?;
                write_or_print(
                    Some(dir),
                    "manifest.json",
                    &(serde_json::to_string_pretty(&manifest)? + "\n"),
                )?;
                let rounds = format!(
                    "{}\n{}\n",
                    padnet::sim::RoundTranscript::CSV_HEADER,
                    run.transcript.csv_row(seed, g.node_count(), g.edge_count(), epsilon, run.d)
                );
                write_or_print(Some(dir), "rounds.csv", &rounds)?;
                let all: Vec<usize> = (0..g.node_count()).collect();
                write_or_print(Some(dir), "program.lp", &write_lp_format(&build_cluster_cp(&inst, &all).program))?;
            } else {
                print!("{x_csv}");
            }
            eprintln!(
                "g(x~) = {}  CP* = {}  ratio = {}  feasible = {}  rounds = {}",
                run.solution.objective,
                oracle.objective,
                manifest.ratio.unwrap_or(f64::NAN),
                feas.feasible,
                run.transcript.rounds_elapsed()
            );
            let within = run.solution.objective <= (1.0 + epsilon) * oracle.objective + 1e-6;
            if feas.feasible && within {
                Ok(Outcome::Pass)
            } else {
                Ok(Outcome::Fail(format!(
                    "feasible = {}, within (1+eps)CP* = {within}",
                    feas.feasible
                )))
            }
        }
        Command::Round { problem, x, seed, out } => {
            let inst = problem.instance(seed)?;
            let g = &inst.graph;
            let xv = read_x(&x, g.edge_count())?;
            let (edges, text, prov) = match problem.kind()? {
                ProblemKind::LowDegreeSpanner => {
                    let kept = round_low_degree(g, &xv, problem.k, seed)?;
                    let mut mask = vec![false; g.edge_count()];
                    for &e in &kept {
                        mask[e] = true;
                    }
                    (kept, g.subgraph_text(&mask), None)
                }
                _ => {
                    let out = round_spanner(g, &xv, inst.max_path_length(), seed)?;
                    let text = out.to_graph_text(g);
                    let prov = out.provenance_csv(g);
                    (out.edges, text, Some(prov))
                }
            };
            write_or_print(out.as_deref(), "edges.txt", &text)?;
            if let (Some(dir), Some(prov)) = (out.as_deref(), prov) {
                write_or_print(Some(dir), "provenance.csv", &prov)?;
            }
            let report = verify_stretch(g, &edges, &inst)?;
            eprintln!("kept {} of {} edges; violations: {}", edges.len(), g.edge_count(), report.violations.len());
            Ok(if report.valid {
                Outcome::Pass
            } else {
                Outcome::Fail(format!("{} demands violated", report.violations.len()))
            })
        }
        Command::Experiment {
            problem,
            epsilon,
            trials,
            seed,
            out,
        } => {
            if problem.instance.is_some() {
                return Err(usage("experiment generates its own instances; use --graph or --gen"));
            }
            let config = ExperimentConfig {
                problem: problem.kind()?,
                graph: problem.graph.spec()?,
                k: problem.k,
                demands: None,
                objective: problem.objective()?,
                epsilon,
                trials,
                seed,
                out: out.clone(),
            };
            let report = run_experiment(&config, &sim)?;
            if out.is_none() {
                print!("{}", report.trials_csv());
            }
            eprintln!(
                "trials = {}  max ratio = {}  feasible = {}  stretch valid = {}",
                report.summary.trials,
                report.summary.max_ratio.unwrap_or(f64::NAN),
                report.summary.feasible_fraction.unwrap_or(f64::NAN),
                report.summary.stretch_valid_fraction.unwrap_or(f64::NAN)
            );
            Ok(if report.all_checks_pass() {
                Outcome::Pass
            } else {
                Outcome::Fail("some trial failed a check".into())
            })
        }
        Command::Verify { problem, subgraph } => {
            let inst = problem.instance(0)?;
            let g = &inst.graph;
            let h = Graph::from_text(&std::fs::read_to_string(&subgraph)?)?;
            if h.node_count() != g.node_count() {
                return Err(usage("subgraph node count differs from the graph"));
            }
            let mut edges = Vec::with_capacity(h.edge_count());
            for &(u, v) in h.edges() {
                edges.push(
                    g.find_edge(u, v)
                        .ok_or_else(|| usage(format!("subgraph edge ({u},{v}) is not in the graph")))?,
                );
            }
            let report = verify_stretch(g, &edges, &inst)?;
            for &d in &report.violations {
                let dm = inst.demands.pairs[d];
                println!("violated {} {} {}", dm.source, dm.target, dm.bound);
            }
            Ok(if report.valid {
                Outcome::Pass
            } else {
                Outcome::Fail(format!("{} demands violated", report.violations.len()))
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let usage_error = matches!(
                e,
                Error::InvalidParameter(_)
                    | Error::InvalidGraph(_)
                    | Error::InvalidNode { .. }
                    | Error::Parse { .. }
                    | Error::Io(_)
                    | Error::InfeasibleDemand { .. }
                    | Error::DegenerateDemand(_)
            );
            ExitCode::from(if usage_error { 2 } else { 1 })
        }
    }
}
