//! Command-line interface for the solver: single solves, instance
//! validation, replication experiments and method comparisons.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drsd_core::algorithms::{run_drls, run_drsd, DrlsParams, DrsdParams, RunReport};
use drsd_core::ambiguity::AmbiguityConfig;
use drsd_core::harness::{format_summary_row, replicate, ExperimentConfig, Method};
use drsd_core::model::{parse_instance, ProblemInstance};

#[derive(Parser)]
#[command(
    name = "drsd",
    version,
    about = "Two-stage distributionally robust LP solver (sequential-sampling \
             decomposition and DR L-shaped benchmark)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and print a human-readable report
    Solve(SolveArgs),
    /// Parse and validate an instance file
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run independent replications and write a CSV report
    Replicate(ReplicateArgs),
    /// Compare DRSD against DR L-shaped runs in a summary table
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodFlag {
    Drsd,
    Drls,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AmbiguityFlag {
    Moment,
    Wasserstein,
}

/// Flags shared by every solving subcommand. Defaults mirror the solver
/// defaults: tau 1e-3, gamma 0.2, kmin 256, kmax 5000, q 2, eps 1.0.
#[derive(Args)]
struct CommonArgs {
    /// Path to the instance file
    #[arg(long)]
    instance: PathBuf,
    /// Ambiguity set family
    #[arg(long, value_enum, default_value_t = AmbiguityFlag::Moment)]
    ambiguity: AmbiguityFlag,
    /// Moment order (moment sets only; default 2)
    #[arg(long)]
    q: Option<usize>,
    /// Wasserstein radius (wasserstein sets only; default 1.0)
    #[arg(long)]
    eps: Option<f64>,
    /// Stopping tolerance (DRSD gap test / DRLS bound gap)
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
    /// Base seed for the observation stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit wall-clock times from reports (makes output byte-reproducible)
    #[arg(long, default_value_t = false)]
    no_timing: bool,
}

impl CommonArgs {
    fn ambiguity_config(&self) -> Result<AmbiguityConfig, String> {
        match self.ambiguity {
            AmbiguityFlag::Moment => {
                if self.eps.is_some() {
                    return Err("--eps applies only to --ambiguity wasserstein".into());
                }
                Ok(AmbiguityConfig::moment(self.q.unwrap_or(2)))
            }
            AmbiguityFlag::Wasserstein => {
                if self.q.is_some() {
                    return Err("--q applies only to --ambiguity moment".into());
                }
                Ok(AmbiguityConfig::wasserstein(self.eps.unwrap_or(1.0)))
            }
        }
    }

    fn load_instance(&self) -> Result<ProblemInstance, String> {
        let text = fs::read_to_string(&self.instance)
            .map_err(|e| format!("cannot read {}: {e}", self.instance.display()))?;
        parse_instance(&text).map_err(|e| format!("{}: {e}", self.instance.display()))
    }
}

#[derive(Args)]
struct MethodArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Solution method
    #[arg(long, value_enum, default_value_t = MethodFlag::Drsd)]
    method: MethodFlag,
    /// Sample size for DRLS (rejected for DRSD; default 500)
    #[arg(long = "N")]
    sample_size: Option<usize>,
    /// Incumbent update fraction in (0, 1] (DRSD only; default 0.2)
    #[arg(long)]
    gamma: Option<f64>,
    /// Minimum DRSD iterations (default 256)
    #[arg(long)]
    kmin: Option<usize>,
    /// Maximum DRSD iterations (default 5000)
    #[arg(long)]
    kmax: Option<usize>,
}

impl MethodArgs {
    fn method(&self) -> Result<Method, String> {
        match self.method {
            MethodFlag::Drsd => {
                if self.sample_size.is_some() {
                    return Err("--N applies only to --method drls".into());
                }
                Ok(Method::Drsd(DrsdParams {
                    tau: self.common.tau,
                    gamma: self.gamma.unwrap_or(0.2),
                    k_min: self.kmin.unwrap_or(256),
                    k_max: self.kmax.unwrap_or(5000),
                    seed: self.common.seed,
                    timing: !self.common.no_timing,
                }))
            }
            MethodFlag::Drls => {
                for (flag, set) in [
                    ("--gamma", self.gamma.is_some()),
                    ("--kmin", self.kmin.is_some()),
                    ("--kmax", self.kmax.is_some()),
                ] {
                    if set {
                        return Err(format!("{flag} applies only to --method drsd"));
                    }
                }
                Ok(Method::Drls(DrlsParams {
                    sample_size: self.sample_size.unwrap_or(500),
                    tol: self.common.tau,
                    max_iterations: 1000,
                    seed: self.common.seed,
                    timing: !self.common.no_timing,
                }))
            }
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args)]
struct ReplicateArgs {
    #[command(flatten)]
    method: MethodArgs,
    /// Number of independent replications
    #[arg(long, default_value_t = 30)]
    reps: usize,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// DRLS sample sizes to compare against (repeatable)
    #[arg(long = "N", default_values_t = vec![500usize])]
    sample_sizes: Vec<usize>,
    /// Number of independent replications per method
    #[arg(long, default_value_t = 30)]
    reps: usize,
    /// Minimum DRSD iterations (default 256)
    #[arg(long)]
    kmin: Option<usize>,
    /// Maximum DRSD iterations (default 5000)
    #[arg(long)]
    kmax: Option<usize>,
    /// Incumbent update fraction (default 0.2)
    #[arg(long)]
    gamma: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solve(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Usage(String),
    Solve(String),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { instance } => {
            let text = fs::read_to_string(&instance)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", instance.display())))?;
            match parse_instance(&text) {
                Ok(inst) => {
                    println!(
                        "{}: valid ({} first-stage vars, {} second-stage rows, \
                         {} random entries, support size {})",
                        inst.name,
                        inst.dim_x(),
                        inst.m2(),
                        inst.random_entries.len(),
                        inst.true_distribution.support_size()
                    );
                    Ok(())
                }
                Err(e) => Err(CliError::Usage(format!("{}: {e}", instance.display()))),
            }
        }
        Command::Solve(args) => {
            let config = args.method.common.ambiguity_config().map_err(CliError::Usage)?;
            let method = args.method.method().map_err(CliError::Usage)?;
            let inst = args.method.common.load_instance().map_err(CliError::Usage)?;
            let report = match method {
                Method::Drsd(p) => run_drsd(&inst, &config, &p),
                Method::Drls(p) => run_drls(&inst, &config, &p),
            }
            .map_err(|e| CliError::Solve(e.to_string()))?;
            print_report(&inst, &method, &config, &report);
            Ok(())
        }
        Command::Replicate(args) => {
            let config = args.method.common.ambiguity_config().map_err(CliError::Usage)?;
            let method = args.method.method().map_err(CliError::Usage)?;
            let inst = args.method.common.load_instance().map_err(CliError::Usage)?;
            let experiment = ExperimentConfig {
                method,
                ambiguity: config,
                replications: args.reps,
                base_seed: args.method.common.seed,
                timing: !args.method.common.no_timing,
            };
            let outcome =
                replicate(&inst, &experiment).map_err(|e| CliError::Solve(e.to_string()))?;
            match &args.out {
                Some(path) => {
                    fs::write(path, &outcome.csv)
                        .map_err(|e| CliError::Solve(format!("cannot write {}: {e}", path.display())))?;
                    println!(
                        "{}",
                        format_summary_row(&outcome.method_label, &outcome.stats)
                    );
                    println!("wrote {}", path.display());
                }
                None => print!("{}", outcome.csv),
            }
            Ok(())
        }
        Command::Benchmark(args) => {
            let config = args.common.ambiguity_config().map_err(CliError::Usage)?;
            let inst = args.common.load_instance().map_err(CliError::Usage)?;
            let mut methods = vec![Method::Drsd(DrsdParams {
                tau: args.common.tau,
                gamma: args.gamma.unwrap_or(0.2),
                k_min: args.kmin.unwrap_or(256),
                k_max: args.kmax.unwrap_or(5000),
                seed: args.common.seed,
                timing: !args.common.no_timing,
            })];
            for &n in &args.sample_sizes {
                methods.push(Method::Drls(DrlsParams {
                    sample_size: n,
                    tol: args.common.tau,
                    max_iterations: 1000,
                    seed: args.common.seed,
                    timing: !args.common.no_timing,
                }));
            }
            println!("{}", inst.name);
            println!("method | iterations | objective | unique obs");
            for method in methods {
                let experiment = ExperimentConfig {
                    method,
                    ambiguity: config,
                    replications: args.reps,
                    base_seed: args.common.seed,
                    timing: !args.common.no_timing,
                };
                let outcome =
                    replicate(&inst, &experiment).map_err(|e| CliError::Solve(e.to_string()))?;
                println!(
                    "{}",
                    format_summary_row(&outcome.method_label, &outcome.stats)
                );
            }
            Ok(())
        }
    }
}

fn print_report(
    inst: &ProblemInstance,
    method: &Method,
    config: &AmbiguityConfig,
    report: &RunReport,
) {
    let set = match config {
        AmbiguityConfig::Moment { order, .. } => format!("moment q={order}"),
        AmbiguityConfig::Wasserstein { radius } => format!("wasserstein eps={radius}"),
    };
    println!(
        "instance: {} (d_x={}, support={})",
        inst.name,
        inst.dim_x(),
        inst.true_distribution.support_size()
    );
    println!("method: {} ({set})", method.label());
    println!("objective: {:.6}", report.objective);
    println!("iterations: {}", report.iterations);
    println!("unique observations: {}", report.unique_observations);
    println!(
        "counters: subproblem LPs {}, separations {}, argmax evals {}, master solves {}",
        report.counters.subproblem_lp_solves,
        report.counters.separation_solves,
        report.counters.argmax_evaluations,
        report.counters.master_solves
    );
    println!(
        "time (s): total {:.4} | master {:.4} | subproblem {:.4} | optimality {:.4} | argmax {:.4} | separation {:.4}",
        report.times.total,
        report.times.master,
        report.times.subproblem,
        report.times.optimality,
        report.times.argmax,
        report.times.separation
    );
    let xs: Vec<String> = report.incumbent.iter().map(|x| format!("{x:.6}")).collect();
    println!("incumbent x: [{}]", xs.join(", "));
}
