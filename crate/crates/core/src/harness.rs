//! Replication experiments, statistics and report emission, plus a
//! brute-force oracle for small instances.
//!
//! [`replicate`] runs `R` independent solves with per-replication seeds
//! `base_seed + index`, aggregates mean and 95% Student-t half-widths, and
//! renders a CSV report (one row per replication plus `mean` and `hw95`
//! summary rows). With the `parallel` feature the replications fan out over
//! the rayon pool; results are ordered by replication index either way, so
//! reports are reproducible.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::algorithms::{run_drls, run_drsd, DrlsParams, DrsdParams, RunReport, TimeBreakdown};
use crate::ambiguity::{separate_over, AmbiguityConfig};
use crate::linalg;
use crate::model::ProblemInstance;
use crate::recourse::solve_subproblem;

pub mod synth;

/// Solver selector with its method parameters. Per-replication seed and the
/// timing switch are overridden by the experiment configuration.
#[derive(Clone, Copy, Debug)]
pub enum Method {
    Drsd(DrsdParams),
    Drls(DrlsParams),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Drsd(_) => "drsd".into(),
            Method::Drls(p) => format!("drls-{}", p.sample_size),
        }
    }
}

/// One replication experiment: method, ambiguity set, replication count and
/// base seed.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub method: Method,
    pub ambiguity: AmbiguityConfig,
    pub replications: usize,
    pub base_seed: u64,
    /// Record wall-clock phase times in the report. Disable to make the CSV
    /// byte-reproducible across runs.
    pub timing: bool,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    BadConfig(String),
    #[error("all {0} replications failed; first error: {1}")]
    AllReplicationsFailed(usize, String),
    #[error("oracle unsupported for this instance: {0}")]
    OracleUnsupported(String),
    #[error("oracle failure: {0}")]
    OracleFailure(String),
}

/// Outcome of one replication.
#[derive(Clone, Debug)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// Mean and 95% confidence half-width per reported quantity, aggregated over
/// successful replications.
#[derive(Clone, Debug)]
pub struct StatsRow {
    pub successes: usize,
    pub failures: usize,
    pub mean_iterations: f64,
    pub hw_iterations: f64,
    pub mean_objective: f64,
    pub hw_objective: f64,
    pub mean_unique: f64,
    pub hw_unique: f64,
    pub mean_times: TimeBreakdown,
    /// Set when only one replication succeeded: half-widths are reported as
    /// zero because no spread can be estimated.
    pub degenerate_sample: bool,
}

/// Full experiment result: per-replication rows, the aggregate row and the
/// rendered CSV.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub method_label: String,
    pub rows: Vec<RepRow>,
    pub stats: StatsRow,
    pub csv: String,
}

fn run_one(instance: &ProblemInstance, cfg: &ExperimentConfig, rep: usize) -> RepRow {
    let seed = cfg.base_seed.wrapping_add(rep as u64);
    let result = match cfg.method {
        Method::Drsd(params) => {
            let params = DrsdParams {
                seed,
                timing: cfg.timing,
                ..params
            };
            run_drsd(instance, &cfg.ambiguity, &params)
        }
        Method::Drls(params) => {
            let params = DrlsParams {
                seed,
                timing: cfg.timing,
                ..params
            };
            run_drls(instance, &cfg.ambiguity, &params)
        }
    };
    match result {
        Ok(report) => RepRow {
            rep,
            seed,
            report: Some(report),
            error: None,
        },
        Err(e) => RepRow {
            rep,
            seed,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// Sequential replication driver, always available.
pub fn run_replications_seq(instance: &ProblemInstance, cfg: &ExperimentConfig) -> Vec<RepRow> {
    (0..cfg.replications)
        .map(|rep| run_one(instance, cfg, rep))
        .collect()
}

/// Replication driver over the rayon pool; rows come back in replication
/// order.
#[cfg(feature = "parallel")]
pub fn run_replications_par(instance: &ProblemInstance, cfg: &ExperimentConfig) -> Vec<RepRow> {
    use rayon::prelude::*;
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_one(instance, cfg, rep))
        .collect()
}

fn run_replications(instance: &ProblemInstance, cfg: &ExperimentConfig) -> Vec<RepRow> {
    #[cfg(feature = "parallel")]
    {
        run_replications_par(instance, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_replications_seq(instance, cfg)
    }
}

/// Run the experiment and aggregate. Identical configurations produce
/// identical rows; with timing disabled the CSV is byte-identical across
/// runs.
pub fn replicate(
    instance: &ProblemInstance,
    cfg: &ExperimentConfig,
) -> Result<ExperimentOutcome, HarnessError> {
    if cfg.replications == 0 {
        return Err(HarnessError::BadConfig(
            "replication count must be at least 1".into(),
        ));
    }
    let rows = run_replications(instance, cfg);
    let stats = aggregate(&rows)?;
    let label = cfg.method.label();
    let csv = render_csv(&label, &rows, &stats);
    Ok(ExperimentOutcome {
        method_label: label,
        rows,
        stats,
        csv,
    })
}

/// Two-sided 95% Student-t quantile for `n` samples (`n - 1` degrees of
/// freedom).
pub fn t_quantile_975(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `t_{0.975, n-1} * s / sqrt(n)`, zero for a single sample.
fn half_width(xs: &[f64], m: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    t_quantile_975(n) * var.sqrt() / (n as f64).sqrt()
}

fn aggregate(rows: &[RepRow]) -> Result<StatsRow, HarnessError> {
    let ok: Vec<&RunReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
    let failures = rows.len() - ok.len();
    if ok.is_empty() {
        let first = rows
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_else(|| "unknown".into());
        return Err(HarnessError::AllReplicationsFailed(rows.len(), first));
    }

    let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    let objs: Vec<f64> = ok.iter().map(|r| r.objective).collect();
    let uniq: Vec<f64> = ok.iter().map(|r| r.unique_observations as f64).collect();
    let mi = mean(&iters);
    let mo = mean(&objs);
    let mu = mean(&uniq);

    let n = ok.len() as f64;
    let mut times = TimeBreakdown::default();
    for r in &ok {
        times.total += r.times.total / n;
        times.master += r.times.master / n;
        times.subproblem += r.times.subproblem / n;
        times.optimality += r.times.optimality / n;
        times.argmax += r.times.argmax / n;
        times.separation += r.times.separation / n;
    }

    Ok(StatsRow {
        successes: ok.len(),
        failures,
        mean_iterations: mi,
        hw_iterations: half_width(&iters, mi),
        mean_objective: mo,
        hw_objective: half_width(&objs, mo),
        mean_unique: mu,
        hw_unique: half_width(&uniq, mu),
        mean_times: times,
        degenerate_sample: ok.len() == 1,
    })
}

pub const CSV_HEADER: &str =
    "rep,seed,method,iterations,objective,unique_obs,t_total,t_master,t_sub,t_opt,t_argmax,t_sep,status";

fn fmt_times(t: &TimeBreakdown) -> String {
    format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        t.total, t.master, t.subproblem, t.optimality, t.argmax, t.separation
    )
}

/// Render the fixed-schema CSV: header, one row per replication, then
/// `mean` and `hw95` summary rows.
pub fn render_csv(method_label: &str, rows: &[RepRow], stats: &StatsRow) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.report {
            Some(r) => {
                out.push_str(&format!(
                    "{},{},{},{},{:.6},{},{},ok\n",
                    row.rep,
                    row.seed,
                    method_label,
                    r.iterations,
                    r.objective,
                    r.unique_observations,
                    fmt_times(&r.times),
                ));
            }
            None => {
                let msg = row
                    .error
                    .clone()
                    .unwrap_or_default()
                    .replace(',', ";")
                    .replace('\n', " ");
                out.push_str(&format!(
                    "{},{},{},,,,,,,,,,error: {}\n",
                    row.rep, row.seed, method_label, msg
                ));
            }
        }
    }
    out.push_str(&format!(
        "mean,,{},{:.6},{:.6},{:.6},{},ok={};fail={}\n",
        method_label,
        stats.mean_iterations,
        stats.mean_objective,
        stats.mean_unique,
        fmt_times(&stats.mean_times),
        stats.successes,
        stats.failures,
    ));
    let flag = if stats.degenerate_sample {
        "degenerate-sample"
    } else {
        "t95"
    };
    out.push_str(&format!(
        "hw95,,{},{:.6},{:.6},{:.6},{},{}\n",
        method_label,
        stats.hw_iterations,
        stats.hw_objective,
        stats.hw_unique,
        fmt_times(&TimeBreakdown::default()),
        flag,
    ));
    out
}

/// One table row in the style of the replication summary tables:
/// `label | iterations (±hw) | objective (±hw) | unique (±hw)`.
pub fn format_summary_row(label: &str, stats: &StatsRow) -> String {
    format!(
        "{} | {:.3} (±{:.2}) | {:.3} (±{:.2}) | {:.3} (±{:.2})",
        label,
        stats.mean_iterations,
        stats.hw_iterations,
        stats.mean_objective,
        stats.hw_objective,
        stats.mean_unique,
        stats.hw_unique,
    )
}

const ORACLE_MAX_SUPPORT: usize = 32;
const ORACLE_MAX_DIM: usize = 2;

/// Brute-force solution of the distributionally robust problem over the
/// full finite support: for every grid point of the first-stage box, solve
/// every scenario subproblem exactly and one separation problem over the
/// exact ambiguity set (parameters from the true distribution), then take
/// the grid minimizer. Only small instances are supported.
pub fn brute_force_dro(
    instance: &ProblemInstance,
    config: &AmbiguityConfig,
    step: f64,
) -> Result<(Vec<f64>, f64), HarnessError> {
    let support_size = instance.true_distribution.support_size();
    if support_size > ORACLE_MAX_SUPPORT {
        return Err(HarnessError::OracleUnsupported(format!(
            "support size {support_size} exceeds {ORACLE_MAX_SUPPORT}"
        )));
    }
    if instance.dim_x() > ORACLE_MAX_DIM {
        return Err(HarnessError::OracleUnsupported(format!(
            "d_x = {} exceeds {ORACLE_MAX_DIM}",
            instance.dim_x()
        )));
    }
    if !(step > 0.0) {
        return Err(HarnessError::OracleUnsupported("step must be positive".into()));
    }
    for t in 0..instance.dim_x() {
        if !instance.x_upper[t].is_finite() {
            return Err(HarnessError::OracleUnsupported(format!(
                "x[{t}] has no finite upper bound to grid over"
            )));
        }
    }

    let full = instance.true_distribution.enumerate();
    let support: Vec<_> = full.iter().map(|(o, _)| o.clone()).collect();
    let true_probs: Vec<f64> = full.iter().map(|(_, p)| *p).collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x = instance.x_lower.clone();
    'grid: loop {
        if first_stage_feasible(instance, &x) {
            let mut values = Vec::with_capacity(support.len());
            for omega in &support {
                let (q, _) = solve_subproblem(instance, &x, omega)
                    .map_err(|e| HarnessError::OracleFailure(e.to_string()))?;
                values.push(q);
            }
            let worst = separate_over(config, &support, &true_probs, &values)
                .map_err(|e| HarnessError::OracleFailure(e.to_string()))?;
            let total = linalg::dot(&instance.c, &x) + worst.value;
            if best.as_ref().map_or(true, |(_, b)| total < *b) {
                best = Some((x.clone(), total));
            }
        }
        // advance the grid odometer
        for t in 0..instance.dim_x() {
            x[t] += step;
            if x[t] <= instance.x_upper[t] + 1e-12 {
                continue 'grid;
            }
            x[t] = instance.x_lower[t];
        }
        break;
    }

    best.ok_or_else(|| {
        HarnessError::OracleFailure("no feasible grid point in the first-stage box".into())
    })
}

fn first_stage_feasible(instance: &ProblemInstance, x: &[f64]) -> bool {
    use crate::lp::RowSense;
    for (i, row) in instance.a.iter().enumerate() {
        let v = linalg::dot(row, x);
        let ok = match instance.senses[i] {
            RowSense::Le => v <= instance.b[i] + 1e-9,
            RowSense::Ge => v >= instance.b[i] - 1e-9,
            RowSense::Eq => (v - instance.b[i]).abs() <= 1e-9,
        };
        if !ok {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;

    fn t1() -> ProblemInstance {
        parse_instance(
            r#"{
            "name": "t1",
            "first_stage": {"c": [1.0], "lb": [0.0], "ub": [10.0]},
            "second_stage": {"g": [1.0, 0.0], "W": [[1.0, -1.0]], "r": [0.0], "T": [[1.0]]},
            "random": [{"target": "rhs", "row": 0, "coord": 0}],
            "distribution": {"type": "scenarios", "omegas": [[1.0], [3.0]], "probs": [0.5, 0.5]}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn t_quantiles_match_reference_values() {
        assert!((t_quantile_975(30) - 2.045230).abs() < 1e-5);
        assert!((t_quantile_975(2) - 12.706205).abs() < 1e-5);
        assert_eq!(t_quantile_975(1), 0.0);
    }

    #[test]
    fn half_width_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = mean(&xs);
        assert_eq!(m, 3.0);
        // s = sqrt(2.5), hw = t_{0.975,4} * s / sqrt(5)
        let want = 2.7764451 * 2.5f64.sqrt() / 5.0f64.sqrt();
        assert!((half_width(&xs, m) - want).abs() < 1e-5);
    }

    #[test]
    fn single_replication_is_degenerate_with_zero_hw() {
        let inst = t1();
        let cfg = ExperimentConfig {
            method: Method::Drsd(DrsdParams {
                k_min: 16,
                k_max: 32,
                ..DrsdParams::default()
            }),
            ambiguity: AmbiguityConfig::moment(1),
            replications: 1,
            base_seed: 42,
            timing: false,
        };
        let out = replicate(&inst, &cfg).unwrap();
        assert!(out.stats.degenerate_sample);
        assert_eq!(out.stats.hw_objective, 0.0);
        assert_eq!(out.stats.hw_iterations, 0.0);
        assert!(out.csv.lines().last().unwrap().contains("degenerate-sample"));
    }

    #[test]
    fn csv_has_fixed_row_count_and_header() {
        let inst = t1();
        let cfg = ExperimentConfig {
            method: Method::Drls(DrlsParams {
                sample_size: 16,
                ..DrlsParams::default()
            }),
            ambiguity: AmbiguityConfig::moment(1),
            replications: 5,
            base_seed: 1,
            timing: false,
        };
        let out = replicate(&inst, &cfg).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines.len(), 1 + 5 + 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("0,1,drls-16,"));
        assert!(lines[6].starts_with("mean,,drls-16,"));
        assert!(lines[7].starts_with("hw95,,drls-16,"));
        assert!(lines[6].contains("ok=5;fail=0"));
    }

    #[test]
    fn identical_configs_render_identical_csv() {
        let inst = t1();
        let cfg = ExperimentConfig {
            method: Method::Drsd(DrsdParams {
                k_min: 24,
                k_max: 48,
                ..DrsdParams::default()
            }),
            ambiguity: AmbiguityConfig::moment(1),
            replications: 4,
            base_seed: 9,
            timing: false,
        };
        let a = replicate(&inst, &cfg).unwrap();
        let b = replicate(&inst, &cfg).unwrap();
        assert_eq!(a.csv, b.csv);
    }

    #[test]
    fn mean_objective_close_to_analytic_optimum() {
        let inst = t1();
        let cfg = ExperimentConfig {
            method: Method::Drsd(DrsdParams {
                k_min: 64,
                k_max: 256,
                ..DrsdParams::default()
            }),
            ambiguity: AmbiguityConfig::moment(1),
            replications: 10,
            base_seed: 100,
            timing: false,
        };
        let out = replicate(&inst, &cfg).unwrap();
        assert!(
            (out.stats.mean_objective - 2.0).abs() <= 0.02,
            "mean objective {}",
            out.stats.mean_objective
        );
    }

    #[test]
    fn oracle_t1_moment_q1() {
        let inst = t1();
        let (x, v) = brute_force_dro(&inst, &AmbiguityConfig::moment(1), 1e-3).unwrap();
        assert!((v - 2.0).abs() <= 2e-3, "oracle value {v}");
        assert!((0.0..=1.0 + 1e-6).contains(&x[0]));
    }

    #[test]
    fn oracle_t1_wasserstein_large_radius_puts_mass_on_worst_case() {
        // radius large enough to move all mass to omega = 3:
        // min_x x + max(0, 3 - x) = 3
        let inst = t1();
        let (_, v) = brute_force_dro(&inst, &AmbiguityConfig::wasserstein(1e3), 1e-3).unwrap();
        assert!((v - 3.0).abs() <= 2e-3, "oracle value {v}");
    }

    #[test]
    fn oracle_rejects_large_support() {
        let mut inst = t1();
        let omegas: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let probs = vec![1.0 / 40.0; 40];
        inst.true_distribution = crate::model::DistributionSpec::Scenarios { omegas, probs };
        assert!(matches!(
            brute_force_dro(&inst, &AmbiguityConfig::moment(1), 0.1),
            Err(HarnessError::OracleUnsupported(_))
        ));
    }

    #[test]
    fn failed_replications_keep_their_rows() {
        let ok = RepRow {
            rep: 0,
            seed: 5,
            report: Some(RunReport {
                objective: 2.0,
                iterations: 10,
                unique_observations: 2,
                counters: Default::default(),
                times: Default::default(),
                incumbent: vec![0.0],
                max_delta: 0.0,
            }),
            error: None,
        };
        let failed = RepRow {
            rep: 1,
            seed: 6,
            report: None,
            error: Some("iteration 3: bad, very bad".into()),
        };
        let rows = vec![ok, failed];
        let stats = aggregate(&rows).unwrap();
        assert_eq!(stats.successes, 1);
        assert_eq!(stats.failures, 1);
        assert!(stats.degenerate_sample);
        let csv = render_csv("drsd", &rows, &stats);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        // commas in the error message are sanitized, column count is stable
        assert_eq!(lines[2].split(',').count(), CSV_HEADER.split(',').count());
        assert!(lines[2].contains("error: iteration 3: bad; very bad"));
        assert!(lines[3].contains("ok=1;fail=1"));
    }

    #[test]
    fn all_failures_surface_an_error() {
        let rows = vec![RepRow {
            rep: 0,
            seed: 1,
            report: None,
            error: Some("boom".into()),
        }];
        assert!(matches!(
            aggregate(&rows),
            Err(HarnessError::AllReplicationsFailed(1, _))
        ));
    }

    #[test]
    fn summary_row_shape() {
        let stats = StatsRow {
            successes: 30,
            failures: 0,
            mean_iterations: 17.867,
            hw_iterations: 0.92,
            mean_objective: 457.610,
            hw_objective: 3.28,
            mean_unique: 38.233,
            hw_unique: 1.10,
            mean_times: TimeBreakdown::default(),
            degenerate_sample: false,
        };
        let row = format_summary_row("drls-100", &stats);
        assert!(row.contains("17.867"));
        assert!(row.contains("457.610"));
        assert!(row.contains("38.233"));
    }
}
