//! Solver library for two-stage distributionally robust linear programs
//! (2-DRLP) over moment-based and Wasserstein ambiguity sets.
//!
//! The main entry points are [`algorithms::run_drsd`] (sequential-sampling
//! decomposition: one new observation, two exact subproblem solves and two
//! distribution separation solves per iteration) and [`algorithms::run_drls`]
//! (external-sampling DR L-shaped benchmark: a fixed sample drawn up front,
//! every unique observation solved exactly in every iteration).
//!
//! Supporting modules:
//! - [`model`]: instance data, JSON file format, scenario realization and
//!   sampling;
//! - [`lp`]: dense bounded-variable simplex kernel with primal/dual output;
//! - [`ambiguity`]: growing observation samples, approximate ambiguity sets
//!   and the distribution separation problem;
//! - [`recourse`]: exact second-stage solves, the dual-vertex set and the
//!   argmax lower-bounding procedure;
//! - [`harness`]: replication experiments, statistics and a brute-force
//!   grid oracle for small instances.
//!
//! With the default `parallel` feature, replication experiments and batch
//! subproblem evaluation fan out over a rayon thread pool; without it every
//! code path is sequential.

pub mod algorithms;
pub mod ambiguity;
pub mod harness;
pub(crate) mod linalg;
pub mod lp;
pub mod model;
pub mod recourse;

pub use algorithms::{run_drls, run_drsd, DrlsParams, DrsdParams, RunReport, SolveError};
pub use ambiguity::{AmbiguityConfig, AmbiguityKind, ExtremalDistribution, Sample};
pub use harness::{replicate, ExperimentConfig, Method, StatsRow};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus};
pub use model::{parse_instance, Observation, ProblemInstance};
