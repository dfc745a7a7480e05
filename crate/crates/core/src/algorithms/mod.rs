//! The sequential-sampling solver (DRSD) and the external-sampling
//! DR L-shaped benchmark, sharing the cut pool and master machinery.

mod drls;
mod drsd;
mod master;

pub use drls::{run_drls, DrlsParams};
pub use drsd::{run_drsd, run_drsd_observed, DrsdObserver, DrsdParams, IterationView};
pub use master::{build_cut, solve_master, CutOrigin, CutPool, MasterSolution, Minorant};

use std::time::Instant;

use thiserror::Error;

use crate::ambiguity::AmbiguityError;
use crate::recourse::RecourseError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid parameters: {0}")]
    Config(String),
    #[error("master problem failed: {detail}")]
    Master { detail: String },
    #[error("iteration {iteration}: {source}")]
    Recourse {
        iteration: usize,
        source: RecourseError,
    },
    #[error("iteration {iteration}: {source}")]
    Separation {
        iteration: usize,
        source: AmbiguityError,
    },
}

impl SolveError {
    /// Attach iteration context to master failures raised inside a run loop.
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            SolveError::Master { detail } => SolveError::Master {
                detail: format!("iteration {iteration}: {detail}"),
            },
            other => other,
        }
    }
}

/// Operation counters accumulated over one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub subproblem_lp_solves: u64,
    pub separation_solves: u64,
    pub argmax_evaluations: u64,
    pub master_solves: u64,
}

/// Wall-time per phase, in seconds. All zero when timing is disabled.
#[derive(Clone, Copy, Debug, Default)]
pub struct TimeBreakdown {
    pub total: f64,
    pub master: f64,
    pub subproblem: f64,
    pub optimality: f64,
    pub argmax: f64,
    pub separation: f64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Phase {
    Master,
    Subproblem,
    Optimality,
    Argmax,
    Separation,
}

/// Monotonic per-phase stopwatch. With timing disabled every reading is
/// zero, which keeps report files byte-reproducible across runs.
pub(crate) struct PhaseClock {
    enabled: bool,
    started: Instant,
    times: TimeBreakdown,
}

impl PhaseClock {
    pub fn new(enabled: bool) -> Self {
        PhaseClock {
            enabled,
            started: Instant::now(),
            times: TimeBreakdown::default(),
        }
    }

    pub fn time<T>(&mut self, phase: Phase, f: impl FnOnce() -> T) -> T {
        if !self.enabled {
            return f();
        }
        let t0 = Instant::now();
        let out = f();
        let dt = t0.elapsed().as_secs_f64();
        match phase {
            Phase::Master => self.times.master += dt,
            Phase::Subproblem => self.times.subproblem += dt,
            Phase::Optimality => self.times.optimality += dt,
            Phase::Argmax => self.times.argmax += dt,
            Phase::Separation => self.times.separation += dt,
        }
        out
    }

    pub fn finish(mut self) -> TimeBreakdown {
        if self.enabled {
            self.times.total = self.started.elapsed().as_secs_f64();
        }
        self.times
    }
}

/// Result of one solver run.
#[derive(Clone, Debug)]
pub struct RunReport {
    /// In-sample objective estimate: the final approximation evaluated at
    /// the final incumbent.
    pub objective: f64,
    /// Completed iterations.
    pub iterations: usize,
    pub unique_observations: usize,
    pub counters: Counters,
    pub times: TimeBreakdown,
    /// Final incumbent first-stage decision.
    pub incumbent: Vec<f64>,
    /// Largest estimate-error term observed across iterations; nonpositive
    /// up to LP tolerance by optimality of the candidate.
    pub max_delta: f64,
}

/// Incumbent update rule: replace the incumbent iff the improvement at the
/// new approximation beats the fraction `gamma` of the improvement predicted
/// by the previous approximation,
/// `f_k(x_k) - f_k(xhat) < gamma * [f_{k-1}(x_k) - f_{k-1}(xhat)]`.
///
/// `lhs` is the left-hand difference, `bracket` the bracketed difference.
pub fn incumbent_test(lhs: f64, gamma: f64, bracket: f64) -> bool {
    lhs < gamma * bracket
}
