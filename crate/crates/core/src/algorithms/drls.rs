//! External-sampling benchmark: the distributionally robust L-shaped method.
//!
//! A sample of fixed size is drawn up front and the approximate ambiguity
//! set is built once over its unique observations. Every iteration solves
//! the second-stage problem exactly for each unique observation, runs one
//! separation solve with the exact values, and appends a single optimality
//! cut. Cuts are never rescaled because the sample is static.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ambiguity::{separate, AmbiguityConfig, Sample};
use crate::linalg;
use crate::model::ProblemInstance;
use crate::recourse::batch_exact_recourse;

use super::master::{build_cut, solve_master, CutOrigin, CutPool};
use super::{Counters, Phase, PhaseClock, RunReport, SolveError};

/// Parameters of a DR L-shaped run.
#[derive(Clone, Copy, Debug)]
pub struct DrlsParams {
    /// Number of observations drawn before optimization starts.
    pub sample_size: usize,
    /// Relative gap tolerance between the master lower bound and the
    /// evaluated objective.
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Record wall-clock phase times. Disable for byte-reproducible reports.
    pub timing: bool,
}

impl Default for DrlsParams {
    fn default() -> Self {
        DrlsParams {
            sample_size: 500,
            tol: 1e-3,
            max_iterations: 1000,
            seed: 0,
            timing: true,
        }
    }
}

impl DrlsParams {
    fn validate(&self) -> Result<(), SolveError> {
        if self.sample_size == 0 {
            return Err(SolveError::Config("sample size must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(SolveError::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn run_drls(
    instance: &ProblemInstance,
    config: &AmbiguityConfig,
    params: &DrlsParams,
) -> Result<RunReport, SolveError> {
    params.validate()?;
    config
        .validate()
        .map_err(|source| SolveError::Separation {
            iteration: 0,
            source,
        })?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut clock = PhaseClock::new(params.timing);
    let mut counters = Counters::default();

    let sample = Sample::from_observations(
        (0..params.sample_size).map(|_| instance.sample_observation(&mut rng)),
    );
    let unique = sample.unique().to_vec();

    let mut pool = CutPool::seeded(instance.dim_x());
    let mut iterations = 0usize;
    let mut objective = f64::NAN;
    let mut incumbent = vec![0.0; instance.dim_x()];
    let mut max_delta = f64::NEG_INFINITY;

    for j in 1..=params.max_iterations {
        iterations = j;
        let ms = clock
            .time(Phase::Master, || solve_master(&pool, instance))
            .map_err(|e| e.at_iteration(j))?;
        counters.master_solves += 1;
        let lower_bound = ms.objective;

        // exact recourse for every unique observation
        let batch = clock.time(Phase::Subproblem, || {
            batch_exact_recourse(instance, &ms.x, &unique)
        })
        .map_err(|source| SolveError::Recourse { iteration: j, source })?;
        counters.subproblem_lp_solves += unique.len() as u64;
        let values: Vec<f64> = batch.iter().map(|(v, _)| *v).collect();
        let duals: Vec<Vec<f64>> = batch.into_iter().map(|(_, pi)| pi).collect();

        let extremal = clock.time(Phase::Separation, || separate(config, &sample, &values))
            .map_err(|source| SolveError::Separation { iteration: j, source })?;
        counters.separation_solves += 1;

        let evaluated = linalg::dot(&instance.c, &ms.x) + extremal.value;
        objective = evaluated;
        incumbent = ms.x.clone();
        max_delta = max_delta.max(lower_bound - evaluated);

        let converged = clock.time(Phase::Optimality, || {
            lower_bound >= evaluated - params.tol * evaluated.abs().max(1.0)
        });
        if converged {
            break;
        }

        let cut = build_cut(
            &extremal,
            &duals,
            &unique,
            instance,
            j,
            CutOrigin::Candidate,
        )?;
        pool.push(cut);
    }

    Ok(RunReport {
        objective,
        iterations,
        unique_observations: sample.num_unique(),
        counters,
        times: clock.finish(),
        incumbent,
        max_delta,
    })
}
