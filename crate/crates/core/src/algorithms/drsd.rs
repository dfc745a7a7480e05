//! The sequential-sampling decomposition run loop.
//!
//! Each iteration draws one observation, solves the second-stage problem
//! exactly at the candidate and at the incumbent (growing the dual-vertex
//! set by up to two vertices), prices every older observation through the
//! argmax procedure, solves two distribution separation problems, appends
//! the resulting candidate and incumbent cuts, rescales all older cuts by
//! `(k-1)/k`, and applies the incumbent update rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ambiguity::{separate, theta, AmbiguityConfig, Sample};
use crate::model::ProblemInstance;
use crate::recourse::{argmax_over, solve_subproblem, DualVertexSet};

use super::master::{build_cut, solve_master, CutOrigin, CutPool, Minorant};
use super::{incumbent_test, Counters, Phase, PhaseClock, RunReport, SolveError};

/// Parameters of a DRSD run. Defaults: `tau = 1e-3`, `gamma = 0.2`,
/// `k_min = 256`, `k_max = 5000`.
#[derive(Clone, Copy, Debug)]
pub struct DrsdParams {
    /// Relative stopping tolerance on the incumbent-candidate gap.
    pub tau: f64,
    /// Incumbent update fraction in (0, 1].
    pub gamma: f64,
    /// Minimum completed iterations before the gap test may stop the run.
    pub k_min: usize,
    /// Hard iteration cap.
    pub k_max: usize,
    pub seed: u64,
    /// Record wall-clock phase times. Disable for byte-reproducible reports.
    pub timing: bool,
}

impl Default for DrsdParams {
    fn default() -> Self {
        DrsdParams {
            tau: 1e-3,
            gamma: 0.2,
            k_min: 256,
            k_max: 5000,
            seed: 0,
            timing: true,
        }
    }
}

impl DrsdParams {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(SolveError::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0) {
            return Err(SolveError::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.k_max == 0 {
            return Err(SolveError::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration snapshot handed to observers after the pool and incumbent
/// update of iteration `k` completed.
pub struct IterationView<'a> {
    pub k: usize,
    pub candidate: &'a [f64],
    pub incumbent_prev: &'a [f64],
    pub incumbent: &'a [f64],
    /// `f_{k-1}(x_k) - f_{k-1}(xhat_{k-1})`.
    pub delta: f64,
    pub pool: &'a CutPool,
    pub duals: &'a DualVertexSet,
    pub sample: &'a Sample,
    /// The candidate cut appended this iteration.
    pub candidate_cut: &'a Minorant,
    /// Separation value attained at the candidate this iteration.
    pub candidate_separation_value: f64,
}

/// Instrumentation hook; see [`run_drsd_observed`].
pub trait DrsdObserver {
    fn after_iteration(&mut self, view: &IterationView<'_>);
}

struct NoopObserver;

impl DrsdObserver for NoopObserver {
    fn after_iteration(&mut self, _view: &IterationView<'_>) {}
}

pub fn run_drsd(
    instance: &ProblemInstance,
    config: &AmbiguityConfig,
    params: &DrsdParams,
) -> Result<RunReport, SolveError> {
    run_drsd_observed(instance, config, params, &mut NoopObserver)
}

/// Run DRSD with an observer invoked after every completed iteration. The
/// observer sees the updated pool, vertex set, sample and incumbent; it is
/// intended for invariant checking and tracing and cannot influence the run.
pub fn run_drsd_observed(
    instance: &ProblemInstance,
    config: &AmbiguityConfig,
    params: &DrsdParams,
    observer: &mut dyn DrsdObserver,
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

    let mut pool = CutPool::seeded(instance.dim_x());
    let mut duals = DualVertexSet::new(instance.m2());
    let mut sample = Sample::empty();

    // bootstrap: the first master solution is both first candidate and
    // initial incumbent
    let ms = clock.time(Phase::Master, || solve_master(&pool, instance))?;
    counters.master_solves += 1;
    let mut candidate = ms.x.clone();
    let mut incumbent = ms.x;
    let mut f_prev_candidate = ms.objective;

    let mut k = 0usize;
    let mut max_delta = f64::NEG_INFINITY;

    loop {
        // stopping rule on the previous approximation
        let (stop, delta) = clock.time(Phase::Optimality, || {
            let f_prev_incumbent = pool.evaluate_objective(&instance.c, &incumbent);
            let delta = f_prev_candidate - f_prev_incumbent;
            let gap = -delta;
            let stop = (k + 1 > params.k_min
                && gap < params.tau * f_prev_incumbent.abs().max(1.0))
                || k >= params.k_max;
            (stop, delta)
        });
        max_delta = max_delta.max(delta);
        if stop {
            break;
        }

        k += 1;
        let theta_k = theta(sample.len() + 1);
        let omega = instance.sample_observation(&mut rng);
        let (new_sample, new_idx) = sample.updated(omega.clone());

        // exact second-stage solves at candidate and incumbent; both duals
        // join the vertex set before any argmax pricing
        let (q_cand, pi_cand) = clock.time(Phase::Subproblem, || {
            solve_subproblem(instance, &candidate, &omega)
        })
        .map_err(|source| SolveError::Recourse { iteration: k, source })?;
        counters.subproblem_lp_solves += 1;
        duals
            .add_vertex(pi_cand.clone(), instance)
            .map_err(|source| SolveError::Recourse { iteration: k, source })?;
        let (q_inc, pi_inc) = clock.time(Phase::Subproblem, || {
            solve_subproblem(instance, &incumbent, &omega)
        })
        .map_err(|source| SolveError::Recourse { iteration: k, source })?;
        counters.subproblem_lp_solves += 1;
        duals
            .add_vertex(pi_inc.clone(), instance)
            .map_err(|source| SolveError::Recourse { iteration: k, source })?;

        // argmax pass over all previously seen observations
        let cand_pass = clock.time(Phase::Argmax, || {
            recourse_pass(
                instance,
                &duals,
                &candidate,
                &new_sample,
                new_idx,
                q_cand,
                &pi_cand,
                &mut counters,
            )
        })
        .map_err(|source| SolveError::Recourse { iteration: k, source })?;
        let inc_pass = clock.time(Phase::Argmax, || {
            recourse_pass(
                instance,
                &duals,
                &incumbent,
                &new_sample,
                new_idx,
                q_inc,
                &pi_inc,
                &mut counters,
            )
        })
        .map_err(|source| SolveError::Recourse { iteration: k, source })?;

        // two distribution separation problems
        let p_cand = clock.time(Phase::Separation, || {
            separate(config, &new_sample, &cand_pass.values)
        })
        .map_err(|source| SolveError::Separation { iteration: k, source })?;
        counters.separation_solves += 1;
        let p_inc = clock.time(Phase::Separation, || {
            separate(config, &new_sample, &inc_pass.values)
        })
        .map_err(|source| SolveError::Separation { iteration: k, source })?;
        counters.separation_solves += 1;

        let cut_cand = build_cut(
            &p_cand,
            &cand_pass.duals,
            new_sample.unique(),
            instance,
            k,
            CutOrigin::Candidate,
        )?;
        let cut_inc = build_cut(
            &p_inc,
            &inc_pass.duals,
            new_sample.unique(),
            instance,
            k,
            CutOrigin::Incumbent,
        )?;

        // older cuts shrink toward the seed cut; the two fresh cuts enter
        // unscaled
        pool.rescale(theta_k);
        pool.compact();
        pool.push(cut_cand);
        pool.push(cut_inc);

        // incumbent rule on the updated approximation
        let f_new_candidate = pool.evaluate_objective(&instance.c, &candidate);
        let f_new_incumbent = pool.evaluate_objective(&instance.c, &incumbent);
        let incumbent_prev = incumbent.clone();
        if incumbent_test(f_new_candidate - f_new_incumbent, params.gamma, delta) {
            incumbent = candidate.clone();
        }
        sample = new_sample;

        let candidate_cut_idx = pool.len() - 2;
        observer.after_iteration(&IterationView {
            k,
            candidate: &candidate,
            incumbent_prev: &incumbent_prev,
            incumbent: &incumbent,
            delta,
            pool: &pool,
            duals: &duals,
            sample: &sample,
            candidate_cut: &pool.cuts()[candidate_cut_idx],
            candidate_separation_value: p_cand.value,
        });

        // master solve for the next candidate
        let ms = clock
            .time(Phase::Master, || solve_master(&pool, instance))
            .map_err(|e| e.at_iteration(k + 1))?;
        counters.master_solves += 1;
        candidate = ms.x;
        f_prev_candidate = ms.objective;
    }

    let objective = pool.evaluate_objective(&instance.c, &incumbent);
    Ok(RunReport {
        objective,
        iterations: k,
        unique_observations: sample.num_unique(),
        counters,
        times: clock.finish(),
        incumbent,
        max_delta,
    })
}

struct RecoursePass {
    values: Vec<f64>,
    duals: Vec<Vec<f64>>,
}

/// Approximate recourse values at `x` over all unique observations: the new
/// observation keeps its exact solve, all others are priced by the argmax
/// scan over the vertex set.
#[allow(clippy::too_many_arguments)]
fn recourse_pass(
    instance: &ProblemInstance,
    duals: &DualVertexSet,
    x: &[f64],
    sample: &Sample,
    new_idx: usize,
    exact_value: f64,
    exact_dual: &[f64],
    counters: &mut Counters,
) -> Result<RecoursePass, crate::recourse::RecourseError> {
    let n = sample.num_unique();
    let mut values = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);
    for (u, omega) in sample.unique().iter().enumerate() {
        if u == new_idx {
            values.push(exact_value);
            chosen.push(exact_dual.to_vec());
            continue;
        }
        let (r, t) = instance.realize(omega)?;
        let rhs: Vec<f64> = r
            .iter()
            .zip(crate::linalg::mat_vec(&t, x))
            .map(|(ri, tx)| ri - tx)
            .collect();
        let (idx, v) = argmax_over(duals, &rhs);
        counters.argmax_evaluations += 1;
        values.push(v);
        chosen.push(duals.vertices()[idx].clone());
    }
    Ok(RecoursePass {
        values,
        duals: chosen,
    })
}
