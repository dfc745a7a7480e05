//! Second-stage recourse: exact subproblem solves, the growing dual-vertex
//! set and the argmax lower-bounding approximation.
//!
//! The exact recourse value `Q(x, w)` is the optimum of the second-stage LP
//! realized at `(x, w)`. Its dual vertices accumulate in a [`DualVertexSet`];
//! maximizing `pi' (r(w) - T(w) x)` over the collected vertices gives the
//! lower approximation `Q_k(x, w)` without any further LP solves. The set is
//! seeded with the zero vector, which is dual-feasible because instances are
//! validated to have `g >= 0`, so `Q_k >= 0` everywhere.

use thiserror::Error;

use crate::linalg;
use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense};
use crate::model::{Observation, ProblemInstance};

/// Growing set of second-stage dual extreme points, deduplicated in the
/// infinity norm. Ordering is stable so argmax tie-breaks are reproducible.
#[derive(Clone, Debug)]
pub struct DualVertexSet {
    vertices: Vec<Vec<f64>>,
    dedup_tol: f64,
}

pub const DEFAULT_DEDUP_TOL: f64 = 1e-9;
const DUAL_FEAS_TOL: f64 = 1e-8;

impl DualVertexSet {
    /// The initial set `{0}` for a problem with `m` second-stage rows.
    pub fn new(m: usize) -> Self {
        DualVertexSet {
            vertices: vec![vec![0.0; m]],
            dedup_tol: DEFAULT_DEDUP_TOL,
        }
    }

    pub fn with_dedup_tol(m: usize, tol: f64) -> Self {
        DualVertexSet {
            vertices: vec![vec![0.0; m]],
            dedup_tol: tol,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Append a dual vertex unless an existing member is within the dedup
    /// tolerance. The vertex must be dual feasible (`W' pi <= g`); vectors
    /// violating this indicate a kernel defect and are rejected.
    pub fn add_vertex(
        &mut self,
        pi: Vec<f64>,
        instance: &ProblemInstance,
    ) -> Result<bool, RecourseError> {
        let viol = dual_infeasibility(&pi, instance);
        if viol > DUAL_FEAS_TOL {
            return Err(RecourseError::DualInfeasible { violation: viol });
        }
        let dup = self.vertices.iter().any(|v| {
            v.iter()
                .zip(&pi)
                .all(|(a, b)| (a - b).abs() <= self.dedup_tol)
        });
        if dup {
            return Ok(false);
        }
        self.vertices.push(pi);
        Ok(true)
    }
}

/// Max violation of `W' pi <= g`.
fn dual_infeasibility(pi: &[f64], instance: &ProblemInstance) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..instance.dim_y() {
        let wt_pi: f64 = instance.w.iter().zip(pi).map(|(row, p)| row[j] * p).sum();
        worst = worst.max(wt_pi - instance.g[j]);
    }
    worst
}

#[derive(Debug, Error)]
pub enum RecourseError {
    #[error(
        "second-stage problem infeasible at x = {x:?}, omega = {omega}; the instance \
         violates relatively complete recourse"
    )]
    SubproblemInfeasible { x: Vec<f64>, omega: String },
    #[error("second-stage LP failed with status {status:?} at omega = {omega}")]
    SubproblemFailed { status: LpStatus, omega: String },
    #[error("dual vector violates W'pi <= g by {violation:e}")]
    DualInfeasible { violation: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Exact second-stage solve: returns `Q(x, omega)` and an optimal dual
/// vertex. Infeasibility aborts with a diagnostic naming the offending point,
/// since it signals a violation of the relatively-complete-recourse
/// assumption.
pub fn solve_subproblem(
    instance: &ProblemInstance,
    x: &[f64],
    omega: &Observation,
) -> Result<(f64, Vec<f64>), RecourseError> {
    let (r, t) = instance.realize(omega)?;
    let rhs: Vec<f64> = r
        .iter()
        .zip(linalg::mat_vec(&t, x))
        .map(|(ri, tx)| ri - tx)
        .collect();

    let mut p = LpProblem::new(instance.dim_y());
    p.costs = instance.g.clone();
    for (row, &b) in instance.w.iter().zip(&rhs) {
        p.add_row(row.clone(), RowSense::Eq, b);
    }
    let sol = solve_lp(&p);
    match sol.status {
        LpStatus::Optimal => Ok((sol.objective, sol.dual)),
        LpStatus::Infeasible => Err(RecourseError::SubproblemInfeasible {
            x: x.to_vec(),
            omega: omega.to_string(),
        }),
        status => Err(RecourseError::SubproblemFailed {
            status,
            omega: omega.to_string(),
        }),
    }
}

/// The best lower-bounding dual vertex for `(x, omega)`: maximizes
/// `pi' (r(w) - T(w) x)` over the set by linear scan, ties broken by lowest
/// insertion index. Returns the vertex index and the attained value.
pub fn argmax_dual(
    set: &DualVertexSet,
    instance: &ProblemInstance,
    x: &[f64],
    omega: &Observation,
) -> Result<(usize, f64), RecourseError> {
    let (r, t) = instance.realize(omega)?;
    let rhs: Vec<f64> = r
        .iter()
        .zip(linalg::mat_vec(&t, x))
        .map(|(ri, tx)| ri - tx)
        .collect();
    Ok(argmax_over(set, &rhs))
}

/// Argmax with the realized right-hand side `r(w) - T(w) x` precomputed.
pub fn argmax_over(set: &DualVertexSet, rhs: &[f64]) -> (usize, f64) {
    assert!(!set.is_empty());
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, pi) in set.vertices().iter().enumerate() {
        let v = linalg::dot(pi, rhs);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Approximate recourse values at `x` for every unique observation of the
/// sample: one argmax scan per observation, zero LP solves.
#[derive(Clone, Debug)]
pub struct RecourseEvaluation {
    /// `Q_k(x, w)` per unique observation.
    pub values: Vec<f64>,
    /// Index into the dual-vertex set of the selected vertex per observation.
    pub chosen: Vec<usize>,
}

pub fn eval_recourse_approx(
    set: &DualVertexSet,
    instance: &ProblemInstance,
    x: &[f64],
    observations: &[Observation],
) -> Result<RecourseEvaluation, RecourseError> {
    let mut values = Vec::with_capacity(observations.len());
    let mut chosen = Vec::with_capacity(observations.len());
    for omega in observations {
        let (idx, v) = argmax_dual(set, instance, x, omega)?;
        values.push(v);
        chosen.push(idx);
    }
    Ok(RecourseEvaluation { values, chosen })
}

/// Exact recourse values and duals at `x` for a batch of observations, one
/// LP solve each. Sequential reference implementation.
pub fn batch_exact_recourse_seq(
    instance: &ProblemInstance,
    x: &[f64],
    observations: &[Observation],
) -> Result<Vec<(f64, Vec<f64>)>, RecourseError> {
    observations
        .iter()
        .map(|omega| solve_subproblem(instance, x, omega))
        .collect()
}

/// Exact recourse values and duals at `x` for a batch of observations,
/// fanned out over the rayon pool. Output order matches the input order.
#[cfg(feature = "parallel")]
pub fn batch_exact_recourse_par(
    instance: &ProblemInstance,
    x: &[f64],
    observations: &[Observation],
) -> Result<Vec<(f64, Vec<f64>)>, RecourseError> {
    use rayon::prelude::*;
    observations
        .par_iter()
        .map(|omega| solve_subproblem(instance, x, omega))
        .collect()
}

/// Batch exact solve using the configured execution mode.
pub fn batch_exact_recourse(
    instance: &ProblemInstance,
    x: &[f64],
    observations: &[Observation],
) -> Result<Vec<(f64, Vec<f64>)>, RecourseError> {
    #[cfg(feature = "parallel")]
    {
        batch_exact_recourse_par(instance, x, observations)
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch_exact_recourse_seq(instance, x, observations)
    }
}
