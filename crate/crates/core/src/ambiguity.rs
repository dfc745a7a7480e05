//! Approximate ambiguity sets over a growing observation sample.
//!
//! A [`Sample`] records the observation history with exact (bitwise)
//! deduplication, per-observation counts and the empirical frequencies they
//! induce. Ambiguity sets are restricted to distributions supported on the
//! observations seen so far: moment-based sets pin sample moments through
//! equality rows, Wasserstein sets bound the transport distance to the
//! empirical distribution. [`separate`] solves the induced distribution
//! separation problem and returns the extremal distribution.

use std::collections::HashMap;

use thiserror::Error;

use crate::linalg;
use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense};
use crate::model::Observation;

/// Observation history of length `k` with unique observations in insertion
/// order. Snapshots are immutable; [`Sample::updated`] returns the history
/// extended by one observation.
#[derive(Clone, Debug, Default)]
pub struct Sample {
    len: usize,
    unique: Vec<Observation>,
    counts: Vec<u64>,
    index: HashMap<Vec<u64>, usize>,
}

impl Sample {
    pub fn empty() -> Self {
        Sample::default()
    }

    /// Build a sample from a fixed observation list (external sampling).
    pub fn from_observations<I: IntoIterator<Item = Observation>>(obs: I) -> Self {
        let mut s = Sample::empty();
        for o in obs {
            s.push(o);
        }
        s
    }

    /// History length `k` (with multiplicity).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn unique(&self) -> &[Observation] {
        &self.unique
    }

    pub fn num_unique(&self) -> usize {
        self.unique.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Empirical frequencies `count / k`, aligned with [`Sample::unique`].
    pub fn frequencies(&self) -> Vec<f64> {
        let k = self.len as f64;
        self.counts.iter().map(|&c| c as f64 / k).collect()
    }

    /// Index of an observation in the unique list, if present (bitwise match).
    pub fn position(&self, omega: &Observation) -> Option<usize> {
        self.index.get(&omega.bit_key()).copied()
    }

    fn push(&mut self, omega: Observation) -> usize {
        self.len += 1;
        match self.index.get(&omega.bit_key()) {
            Some(&u) => {
                self.counts[u] += 1;
                u
            }
            None => {
                let u = self.unique.len();
                self.index.insert(omega.bit_key(), u);
                self.unique.push(omega);
                self.counts.push(1);
                u
            }
        }
    }

    /// The history extended by one observation, together with the unique
    /// index of the new observation.
    pub fn updated(&self, omega: Observation) -> (Sample, usize) {
        let mut next = self.clone();
        let u = next.push(omega);
        (next, u)
    }
}

/// Empirical-frequency update: returns the sample of length `k` obtained by
/// appending `omega` to a sample of length `k - 1`.
pub fn empirical_update(sample: &Sample, omega: Observation) -> Sample {
    sample.updated(omega).0
}

/// The rescale factor `(k - 1) / k` that keeps distributions over the old
/// support feasible for the grown ambiguity set.
pub fn theta(k: usize) -> f64 {
    assert!(k >= 1, "theta is defined for k >= 1");
    (k - 1) as f64 / k as f64
}

/// Push a distribution over the previous support through the frequency
/// recursion: old weights scale by `theta`, the new observation absorbs
/// `1 - theta`. The result is aligned with the unique list of
/// `sample_before.updated(omega_new)`.
pub fn theta_map(
    weights: &[f64],
    sample_before: &Sample,
    omega_new: &Observation,
    theta: f64,
) -> Vec<f64> {
    assert_eq!(weights.len(), sample_before.num_unique());
    let mut out: Vec<f64> = weights.iter().map(|w| w * theta).collect();
    match sample_before.position(omega_new) {
        Some(u) => out[u] += 1.0 - theta,
        None => out.push(1.0 - theta),
    }
    out
}

/// Ambiguity set family, with the parameters estimated from the sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AmbiguityConfig {
    /// Coordinate-wise raw moments of orders `1..=order` as equality
    /// constraints; `cross_moments` additionally pins the pairwise products
    /// of distinct coordinates.
    Moment { order: usize, cross_moments: bool },
    /// Order-1 Wasserstein ball (Euclidean ground cost) of the given radius
    /// around the empirical distribution.
    Wasserstein { radius: f64 },
}

/// Shorthand used in configuration surfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmbiguityKind {
    Moment,
    Wasserstein,
}

impl AmbiguityConfig {
    pub fn moment(order: usize) -> Self {
        AmbiguityConfig::Moment {
            order,
            cross_moments: false,
        }
    }

    pub fn wasserstein(radius: f64) -> Self {
        AmbiguityConfig::Wasserstein { radius }
    }

    pub fn kind(&self) -> AmbiguityKind {
        match self {
            AmbiguityConfig::Moment { .. } => AmbiguityKind::Moment,
            AmbiguityConfig::Wasserstein { .. } => AmbiguityKind::Wasserstein,
        }
    }

    pub fn validate(&self) -> Result<(), AmbiguityError> {
        match *self {
            AmbiguityConfig::Moment { order, .. } if order < 1 => Err(
                AmbiguityError::BadConfig("moment order must be at least 1".into()),
            ),
            AmbiguityConfig::Wasserstein { radius } if !(radius >= 0.0) => Err(
                AmbiguityError::BadConfig(format!("radius must be nonnegative, got {radius}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum AmbiguityError {
    #[error("invalid ambiguity configuration: {0}")]
    BadConfig(String),
    #[error("separation problem infeasible: {0}")]
    Infeasible(String),
    #[error("separation LP failed: {0}")]
    LpFailure(String),
}

/// Extremal distribution returned by the separation problem: weights over the
/// unique observations and the attained worst-case value.
#[derive(Clone, Debug)]
pub struct ExtremalDistribution {
    pub weights: Vec<f64>,
    pub value: f64,
}

/// Coordinate-wise raw sample moments, coordinate-major: for each coordinate
/// `t` the orders `1..=q` in sequence, so the vector has length `q * d`.
pub fn moment_parameters(sample: &Sample, q: usize) -> Vec<f64> {
    assert!(!sample.is_empty(), "moments need at least one observation");
    let d = sample.unique()[0].dim();
    let k = sample.len() as f64;
    let mut out = Vec::with_capacity(q * d);
    for t in 0..d {
        for s in 1..=q {
            let m: f64 = sample
                .unique()
                .iter()
                .zip(sample.counts())
                .map(|(o, &c)| c as f64 * o.values[t].powi(s as i32))
                .sum();
            out.push(m / k);
        }
    }
    out
}

/// Moment basis functions evaluated at one observation, in the same order as
/// the rows of the moment constraint block.
fn moment_features(omega: &Observation, order: usize, cross_moments: bool) -> Vec<f64> {
    let d = omega.dim();
    let mut out = Vec::new();
    for t in 0..d {
        for s in 1..=order {
            out.push(omega.values[t].powi(s as i32));
        }
    }
    if cross_moments && order >= 2 {
        for t in 0..d {
            for u in (t + 1)..d {
                out.push(omega.values[t] * omega.values[u]);
            }
        }
    }
    out
}

/// Solve the distribution separation problem over the sample's approximate
/// ambiguity set: maximize the expectation of `values` (aligned with the
/// unique observations) over the set. The reference distribution is the
/// sample's empirical frequency vector.
pub fn separate(
    config: &AmbiguityConfig,
    sample: &Sample,
    values: &[f64],
) -> Result<ExtremalDistribution, AmbiguityError> {
    separate_over(config, sample.unique(), &sample.frequencies(), values)
}

/// Separation over an explicit support and reference distribution. The
/// moment parameters are the reference-weighted features; for a sample
/// reference this coincides with the sample moments.
pub fn separate_over(
    config: &AmbiguityConfig,
    support: &[Observation],
    reference: &[f64],
    values: &[f64],
) -> Result<ExtremalDistribution, AmbiguityError> {
    config.validate()?;
    assert_eq!(support.len(), reference.len());
    assert_eq!(
        support.len(),
        values.len(),
        "separation needs a value for every unique observation"
    );
    assert!(!support.is_empty());

    let sol = match *config {
        AmbiguityConfig::Moment {
            order,
            cross_moments,
        } => {
            let u = support.len();
            let mut p = LpProblem::new(u);
            p.costs = values.iter().map(|v| -v).collect();
            p.add_row(vec![1.0; u], RowSense::Eq, 1.0);
            let feats: Vec<Vec<f64>> = support
                .iter()
                .map(|o| moment_features(o, order, cross_moments))
                .collect();
            let n_feat = feats[0].len();
            for i in 0..n_feat {
                let row: Vec<f64> = feats.iter().map(|f| f[i]).collect();
                let target = linalg::dot(&row, reference);
                p.add_row(row, RowSense::Eq, target);
            }
            solve_lp(&p)
        }
        AmbiguityConfig::Wasserstein { radius } => {
            // variables: p_u for u in 0..U, then eta_{u,v} flattened row-major
            let u = support.len();
            let nv = u + u * u;
            let eta = |i: usize, j: usize| u + i * u + j;
            let mut p = LpProblem::new(nv);
            for (i, v) in values.iter().enumerate() {
                p.costs[i] = -v;
            }
            let mut simplex_row = vec![0.0; nv];
            simplex_row[..u].fill(1.0);
            p.add_row(simplex_row, RowSense::Eq, 1.0);
            // plan rows out of each support point carry its weight
            for i in 0..u {
                let mut row = vec![0.0; nv];
                row[i] = -1.0;
                for j in 0..u {
                    row[eta(i, j)] = 1.0;
                }
                p.add_row(row, RowSense::Eq, 0.0);
            }
            // plan columns reproduce the reference distribution
            for j in 0..u {
                let mut row = vec![0.0; nv];
                for i in 0..u {
                    row[eta(i, j)] = 1.0;
                }
                p.add_row(row, RowSense::Eq, reference[j]);
            }
            // transport budget
            let mut budget = vec![0.0; nv];
            for i in 0..u {
                for j in 0..u {
                    budget[eta(i, j)] =
                        linalg::euclidean_dist(&support[i].values, &support[j].values);
                }
            }
            p.add_row(budget, RowSense::Le, radius);
            solve_lp(&p)
        }
    };

    match sol.status {
        LpStatus::Optimal => {
            let u = support.len();
            let weights: Vec<f64> = sol.primal[..u].to_vec();
            let value = -sol.objective;
            let total: f64 = weights.iter().sum();
            debug_assert!(weights.iter().all(|&w| w >= -1e-10));
            debug_assert!((total - 1.0).abs() <= 1e-9);
            if weights.iter().any(|&w| w < -1e-10) || (total - 1.0).abs() > 1e-9 {
                return Err(AmbiguityError::LpFailure(
                    "separation returned a non-distribution".into(),
                ));
            }
            Ok(ExtremalDistribution { weights, value })
        }
        LpStatus::Infeasible => Err(AmbiguityError::Infeasible(match config.kind() {
            // the empirical distribution is always feasible for the moment
            // set, so this indicates a kernel failure rather than a model
            AmbiguityKind::Moment => "moment set empty despite feasible reference".into(),
            AmbiguityKind::Wasserstein => "transport polytope empty".into(),
        })),
        s => Err(AmbiguityError::LpFailure(format!(
            "separation LP ended with status {s:?}"
        ))),
    }
}

/// Order-1 Wasserstein distance between two distributions on a common
/// support, via a fresh transport LP. Used as an independent feasibility
/// check on separation output.
pub fn transport_distance(
    support: &[Observation],
    a: &[f64],
    b: &[f64],
) -> Result<f64, AmbiguityError> {
    let u = support.len();
    assert_eq!(a.len(), u);
    assert_eq!(b.len(), u);
    let mut p = LpProblem::new(u * u);
    for i in 0..u {
        for j in 0..u {
            p.costs[i * u + j] = linalg::euclidean_dist(&support[i].values, &support[j].values);
        }
    }
    for i in 0..u {
        let mut row = vec![0.0; u * u];
        row[i * u..(i + 1) * u].fill(1.0);
        p.add_row(row, RowSense::Eq, a[i]);
    }
    for j in 0..u {
        let mut row = vec![0.0; u * u];
        for i in 0..u {
            row[i * u + j] = 1.0;
        }
        p.add_row(row, RowSense::Eq, b[j]);
    }
    let sol = solve_lp(&p);
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        s => Err(AmbiguityError::LpFailure(format!(
            "transport LP ended with status {s:?}"
        ))),
    }
}
