//! Two-stage instance data: file format, validation, realization, sampling.
//!
//! An instance couples a deterministic first stage `min c'x, Ax {<=,=,>=} b,
//! lb <= x <= ub` with a second-stage LP `min g'y, W y = r(w) - T(w) x,
//! y >= 0` whose right-hand side `r` and technology matrix `T` carry
//! scenario-dependent entries. The true sampling distribution is part of the
//! instance but is used only to generate observations.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense};

/// One realization of the random vector. Coordinates are compared bitwise
/// when observations are deduplicated.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    pub fn new(values: Vec<f64>) -> Self {
        Observation { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Bit pattern of the coordinates, used as an exact dedup key.
    pub fn bit_key(&self) -> Vec<u64> {
        self.values.iter().map(|v| v.to_bits()).collect()
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Which second-stage cell a random coordinate overwrites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RandomTarget {
    /// Entry `row` of the second-stage right-hand side.
    Rhs { row: usize },
    /// Entry `(row, col)` of the technology matrix.
    Tech { row: usize, col: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomEntry {
    pub target: RandomTarget,
    pub omega_coordinate: usize,
}

/// A finite discrete marginal distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

/// The true sampling distribution: an explicit scenario list, or independent
/// marginals whose product forms the support.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Scenarios {
        omegas: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    Independent {
        marginals: Vec<Marginal>,
    },
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Scenarios { omegas, .. } => {
                omegas.first().map_or(0, |o| o.len())
            }
            DistributionSpec::Independent { marginals } => marginals.len(),
        }
    }

    /// Size of the support (product size for independent marginals).
    pub fn support_size(&self) -> usize {
        match self {
            DistributionSpec::Scenarios { omegas, .. } => omegas.len(),
            DistributionSpec::Independent { marginals } => {
                marginals.iter().map(|m| m.values.len()).product()
            }
        }
    }

    /// Enumerate the full support with probabilities. For independent
    /// marginals the product is expanded in odometer order (last coordinate
    /// fastest).
    pub fn enumerate(&self) -> Vec<(Observation, f64)> {
        match self {
            DistributionSpec::Scenarios { omegas, probs } => omegas
                .iter()
                .zip(probs)
                .map(|(o, &p)| (Observation::new(o.clone()), p))
                .collect(),
            DistributionSpec::Independent { marginals } => {
                let mut out = vec![(Vec::new(), 1.0)];
                for m in marginals {
                    let mut next = Vec::with_capacity(out.len() * m.values.len());
                    for (prefix, p) in &out {
                        for (v, q) in m.values.iter().zip(&m.probs) {
                            let mut w = prefix.clone();
                            w.push(*v);
                            next.push((w, p * q));
                        }
                    }
                    out = next;
                }
                out.into_iter()
                    .map(|(v, p)| (Observation::new(v), p))
                    .collect()
            }
        }
    }
}

/// Immutable two-stage problem data. Construct via [`parse_instance`] or
/// [`ProblemInstance::validated`]; both run the full validation suite, so a
/// value of this type is always internally consistent.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub senses: Vec<RowSense>,
    pub b: Vec<f64>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub g: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub r_base: Vec<f64>,
    pub t_base: Vec<Vec<f64>>,
    pub random_entries: Vec<RandomEntry>,
    pub true_distribution: DistributionSpec,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("probability-sum violation: {0}")]
    ProbabilitySum(String),
    #[error("duplicate random-entry target: {0}")]
    DuplicateTarget(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("first-stage feasible set violates the compactness assumption: {0}")]
    FirstStageSet(String),
    #[error(
        "second-stage cost g[{index}] = {value} is negative; nonnegative recourse \
         (g >= 0, so the zero dual is feasible) is required -- shift the second-stage \
         objective so that g >= 0"
    )]
    NegativeRecourseCost { index: usize, value: f64 },
}

const PROB_SUM_TOL: f64 = 1e-12;

impl ProblemInstance {
    pub fn dim_x(&self) -> usize {
        self.c.len()
    }

    pub fn dim_y(&self) -> usize {
        self.g.len()
    }

    /// Number of second-stage rows.
    pub fn m2(&self) -> usize {
        self.w.len()
    }

    pub fn dim_omega(&self) -> usize {
        self.true_distribution.dim()
    }

    /// Validate a fully populated instance, returning it on success.
    pub fn validated(self) -> Result<Self, ModelError> {
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let dx = self.dim_x();
        let dy = self.dim_y();
        let m1 = self.a.len();
        let m2 = self.m2();

        if dx == 0 {
            return Err(ModelError::Dimension("c must be non-empty".into()));
        }
        if self.senses.len() != m1 || self.b.len() != m1 {
            return Err(ModelError::Dimension(format!(
                "first stage has {} rows but {} senses and {} rhs entries",
                m1,
                self.senses.len(),
                self.b.len()
            )));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != dx {
                return Err(ModelError::Dimension(format!(
                    "first-stage row {i} has length {} (expected {dx})",
                    row.len()
                )));
            }
        }
        if self.x_lower.len() != dx || self.x_upper.len() != dx {
            return Err(ModelError::Dimension(format!(
                "bounds must have length {dx}"
            )));
        }
        if self.r_base.len() != m2 {
            return Err(ModelError::Dimension(format!(
                "r has length {} but W has {} rows",
                self.r_base.len(),
                m2
            )));
        }
        if self.t_base.len() != m2 {
            return Err(ModelError::Dimension(format!(
                "T has {} rows but W has {} rows",
                self.t_base.len(),
                m2
            )));
        }
        for (i, row) in self.w.iter().enumerate() {
            if row.len() != dy {
                return Err(ModelError::Dimension(format!(
                    "W row {i} has length {} (expected {dy})",
                    row.len()
                )));
            }
        }
        for (i, row) in self.t_base.iter().enumerate() {
            if row.len() != dx {
                return Err(ModelError::Dimension(format!(
                    "T row {i} has length {} (expected {dx})",
                    row.len()
                )));
            }
        }

        let finite = |name: &str, vs: &[f64]| -> Result<(), ModelError> {
            for &v in vs {
                if !v.is_finite() {
                    return Err(ModelError::InvalidValue(format!(
                        "{name} contains a non-finite entry"
                    )));
                }
            }
            Ok(())
        };
        finite("c", &self.c)?;
        finite("b", &self.b)?;
        finite("g", &self.g)?;
        finite("r", &self.r_base)?;
        for row in &self.a {
            finite("A", row)?;
        }
        for row in &self.w {
            finite("W", row)?;
        }
        for row in &self.t_base {
            finite("T", row)?;
        }
        for (j, &l) in self.x_lower.iter().enumerate() {
            if !l.is_finite() {
                return Err(ModelError::InvalidValue(format!(
                    "lb[{j}] must be finite (omit it for the default 0)"
                )));
            }
            if self.x_upper[j].is_nan() || self.x_upper[j] == f64::NEG_INFINITY {
                return Err(ModelError::InvalidValue(format!("ub[{j}] is invalid")));
            }
            if l > self.x_upper[j] {
                return Err(ModelError::InvalidValue(format!(
                    "lb[{j}] = {l} exceeds ub[{j}] = {}",
                    self.x_upper[j]
                )));
            }
        }

        for (j, &gj) in self.g.iter().enumerate() {
            if gj < 0.0 {
                return Err(ModelError::NegativeRecourseCost {
                    index: j,
                    value: gj,
                });
            }
        }

        self.validate_distribution()?;
        self.validate_random_entries()?;
        self.validate_first_stage_compact()?;
        Ok(())
    }

    fn validate_distribution(&self) -> Result<(), ModelError> {
        let check_probs = |what: &str, probs: &[f64]| -> Result<(), ModelError> {
            if probs.is_empty() {
                return Err(ModelError::ProbabilitySum(format!("{what} is empty")));
            }
            let mut sum = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(ModelError::ProbabilitySum(format!(
                        "{what}: probability {i} is {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(ModelError::ProbabilitySum(format!(
                    "{what}: probabilities sum to {sum}"
                )));
            }
            Ok(())
        };
        match &self.true_distribution {
            DistributionSpec::Scenarios { omegas, probs } => {
                if omegas.len() != probs.len() {
                    return Err(ModelError::Dimension(format!(
                        "{} scenarios but {} probabilities",
                        omegas.len(),
                        probs.len()
                    )));
                }
                check_probs("scenario distribution", probs)?;
                let d = self.dim_omega();
                if d == 0 {
                    return Err(ModelError::Dimension(
                        "scenario vectors must be non-empty".into(),
                    ));
                }
                for (i, o) in omegas.iter().enumerate() {
                    if o.len() != d {
                        return Err(ModelError::Dimension(format!(
                            "scenario {i} has length {} (expected {d})",
                            o.len()
                        )));
                    }
                    for &v in o {
                        if !v.is_finite() {
                            return Err(ModelError::InvalidValue(format!(
                                "scenario {i} contains a non-finite entry"
                            )));
                        }
                    }
                }
            }
            DistributionSpec::Independent { marginals } => {
                if marginals.is_empty() {
                    return Err(ModelError::Dimension(
                        "independent distribution needs at least one marginal".into(),
                    ));
                }
                for (t, m) in marginals.iter().enumerate() {
                    if m.values.len() != m.probs.len() {
                        return Err(ModelError::Dimension(format!(
                            "marginal {t}: {} values but {} probabilities",
                            m.values.len(),
                            m.probs.len()
                        )));
                    }
                    check_probs(&format!("marginal {t}"), &m.probs)?;
                    for &v in &m.values {
                        if !v.is_finite() {
                            return Err(ModelError::InvalidValue(format!(
                                "marginal {t} contains a non-finite value"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_random_entries(&self) -> Result<(), ModelError> {
        let d = self.dim_omega();
        let m2 = self.m2();
        let dx = self.dim_x();
        let mut seen = HashSet::new();
        for (i, e) in self.random_entries.iter().enumerate() {
            match e.target {
                RandomTarget::Rhs { row } => {
                    if row >= m2 {
                        return Err(ModelError::Dimension(format!(
                            "random entry {i}: rhs row {row} out of range (m = {m2})"
                        )));
                    }
                }
                RandomTarget::Tech { row, col } => {
                    if row >= m2 || col >= dx {
                        return Err(ModelError::Dimension(format!(
                            "random entry {i}: tech cell ({row}, {col}) out of range"
                        )));
                    }
                }
            }
            if e.omega_coordinate >= d {
                return Err(ModelError::Dimension(format!(
                    "random entry {i}: coordinate {} out of range (d_omega = {d})",
                    e.omega_coordinate
                )));
            }
            if !seen.insert(e.target) {
                return Err(ModelError::DuplicateTarget(format!(
                    "random entry {i} writes an already-mapped cell"
                )));
            }
        }
        Ok(())
    }

    /// Compactness of the first-stage set is load-bearing for the algorithms,
    /// so it is checked at load time by maximizing and minimizing every
    /// coordinate over X.
    fn validate_first_stage_compact(&self) -> Result<(), ModelError> {
        for j in 0..self.dim_x() {
            for dir in [-1.0, 1.0] {
                let mut p = LpProblem::new(self.dim_x());
                p.costs[j] = dir;
                p.lower = self.x_lower.clone();
                p.upper = self.x_upper.clone();
                for (i, row) in self.a.iter().enumerate() {
                    p.add_row(row.clone(), self.senses[i], self.b[i]);
                }
                let sol = solve_lp(&p);
                match sol.status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible => {
                        return Err(ModelError::FirstStageSet("X is empty".into()));
                    }
                    LpStatus::Unbounded => {
                        return Err(ModelError::FirstStageSet(format!(
                            "x[{j}] is unbounded over X; add a finite bound or constraint"
                        )));
                    }
                    LpStatus::NumericalFailure => {
                        return Err(ModelError::FirstStageSet(format!(
                            "bound check LP for x[{j}] failed numerically"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply an observation to the second-stage templates, producing the
    /// realized right-hand side and technology matrix. Inputs are not
    /// modified.
    pub fn realize(&self, omega: &Observation) -> Result<(Vec<f64>, Vec<Vec<f64>>), ModelError> {
        if omega.dim() != self.dim_omega() {
            return Err(ModelError::Dimension(format!(
                "observation has length {} (expected {})",
                omega.dim(),
                self.dim_omega()
            )));
        }
        let mut r = self.r_base.clone();
        let mut t = self.t_base.clone();
        for e in &self.random_entries {
            let v = omega.values[e.omega_coordinate];
            match e.target {
                RandomTarget::Rhs { row } => r[row] = v,
                RandomTarget::Tech { row, col } => t[row][col] = v,
            }
        }
        Ok((r, t))
    }

    /// Draw one observation by inverse-CDF over scenarios in file order (or
    /// per-marginal inverse-CDF for the product form). The same seeded
    /// generator always reproduces the same observation stream.
    pub fn sample_observation<R: Rng>(&self, rng: &mut R) -> Observation {
        match &self.true_distribution {
            DistributionSpec::Scenarios { omegas, probs } => {
                let idx = inverse_cdf(probs, rng.random::<f64>());
                Observation::new(omegas[idx].clone())
            }
            DistributionSpec::Independent { marginals } => {
                let mut v = Vec::with_capacity(marginals.len());
                for m in marginals {
                    let idx = inverse_cdf(&m.probs, rng.random::<f64>());
                    v.push(m.values[idx]);
                }
                Observation::new(v)
            }
        }
    }
}

fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

// --- JSON wire format -------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireInstance {
    name: String,
    first_stage: WireFirstStage,
    second_stage: WireSecondStage,
    #[serde(default)]
    random: Vec<WireRandom>,
    distribution: WireDistribution,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFirstStage {
    c: Vec<f64>,
    #[serde(rename = "A", default)]
    a: Vec<Vec<f64>>,
    #[serde(default)]
    senses: Vec<String>,
    #[serde(default)]
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lb: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ub: Option<Vec<Option<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSecondStage {
    g: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    r: Vec<f64>,
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRandom {
    target: String,
    row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    col: Option<usize>,
    coord: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
enum WireDistribution {
    #[serde(rename = "scenarios")]
    Scenarios {
        omegas: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    #[serde(rename = "independent")]
    Independent { marginals: Vec<WireMarginal> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMarginal {
    values: Vec<f64>,
    probs: Vec<f64>,
}

fn sense_from_str(s: &str) -> Result<RowSense, ModelError> {
    match s {
        "<=" => Ok(RowSense::Le),
        "=" => Ok(RowSense::Eq),
        ">=" => Ok(RowSense::Ge),
        other => Err(ModelError::InvalidValue(format!(
            "unknown row sense {other:?} (expected \"<=\", \"=\" or \">=\")"
        ))),
    }
}

fn sense_to_str(s: RowSense) -> &'static str {
    match s {
        RowSense::Le => "<=",
        RowSense::Eq => "=",
        RowSense::Ge => ">=",
    }
}

/// Parse and fully validate an instance file.
pub fn parse_instance(text: &str) -> Result<ProblemInstance, ModelError> {
    let wire: WireInstance =
        serde_json::from_str(text).map_err(|e| ModelError::Syntax(e.to_string()))?;

    let dx = wire.first_stage.c.len();
    let lb = match wire.first_stage.lb {
        None => vec![0.0; dx],
        Some(v) => {
            if v.len() != dx {
                return Err(ModelError::Dimension(format!("lb must have length {dx}")));
            }
            v.into_iter().map(|o| o.unwrap_or(0.0)).collect()
        }
    };
    let ub = match wire.first_stage.ub {
        None => vec![f64::INFINITY; dx],
        Some(v) => {
            if v.len() != dx {
                return Err(ModelError::Dimension(format!("ub must have length {dx}")));
            }
            v.into_iter()
                .map(|o| o.unwrap_or(f64::INFINITY))
                .collect()
        }
    };
    let senses = wire
        .first_stage
        .senses
        .iter()
        .map(|s| sense_from_str(s))
        .collect::<Result<Vec<_>, _>>()?;

    let random = wire
        .random
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let target = match r.target.as_str() {
                "rhs" => {
                    if r.col.is_some() {
                        return Err(ModelError::InvalidValue(format!(
                            "random entry {i}: \"col\" is only valid for tech targets"
                        )));
                    }
                    RandomTarget::Rhs { row: r.row }
                }
                "tech" => RandomTarget::Tech {
                    row: r.row,
                    col: r.col.ok_or_else(|| {
                        ModelError::InvalidValue(format!(
                            "random entry {i}: tech target requires \"col\""
                        ))
                    })?,
                },
                other => {
                    return Err(ModelError::InvalidValue(format!(
                        "random entry {i}: unknown target {other:?}"
                    )))
                }
            };
            Ok(RandomEntry {
                target,
                omega_coordinate: r.coord,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let distribution = match wire.distribution {
        WireDistribution::Scenarios { omegas, probs } => {
            DistributionSpec::Scenarios { omegas, probs }
        }
        WireDistribution::Independent { marginals } => DistributionSpec::Independent {
            marginals: marginals
                .into_iter()
                .map(|m| Marginal {
                    values: m.values,
                    probs: m.probs,
                })
                .collect(),
        },
    };

    ProblemInstance {
        name: wire.name,
        c: wire.first_stage.c,
        a: wire.first_stage.a,
        senses,
        b: wire.first_stage.b,
        x_lower: lb,
        x_upper: ub,
        g: wire.second_stage.g,
        w: wire.second_stage.w,
        r_base: wire.second_stage.r,
        t_base: wire.second_stage.t,
        random_entries: random,
        true_distribution: distribution,
    }
    .validated()
}

/// Serialize an instance back to its file format. `parse_instance` of the
/// result reproduces the instance field-exactly.
pub fn serialize_instance(inst: &ProblemInstance) -> String {
    let wire = WireInstance {
        name: inst.name.clone(),
        first_stage: WireFirstStage {
            c: inst.c.clone(),
            a: inst.a.clone(),
            senses: inst.senses.iter().map(|&s| sense_to_str(s).into()).collect(),
            b: inst.b.clone(),
            lb: Some(inst.x_lower.iter().map(|&v| Some(v)).collect()),
            ub: Some(
                inst.x_upper
                    .iter()
                    .map(|&v| if v.is_finite() { Some(v) } else { None })
                    .collect(),
            ),
        },
        second_stage: WireSecondStage {
            g: inst.g.clone(),
            w: inst.w.clone(),
            r: inst.r_base.clone(),
            t: inst.t_base.clone(),
        },
        random: inst
            .random_entries
            .iter()
            .map(|e| match e.target {
                RandomTarget::Rhs { row } => WireRandom {
                    target: "rhs".into(),
                    row,
                    col: None,
                    coord: e.omega_coordinate,
                },
                RandomTarget::Tech { row, col } => WireRandom {
                    target: "tech".into(),
                    row,
                    col: Some(col),
                    coord: e.omega_coordinate,
                },
            })
            .collect(),
        distribution: match &inst.true_distribution {
            DistributionSpec::Scenarios { omegas, probs } => WireDistribution::Scenarios {
                omegas: omegas.clone(),
                probs: probs.clone(),
            },
            DistributionSpec::Independent { marginals } => WireDistribution::Independent {
                marginals: marginals
                    .iter()
                    .map(|m| WireMarginal {
                        values: m.values.clone(),
                        probs: m.probs.clone(),
                    })
                    .collect(),
            },
        },
    };
    serde_json::to_string_pretty(&wire).expect("instance serialization cannot fail")
}
