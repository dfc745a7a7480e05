//! Cut pool and master problem.
//!
//! The master minimizes `c'x + eta` over the first-stage set with `eta`
//! lower-bounded by every minorant in the pool. It is solved through its LP
//! dual, which has only `d_x + 1` rows however large the pool grows; the
//! primal point is recovered from the equality-row duals. The pool always
//! contains the seed minorant `eta >= 0`, valid because instances are
//! normalized to nonnegative recourse.

use crate::ambiguity::ExtremalDistribution;
use crate::linalg;
use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense};
use crate::model::{Observation, ProblemInstance};

use super::SolveError;

/// Where a minorant came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutOrigin {
    /// The initialization cut `eta >= 0`.
    Seed,
    Candidate,
    Incumbent,
}

/// One affine minorant `alpha + beta' x` of the worst-case recourse
/// approximation, with its rescale history.
#[derive(Clone, Debug)]
pub struct Minorant {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub origin: CutOrigin,
    pub birth_iteration: usize,
    pub rescale_count: u32,
    /// Cumulative product of the rescale factors applied since birth; alpha
    /// and beta always share every factor.
    pub scale: f64,
}

impl Minorant {
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.alpha + linalg::dot(&self.beta, x)
    }
}

/// The collection of minorants backing the master problem.
#[derive(Clone, Debug)]
pub struct CutPool {
    cuts: Vec<Minorant>,
    drop_tol: f64,
}

impl CutPool {
    /// A pool holding only the seed cut `eta >= 0`.
    pub fn seeded(dim_x: usize) -> Self {
        CutPool {
            cuts: vec![Minorant {
                alpha: 0.0,
                beta: vec![0.0; dim_x],
                origin: CutOrigin::Seed,
                birth_iteration: 0,
                rescale_count: 0,
                scale: 1.0,
            }],
            drop_tol: 1e-6,
        }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[Minorant] {
        &self.cuts
    }

    pub fn push(&mut self, cut: Minorant) {
        self.cuts.push(cut);
    }

    /// Multiply every cut currently in the pool by `theta`. Callers add the
    /// iteration's fresh candidate and incumbent cuts afterwards, so those
    /// two are never rescaled in the iteration that created them.
    pub fn rescale(&mut self, theta: f64) {
        for cut in &mut self.cuts {
            if cut.origin == CutOrigin::Seed {
                continue; // identically zero, rescaling is a no-op
            }
            cut.alpha *= theta;
            for b in &mut cut.beta {
                *b *= theta;
            }
            cut.scale *= theta;
            cut.rescale_count += 1;
        }
    }

    /// Drop cuts whose cumulative scale fell below the threshold; they are
    /// dominated by the seed cut since the recourse approximation is
    /// nonnegative. The seed itself is never dropped.
    pub fn compact(&mut self) {
        let tol = self.drop_tol;
        self.cuts
            .retain(|c| c.origin == CutOrigin::Seed || c.scale >= tol);
    }

    /// `max_j alpha_j + beta_j' x` over the pool.
    pub fn best_value_at(&self, x: &[f64]) -> f64 {
        self.cuts
            .iter()
            .map(|c| c.value_at(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The piecewise-linear objective approximation `c'x + max_j cut_j(x)`.
    pub fn evaluate_objective(&self, c: &[f64], x: &[f64]) -> f64 {
        linalg::dot(c, x) + self.best_value_at(x)
    }
}

/// Optimizer of the current master problem.
#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub x: Vec<f64>,
    /// Optimal value `c'x + eta`, i.e. the current approximation evaluated
    /// at its own minimizer.
    pub objective: f64,
}

/// Solve `min c'x + eta  s.t.  eta >= cut_j(x) for all j, x in X`.
///
/// Internally the LP dual is solved: one nonnegative multiplier per cut, one
/// sign-constrained multiplier per first-stage row and bound multipliers,
/// subject to `d_x + 1` equality rows. The primal master optimizer is the
/// negated vector of equality-row duals.
pub fn solve_master(pool: &CutPool, instance: &ProblemInstance) -> Result<MasterSolution, SolveError> {
    assert!(!pool.is_empty(), "cut pool must contain the seed cut");
    let dx = instance.dim_x();
    let m1 = instance.a.len();
    let n_cuts = pool.len();

    // variable layout: y (first-stage rows) | lambda (cuts) | z_lb | z_ub
    let ub_cols: Vec<usize> = (0..dx)
        .filter(|&t| instance.x_upper[t].is_finite())
        .collect();
    let n = m1 + n_cuts + dx + ub_cols.len();
    let mut p = LpProblem::new(n);

    for i in 0..m1 {
        p.costs[i] = -instance.b[i];
        match instance.senses[i] {
            RowSense::Ge => {} // y_i >= 0
            RowSense::Le => {
                p.lower[i] = f64::NEG_INFINITY;
                p.upper[i] = 0.0;
            }
            RowSense::Eq => {
                p.lower[i] = f64::NEG_INFINITY;
            }
        }
    }
    for (j, cut) in pool.cuts().iter().enumerate() {
        p.costs[m1 + j] = -cut.alpha;
    }
    for t in 0..dx {
        p.costs[m1 + n_cuts + t] = -instance.x_lower[t];
    }
    for (idx, &t) in ub_cols.iter().enumerate() {
        p.costs[m1 + n_cuts + dx + idx] = instance.x_upper[t];
    }

    // stationarity row per x coordinate
    for t in 0..dx {
        let mut row = vec![0.0; n];
        for i in 0..m1 {
            row[i] = instance.a[i][t];
        }
        for (j, cut) in pool.cuts().iter().enumerate() {
            row[m1 + j] = -cut.beta[t];
        }
        row[m1 + n_cuts + t] = 1.0;
        p.add_row(row, RowSense::Eq, instance.c[t]);
    }
    for (idx, &t) in ub_cols.iter().enumerate() {
        p.rows[t][m1 + n_cuts + dx + idx] = -1.0;
    }
    // eta stationarity: cut multipliers form a convex combination
    let mut eta_row = vec![0.0; n];
    eta_row[m1..m1 + n_cuts].fill(1.0);
    p.add_row(eta_row, RowSense::Eq, 1.0);

    let sol = solve_lp(&p);
    match sol.status {
        LpStatus::Optimal => {
            // negate the equality-row duals; `+ 0.0` clears negative zeros
            let x: Vec<f64> = (0..dx).map(|t| -sol.dual[t] + 0.0).collect();
            Ok(MasterSolution {
                x,
                objective: -sol.objective,
            })
        }
        // dual unbounded <=> primal master infeasible <=> X empty, which
        // instance validation rules out
        LpStatus::Unbounded => Err(SolveError::Master {
            detail: "master problem infeasible (first-stage set is empty)".into(),
        }),
        LpStatus::Infeasible => Err(SolveError::Master {
            detail: "master problem unbounded; first-stage compactness violated".into(),
        }),
        LpStatus::NumericalFailure => Err(SolveError::Master {
            detail: "master LP failed numerically".into(),
        }),
    }
}

/// Build the optimality cut of Eq-style aggregation: weight the selected
/// dual vertices by the extremal distribution,
/// `alpha = sum_u p_u pi_u' r(w_u)` and `beta = -sum_u p_u T(w_u)' pi_u`.
pub fn build_cut(
    extremal: &ExtremalDistribution,
    duals: &[Vec<f64>],
    support: &[Observation],
    instance: &ProblemInstance,
    birth_iteration: usize,
    origin: CutOrigin,
) -> Result<Minorant, SolveError> {
    assert_eq!(duals.len(), support.len(), "duals must cover the support");
    assert_eq!(extremal.weights.len(), support.len());
    let dx = instance.dim_x();
    let mut alpha = 0.0;
    let mut beta = vec![0.0; dx];
    for ((omega, pi), &w) in support.iter().zip(duals).zip(&extremal.weights) {
        if w == 0.0 {
            continue;
        }
        let (r, t) = instance
            .realize(omega)
            .map_err(|e| SolveError::Master {
                detail: format!("cut realization failed: {e}"),
            })?;
        alpha += w * linalg::dot(pi, &r);
        for (row, &pi_i) in t.iter().zip(pi.iter()) {
            for (bt, &t_tj) in beta.iter_mut().zip(row.iter()) {
                *bt -= w * pi_i * t_tj;
            }
        }
    }
    Ok(Minorant {
        alpha,
        beta,
        origin,
        birth_iteration,
        rescale_count: 0,
        scale: 1.0,
    })
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

    /// Direct primal formulation of the same master, for cross-checking.
    fn solve_master_primal(pool: &CutPool, inst: &ProblemInstance) -> (Vec<f64>, f64) {
        let dx = inst.dim_x();
        let mut p = LpProblem::new(dx + 1);
        p.costs[..dx].copy_from_slice(&inst.c);
        p.costs[dx] = 1.0;
        for t in 0..dx {
            p.lower[t] = inst.x_lower[t];
            p.upper[t] = inst.x_upper[t];
        }
        p.lower[dx] = f64::NEG_INFINITY;
        for (i, row) in inst.a.iter().enumerate() {
            let mut r = row.clone();
            r.push(0.0);
            p.add_row(r, inst.senses[i], inst.b[i]);
        }
        for cut in pool.cuts() {
            let mut r: Vec<f64> = cut.beta.iter().map(|b| -b).collect();
            r.push(1.0);
            p.add_row(r, RowSense::Ge, cut.alpha);
        }
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        (s.primal[..dx].to_vec(), s.objective)
    }

    #[test]
    fn seed_pool_minimizes_first_stage_cost() {
        let inst = t1();
        let pool = CutPool::seeded(1);
        let ms = solve_master(&pool, &inst).unwrap();
        assert!((ms.x[0] - 0.0).abs() < 1e-9);
        assert!(ms.objective.abs() < 1e-9);
    }

    #[test]
    fn single_cut_piecewise_minimum() {
        // min x + max(0, 2 - x) on [0, 10]: value 2 anywhere on [0, 2]
        let inst = t1();
        let mut pool = CutPool::seeded(1);
        pool.push(Minorant {
            alpha: 2.0,
            beta: vec![-1.0],
            origin: CutOrigin::Candidate,
            birth_iteration: 1,
            rescale_count: 0,
            scale: 1.0,
        });
        let ms = solve_master(&pool, &inst).unwrap();
        assert!((ms.objective - 2.0).abs() < 1e-8);
        assert!((-1e-9..=2.0 + 1e-9).contains(&ms.x[0]));
        // the reported objective is the approximation at the minimizer
        assert!((pool.evaluate_objective(&inst.c, &ms.x) - ms.objective).abs() < 1e-8);
    }

    #[test]
    fn constant_cut_shifts_value() {
        let inst = t1();
        let mut pool = CutPool::seeded(1);
        pool.push(Minorant {
            alpha: 3.0,
            beta: vec![0.0],
            origin: CutOrigin::Candidate,
            birth_iteration: 1,
            rescale_count: 0,
            scale: 1.0,
        });
        let ms = solve_master(&pool, &inst).unwrap();
        // argmin c'x is x = 0, plus the constant cut
        assert!((ms.objective - 3.0).abs() < 1e-8);
        assert!(ms.x[0].abs() < 1e-8);
    }

    #[test]
    fn dual_form_matches_direct_primal() {
        let inst = parse_instance(
            r#"{
            "name": "twovar",
            "first_stage": {"c": [1.0, 1.5], "A": [[1.0, 1.0]], "senses": ["<="], "b": [4.0],
                            "lb": [0.0, 0.0], "ub": [3.0, 3.0]},
            "second_stage": {"g": [1.0, 0.0], "W": [[1.0, -1.0]], "r": [1.0], "T": [[1.0, 0.5]]},
            "random": [{"target": "rhs", "row": 0, "coord": 0}],
            "distribution": {"type": "scenarios", "omegas": [[1.0], [2.0]], "probs": [0.5, 0.5]}
        }"#,
        )
        .unwrap();
        let mut pool = CutPool::seeded(2);
        for (a, b) in [(2.0, [-1.0, -0.5]), (1.2, [-0.3, -1.0]), (0.4, [0.1, -0.2])] {
            pool.push(Minorant {
                alpha: a,
                beta: b.to_vec(),
                origin: CutOrigin::Candidate,
                birth_iteration: 1,
                rescale_count: 0,
                scale: 1.0,
            });
        }
        let ms = solve_master(&pool, &inst).unwrap();
        let (_, primal_obj) = solve_master_primal(&pool, &inst);
        assert!(
            (ms.objective - primal_obj).abs() <= 1e-7 * primal_obj.abs().max(1.0),
            "dual-form {} vs primal-form {}",
            ms.objective,
            primal_obj
        );
        // recovered point is feasible and attains the same approximation value
        for (t, &x) in ms.x.iter().enumerate() {
            assert!(x >= inst.x_lower[t] - 1e-8 && x <= inst.x_upper[t] + 1e-8);
        }
        assert!(ms.x[0] + ms.x[1] <= 4.0 + 1e-8);
        let attained = pool.evaluate_objective(&inst.c, &ms.x);
        assert!((attained - ms.objective).abs() <= 1e-7 * primal_obj.abs().max(1.0));
    }

    #[test]
    fn dual_form_handles_all_row_senses() {
        // includes >= and = first-stage rows plus an unbounded-above
        // coordinate whose bound comes from the equality row
        let inst = parse_instance(
            r#"{
            "name": "senses",
            "first_stage": {"c": [0.5, 1.0], "A": [[1.0, 0.5], [1.0, -1.0]],
                            "senses": [">=", "="], "b": [1.0, 0.5],
                            "lb": [0.0, 0.0], "ub": [4.0, null]},
            "second_stage": {"g": [1.0, 0.0], "W": [[1.0, -1.0]], "r": [1.0], "T": [[1.0, 0.0]]},
            "random": [{"target": "rhs", "row": 0, "coord": 0}],
            "distribution": {"type": "scenarios", "omegas": [[1.0], [2.0]], "probs": [0.5, 0.5]}
        }"#,
        )
        .unwrap();
        let mut pool = CutPool::seeded(2);
        for (a, b) in [(1.5, [-0.8, -0.1]), (0.9, [0.2, -0.6])] {
            pool.push(Minorant {
                alpha: a,
                beta: b.to_vec(),
                origin: CutOrigin::Candidate,
                birth_iteration: 1,
                rescale_count: 0,
                scale: 1.0,
            });
        }
        let ms = solve_master(&pool, &inst).unwrap();
        let (_, primal_obj) = solve_master_primal(&pool, &inst);
        assert!(
            (ms.objective - primal_obj).abs() <= 1e-7 * primal_obj.abs().max(1.0),
            "dual-form {} vs primal-form {}",
            ms.objective,
            primal_obj
        );
        // the recovered point satisfies both rows and attains the value
        assert!(ms.x[0] + 0.5 * ms.x[1] >= 1.0 - 1e-8);
        assert!((ms.x[0] - ms.x[1] - 0.5).abs() <= 1e-8);
        let attained = pool.evaluate_objective(&inst.c, &ms.x);
        assert!((attained - ms.objective).abs() <= 1e-7 * primal_obj.abs().max(1.0));
    }

    #[test]
    fn rescale_arithmetic() {
        let mut pool = CutPool::seeded(1);
        pool.push(Minorant {
            alpha: 2.0,
            beta: vec![-1.0],
            origin: CutOrigin::Candidate,
            birth_iteration: 1,
            rescale_count: 0,
            scale: 1.0,
        });
        pool.rescale(0.5);
        let cut = &pool.cuts()[1];
        assert_eq!(cut.alpha, 1.0);
        assert_eq!(cut.beta, vec![-0.5]);
        assert_eq!(cut.rescale_count, 1);

        // theta = 1 leaves coefficients unchanged
        pool.rescale(1.0);
        let cut = &pool.cuts()[1];
        assert_eq!(cut.alpha, 1.0);
        assert_eq!(cut.beta, vec![-0.5]);

        // composition: 1/2 then 2/3 gives net 1/3
        let mut pool2 = CutPool::seeded(1);
        pool2.push(Minorant {
            alpha: 3.0,
            beta: vec![-3.0],
            origin: CutOrigin::Candidate,
            birth_iteration: 1,
            rescale_count: 0,
            scale: 1.0,
        });
        pool2.rescale(0.5);
        pool2.rescale(2.0 / 3.0);
        let cut = &pool2.cuts()[1];
        assert!((cut.alpha - 1.0).abs() < 1e-12);
        assert!((cut.beta[0] + 1.0).abs() < 1e-12);
        assert!((cut.scale - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn compact_drops_washed_out_cuts_but_not_seed() {
        let mut pool = CutPool::seeded(1);
        pool.push(Minorant {
            alpha: 1.0,
            beta: vec![-1.0],
            origin: CutOrigin::Candidate,
            birth_iteration: 1,
            rescale_count: 0,
            scale: 1.0,
        });
        for _ in 0..25 {
            pool.rescale(0.5);
        }
        pool.compact();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.cuts()[0].origin, CutOrigin::Seed);
    }

    #[test]
    fn build_cut_weighted_aggregation() {
        let inst = t1();
        let support = [Observation::new(vec![1.0]), Observation::new(vec![3.0])];

        // degenerate distribution with the zero vertex gives the zero cut
        let zero = build_cut(
            &ExtremalDistribution {
                weights: vec![1.0, 0.0],
                value: 0.0,
            },
            &[vec![0.0], vec![0.0]],
            &support,
            &inst,
            1,
            CutOrigin::Candidate,
        )
        .unwrap();
        assert_eq!(zero.alpha, 0.0);
        assert_eq!(zero.beta, vec![0.0]);

        // both duals at 1 with equal weights: alpha = mean omega, beta = -1
        let cut = build_cut(
            &ExtremalDistribution {
                weights: vec![0.5, 0.5],
                value: 1.0,
            },
            &[vec![1.0], vec![1.0]],
            &support,
            &inst,
            1,
            CutOrigin::Candidate,
        )
        .unwrap();
        assert!((cut.alpha - 2.0).abs() < 1e-12);
        assert!((cut.beta[0] + 1.0).abs() < 1e-12);
        for x in [0.0, 1.0, 2.0] {
            assert!((cut.value_at(&[x]) - (2.0 - x)).abs() < 1e-12);
        }

        // reordering the support leaves the coefficients unchanged
        let support_rev = [support[1].clone(), support[0].clone()];
        let cut_rev = build_cut(
            &ExtremalDistribution {
                weights: vec![0.5, 0.5],
                value: 1.0,
            },
            &[vec![1.0], vec![1.0]],
            &support_rev,
            &inst,
            1,
            CutOrigin::Candidate,
        )
        .unwrap();
        assert!((cut.alpha - cut_rev.alpha).abs() < 1e-12);
        assert!((cut.beta[0] - cut_rev.beta[0]).abs() < 1e-12);
    }

    #[test]
    fn incumbent_rule_examples() {
        use super::super::incumbent_test;
        // lhs = -1, gamma = 0.2, bracket = -2: -1 < -0.4 so replace
        assert!(incumbent_test(-1.0, 0.2, -2.0));
        // boundary: 0 < 0 is false, keep
        assert!(!incumbent_test(0.0, 0.2, 0.0));
        // gamma = 1 with lhs == bracket: strict inequality fails, keep
        assert!(!incumbent_test(-3.0, 1.0, -3.0));
    }
}
