//! Constrained solver for the in-processing problems.
//!
//! An augmented-Lagrangian outer loop handles the `±c` fairness
//! inequalities; each subproblem is minimized with L-BFGS. Hinge and
//! `min(0, ·)` terms are replaced by softplus approximations whose sharpness
//! is annealed across outer iterations, and the smoothed constraints are
//! tightened by the worst-case smoothing gap so that feasibility carries over
//! to the exact forms. The final point is always re-checked exactly.

mod gradient;
mod lbfgs;

pub use gradient::numeric_gradient;

use std::time::{Duration, Instant};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{FairError, Result};
use crate::optim::{Coefficients, ConstraintSet, Direction, Problem, Smoothing};
use crate::scalar::Scalar;
use lbfgs::{minimize, InnerOptions, InnerStop};

/// Starting point of a solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init<T> {
    #[default]
    Zeros,
    Warm(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    /// Relative stationarity tolerance of the smoothed problem.
    pub kkt_tol: T,
    /// Allowed violation of the exact constraints.
    pub feas_tol: T,
    pub max_seconds: f64,
    /// Iteration cap of each L-BFGS subproblem.
    pub max_iters: usize,
    pub max_outer: usize,
    pub tau_start: T,
    pub tau_end: T,
    pub memory: usize,
    pub init: Init<T>,
    /// Record one [`TraceRow`] per outer iteration.
    pub trace: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            kkt_tol: T::lit(1e-6),
            feas_tol: T::lit(1e-6),
            max_seconds: 60.0,
            max_iters: 1000,
            max_outer: 60,
            tau_start: T::lit(1e-2),
            tau_end: T::lit(1e-4),
            memory: 10,
            init: Init::Zeros,
            trace: false,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.max_seconds = seconds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.kkt_tol > T::zero()
            && self.feas_tol > T::zero()
            && self.tau_start > T::zero()
            && self.tau_end > T::zero()
            && self.max_seconds > 0.0;
        if !positive || self.tau_end > self.tau_start || self.memory == 0 {
            return Err(FairError::InvalidParameter("solver tolerances and limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Stationary and every exact constraint within `feas_tol`.
    Optimal,
    TimeLimit,
    IterLimit,
    /// Stationary for the smoothed problem but an exact constraint is off by more than `feas_tol`.
    InfeasibleTolerance,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::IterLimit => "iter_limit",
            SolveStatus::InfeasibleTolerance => "infeasible_tolerance",
        }
    }
}

/// Exact evaluation of one constraint at a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityEntry<T> {
    pub sf: String,
    pub kind: crate::optim::ConstraintKind,
    pub direction: Direction,
    pub value: T,
    pub bound: T,
    /// Amount by which the bound is exceeded; ≤ 0 when satisfied.
    pub residual: T,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow<T> {
    pub iter: usize,
    pub objective: T,
    pub max_residual: T,
    pub tau: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    pub coeffs: Coefficients<T>,
    pub status: SolveStatus,
    /// Exact (unsmoothed) objective at the returned point.
    pub objective: T,
    /// Total L-BFGS iterations.
    pub iterations: usize,
    pub wall_seconds: f64,
    pub feasibility: Vec<FeasibilityEntry<T>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Scalar> Solution<T> {
    /// Largest exact residual, or −∞ with no constraints.
    pub fn max_residual(&self) -> T {
        self.feasibility.iter().fold(T::neg_infinity(), |m, e| m.max(e.residual))
    }
}

/// Exact constraint values at `coeffs`; `satisfied` iff `value ∈ [−c − tol, c + tol]`.
pub fn feasibility_report<T: Scalar>(
    coeffs: &Coefficients<T>,
    problem: &Problem<'_, T>,
    tol: T,
) -> Result<Vec<FeasibilityEntry<T>>> {
    let mut theta: Vec<T> = coeffs.beta.clone();
    if problem.spec().family.is_mixed() {
        theta.extend(coeffs.g.as_ref().ok_or(FairError::MissingGroups)?);
    }
    let theta = Array1::from(theta);
    problem.check_theta(&theta)?;
    Ok(report(problem, &theta, tol))
}

fn report<T: Scalar>(problem: &Problem<'_, T>, theta: &Array1<T>, tol: T) -> Vec<FeasibilityEntry<T>> {
    let values = problem.constraint_values(theta);
    problem
        .constraints()
        .iter()
        .zip(values)
        .map(|(c, value)| {
            let residual = c.residual(value);
            FeasibilityEntry {
                sf: c.sf.clone(),
                kind: c.kind,
                direction: c.direction,
                value,
                bound: c.bound,
                residual,
                satisfied: residual <= tol,
            }
        })
        .collect()
}

fn needs_smoothing<T: Scalar>(problem: &Problem<'_, T>) -> bool {
    let spec = problem.spec();
    !spec.family.is_logistic() || matches!(spec.constraint, ConstraintSet::Fnr | ConstraintSet::Fpr | ConstraintSet::Dm)
}

/// Augmented-Lagrangian term `(max(0, m + ρ r)² − m²) / 2ρ` and its derivative in `r`.
fn al_penalty<T: Scalar>(residual: T, multiplier: T, rho: T) -> (T, T) {
    let shifted = (multiplier + rho * residual).max(T::zero());
    ((shifted * shifted - multiplier * multiplier) / (T::lit(2.0) * rho), shifted)
}

/// Solves `problem`. Deterministic for fixed inputs; on a time or iteration
/// limit the best iterate found is returned with the matching status.
pub fn solve<T: Scalar>(problem: &Problem<'_, T>, opts: &SolverOptions<T>) -> Result<Solution<T>> {
    opts.validate()?;
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(opts.max_seconds);
    let n = problem.n_params();
    let mut theta = match &opts.init {
        Init::Zeros => Array1::zeros(n),
        Init::Warm(v) => Array1::from(v.clone()),
    };
    problem.check_theta(&theta)?;

    let smooth = needs_smoothing(problem);
    let mut tau = if smooth { opts.tau_start } else { opts.tau_end };
    let smoothing_at = |tau: T| if smooth { Smoothing::Softplus(tau) } else { Smoothing::Exact };
    if !problem.objective(&theta, smoothing_at(tau)).0.is_finite() {
        return Err(FairError::NonFiniteStart);
    }

    let constraints = problem.constraints();
    let m = constraints.len();
    let mut multipliers = vec![T::zero(); m];
    let mut rho = T::lit(10.0);
    let rho_max = T::lit(1e10);
    let mut prev_violation = T::infinity();
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut timed_out = false;
    let mut best: Option<(T, T, Array1<T>)> = None;
    let inner_tol = opts.kkt_tol;
    let feas_target = opts.feas_tol * T::lit(0.1);

    for _outer in 0..opts.max_outer {
        let sm = smoothing_at(tau);
        // Tighten each smoothed bound by the smoothing gap, never by more than half of c.
        let tighten: Vec<T> = problem
            .smoothing_slack(sm)
            .into_iter()
            .zip(constraints)
            .map(|(s, c)| s.min(c.bound.abs() / T::lit(2.0)))
            .collect();
        let residuals_at = |theta: &Array1<T>| -> Vec<(T, Array1<T>)> {
            let terms = problem.term_values(theta, sm);
            constraints
                .iter()
                .zip(&tighten)
                .map(|(c, &t)| {
                    let (v, g) = &terms[c.term];
                    match c.direction {
                        Direction::AtMost => (*v - c.bound + t, g.clone()),
                        Direction::AtLeast => (c.bound - *v + t, g.mapv(|x| -x)),
                    }
                })
                .collect()
        };
        let merit = |theta: &Array1<T>| -> (T, Array1<T>) {
            let (mut f, mut g) = problem.objective(theta, sm);
            for ((r, dr), &mult) in residuals_at(theta).iter().zip(&multipliers) {
                let (p, dp) = al_penalty(*r, mult, rho);
                f += p;
                if dp != T::zero() {
                    g.scaled_add(dp, dr);
                }
            }
            (f, g)
        };
        let inner_opts = InnerOptions {
            grad_tol: inner_tol,
            max_iters: opts.max_iters,
            memory: opts.memory,
            deadline: Some(deadline),
        };
        let result = minimize(merit, theta.clone(), &inner_opts, |_, _| {});
        iterations += result.iters;
        theta = result.x;

        let residuals: Vec<T> = residuals_at(&theta).into_iter().map(|(r, _)| r).collect();
        let violation = residuals.iter().fold(T::zero(), |v, &r| v.max(r));
        let mut complementarity = T::zero();
        for (mult, &r) in multipliers.iter_mut().zip(&residuals) {
            *mult = (*mult + rho * r).max(T::zero());
            complementarity = complementarity.max((*mult * r).abs());
        }

        let objective = problem.objective(&theta, Smoothing::Exact).0;
        let exact_violation = report(problem, &theta, opts.feas_tol).iter().fold(T::zero(), |v, e| v.max(e.residual));
        if opts.trace {
            trace.push(TraceRow { iter: iterations, objective, max_residual: exact_violation, tau });
        }
        let better = match &best {
            None => true,
            Some((bv, bo, _)) => {
                let (cv, bv) = (exact_violation.max(opts.feas_tol), bv.max(opts.feas_tol));
                cv < bv || (cv == bv && objective < *bo)
            }
        };
        if better {
            best = Some((exact_violation, objective, theta.clone()));
        }

        if result.stop == InnerStop::TimeLimit || Instant::now() >= deadline {
            timed_out = true;
            break;
        }
        // A failed line search from steepest descent means no representable decrease remains.
        let inner_done = matches!(result.stop, InnerStop::Converged | InnerStop::LineSearchFailed);
        let final_tau = !smooth || tau <= opts.tau_end;
        let scale = T::one().max(objective.abs());
        if final_tau && inner_done && violation <= feas_target && complementarity <= opts.kkt_tol * scale {
            converged = true;
            break;
        }
        if violation > T::lit(0.25) * prev_violation {
            rho = (rho * T::lit(10.0)).min(rho_max);
        }
        prev_violation = violation;
        if smooth {
            tau = (tau * T::lit(0.1)).max(opts.tau_end);
        }
    }

    let theta = if converged { theta } else { best.map(|(_, _, t)| t).unwrap_or(theta) };
    let feasibility = report(problem, &theta, opts.feas_tol);
    let status = if converged {
        if feasibility.iter().all(|e| e.satisfied) {
            SolveStatus::Optimal
        } else {
            SolveStatus::InfeasibleTolerance
        }
    } else if timed_out {
        SolveStatus::TimeLimit
    } else {
        SolveStatus::IterLimit
    };
    Ok(Solution {
        coeffs: problem.coefficients(&theta),
        status,
        objective: problem.objective(&theta, Smoothing::Exact).0,
        iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
        feasibility,
        trace,
    })
}

/// Writes a solver trace as CSV: `iter,objective,max_residual,tau`.
pub fn write_trace_csv<T: Scalar, W: std::io::Write>(trace: &[TraceRow<T>], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["iter", "objective", "max_residual", "tau"])?;
    for row in trace {
        wtr.write_record([
            row.iter.to_string(),
            row.objective.to_string(),
            row.max_residual.to_string(),
            row.tau.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::data::{ingest_dataset, Column, IngestOptions, Table};
    use crate::optim::{assemble_problem, di_constraint_value, Family, ModelSpec};
    use ndarray::ArrayView1;

    fn intercept_only() -> Dataset<f64> {
        let t = Table::new().with("y", Column::Numeric(vec![1.0, 1.0, 1.0, -1.0])).unwrap();
        ingest_dataset(&t, &IngestOptions { label_col: Some("y"), ..Default::default() }).unwrap()
    }

    fn biased(n: usize) -> Dataset<f64> {
        // Deterministic data whose label depends strongly on s.
        let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let s: Vec<f64> = (0..n).map(|i| f64::from(i % 3 == 0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| if x[i] + 1.5 * s[i] - 0.6 + 0.4 * ((i * 13 % 7) as f64 - 3.0) / 3.0 > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let t = Table::new()
            .with("x", Column::Numeric(x))
            .unwrap()
            .with("s", Column::Numeric(s))
            .unwrap()
            .with("y", Column::Numeric(y))
            .unwrap();
        ingest_dataset(&t, &IngestOptions { label_col: Some("y"), sensitive: &["s"], ..Default::default() }).unwrap()
    }

    #[test]
    fn intercept_only_recovers_log_odds() {
        let d = intercept_only();
        let p = assemble_problem(&ModelSpec::new(Family::Lr, ConstraintSet::None, &[]), &d).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.coeffs.beta[0] - 3f64.ln()).abs() < 1e-4, "{:?}", sol.coeffs.beta);
        assert!(sol.feasibility.is_empty());
    }

    #[test]
    fn slack_constraints_match_unconstrained() {
        let d = biased(120);
        let free = solve(
            &assemble_problem(&ModelSpec::new(Family::Lr, ConstraintSet::None, &["s"]), &d).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let spec = ModelSpec::new(Family::Lr, ConstraintSet::Di, &["s"]).with_c(1e6);
        let loose = solve(&assemble_problem(&spec, &d).unwrap(), &SolverOptions::default()).unwrap();
        assert_eq!(loose.status, SolveStatus::Optimal);
        for (a, b) in free.coeffs.beta.iter().zip(&loose.coeffs.beta) {
            assert!((a - b).abs() < 1e-4, "{:?} vs {:?}", free.coeffs.beta, loose.coeffs.beta);
        }
    }

    #[test]
    fn zero_threshold_forces_zero_di_value() {
        let d = biased(120);
        let free = solve(
            &assemble_problem(&ModelSpec::new(Family::Lr, ConstraintSet::None, &["s"]), &d).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let v0 = di_constraint_value(ArrayView1::from(&free.coeffs.beta), None, &d, "s").unwrap();
        assert!(v0.abs() > 1e-3);
        let spec = ModelSpec::new(Family::Lr, ConstraintSet::Di, &["s"]).with_c(0.0);
        let p = assemble_problem(&spec, &d).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        let v = di_constraint_value(ArrayView1::from(&sol.coeffs.beta), None, &d, "s").unwrap();
        assert!(v.abs() <= 1e-6, "{v} {:?}", sol.status);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(feasibility_report(&sol.coeffs, &p, 1e-6).unwrap().iter().all(|e| e.satisfied));
    }

    #[test]
    fn smoothed_constraints_hold_exactly() {
        let d = biased(150);
        for family in [Family::Lr, Family::Svm] {
            for set in [ConstraintSet::Di, ConstraintSet::Fnr, ConstraintSet::Fpr, ConstraintSet::Dm] {
                let spec = ModelSpec::new(family, set, &["s"]).with_c(0.05);
                let p = assemble_problem(&spec, &d).unwrap();
                let sol = solve(&p, &SolverOptions::default()).unwrap();
                assert!(sol.max_residual() <= 1e-6, "{family:?} {set:?} {:?} {}", sol.status, sol.max_residual());
            }
        }
    }

    #[test]
    fn infeasible_point_is_flagged() {
        let d = biased(60);
        let p = assemble_problem(&ModelSpec::new(Family::Lr, ConstraintSet::Di, &["s"]).with_c(0.0), &d).unwrap();
        let coeffs = crate::optim::Coefficients::fixed(vec![0.0, 0.0, 50.0]);
        let rep = feasibility_report(&coeffs, &p, 1e-6).unwrap();
        assert!(rep.iter().any(|e| !e.satisfied && e.residual > 1.0));
    }

    #[test]
    fn solves_are_deterministic() {
        let d = biased(90);
        let p = assemble_problem(&ModelSpec::new(Family::Svm, ConstraintSet::Dm, &["s"]), &d).unwrap();
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let d = intercept_only();
        let p = assemble_problem(&ModelSpec::new(Family::Lr, ConstraintSet::None, &[]), &d).unwrap();
        let opts = SolverOptions { init: Init::Warm(vec![f64::NAN]), ..Default::default() };
        assert!(matches!(solve(&p, &opts), Err(FairError::NonFiniteStart)));
    }

    #[test]
    fn trace_rows_are_recorded() {
        let d = biased(60);
        let p = assemble_problem(&ModelSpec::new(Family::Lr, ConstraintSet::Di, &["s"]), &d).unwrap();
        let sol = solve(&p, &SolverOptions { trace: true, ..Default::default() }).unwrap();
        assert!(!sol.trace.is_empty());
        let mut buf = Vec::new();
        write_trace_csv(&sol.trace, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("iter,objective,max_residual,tau\n"));
    }
}
