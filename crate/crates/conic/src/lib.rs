//! Deterministic convex-program solver.
//!
//! Pure linear programs go through a dense two-phase simplex with Bland's
//! pivoting rule, so vertex solutions and row duals are available. Anything
//! with a quadratic, cone or log constraint goes through a primal log-barrier
//! interior-point method whose Newton systems exploit the banded-plus-low-rank
//! structure that the BCD subproblems produce.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod barrier;
mod error;
mod program;
mod simplex;
mod skyline;

pub use error::SolveError;
pub use program::{check_feasible, Affine, Constraint, ConvexProgram, Terms};

/// Relative objective tolerance used when callers have no preference.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Absolute feasibility tolerance reported by [`SolveReport::residual`].
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Worst bound or constraint violation at `x`.
    pub residual: f64,
    /// Simplex pivots or Newton steps, summed over all phases.
    pub iterations: usize,
    /// Row duals of the constraints, LPs only.
    pub duals: Option<Vec<f64>>,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Solves `program` to relative objective accuracy `tol`.
///
/// Invalid programs, unbounded LPs and unrecoverable factorization failures
/// are errors; infeasibility and iteration exhaustion come back as a report
/// status.
pub fn solve(program: &ConvexProgram, tol: f64) -> Result<SolveReport, SolveError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SolveError::InvalidTolerance(tol));
    }
    program.validate()?;
    let mut report = if program.is_lp() {
        simplex::solve_lp(program, tol)?
    } else {
        barrier::solve_barrier(program, tol)?
    };
    if report.status != Status::Infeasible {
        report.residual = check_feasible(program, &report.x, FEAS_TOL).1;
        report.objective = program.objective_value(&report.x);
        if report.status == Status::Optimal && report.residual > FEAS_TOL {
            return Err(SolveError::Numerical(format!(
                "solution violates constraints by {:.3e}",
                report.residual
            )));
        }
    }
    Ok(report)
}

/// Upper bound on the LP optimum implied by row duals `duals >= 0`.
///
/// The bound-constraint multipliers are recovered from the reduced costs, so
/// every variable whose reduced cost is nonzero needs a finite bound on the
/// matching side. Returns `None` otherwise.
pub fn lp_dual_bound(program: &ConvexProgram, duals: &[f64]) -> Option<f64> {
    let n = program.num_vars();
    let mut reduced = program.objective().to_vec();
    let mut value = 0.0;
    for (c, &y) in program.constraints().iter().zip(duals) {
        let Constraint::Linear { terms, rhs } = c else {
            return None;
        };
        if y < 0.0 {
            return None;
        }
        value += y * rhs;
        for &(j, a) in terms {
            reduced[j] -= y * a;
        }
    }
    for j in 0..n {
        let r = reduced[j];
        if r > 0.0 {
            let u = program.upper()[j];
            if !u.is_finite() {
                return None;
            }
            value += r * u;
        } else if r < 0.0 {
            let l = program.lower()[j];
            if !l.is_finite() {
                return None;
            }
            value += r * l;
        }
    }
    Some(value)
}
