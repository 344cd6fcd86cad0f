//! Dense two-phase simplex for programs whose constraints are all linear.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! basic variable on ratio ties), so results are deterministic and cycling
//! cannot occur.

use crate::error::SolveError;
use crate::program::{Constraint, ConvexProgram};
use crate::{SolveReport, Status};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// x = lower + y
    Shift { col: usize, lower: f64 },
    /// x = upper - y
    Mirror { col: usize, upper: f64 },
    /// x = y⁺ - y⁻
    Split { col: usize },
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `d_j = c_Bᵀ B⁻¹ A_j - c_j` and the objective value.
    fn reduced_costs(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let mut d: Vec<f64> = cost.iter().map(|c| -c).collect();
        let mut z = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.ncols {
                    d[j] += cb * row[j];
                }
                z += cb * row[self.ncols];
            }
        }
        (d, z)
    }

    /// Runs Bland pivots maximizing `cost`, never entering columns in `blocked`.
    fn optimize(
        &mut self,
        cost: &[f64],
        blocked: &[bool],
        pivots: &mut usize,
    ) -> Result<bool, SolveError> {
        loop {
            let (d, z) = self.reduced_costs(cost);
            let scale = 1.0 + z.abs();
            let entering = (0..self.ncols).find(|&j| !blocked[j] && d[j] < -1e-10 * scale);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 * (1.0 + br)
                                || (ratio <= br + 1e-12 * (1.0 + br)
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(SolveError::Unbounded);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots >= MAX_PIVOTS {
                return Ok(false);
            }
        }
    }
}

pub(crate) fn solve_lp(program: &ConvexProgram, tol: f64) -> Result<SolveReport, SolveError> {
    let n = program.num_vars();
    let (lower, upper) = (program.lower(), program.upper());

    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    for j in 0..n {
        let m = if lower[j].is_finite() {
            VarMap::Shift { col: ny, lower: lower[j] }
        } else if upper[j].is_finite() {
            VarMap::Mirror { col: ny, upper: upper[j] }
        } else {
            ny += 1;
            VarMap::Split { col: ny - 1 }
        };
        ny += 1;
        maps.push(m);
    }

    // Rows `a·y <= b` in the shifted variables: constraints first, then finite upper bounds.
    let mut rows_a: Vec<Vec<f64>> = Vec::new();
    let mut rows_b: Vec<f64> = Vec::new();
    for c in program.constraints() {
        let Constraint::Linear { terms, rhs } = c else {
            unreachable!("simplex called with a nonlinear constraint");
        };
        let mut a = vec![0.0; ny];
        let mut b = *rhs;
        for &(j, coef) in terms {
            match maps[j] {
                VarMap::Shift { col, lower } => {
                    a[col] += coef;
                    b -= coef * lower;
                }
                VarMap::Mirror { col, upper } => {
                    a[col] -= coef;
                    b -= coef * upper;
                }
                VarMap::Split { col } => {
                    a[col] += coef;
                    a[col + 1] -= coef;
                }
            }
        }
        rows_a.push(a);
        rows_b.push(b);
    }
    let num_constraints = rows_a.len();
    for j in 0..n {
        if let VarMap::Shift { col, lower } = maps[j] {
            if upper[j].is_finite() {
                let mut a = vec![0.0; ny];
                a[col] = 1.0;
                rows_a.push(a);
                rows_b.push(upper[j] - lower);
            }
        }
    }

    let mut cost_y = vec![0.0; ny];
    let mut offset = 0.0;
    for (j, &c) in program.objective().iter().enumerate() {
        match maps[j] {
            VarMap::Shift { col, lower } => {
                cost_y[col] += c;
                offset += c * lower;
            }
            VarMap::Mirror { col, upper } => {
                cost_y[col] -= c;
                offset += c * upper;
            }
            VarMap::Split { col } => {
                cost_y[col] += c;
                cost_y[col + 1] -= c;
            }
        }
    }

    let m = rows_a.len();
    let flipped: Vec<bool> = rows_b.iter().map(|&b| b < 0.0).collect();
    let num_art = flipped.iter().filter(|&&f| f).count();
    let slack0 = ny;
    let art0 = ny + m;
    let ncols = ny + m + num_art;

    let mut tableau = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        ncols,
    };
    let mut art = art0;
    for i in 0..m {
        let mut row = vec![0.0; ncols + 1];
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for k in 0..ny {
            row[k] = sign * rows_a[i][k];
        }
        row[slack0 + i] = sign;
        row[ncols] = sign * rows_b[i];
        if flipped[i] {
            row[art] = 1.0;
            tableau.basis.push(art);
            art += 1;
        } else {
            tableau.basis.push(slack0 + i);
        }
        tableau.rows.push(row);
    }

    let mut pivots = 0;
    let is_art: Vec<bool> = (0..ncols).map(|j| j >= art0).collect();

    if num_art > 0 {
        let phase1_cost: Vec<f64> = (0..ncols).map(|j| if is_art[j] { -1.0 } else { 0.0 }).collect();
        let no_block = vec![false; ncols];
        if !tableau.optimize(&phase1_cost, &no_block, &mut pivots)? {
            return Ok(max_iter_report(n, pivots));
        }
        let (_, z) = tableau.reduced_costs(&phase1_cost);
        let scale = 1.0 + rows_b.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if -z > tol.min(1e-7) * scale {
            return Ok(SolveReport {
                status: Status::Infeasible,
                x: vec![0.0; n],
                objective: f64::NAN,
                residual: -z,
                iterations: pivots,
                duals: None,
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if is_art[tableau.basis[r]] {
                if let Some(c) = (0..art0).find(|&j| tableau.rows[r][j].abs() > 1e-9) {
                    tableau.pivot(r, c);
                    pivots += 1;
                }
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..ny].copy_from_slice(&cost_y);
    if !tableau.optimize(&cost, &is_art, &mut pivots)? {
        return Ok(max_iter_report(n, pivots));
    }

    let mut y = vec![0.0; ncols];
    for (i, &b) in tableau.basis.iter().enumerate() {
        y[b] = tableau.rhs(i).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lower } => lower + y[col],
            VarMap::Mirror { col, upper } => upper - y[col],
            VarMap::Split { col } => y[col] - y[col + 1],
        })
        .collect();
    let (d, _) = tableau.reduced_costs(&cost);
    let duals: Vec<f64> = (0..num_constraints).map(|i| d[slack0 + i].max(0.0)).collect();
    let objective = program.objective_value(&x);
    debug_assert!((objective - offset - cost_y.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>()).abs() < 1e-6 * (1.0 + objective.abs()));

    Ok(SolveReport {
        status: Status::Optimal,
        x,
        objective,
        residual: 0.0,
        iterations: pivots,
        duals: Some(duals),
    })
}

fn max_iter_report(n: usize, pivots: usize) -> SolveReport {
    SolveReport {
        status: Status::MaxIterations,
        x: vec![0.0; n],
        objective: f64::NAN,
        residual: f64::NAN,
        iterations: pivots,
        duals: None,
    }
}
