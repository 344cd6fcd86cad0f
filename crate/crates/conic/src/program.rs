//! Convex program description and constraint evaluation.
//!
//! Every program is stated in maximization form:
//!
//! ```text
//!    max  cᵀx
//!    s.t. lower <= x <= upper
//!         g_i(x) <= 0        for every constraint i
//! ```
//!
//! where each `g_i` is one of the four shapes in [`Constraint`]. All shapes
//! are convex by construction; quadratic terms are only ever supplied as sums
//! of squares of affine functions, so no PSD check is needed.

use crate::error::SolveError;

/// Sparse coefficient list `(variable index, coefficient)`.
pub type Terms = Vec<(usize, f64)>;

pub(crate) fn dot(terms: &[(usize, f64)], x: &[f64]) -> f64 {
    terms.iter().map(|&(j, a)| a * x[j]).sum()
}

/// Affine function `Σ a_j x_j + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Terms,
    pub constant: f64,
}

impl Affine {
    pub fn new(terms: Terms, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn constant(constant: f64) -> Self {
        Self { terms: Vec::new(), constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.terms, x) + self.constant
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// `terms · x <= rhs`
    Linear { terms: Terms, rhs: f64 },
    /// `Σ_i squares_i(x)² + linear · x <= rhs`
    Quadratic {
        squares: Vec<Affine>,
        linear: Terms,
        rhs: f64,
    },
    /// `‖rows(x)‖₂ <= bound(x)`
    Cone { rows: Vec<Affine>, bound: Affine },
    /// `lhs(x) <= weight · log₂(1 + gain · x[arg])`, with `x[arg] >= 0`.
    Log {
        lhs: Affine,
        weight: f64,
        gain: f64,
        arg: usize,
    },
}

impl Constraint {
    pub fn linear(terms: Terms, rhs: f64) -> Self {
        Constraint::Linear { terms, rhs }
    }

    /// Signed violation `g(x)`; feasible iff `<= 0`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Linear { terms, rhs } => dot(terms, x) - rhs,
            Constraint::Quadratic {
                squares,
                linear,
                rhs,
            } => {
                let sq: f64 = squares.iter().map(|r| r.eval(x).powi(2)).sum();
                sq + dot(linear, x) - rhs
            }
            Constraint::Cone { rows, bound } => {
                let norm = rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>().sqrt();
                norm - bound.eval(x)
            }
            Constraint::Log {
                lhs,
                weight,
                gain,
                arg,
            } => {
                let inner = 1.0 + gain * x[*arg];
                if inner <= 0.0 {
                    f64::INFINITY
                } else {
                    lhs.eval(x) - weight * inner.log2()
                }
            }
        }
    }

    /// Every variable index the constraint touches (may contain duplicates).
    pub(crate) fn indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        match self {
            Constraint::Linear { terms, .. } => out.extend(terms.iter().map(|t| t.0)),
            Constraint::Quadratic {
                squares, linear, ..
            } => {
                for r in squares {
                    out.extend(r.terms.iter().map(|t| t.0));
                }
                out.extend(linear.iter().map(|t| t.0));
            }
            Constraint::Cone { rows, bound } => {
                for r in rows {
                    out.extend(r.terms.iter().map(|t| t.0));
                }
                out.extend(bound.terms.iter().map(|t| t.0));
            }
            Constraint::Log { lhs, arg, .. } => {
                out.extend(lhs.terms.iter().map(|t| t.0));
                out.push(*arg);
            }
        }
        out
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Constraint::Linear { .. })
    }
}

/// A convex program in maximization form with per-variable box bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constraints: Vec<Constraint>,
    hint: Option<Vec<f64>>,
}

impl ConvexProgram {
    /// `num_vars` free variables, zero objective, unbounded boxes.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            constraints: Vec::new(),
            hint: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn hint(&self) -> Option<&[f64]> {
        self.hint.as_deref()
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) -> &mut Self {
        self.objective[var] = coef;
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn add(&mut self, constraint: Constraint) -> &mut Self {
        self.constraints.push(constraint);
        self
    }

    /// Initial point used to seed phase one. Projected into the box.
    pub fn set_hint(&mut self, x: Vec<f64>) -> &mut Self {
        self.hint = Some(x);
        self
    }

    pub fn is_lp(&self) -> bool {
        self.constraints.iter().all(Constraint::is_linear)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.num_vars();
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(SolveError::InvalidProgram(format!(
                    "variable {j} has bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(SolveError::InvalidProgram(format!(
                    "objective coefficient {j} is not finite"
                )));
            }
        }
        if let Some(h) = &self.hint {
            if h.len() != n {
                return Err(SolveError::InvalidProgram(format!(
                    "hint has {} entries, expected {n}",
                    h.len()
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(&j) = c.indices().iter().find(|&&j| j >= n) {
                return Err(SolveError::InvalidProgram(format!(
                    "constraint {i} references variable {j} (only {n} variables)"
                )));
            }
            if let Constraint::Log {
                weight, gain, arg, ..
            } = c
            {
                if *weight <= 0.0 || *gain <= 0.0 {
                    return Err(SolveError::InvalidProgram(format!(
                        "log constraint {i} needs positive weight and gain"
                    )));
                }
                if self.lower[*arg] < 0.0 {
                    return Err(SolveError::InvalidProgram(format!(
                        "log constraint {i}: argument variable {arg} must be bounded below by 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates every bound and constraint at `x`.
///
/// Returns whether the worst violation is within `tol`, together with that
/// worst violation (0 when every constraint holds).
pub fn check_feasible(program: &ConvexProgram, x: &[f64], tol: f64) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    for j in 0..program.num_vars() {
        worst = worst.max(program.lower[j] - x[j]).max(x[j] - program.upper[j]);
    }
    for c in &program.constraints {
        worst = worst.max(c.value(x));
    }
    (worst <= tol, worst)
}
