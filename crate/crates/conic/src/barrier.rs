//! Primal log-barrier path following for programs with nonlinear constraints.
//!
//! Fixed variables are substituted out first. Phase one minimizes a shared
//! slack `s` in `g_i(x) <= s` and stops as soon as `s < 0`; programs without a
//! strict interior therefore report `Infeasible`. Newton systems are
//! `S + Σ v vᵀ` where `S` lives in a skyline envelope and the rank-one terms
//! come from constraints with a wide support; they are solved with the
//! Woodbury identity plus two steps of iterative refinement.

use nalgebra::{DMatrix, DVector};

use crate::error::SolveError;
use crate::program::{Affine, Constraint, ConvexProgram, Terms};
use crate::skyline::Skyline;
use crate::{simplex, SolveReport, Status, FEAS_TOL};

/// Constraints touching more variables than this go to the low-rank part.
const SMALL_SUPPORT: usize = 32;
const MU: f64 = 10.0;
const T0: f64 = 1.0;
const MAX_NEWTON: usize = 20_000;
const MAX_CENTERING: usize = 200;
const UNBOUNDED_NORM: f64 = 1e13;

pub(crate) fn solve_barrier(program: &ConvexProgram, tol: f64) -> Result<SolveReport, SolveError> {
    let red = Reduction::new(program);
    if let Some(violation) = red.violation {
        return Ok(infeasible(program.num_vars(), violation, 0));
    }
    let rp = &red.program;
    if rp.num_vars() == 0 {
        return Ok(optimal(red.expand(&[]), 0));
    }
    if rp.constraints().is_empty() {
        return Ok(optimal(red.expand(&box_optimum(rp)?), 0));
    }
    if rp.is_lp() {
        let mut r = simplex::solve_lp(rp, tol)?;
        r.x = if r.status == Status::Infeasible {
            vec![0.0; program.num_vars()]
        } else {
            red.expand(&r.x)
        };
        r.duals = None;
        return Ok(r);
    }

    let mut x = interior_start(rp);
    let mut newton = 0;
    let worst = rp
        .constraints()
        .iter()
        .map(|c| c.value(&x))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) || !strict_cones(rp, &x) {
        let s0 = worst.max(0.0) + 1.0;
        if !s0.is_finite() {
            return Err(SolveError::Numerical("phase-one start is not finite".into()));
        }
        let p1 = phase_one(rp, &x, s0);
        let mut x1 = x.clone();
        x1.push(s0);
        let out = path_follow(&p1, x1, tol, Some(rp.num_vars()))?;
        newton += out.newton;
        match out.end {
            End::Early => {}
            End::Converged => {
                let s = out.x[rp.num_vars()];
                return Ok(infeasible(program.num_vars(), s.max(0.0), newton));
            }
            End::MaxIterations => {
                let mut r = infeasible(program.num_vars(), f64::NAN, newton);
                r.status = Status::MaxIterations;
                return Ok(r);
            }
        }
        x = out.x[..rp.num_vars()].to_vec();
    }

    let out = path_follow(rp, x, tol, None)?;
    newton += out.newton;
    let mut report = optimal(red.expand(&out.x), newton);
    if out.end == End::MaxIterations {
        report.status = Status::MaxIterations;
    }
    Ok(report)
}

fn optimal(x: Vec<f64>, iterations: usize) -> SolveReport {
    SolveReport {
        status: Status::Optimal,
        x,
        objective: f64::NAN,
        residual: 0.0,
        iterations,
        duals: None,
    }
}

fn infeasible(n: usize, residual: f64, iterations: usize) -> SolveReport {
    SolveReport {
        status: Status::Infeasible,
        x: vec![0.0; n],
        objective: f64::NAN,
        residual,
        iterations,
        duals: None,
    }
}

fn strict_cones(p: &ConvexProgram, x: &[f64]) -> bool {
    p.constraints().iter().all(|c| match c {
        Constraint::Cone { bound, .. } => bound.eval(x) > 0.0,
        _ => true,
    })
}

/// Program with every `lower == upper` variable substituted by its value.
struct Reduction {
    program: ConvexProgram,
    /// Original index of each reduced variable.
    free: Vec<usize>,
    /// Full-length vector holding the fixed values.
    base: Vec<f64>,
    /// Worst violation among constraints that became constant, if positive.
    violation: Option<f64>,
}

impl Reduction {
    fn new(p: &ConvexProgram) -> Self {
        let n = p.num_vars();
        let mut map = vec![None; n];
        let mut free = Vec::new();
        let mut base = vec![0.0; n];
        for j in 0..n {
            if p.lower()[j] == p.upper()[j] {
                base[j] = p.lower()[j];
            } else {
                map[j] = Some(free.len());
                free.push(j);
            }
        }
        let mut rp = ConvexProgram::new(free.len());
        for (k, &j) in free.iter().enumerate() {
            rp.set_objective(k, p.objective()[j]);
            rp.set_bounds(k, p.lower()[j], p.upper()[j]);
        }
        if let Some(h) = p.hint() {
            rp.set_hint(free.iter().map(|&j| h[j]).collect());
        }
        let sub = |terms: &Terms, constant: f64| -> Affine {
            let mut out = Affine::constant(constant);
            for &(j, a) in terms {
                match map[j] {
                    Some(k) => out.terms.push((k, a)),
                    None => out.constant += a * base[j],
                }
            }
            out
        };
        let sub_aff = |a: &Affine| sub(&a.terms, a.constant);
        let mut worst: f64 = 0.0;
        for c in p.constraints() {
            if c.indices().iter().all(|&j| map[j].is_none()) {
                worst = worst.max(c.value(&base));
                continue;
            }
            match c {
                Constraint::Linear { terms, rhs } => {
                    let a = sub(terms, 0.0);
                    rp.add(Constraint::linear(a.terms, rhs - a.constant));
                }
                Constraint::Quadratic {
                    squares,
                    linear,
                    rhs,
                } => {
                    let lin = sub(linear, 0.0);
                    let mut rhs = rhs - lin.constant;
                    let mut sq = Vec::new();
                    for r in squares {
                        let a = sub_aff(r);
                        if a.terms.is_empty() {
                            rhs -= a.constant * a.constant;
                        } else {
                            sq.push(a);
                        }
                    }
                    if sq.is_empty() {
                        rp.add(Constraint::linear(lin.terms, rhs));
                    } else {
                        rp.add(Constraint::Quadratic {
                            squares: sq,
                            linear: lin.terms,
                            rhs,
                        });
                    }
                }
                Constraint::Cone { rows, bound } => {
                    rp.add(Constraint::Cone {
                        rows: rows.iter().map(sub_aff).collect(),
                        bound: sub_aff(bound),
                    });
                }
                Constraint::Log {
                    lhs,
                    weight,
                    gain,
                    arg,
                } => {
                    let l = sub_aff(lhs);
                    match map[*arg] {
                        None => {
                            let cap = weight * (1.0 + gain * base[*arg]).log2();
                            rp.add(Constraint::linear(l.terms, cap - l.constant));
                        }
                        Some(k) if l.terms.is_empty() => {
                            // c <= w log2(1 + g x)  <=>  x >= (2^(c/w) - 1) / g
                            if l.constant > 0.0 {
                                let need = ((l.constant / weight).exp2() - 1.0) / gain;
                                rp.add(Constraint::linear(vec![(k, -1.0)], -need));
                            }
                        }
                        Some(k) => {
                            rp.add(Constraint::Log {
                                lhs: l,
                                weight: *weight,
                                gain: *gain,
                                arg: k,
                            });
                        }
                    }
                }
            }
        }
        let violation = (worst > FEAS_TOL).then_some(worst);
        Self {
            program: rp,
            free,
            base,
            violation,
        }
    }

    fn expand(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (k, &j) in self.free.iter().enumerate() {
            x[j] = y[k];
        }
        x
    }
}

fn box_optimum(p: &ConvexProgram) -> Result<Vec<f64>, SolveError> {
    let start = interior_start(p);
    (0..p.num_vars())
        .map(|j| {
            let c = p.objective()[j];
            let v = if c > 0.0 {
                p.upper()[j]
            } else if c < 0.0 {
                p.lower()[j]
            } else {
                start[j]
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(SolveError::Unbounded)
            }
        })
        .collect()
}

/// Hint (or zero) pushed strictly inside the box.
fn interior_start(p: &ConvexProgram) -> Vec<f64> {
    (0..p.num_vars())
        .map(|j| {
            let (l, u) = (p.lower()[j], p.upper()[j]);
            let h = p.hint().map_or(0.0, |h| h[j]);
            let h = if h.is_finite() { h } else { 0.0 };
            match (l.is_finite(), u.is_finite()) {
                (true, true) => {
                    let m = 1e-2 * (u - l);
                    h.clamp(l + m, u - m)
                }
                (true, false) => h.max(l + 1e-2 * (1.0 + l.abs())),
                (false, true) => h.min(u - 1e-2 * (1.0 + u.abs())),
                (false, false) => h,
            }
        })
        .collect()
}

/// `g_i(x) <= s` for every constraint, maximizing `-s`; `s` is the last variable.
fn phase_one(p: &ConvexProgram, x0: &[f64], s0: f64) -> ConvexProgram {
    let n = p.num_vars();
    let mut q = ConvexProgram::new(n + 1);
    for j in 0..n {
        q.set_bounds(j, p.lower()[j], p.upper()[j]);
    }
    // The cap keeps phase one bounded in every direction; any s above s0 is useless.
    q.set_bounds(n, -s0, s0 + 1e3 * (1.0 + s0));
    q.set_objective(n, -1.0);
    let mut hint = x0.to_vec();
    hint.push(s0);
    q.set_hint(hint);
    for c in p.constraints() {
        let c = match c.clone() {
            Constraint::Linear { mut terms, rhs } => {
                terms.push((n, -1.0));
                Constraint::Linear { terms, rhs }
            }
            Constraint::Quadratic {
                squares,
                mut linear,
                rhs,
            } => {
                linear.push((n, -1.0));
                Constraint::Quadratic {
                    squares,
                    linear,
                    rhs,
                }
            }
            Constraint::Cone { rows, mut bound } => {
                bound.terms.push((n, 1.0));
                Constraint::Cone { rows, bound }
            }
            Constraint::Log {
                mut lhs,
                weight,
                gain,
                arg,
            } => {
                lhs.terms.push((n, -1.0));
                Constraint::Log {
                    lhs,
                    weight,
                    gain,
                    arg,
                }
            }
        };
        q.add(c);
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Converged,
    /// Phase one reached `s < 0`.
    Early,
    MaxIterations,
}

struct PathOutcome {
    x: Vec<f64>,
    newton: usize,
    end: End,
}

/// Static sparsity information shared by every Newton step.
struct Structure {
    /// Sorted, deduplicated variable indices per constraint.
    support: Vec<Vec<usize>>,
    /// Rank-one part goes to the Woodbury term instead of the envelope.
    wide: Vec<bool>,
    first: Vec<usize>,
    degree: f64,
}

impl Structure {
    fn new(p: &ConvexProgram) -> Self {
        let n = p.num_vars();
        let mut first: Vec<usize> = (0..n).collect();
        let mut touch = |idx: &[usize]| {
            if let (Some(&lo), true) = (idx.iter().min(), idx.len() > 1) {
                for &i in idx {
                    first[i] = first[i].min(lo);
                }
            }
        };
        let mut support = Vec::new();
        let mut wide = Vec::new();
        let mut degree = 0.0;
        for j in 0..n {
            degree += p.lower()[j].is_finite() as u8 as f64 + p.upper()[j].is_finite() as u8 as f64;
        }
        for c in p.constraints() {
            let mut s = c.indices();
            s.sort_unstable();
            s.dedup();
            let is_wide = s.len() > SMALL_SUPPORT && !matches!(c, Constraint::Cone { .. });
            if !is_wide {
                touch(&s);
            } else if let Constraint::Quadratic { squares, .. } = c {
                for r in squares {
                    let idx: Vec<usize> = r.terms.iter().map(|t| t.0).collect();
                    touch(&idx);
                }
            }
            degree += if matches!(c, Constraint::Cone { .. }) { 2.0 } else { 1.0 };
            support.push(s);
            wide.push(is_wide);
        }
        Self {
            support,
            wide,
            first,
            degree,
        }
    }
}

/// `φ(x)` for the box and constraint barriers, `None` outside the domain.
fn barrier_value(p: &ConvexProgram, x: &[f64]) -> Option<f64> {
    let mut phi = 0.0;
    for j in 0..x.len() {
        let (l, u) = (p.lower()[j], p.upper()[j]);
        if l.is_finite() {
            let d = x[j] - l;
            if !(d > 0.0) {
                return None;
            }
            phi -= d.ln();
        }
        if u.is_finite() {
            let d = u - x[j];
            if !(d > 0.0) {
                return None;
            }
            phi -= d.ln();
        }
    }
    for c in p.constraints() {
        match c {
            Constraint::Cone { rows, bound } => {
                let u = bound.eval(x);
                let f = u * u - rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>();
                if !(u > 0.0 && f > 0.0) {
                    return None;
                }
                phi -= f.ln();
            }
            _ => {
                let g = c.value(x);
                if !(g < 0.0) {
                    return None;
                }
                phi -= (-g).ln();
            }
        }
    }
    Some(phi)
}

fn add_terms(work: &mut [f64], terms: &[(usize, f64)], scale: f64) {
    for &(j, a) in terms {
        work[j] += scale * a;
    }
}

/// Adds `w · a aᵀ` where `a` is the (possibly duplicated) sparse vector `terms`.
fn add_outer_terms(s: &mut Skyline, terms: &[(usize, f64)], w: f64) {
    for &(i, a) in terms {
        for &(j, b) in terms {
            if i >= j {
                s.add(i, j, w * a * b);
            }
        }
    }
}

fn add_outer_dense(s: &mut Skyline, support: &[usize], v: &[f64], w: f64) {
    for (p, &i) in support.iter().enumerate() {
        for &j in &support[..=p] {
            s.add(i, j, w * v[i] * v[j]);
        }
    }
}

struct NewtonSystem {
    grad: Vec<f64>,
    hess: Skyline,
    low_rank: Vec<Vec<f64>>,
}

fn assemble(p: &ConvexProgram, st: &Structure, x: &[f64], t: f64, work: &mut [f64]) -> NewtonSystem {
    let n = x.len();
    let mut grad: Vec<f64> = p.objective().iter().map(|c| -t * c).collect();
    let mut hess = Skyline::new(st.first.clone());
    let mut low_rank = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower()[j], p.upper()[j]);
        if l.is_finite() {
            let d = x[j] - l;
            grad[j] -= 1.0 / d;
            hess.add(j, j, 1.0 / (d * d));
        }
        if u.is_finite() {
            let d = u - x[j];
            grad[j] += 1.0 / d;
            hess.add(j, j, 1.0 / (d * d));
        }
    }
    for (ci, c) in p.constraints().iter().enumerate() {
        let support = &st.support[ci];
        for &j in support {
            work[j] = 0.0;
        }
        if let Constraint::Cone { rows, bound } = c {
            // φ = -log(u² - ‖r‖²)
            let u = bound.eval(x);
            let rv: Vec<f64> = rows.iter().map(|r| r.eval(x)).collect();
            let f = u * u - rv.iter().map(|v| v * v).sum::<f64>();
            add_terms(work, &bound.terms, 2.0 * u);
            for (r, v) in rows.iter().zip(&rv) {
                add_terms(work, &r.terms, -2.0 * v);
            }
            for &j in support {
                grad[j] -= work[j] / f;
            }
            add_outer_dense(&mut hess, support, work, 1.0 / (f * f));
            for r in rows {
                add_outer_terms(&mut hess, &r.terms, 2.0 / f);
            }
            add_outer_terms(&mut hess, &bound.terms, -2.0 / f);
            continue;
        }
        let g = c.value(x);
        let m = -g;
        match c {
            Constraint::Linear { terms, .. } => add_terms(work, terms, 1.0),
            Constraint::Quadratic {
                squares, linear, ..
            } => {
                add_terms(work, linear, 1.0);
                for r in squares {
                    let v = r.eval(x);
                    add_terms(work, &r.terms, 2.0 * v);
                    add_outer_terms(&mut hess, &r.terms, 2.0 / m);
                }
            }
            Constraint::Log {
                lhs,
                weight,
                gain,
                arg,
            } => {
                add_terms(work, &lhs.terms, 1.0);
                let inner = 1.0 + gain * x[*arg];
                let ln2 = std::f64::consts::LN_2;
                work[*arg] -= weight * gain / (inner * ln2);
                hess.add(*arg, *arg, weight * gain * gain / (inner * inner * ln2) / m);
            }
            Constraint::Cone { .. } => unreachable!(),
        }
        for &j in support {
            grad[j] += work[j] / m;
        }
        if st.wide[ci] {
            let mut v = vec![0.0; n];
            for &j in support {
                v[j] = work[j] / m;
            }
            low_rank.push(v);
        } else {
            add_outer_dense(&mut hess, support, work, 1.0 / (m * m));
        }
    }
    NewtonSystem {
        grad,
        hess,
        low_rank,
    }
}

/// Solves `(S + Σ v vᵀ) y = rhs`.
fn newton_solve(sys: &NewtonSystem, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let n = rhs.len();
    // Symmetric Jacobi scaling keeps the ridge below every variable's own curvature.
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let diag = sys.hess.diag(i) + sys.low_rank.iter().map(|v| v[i] * v[i]).sum::<f64>();
            if diag > 0.0 && diag.is_finite() {
                1.0 / diag.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut s = sys.hess.clone();
    s.scale_symmetric(&d);
    let v: Vec<Vec<f64>> = sys
        .low_rank
        .iter()
        .map(|vi| vi.iter().zip(&d).map(|(a, b)| a * b).collect())
        .collect();
    let rhs: Vec<f64> = rhs.iter().zip(&d).map(|(a, b)| a * b).collect();

    let mut ridge = 1e-13 * (1.0 + s.max_diag());
    let factor = loop {
        let mut l = s.clone();
        for i in 0..n {
            l.add(i, i, ridge);
        }
        match l.factor() {
            Ok(()) => break l,
            Err(_) if ridge < 1e-2 * (1.0 + s.max_diag()) => ridge *= 100.0,
            Err(i) => {
                return Err(SolveError::Numerical(format!(
                    "Newton matrix not positive definite at row {i}"
                )))
            }
        }
    };
    let m = v.len();
    let w: Vec<Vec<f64>> = v
        .iter()
        .map(|vi| {
            let mut y = vi.clone();
            factor.solve_in_place(&mut y);
            y
        })
        .collect();
    let small = if m > 0 {
        let c = DMatrix::from_fn(m, m, |a, b| {
            let d: f64 = v[a].iter().zip(&w[b]).map(|(p, q)| p * q).sum();
            d + if a == b { 1.0 } else { 0.0 }
        });
        Some(c.cholesky().ok_or_else(|| {
            SolveError::Numerical("low-rank capacitance matrix not positive definite".into())
        })?)
    } else {
        None
    };
    let apply_inverse = |r: &[f64]| -> Vec<f64> {
        let mut y = r.to_vec();
        factor.solve_in_place(&mut y);
        if let Some(chol) = &small {
            let proj = DVector::from_iterator(m, v.iter().map(|vi| vi.iter().zip(&y).map(|(a, b)| a * b).sum()));
            let coef = chol.solve(&proj);
            for (k, wk) in w.iter().enumerate() {
                for (yi, wi) in y.iter_mut().zip(wk) {
                    *yi -= coef[k] * wi;
                }
            }
        }
        y
    };
    let residual = |y: &[f64]| -> Vec<f64> {
        let mut hy = s.matvec(y);
        for vi in &v {
            let d: f64 = vi.iter().zip(y).map(|(a, b)| a * b).sum();
            for (h, a) in hy.iter_mut().zip(vi) {
                *h += d * a;
            }
        }
        rhs.iter().zip(&hy).map(|(r, h)| r - h).collect()
    };
    let norm = |r: &[f64]| r.iter().map(|a| a * a).sum::<f64>().sqrt();
    let target = 1e-14 * norm(&rhs);
    let mut y = apply_inverse(&rhs);
    let mut res = residual(&y);
    let mut res_norm = norm(&res);
    for _ in 0..10 {
        if !(res_norm > target) {
            break;
        }
        let dy = apply_inverse(&res);
        let cand: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + b).collect();
        let cand_res = residual(&cand);
        let cand_norm = norm(&cand_res);
        if !(cand_norm < 0.9 * res_norm) {
            if cand_norm < res_norm {
                y = cand;
            }
            break;
        }
        y = cand;
        res = cand_res;
        res_norm = cand_norm;
    }
    let _ = res;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Numerical("Newton step is not finite".into()));
    }
    Ok(y.iter().zip(&d).map(|(a, b)| a * b).collect())
}

fn max_box_step(p: &ConvexProgram, x: &[f64], dx: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for j in 0..x.len() {
        if dx[j] < 0.0 && p.lower()[j].is_finite() {
            a = a.min((p.lower()[j] - x[j]) / dx[j]);
        } else if dx[j] > 0.0 && p.upper()[j].is_finite() {
            a = a.min((p.upper()[j] - x[j]) / dx[j]);
        }
    }
    a
}

fn path_follow(
    p: &ConvexProgram,
    mut x: Vec<f64>,
    tol: f64,
    stop_below_zero: Option<usize>,
) -> Result<PathOutcome, SolveError> {
    let st = Structure::new(p);
    let n = x.len();
    let scale0 = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut work = vec![0.0; n];
    let mut t = T0;
    let mut newton = 0;
    let cx = |x: &[f64]| p.objective_value(x);
    loop {
        for _ in 0..MAX_CENTERING {
            let sys = assemble(p, &st, &x, t, &mut work);
            let rhs: Vec<f64> = sys.grad.iter().map(|g| -g).collect();
            let dx = newton_solve(&sys, &rhs)?;
            let lambda2: f64 = rhs.iter().zip(&dx).map(|(a, b)| a * b).sum();
            if !(lambda2 > 2e-10) {
                break;
            }
            let f0 = -t * cx(&x) + barrier_value(p, &x).ok_or_else(|| {
                SolveError::Numerical("iterate left the barrier domain".into())
            })?;
            let mut alpha = (0.99 * max_box_step(p, &x, &dx)).min(1.0);
            let mut accepted = None;
            while alpha > 1e-16 {
                let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
                if let Some(phi) = barrier_value(p, &xn) {
                    let f1 = -t * cx(&xn) + phi;
                    if f1 <= f0 - 0.25 * alpha * lambda2 + 4.0 * f64::EPSILON * f0.abs() {
                        accepted = Some(xn);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(xn) = accepted else {
                break;
            };
            x = xn;
            newton += 1;
            if let Some(s) = stop_below_zero {
                if x[s] < 0.0 {
                    return Ok(PathOutcome {
                        x,
                        newton,
                        end: End::Early,
                    });
                }
            }
            if x.iter().any(|v| v.abs() > UNBOUNDED_NORM * scale0) {
                return Err(SolveError::Unbounded);
            }
            if newton >= MAX_NEWTON {
                return Ok(PathOutcome {
                    x,
                    newton,
                    end: End::MaxIterations,
                });
            }
            if lambda2 < 1e-9 {
                break;
            }
        }
        if st.degree / t <= tol * (1.0 + cx(&x).abs()) {
            return Ok(PathOutcome {
                x,
                newton,
                end: End::Converged,
            });
        }
        t *= MU;
    }
}
