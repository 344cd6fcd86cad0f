//! The three convexified block updates and the surrogates they rely on.
//!
//! Each solver works in normalized units: throughput is divided by a
//! reference value (the incoming objective where positive) so the auxiliary
//! variable `χ̃` is O(1); trajectory coordinates are divided by the UAV
//! altitude.

use std::f64::consts::LN_2;

use skycache_conic::{solve, Affine, Constraint, ConvexProgram, SolveError, SolveReport, Status};

use crate::channel::{sq_dist, ChannelError, RateContext};
use crate::scenario::Scenario;
use crate::state::{Allocation, CacheVector, Iterate, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum SubproblemError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("convex solver failed: {0}")]
    Solver(#[from] SolveError),
    #[error("{block} subproblem is infeasible: {detail}")]
    Infeasible { block: &'static str, detail: String },
    #[error("{0} subproblem hit the solver iteration limit")]
    MaxIterations(&'static str),
    #[error("distance slack must be positive, got {0}")]
    Domain(f64),
}

fn check_status(report: &SolveReport, block: &'static str, detail: impl FnOnce() -> String) -> Result<(), SubproblemError> {
    match report.status {
        Status::Optimal => Ok(()),
        Status::Infeasible => Err(SubproblemError::Infeasible {
            block,
            detail: detail(),
        }),
        Status::MaxIterations => Err(SubproblemError::MaxIterations(block)),
    }
}

/// Exact cache penalty `κ η (η - 1)`.
pub fn penalty(eta: f64, kappa: f64) -> f64 {
    kappa * eta * (eta - 1.0)
}

/// First-order expansion of [`penalty`] at `eta_prev`; a global lower bound.
pub fn penalty_surrogate(eta: f64, eta_prev: f64, kappa: f64) -> f64 {
    kappa * (eta * (2.0 * eta_prev - 1.0) - eta_prev * eta_prev)
}

/// Concave minorant of `b φ` that is tight at `(b0, phi0)`.
pub fn theta_surrogate(b: f64, phi: f64, b0: f64, phi0: f64) -> f64 {
    let s0 = b0 + phi0;
    0.25 * s0 * s0 + 0.5 * s0 * ((b - b0) + (phi - phi0)) - 0.25 * (b - phi).powi(2)
}

/// Tangent of the convex map `ν ↦ log₂(1 + ψ/ν)` at `nu0`, a global lower bound.
pub fn log_recip_lb(nu: f64, nu0: f64, psi: f64) -> Result<f64, SubproblemError> {
    if !(nu > 0.0) {
        return Err(SubproblemError::Domain(nu));
    }
    if !(nu0 > 0.0) {
        return Err(SubproblemError::Domain(nu0));
    }
    Ok((psi / nu0).ln_1p() / LN_2 - psi * (nu - nu0) / (nu0 * (nu0 + psi) * LN_2))
}

impl Iterate {
    /// Builds an iterate and every derived quantity from the three blocks.
    pub fn evaluate(
        scen: &Scenario,
        eta: CacheVector,
        alloc: Allocation,
        traj: Trajectory,
        kappa: f64,
    ) -> Result<Self, ChannelError> {
        let ctx = RateContext::new(scen, &traj);
        let chi = ctx.min_throughput(&eta, &alloc)?;
        let alpha = scen.radio.alpha;
        let h = scen.uav.altitude_m;
        let gain = (-scen.radio.euler_gamma).exp() * scen.radio.beta0 / ctx.access_noise_w;
        let mut psi = Vec::with_capacity(scen.slot_count);
        let mut slack_nu = Vec::with_capacity(scen.slot_count);
        let mut slack_phi = Vec::with_capacity(scen.slot_count);
        for n in 1..=scen.slot_count {
            let ps: Vec<f64> = alloc.p[n - 1].iter().map(|p| gain * p).collect();
            let nu: Vec<f64> = scen
                .users
                .iter()
                .map(|u| (h * h + sq_dist(traj.q[n], u.position)).powf(alpha / 2.0))
                .collect();
            slack_phi.push(ps.iter().zip(&nu).map(|(p, v)| (p / v).ln_1p() / LN_2).collect());
            psi.push(ps);
            slack_nu.push(nu);
        }
        Ok(Self {
            eta,
            alloc,
            traj,
            chi,
            kappa,
            slack_phi,
            slack_nu,
            psi,
        })
    }
}

/// Reference scale for normalized throughput variables.
fn reference(incoming: f64, fallback: f64) -> f64 {
    if incoming > 0.0 && incoming.is_finite() {
        incoming
    } else if fallback > 0.0 && fallback.is_finite() {
        fallback
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheStep {
    pub eta: CacheVector,
    /// Optimal value of the auxiliary throughput variable, bits.
    pub chi: f64,
}

/// One penalized cache-placement LP around `prev.eta`.
///
/// Throughput of user `k` is modelled as `δt P_k [η A_k + (1 - η) B_k]` with
/// `A_k` the full-horizon rate sum and `B_k` the sum after the *uncached*
/// delivery slot. The model is exact for `η ∈ {0, 1}` and below the true
/// throughput in between, because caching only moves delivery earlier. When the
/// uncached file cannot arrive within the horizon, a window constraint keeps
/// the partially cached remainder deliverable.
pub fn solve_cache_placement(
    scen: &Scenario,
    prev: &Iterate,
    kappa: f64,
    tol: f64,
) -> Result<CacheStep, SubproblemError> {
    let f_count = scen.catalog.file_count;
    let ctx = RateContext::new(scen, &prev.traj);
    let n_slots = scen.slot_count;
    let dt = scen.slot_duration_s;
    let q_bits = scen.catalog.file_size_bits;
    let rbar = ctx.mean_backhaul_rate;
    // Uncached delivery slot, capped at the horizon.
    let n2 = if rbar > 0.0 {
        let t = q_bits / rbar;
        let slot = 1.0 + (t / dt * (1.0 - 1e-12)).ceil();
        (slot.min(n_slots as f64)) as usize
    } else {
        n_slots
    };
    let window_rhs = if rbar > 0.0 {
        (n2 - 1) as f64 * dt * rbar / q_bits - 1.0
    } else {
        -1.0
    };

    let mut coeff = Vec::new();
    let mut fallback: f64 = 0.0;
    for k in 0..scen.user_count() {
        let r = ctx.access_rates(k, &prev.alloc);
        let full: f64 = r.iter().sum();
        let tail: f64 = r[n2.min(n_slots)..].iter().sum();
        let scale = dt * scen.request_prob(k);
        fallback = fallback.max(scale * full);
        coeff.push((scen.file_of(k), scale * full, scale * tail));
    }
    let chi_ref = reference(prev.chi, fallback);

    let x_chi = f_count;
    let mut p = ConvexProgram::new(f_count + 1);
    for f in 0..f_count {
        p.set_bounds(f, 0.0, 1.0);
        p.set_objective(f, kappa * (2.0 * prev.eta.eta[f] - 1.0));
    }
    p.set_bounds(x_chi, 0.0, f64::INFINITY).set_objective(x_chi, 1.0);
    for &(f, full, tail) in &coeff {
        p.add(Constraint::linear(vec![(x_chi, 1.0), (f, -(full - tail) / chi_ref)], tail / chi_ref));
        if window_rhs < 0.0 {
            p.add(Constraint::linear(vec![(f, -1.0)], window_rhs));
        }
    }
    p.add(Constraint::linear(
        (0..f_count).map(|f| (f, 1.0)).collect(),
        scen.catalog.cache_capacity_files as f64,
    ));
    let report = solve(&p, tol)?;
    check_status(&report, "cache", || {
        format!(
            "files whose uncached delivery exceeds the {n_slots}-slot horizon do not fit in {} cache slots",
            scen.catalog.cache_capacity_files
        )
    })?;
    let eta = CacheVector {
        eta: report.x[..f_count].iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    };
    Ok(CacheStep {
        eta,
        chi: report.x[x_chi] * chi_ref,
    })
}

/// Bandwidth/power block in the form the convex solver sees.
///
/// The rate of user `k` in slot `n` is `B₂ b log₂(1 + s p̃)` with `p̃ = p/P_max`;
/// `weight` folds in `δt P_k B₂` and the delivery window, so user throughput is
/// `Σ_n weight[n][k] b log₂(1 + gain[n][k] p̃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceProblem {
    pub gain: Vec<Vec<f64>>,
    pub weight: Vec<Vec<f64>>,
    /// Expansion point: bandwidth fractions.
    pub b0: Vec<Vec<f64>>,
    /// Expansion point: power as a fraction of `P_max`.
    pub p0: Vec<Vec<f64>>,
    pub p_max_w: f64,
}

impl ResourceProblem {
    pub fn from_iterate(scen: &Scenario, prev: &Iterate) -> Result<Self, SubproblemError> {
        let ctx = RateContext::new(scen, &prev.traj);
        let k_count = scen.user_count();
        let pmax = scen.uav.p_max_w;
        let bw = scen.uav.access_bandwidth_hz;
        let mut weight = vec![vec![0.0; k_count]; scen.slot_count];
        for k in 0..k_count {
            let w = ctx.slot_weights(k, &prev.eta)?;
            let scale = scen.slot_duration_s * scen.request_prob(k) * bw;
            for (n, wn) in w.iter().enumerate() {
                weight[n][k] = scale * wn;
            }
        }
        let gain = (1..=scen.slot_count)
            .map(|n| {
                scen.users
                    .iter()
                    .map(|u| ctx.access_gain_per_w(prev.traj.q[n], u.position) * pmax)
                    .collect()
            })
            .collect();
        let p0 = prev
            .alloc
            .p
            .iter()
            .map(|row| row.iter().map(|p| p / pmax).collect())
            .collect();
        Ok(Self {
            gain,
            weight,
            b0: prev.alloc.b.clone(),
            p0,
            p_max_w: pmax,
        })
    }

    pub fn slots(&self) -> usize {
        self.gain.len()
    }

    pub fn users(&self) -> usize {
        self.gain.first().map_or(0, Vec::len)
    }

    /// Slot `n` (0-based) on its own.
    pub fn slot(&self, n: usize) -> Self {
        Self {
            gain: vec![self.gain[n].clone()],
            weight: vec![self.weight[n].clone()],
            b0: vec![self.b0[n].clone()],
            p0: vec![self.p0[n].clone()],
            p_max_w: self.p_max_w,
        }
    }

    pub fn user_values(&self, b: &[Vec<f64>], p_frac: &[Vec<f64>]) -> Vec<f64> {
        (0..self.users())
            .map(|k| {
                (0..self.slots())
                    .map(|n| self.weight[n][k] * b[n][k] * (self.gain[n][k] * p_frac[n][k]).ln_1p() / LN_2)
                    .sum()
            })
            .collect()
    }

    /// Exact max-min objective at `(b, p̃)`.
    pub fn value(&self, b: &[Vec<f64>], p_frac: &[Vec<f64>]) -> f64 {
        self.user_values(b, p_frac).into_iter().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResourceSolution {
    pub b: Vec<Vec<f64>>,
    pub p_frac: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    /// Surrogate objective at the optimum, in the units of `weight`.
    pub chi: f64,
}

/// Solves the convexified resource program around `(b0, p0)`.
pub fn solve_resource_program(prob: &ResourceProblem, tol: f64) -> Result<ResourceSolution, SubproblemError> {
    let (n_slots, k_count) = (prob.slots(), prob.users());
    let idx = |n: usize, k: usize| 3 * (n * k_count + k);
    let x_chi = 3 * n_slots * k_count;
    let cap = |n: usize, k: usize| (prob.gain[n][k]).ln_1p() / LN_2;
    let phi0 = |n: usize, k: usize| (prob.gain[n][k] * prob.p0[n][k]).ln_1p() / LN_2;

    let fallback = (0..k_count)
        .map(|k| (0..n_slots).map(|n| prob.weight[n][k] * cap(n, k)).sum::<f64>())
        .fold(0.0, f64::max);
    let chi_ref = reference(prob.value(&prob.b0, &prob.p0), fallback);

    let mut p = ConvexProgram::new(x_chi + 1);
    let mut hint = vec![0.0; x_chi + 1];
    for n in 0..n_slots {
        for k in 0..k_count {
            let i = idx(n, k);
            p.set_bounds(i, 0.0, 1.0).set_bounds(i + 1, 0.0, 1.0);
            hint[i] = prob.b0[n][k];
            hint[i + 1] = prob.p0[n][k];
            if prob.weight[n][k] > 0.0 && prob.gain[n][k] > 0.0 {
                p.set_bounds(i + 2, 0.0, cap(n, k));
                p.add(Constraint::Log {
                    lhs: Affine::new(vec![(i + 2, 1.0)], 0.0),
                    weight: 1.0,
                    gain: prob.gain[n][k],
                    arg: i + 1,
                });
                hint[i + 2] = phi0(n, k) * (1.0 - 1e-3);
            } else {
                p.set_bounds(i + 2, 0.0, 0.0);
            }
        }
        p.add(Constraint::linear((0..k_count).map(|k| (idx(n, k), 1.0)).collect(), 1.0));
        p.add(Constraint::linear((0..k_count).map(|k| (idx(n, k) + 1, 1.0)).collect(), 1.0));
    }
    p.set_bounds(x_chi, -1.0, f64::INFINITY).set_objective(x_chi, 1.0);

    let mut chi_hint = f64::INFINITY;
    for k in 0..k_count {
        let mut squares = Vec::new();
        let mut linear = vec![(x_chi, 1.0)];
        let mut rhs = 0.0;
        let mut at_hint = 0.0;
        for n in 0..n_slots {
            let c = prob.weight[n][k] / chi_ref;
            if !(c > 0.0 && prob.gain[n][k] > 0.0) {
                continue;
            }
            let i = idx(n, k);
            let s0 = prob.b0[n][k] + phi0(n, k);
            // c Θ(b, φ) >= χ̃ rearranged to Σ (c/4)(b - φ)² - (c s0/2)(b + φ) + χ̃ <= -c s0²/4.
            squares.push(Affine::new(vec![(i, (c / 4.0).sqrt()), (i + 2, -(c / 4.0).sqrt())], 0.0));
            linear.push((i, -c * s0 / 2.0));
            linear.push((i + 2, -c * s0 / 2.0));
            rhs -= c * s0 * s0 / 4.0;
            at_hint += c * theta_surrogate(hint[i], hint[i + 2], prob.b0[n][k], phi0(n, k));
        }
        chi_hint = chi_hint.min(at_hint);
        if squares.is_empty() {
            p.add(Constraint::linear(linear, rhs));
        } else {
            p.add(Constraint::Quadratic { squares, linear, rhs });
        }
    }
    hint[x_chi] = chi_hint - 1e-3 * (1.0 + chi_hint.abs());
    p.set_hint(hint);

    let report = solve(&p, tol)?;
    check_status(&report, "resource", || "no allocation satisfies the bandwidth and power budgets".into())?;
    let x = &report.x;
    let grid = |off: usize| -> Vec<Vec<f64>> {
        (0..n_slots)
            .map(|n| (0..k_count).map(|k| x[idx(n, k) + off].max(0.0)).collect())
            .collect()
    };
    Ok(ResourceSolution {
        b: grid(0).into_iter().map(|r| r.into_iter().map(|v| v.min(1.0)).collect()).collect(),
        p_frac: grid(1).into_iter().map(|r| r.into_iter().map(|v| v.min(1.0)).collect()).collect(),
        phi: grid(2),
        chi: x[x_chi] * chi_ref,
    })
}

/// Repeats [`solve_resource_program`] from its own output until the exact
/// objective stops improving by more than `rel_tol`.
pub fn refine_resource_program(
    prob: &ResourceProblem,
    rel_tol: f64,
    max_passes: usize,
    tol: f64,
) -> Result<(ResourceProblem, f64), SubproblemError> {
    let mut cur = prob.clone();
    let mut value = cur.value(&cur.b0, &cur.p0);
    for _ in 0..max_passes {
        let sol = solve_resource_program(&cur, tol)?;
        let v = cur.value(&sol.b, &sol.p_frac);
        if v < value {
            break;
        }
        cur.b0 = sol.b;
        cur.p0 = sol.p_frac;
        let done = v - value <= rel_tol * v.abs().max(f64::MIN_POSITIVE);
        value = v;
        if done {
            break;
        }
    }
    Ok((cur, value))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResourceStep {
    pub alloc: Allocation,
    pub slack_phi: Vec<Vec<f64>>,
    /// Surrogate throughput at the optimum, bits.
    pub chi: f64,
}

/// One SCA pass of the bandwidth/power block with cache and trajectory fixed.
pub fn solve_resource_allocation(scen: &Scenario, prev: &Iterate, tol: f64) -> Result<ResourceStep, SubproblemError> {
    let prob = ResourceProblem::from_iterate(scen, prev)?;
    let sol = solve_resource_program(&prob, tol)?;
    let pmax = scen.uav.p_max_w;
    Ok(ResourceStep {
        alloc: Allocation {
            b: sol.b,
            p: sol.p_frac.iter().map(|r| r.iter().map(|v| v * pmax).collect()).collect(),
        },
        slack_phi: sol.phi,
        chi: sol.chi,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub traj: Trajectory,
    /// Distance slack `ν` per `[slot - 1][user]`, m².
    pub slack_nu: Vec<Vec<f64>>,
    /// Surrogate throughput at the optimum, bits.
    pub chi: f64,
}

fn tight_nu(scen: &Scenario, traj: &Trajectory) -> Vec<Vec<f64>> {
    let h2 = scen.uav.altitude_m.powi(2);
    (1..=scen.slot_count)
        .map(|n| scen.users.iter().map(|u| h2 + sq_dist(traj.q[n], u.position)).collect())
        .collect()
}

/// One SCA pass of the trajectory block with cache and resources fixed.
///
/// Backhaul distances and hence delivery slots stay at `prev.traj`; the
/// driver re-evaluates them on the returned trajectory.
pub fn solve_trajectory(scen: &Scenario, prev: &Iterate, tol: f64) -> Result<TrajectoryStep, SubproblemError> {
    let n_slots = scen.slot_count;
    let k_count = scen.user_count();
    let h = scen.uav.altitude_m;
    let step = scen.max_step_m() / h;
    let q_s: Vec<[f64; 2]> = prev.traj.q.iter().map(|q| [q[0] / h, q[1] / h]).collect();
    let w_s: Vec<[f64; 2]> = scen.users.iter().map(|u| [u.position[0] / h, u.position[1] / h]).collect();
    let unchanged = || TrajectoryStep {
        traj: prev.traj.clone(),
        slack_nu: tight_nu(scen, &prev.traj),
        chi: prev.chi,
    };

    // With no slack in the speed limit the straight line is the only feasible path.
    let span = sq_dist(q_s[0], q_s[n_slots]).sqrt();
    if !(step > 0.0) || n_slots as f64 * step <= span * (1.0 + 1e-9) + 1e-12 {
        return Ok(unchanged());
    }

    let ctx = RateContext::new(scen, &prev.traj);
    let gain = (-scen.radio.euler_gamma).exp() * scen.radio.beta0 / ctx.access_noise_w / (h * h);
    let mut coef = vec![vec![0.0; k_count]; n_slots + 1];
    let mut psi = vec![vec![0.0; k_count]; n_slots + 1];
    for k in 0..k_count {
        let w = ctx.slot_weights(k, &prev.eta)?;
        let scale = scen.slot_duration_s * scen.request_prob(k) * scen.uav.access_bandwidth_hz;
        for n in 1..=n_slots {
            coef[n][k] = scale * prev.alloc.b[n - 1][k] * w[n - 1];
            psi[n][k] = gain * prev.alloc.p[n - 1][k];
        }
    }
    let nu0 = |n: usize, k: usize| 1.0 + sq_dist(q_s[n], w_s[k]);
    let exact = |n: usize, k: usize, nu: f64| (psi[n][k] / nu).ln_1p() / LN_2;

    let active = |n: usize, k: usize| coef[n][k] > 0.0 && psi[n][k] > 0.0;
    if !(1..n_slots).any(|n| (0..k_count).any(|k| active(n, k))) {
        return Ok(unchanged());
    }
    let fallback = (0..k_count)
        .map(|k| (1..=n_slots).map(|n| coef[n][k] * exact(n, k, nu0(n, k))).sum::<f64>())
        .fold(0.0, f64::max);
    let chi_ref = reference(prev.chi, fallback);

    // Variable layout: per interior slot (qx, qy, ν for each active user), then χ̃.
    let mut q_idx = vec![usize::MAX; n_slots + 1];
    let mut nu_idx = vec![vec![None; k_count]; n_slots + 1];
    let mut count = 0;
    for n in 1..n_slots {
        q_idx[n] = count;
        count += 2;
        for k in 0..k_count {
            if active(n, k) {
                nu_idx[n][k] = Some(count);
                count += 1;
            }
        }
    }
    let x_chi = count;
    let mut p = ConvexProgram::new(count + 1);
    let mut hint = vec![0.0; count + 1];

    let pts = w_s.iter().chain([&q_s[0], &q_s[n_slots]]);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for w in pts {
        for d in 0..2 {
            lo[d] = lo[d].min(w[d]);
            hi[d] = hi[d].max(w[d]);
        }
    }
    for n in 1..n_slots {
        for d in 0..2 {
            let (l, u) = (lo[d] - 0.1, hi[d] + 0.1);
            p.set_bounds(q_idx[n] + d, l, u);
            hint[q_idx[n] + d] = q_s[n][d].clamp(l, u);
        }
        for k in 0..k_count {
            if let Some(j) = nu_idx[n][k] {
                // Never binding: the box keeps every distance below its diagonal.
                let far = (0..2)
                    .map(|d| (w_s[k][d] - (lo[d] - 0.1)).abs().max((hi[d] + 0.1 - w_s[k][d]).abs()).powi(2))
                    .sum::<f64>();
                p.set_bounds(j, 0.5, 2.0 * (1.0 + far));
                hint[j] = nu0(n, k) * (1.0 + 1e-3) + 1e-6;
                p.add(Constraint::Quadratic {
                    squares: (0..2)
                        .map(|d| Affine::new(vec![(q_idx[n] + d, 1.0)], -w_s[k][d]))
                        .collect(),
                    linear: vec![(j, -1.0)],
                    rhs: -1.0,
                });
            }
        }
    }
    // Speed limit between consecutive waypoints; q_0 and q_N are constants.
    for n in 1..=n_slots {
        let squares = (0..2)
            .map(|d| {
                let mut a = Affine::constant(0.0);
                if n < n_slots {
                    a.terms.push((q_idx[n] + d, 1.0));
                } else {
                    a.constant += q_s[n][d];
                }
                if n > 1 {
                    a.terms.push((q_idx[n - 1] + d, -1.0));
                } else {
                    a.constant -= q_s[0][d];
                }
                a
            })
            .collect();
        p.add(Constraint::Quadratic {
            squares,
            linear: vec![],
            rhs: step * step,
        });
    }
    p.set_bounds(x_chi, -1.0, f64::INFINITY).set_objective(x_chi, 1.0);
    let mut chi_hint = f64::INFINITY;
    for k in 0..k_count {
        let mut terms = vec![(x_chi, 1.0)];
        // Slot N is pinned to the end point, so its rate is a constant.
        let mut rhs = coef[n_slots][k] * exact(n_slots, k, nu0(n_slots, k)) / chi_ref;
        let mut at_hint = rhs;
        for n in 1..n_slots {
            let Some(j) = nu_idx[n][k] else { continue };
            let c = coef[n][k] / chi_ref;
            let v0 = nu0(n, k);
            let ps = psi[n][k];
            let slope = ps / (v0 * (v0 + ps) * LN_2);
            let base = log_recip_lb(v0, v0, ps)?;
            terms.push((j, c * slope));
            rhs += c * (base + slope * v0);
            at_hint += c * log_recip_lb(hint[j], v0, ps)?;
        }
        chi_hint = chi_hint.min(at_hint);
        p.add(Constraint::linear(terms, rhs));
    }
    hint[x_chi] = chi_hint - 1e-3 * (1.0 + chi_hint.abs());
    p.set_hint(hint);

    let report = solve(&p, tol)?;
    check_status(&report, "trajectory", || "speed limit cannot connect the end points".into())?;
    let x = &report.x;
    let mut q = prev.traj.q.clone();
    for n in 1..n_slots {
        q[n] = [x[q_idx[n]] * h, x[q_idx[n] + 1] * h];
    }
    let traj = Trajectory { q };
    let mut slack_nu = tight_nu(scen, &traj);
    for n in 1..n_slots {
        for k in 0..k_count {
            if let Some(j) = nu_idx[n][k] {
                slack_nu[n - 1][k] = x[j] * h * h;
            }
        }
    }
    Ok(TrajectoryStep {
        traj,
        slack_nu,
        chi: x[x_chi] * chi_ref,
    })
}
