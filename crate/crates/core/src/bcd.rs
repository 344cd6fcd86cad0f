//! Block coordinate ascent over cache, resources and trajectory, plus the
//! three restricted baselines.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};

use crate::channel::{ChannelError, RateContext};
use crate::par::Exec;
use crate::scenario::Scenario;
use crate::state::{Allocation, CacheVector, Iterate, Trajectory};
use crate::subproblems::{solve_cache_placement, solve_resource_allocation, solve_trajectory, SubproblemError};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Stop once the relative objective change of an outer pass drops below this.
    pub eps_outer: f64,
    pub max_outer: usize,
    pub kappa0: f64,
    pub kappa_growth: f64,
    pub kappa_cap: f64,
    pub binarity_tol: f64,
    pub solver_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_outer: 1e-4,
            max_outer: 100,
            kappa0: 0.1,
            kappa_growth: 1.1,
            kappa_cap: 10.0,
            binarity_tol: 1e-3,
            solver_tol: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), DriverError> {
        let positive = [
            ("eps_outer", self.eps_outer),
            ("kappa0", self.kappa0),
            ("kappa_cap", self.kappa_cap),
            ("binarity_tol", self.binarity_tol),
            ("solver_tol", self.solver_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DriverError::Options(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kappa_growth > 1.0 && self.kappa_growth.is_finite()) {
            return Err(DriverError::Options(format!(
                "kappa_growth must exceed 1, got {}",
                self.kappa_growth
            )));
        }
        if self.max_outer == 0 {
            return Err(DriverError::Options("max_outer must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("invalid options: {0}")]
    Options(String),
    #[error("initial point is infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("objective decreased from {before} to {after} in the {block} block")]
    NonMonotone {
        block: &'static str,
        before: f64,
        after: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    /// Straight-line trajectory.
    Bs1,
    /// No caching.
    Bs2,
    /// Uniform bandwidth and power.
    Bs3,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Bs1, Scheme::Bs2, Scheme::Bs3];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Bs1 => "bs1",
            Scheme::Bs2 => "bs2",
            Scheme::Bs3 => "bs3",
        }
    }

    fn blocks(self) -> (bool, bool, bool) {
        match self {
            Scheme::Proposed => (true, true, true),
            Scheme::Bs1 => (true, true, false),
            Scheme::Bs2 => (false, true, true),
            Scheme::Bs3 => (true, false, true),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme `{s}` (expected proposed, bs1, bs2 or bs3)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxOuter,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxOuter => "max-outer",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub scheme: Scheme,
    /// Final iterate; its cache vector is binary.
    pub iterate: Iterate,
    /// True min-throughput after initialization and after every outer pass, bits.
    pub objective_history: Vec<f64>,
    pub rounded_eta: CacheVector,
    /// Cache vector at the end of the last penalty schedule, before rounding.
    pub relaxed_eta: CacheVector,
    /// `max_f min(η_f, 1 - η_f)` of `relaxed_eta`.
    pub binarity_gap: f64,
    /// Set when rounding had to fall back to keeping the largest entries.
    pub cache_fallback: bool,
    pub per_user_throughput: Vec<f64>,
    pub status: SolveStatus,
    /// Block updates discarded because they failed or lowered the objective.
    pub rejected_steps: usize,
}

impl Solution {
    pub fn objective(&self) -> f64 {
        self.iterate.chi
    }

    pub fn total_throughput(&self) -> f64 {
        self.per_user_throughput.iter().sum()
    }

    pub fn outer_iterations(&self) -> usize {
        self.objective_history.len() - 1
    }
}

/// Rounds a relaxed cache vector. Returns the binary vector and whether the
/// top-`S` fallback was needed.
pub fn round_cache(eta: &CacheVector, capacity: usize, binarity_tol: f64) -> (CacheVector, bool) {
    if eta.binarity_gap() <= binarity_tol {
        let rounded: Vec<f64> = eta.eta.iter().map(|&e| if e >= 0.5 { 1.0 } else { 0.0 }).collect();
        if rounded.iter().sum::<f64>() <= capacity as f64 {
            return (CacheVector { eta: rounded }, false);
        }
    }
    let mut order: Vec<usize> = (0..eta.eta.len()).collect();
    order.sort_by(|&a, &b| eta.eta[b].total_cmp(&eta.eta[a]).then(a.cmp(&b)));
    order.truncate(capacity);
    (CacheVector::from_files(eta.eta.len(), &order), true)
}

/// Files that cannot reach the UAV within the horizon unless cached.
pub fn must_cache_files(scen: &Scenario) -> Vec<usize> {
    let traj = Trajectory::straight(scen);
    let ctx = RateContext::new(scen, &traj);
    let none = CacheVector::zeros(scen.catalog.file_count);
    let mut files: Vec<usize> = (0..scen.user_count())
        .filter(|&k| ctx.delivery_slot(k, &none).is_err())
        .map(|k| scen.file_of(k))
        .collect();
    files.sort_unstable();
    files.dedup();
    files
}

/// Uniform resources, straight trajectory, and the most popular requested
/// files cached (after any file that would otherwise miss the horizon).
pub fn initialize(scen: &Scenario) -> Result<Iterate, DriverError> {
    initial_iterate(scen, true, 0.0)
}

fn initial_iterate(scen: &Scenario, caching: bool, kappa: f64) -> Result<Iterate, DriverError> {
    let traj = Trajectory::straight(scen);
    let limit = scen.max_step_m();
    if traj.max_step() > limit * (1.0 + 1e-12) + 1e-9 {
        return Err(DriverError::Infeasible(format!(
            "end points are {:.1} m per slot apart but the UAV covers at most {limit:.1} m per slot",
            traj.max_step()
        )));
    }
    let f_count = scen.catalog.file_count;
    let capacity = scen.catalog.cache_capacity_files;
    let eta = if caching {
        let mut chosen = must_cache_files(scen);
        if chosen.len() > capacity {
            return Err(DriverError::Infeasible(format!(
                "{} requested files cannot be delivered over the backhaul within {} slots but the cache holds {capacity}",
                chosen.len(),
                scen.slot_count
            )));
        }
        let mut requested: Vec<usize> = (0..scen.user_count()).map(|k| scen.file_of(k)).collect();
        requested.sort_unstable();
        requested.dedup();
        // Zipf popularity decreases with the file index.
        for f in requested {
            if chosen.len() >= capacity {
                break;
            }
            if !chosen.contains(&f) {
                chosen.push(f);
            }
        }
        CacheVector::from_files(f_count, &chosen)
    } else {
        CacheVector::zeros(f_count)
    };
    let alloc = Allocation::uniform(scen);
    Iterate::evaluate(scen, eta, alloc, traj, kappa).map_err(|e| match e {
        ChannelError::DeliveryInfeasible { .. } | ChannelError::UnboundedTime { .. } => {
            DriverError::Infeasible(e.to_string())
        }
        other => DriverError::Channel(other),
    })
}

/// Result of one penalty schedule on the cache block.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheSchedule {
    pub relaxed: CacheVector,
    pub rounded: CacheVector,
    /// Set when rounding fell back to the largest entries.
    pub fallback: bool,
    /// Penalty weight at the end of the schedule.
    pub kappa: f64,
}

/// Runs the penalty schedule on the cache block and rounds the result.
pub fn run_cache_schedule(scen: &Scenario, cur: &Iterate, opts: &SolveOptions) -> Result<CacheSchedule, SubproblemError> {
    let mut point = cur.clone();
    let mut kappa = opts.kappa0;
    loop {
        let step = solve_cache_placement(scen, &point, kappa, opts.solver_tol)?;
        let moved = step
            .eta
            .eta
            .iter()
            .zip(&point.eta.eta)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        point.eta = step.eta;
        let settled = point.eta.binarity_gap() <= opts.binarity_tol && moved <= opts.binarity_tol;
        if settled || kappa * opts.kappa_growth > opts.kappa_cap {
            break;
        }
        kappa *= opts.kappa_growth;
    }
    let (rounded, fallback) = round_cache(&point.eta, scen.catalog.cache_capacity_files, opts.binarity_tol);
    Ok(CacheSchedule {
        relaxed: point.eta,
        rounded,
        fallback,
        kappa,
    })
}

/// Replaces `cur` by `candidate`, or by the first blend `cur + λ(candidate - cur)`
/// with `λ ∈ {1/2, 1/4}` that is at least as good. Blends stay feasible because
/// every block's constraint set is convex; they help when the true model
/// (delivery slots, backhaul distances) moved against the frozen one.
fn accept(
    scen: &Scenario,
    cur: &mut Iterate,
    block: &'static str,
    candidate: Result<(CacheVector, Allocation, Trajectory), SubproblemError>,
    rejected: &mut usize,
) {
    let (eta, alloc, traj) = match candidate {
        Ok(parts) => parts,
        Err(e) => {
            warn!("{block} update failed, keeping previous block: {e}");
            *rejected += 1;
            return;
        }
    };
    let blendable = block != "cache";
    for (i, lambda) in [1.0, 0.5, 0.25].into_iter().enumerate() {
        if i > 0 && !blendable {
            break;
        }
        let parts = if lambda == 1.0 {
            (eta.clone(), alloc.clone(), traj.clone())
        } else {
            (eta.clone(), blend_alloc(&cur.alloc, &alloc, lambda), blend_traj(&cur.traj, &traj, lambda))
        };
        match Iterate::evaluate(scen, parts.0, parts.1, parts.2, cur.kappa) {
            Ok(next) if next.chi >= cur.chi => {
                if lambda < 1.0 {
                    debug!("{block} update accepted at step {lambda}");
                }
                *cur = next;
                return;
            }
            Ok(next) => debug!("{block} update at step {lambda} lowered objective {} -> {}", cur.chi, next.chi),
            Err(e) => debug!("{block} update at step {lambda} is infeasible for the true model ({e})"),
        }
    }
    *rejected += 1;
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

fn blend_alloc(a: &Allocation, b: &Allocation, t: f64) -> Allocation {
    let mix = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        x.iter()
            .zip(y)
            .map(|(r, s)| r.iter().zip(s).map(|(&u, &v)| lerp(u, v, t)).collect())
            .collect()
    };
    Allocation {
        b: mix(&a.b, &b.b),
        p: mix(&a.p, &b.p),
    }
}

fn blend_traj(a: &Trajectory, b: &Trajectory, t: f64) -> Trajectory {
    Trajectory {
        q: a.q.iter().zip(&b.q).map(|(u, v)| [lerp(u[0], v[0], t), lerp(u[1], v[1], t)]).collect(),
    }
}

/// Runs `scheme` to convergence from the standard initial point.
pub fn run_scheme(scen: &Scenario, opts: &SolveOptions, scheme: Scheme) -> Result<Solution, DriverError> {
    opts.validate()?;
    let (do_cache, do_resource, do_traj) = scheme.blocks();
    let caching = scheme != Scheme::Bs2;
    let mut cur = initial_iterate(scen, caching, opts.kappa0)?;
    let mut history = vec![cur.chi];
    let mut relaxed = cur.eta.clone();
    let mut fallback = false;
    let mut rejected = 0;
    let mut status = SolveStatus::MaxOuter;

    for outer in 0..opts.max_outer {
        let before = cur.chi;
        if do_cache {
            let out = run_cache_schedule(scen, &cur, opts);
            let candidate = out.map(|o| {
                relaxed = o.relaxed;
                fallback = o.fallback;
                cur.kappa = o.kappa;
                (o.rounded, cur.alloc.clone(), cur.traj.clone())
            });
            accept(scen, &mut cur, "cache", candidate, &mut rejected);
        }
        if do_resource {
            let candidate = solve_resource_allocation(scen, &cur, opts.solver_tol)
                .map(|s| (cur.eta.clone(), s.alloc, cur.traj.clone()));
            accept(scen, &mut cur, "resource", candidate, &mut rejected);
        }
        if do_traj {
            let candidate = solve_trajectory(scen, &cur, opts.solver_tol)
                .map(|s| (cur.eta.clone(), cur.alloc.clone(), s.traj));
            accept(scen, &mut cur, "trajectory", candidate, &mut rejected);
        }
        if cur.chi < before - 1e-9 {
            return Err(DriverError::NonMonotone {
                block: "outer",
                before,
                after: cur.chi,
            });
        }
        history.push(cur.chi);
        debug!("{scheme} pass {}: objective {:.6e}", outer + 1, cur.chi);
        if (cur.chi - before).abs() <= opts.eps_outer * cur.chi.abs() {
            status = SolveStatus::Converged;
            break;
        }
    }

    let per_user = RateContext::new(scen, &cur.traj).per_user_throughput(&cur.eta, &cur.alloc)?;
    Ok(Solution {
        scheme,
        rounded_eta: cur.eta.clone(),
        binarity_gap: relaxed.binarity_gap(),
        relaxed_eta: relaxed,
        cache_fallback: fallback,
        per_user_throughput: per_user,
        objective_history: history,
        iterate: cur,
        status,
        rejected_steps: rejected,
    })
}

pub fn run_bcd(scen: &Scenario, opts: &SolveOptions) -> Result<Solution, DriverError> {
    run_scheme(scen, opts, Scheme::Proposed)
}

pub fn run_bs1(scen: &Scenario, opts: &SolveOptions) -> Result<Solution, DriverError> {
    run_scheme(scen, opts, Scheme::Bs1)
}

pub fn run_bs2(scen: &Scenario, opts: &SolveOptions) -> Result<Solution, DriverError> {
    run_scheme(scen, opts, Scheme::Bs2)
}

pub fn run_bs3(scen: &Scenario, opts: &SolveOptions) -> Result<Solution, DriverError> {
    run_scheme(scen, opts, Scheme::Bs3)
}

/// Runs every scheme in `schemes` on the same scenario.
pub fn compare(
    scen: &Scenario,
    opts: &SolveOptions,
    schemes: &[Scheme],
    exec: Exec,
) -> Vec<(Scheme, Result<Solution, DriverError>)> {
    exec.map(schemes, |&s| (s, run_scheme(scen, opts, s)))
}

/// Throughput no user can exceed: every slot at full bandwidth and power with
/// the UAV directly overhead and no fading loss.
pub fn throughput_upper_bound(scen: &Scenario) -> f64 {
    let snr = scen.uav.p_max_w * scen.radio.beta0
        / (scen.uav.altitude_m.powf(scen.radio.alpha) * scen.access_noise_w());
    scen.slot_duration_s * scen.slot_count as f64 * scen.uav.access_bandwidth_hz * (1.0 + snr).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_cache_examples() {
        // 0.998 is 2e-3 from binary, so this goes through the top-S path.
        let (r, _) = round_cache(&CacheVector { eta: vec![0.999, 0.001, 0.998] }, 2, 1e-3);
        assert_eq!(r.eta, vec![1.0, 0.0, 1.0]);
        let (r, fb) = round_cache(&CacheVector { eta: vec![0.9995, 0.0005, 0.9991] }, 2, 1e-3);
        assert_eq!((r.eta, fb), (vec![1.0, 0.0, 1.0], false));
        let (r, fb) = round_cache(&CacheVector { eta: vec![0.6, 0.6, 0.3] }, 2, 1e-3);
        assert_eq!((r.eta, fb), (vec![1.0, 1.0, 0.0], true));
        let (r, _) = round_cache(&CacheVector { eta: vec![0.5, 0.5] }, 1, 1e-3);
        assert_eq!(r.eta, vec![1.0, 0.0]);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bs4".parse::<Scheme>().is_err());
    }

    #[test]
    fn options_are_checked() {
        assert!(SolveOptions::default().validate().is_ok());
        let bad = SolveOptions {
            kappa_growth: 1.0,
            ..SolveOptions::default()
        };
        assert!(bad.validate().is_err());
    }
}
