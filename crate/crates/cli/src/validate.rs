//! Self-checks behind `skycache validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skycache::bcd::{initialize, run_cache_schedule};
use skycache::harness::{monte_carlo_rate, oracle_cache_exhaustive, oracle_resource_grid};
use skycache::scenario::ScenarioDefaults;
use skycache::subproblems::{
    log_recip_lb, penalty, penalty_surrogate, refine_resource_program, theta_surrogate, ResourceProblem,
};
use skycache::{run_scheme, Exec, RateContext, Scenario, Scheme, SolveOptions, Trajectory};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

const INSTANCES: u64 = 5;

/// K=2, N=6, F=4, S=2 with short end points, small enough for enumeration.
fn tiny(seed: u64) -> Scenario {
    ScenarioDefaults {
        slot_count: 6,
        file_count: 4,
        cache_capacity_files: 2,
        file_size_bits: 0.5e6,
        uav_start_m: [450.0, 500.0],
        uav_end_m: [550.0, 550.0],
        ..ScenarioDefaults::default()
    }
    .generate(seed, 2, 1000.0)
}

fn surrogates() -> Check {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let grid = |n: usize, hi: f64| (0..=n).map(move |i| hi * i as f64 / n as f64);
    for e0 in grid(50, 1.0) {
        worst = worst.max((penalty_surrogate(e0, e0, 1.0) - penalty(e0, 1.0)).abs());
        violations += grid(50, 1.0).filter(|&e| penalty_surrogate(e, e0, 1.0) > penalty(e, 1.0) + 1e-15).count();
    }
    for (b0, p0) in [(0.3, 2.0), (1.0, 20.0), (0.05, 13.0)] {
        worst = worst.max((theta_surrogate(b0, p0, b0, p0) - b0 * p0).abs() / (b0 * p0));
        for b in grid(50, 1.0) {
            violations += grid(200, 20.0)
                .filter(|&phi| theta_surrogate(b, phi, b0, p0) > b * phi + 1e-12 * (1.0 + b * phi))
                .count();
        }
    }
    for (nu0, psi) in [(1.0, 0.5), (1e6, 3e6), (4.0, 40.0)] {
        let exact = |nu: f64| (1.0 + psi / nu).log2();
        let at = log_recip_lb(nu0, nu0, psi).unwrap_or(f64::NAN);
        worst = worst.max((at - exact(nu0)).abs() / exact(nu0));
        violations += (0..500)
            .map(|i| nu0 * 10f64.powf(-1.0 + i as f64 / 250.0))
            .filter(|&nu| log_recip_lb(nu, nu0, psi).map_or(true, |v| v > exact(nu) + 1e-12 * (1.0 + exact(nu))))
            .count();
    }
    Check {
        name: "surrogate bounds",
        pass: violations == 0 && worst <= 1e-12,
        detail: format!("{violations} violations, tightness error {worst:.1e}"),
    }
}

fn fading_bound(seed: u64) -> Check {
    let scen = tiny(seed);
    let traj = Trajectory::straight(&scen);
    let ctx = RateContext::new(&scen, &traj);
    let h = scen.uav.altitude_m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut below = 0;
    let tuples = 20;
    for i in 0..tuples {
        let b = rng.random_range(0.01..=1.0);
        let p = rng.random_range(0.0..=1.0) * scen.uav.p_max_w;
        let x = rng.random_range(0.0..1500.0);
        let lb = ctx.access_rate_lb(b, p, [x, 0.0], [0.0, 0.0]);
        match monte_carlo_rate(&scen, b, p, (h * h + x * x).sqrt(), 20_000, seed + i, Exec::Sequential) {
            Ok(mc) if mc.mean >= lb - 3.0 * mc.stderr => {}
            _ => below += 1,
        }
    }
    Check {
        name: "rate lower bound (Monte Carlo)",
        pass: below == 0,
        detail: format!("{below}/{tuples} tuples below the bound"),
    }
}

fn cache_oracle(seed: u64, opts: &SolveOptions) -> Check {
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for s in seed..seed + INSTANCES {
        let scen = tiny(s);
        let gap = (|| -> Option<f64> {
            let init = initialize(&scen).ok()?;
            let sched = run_cache_schedule(&scen, &init, opts).ok()?;
            let ours = RateContext::new(&scen, &init.traj).min_throughput(&sched.rounded, &init.alloc).ok()?;
            let best = oracle_cache_exhaustive(&scen, &init.alloc, &init.traj).ok()?;
            Some(((best.objective - ours) / best.objective).abs())
        })();
        match gap {
            Some(g) => worst = worst.max(g),
            None => errors += 1,
        }
    }
    Check {
        name: "cache placement vs enumeration",
        pass: errors == 0 && worst <= 0.01,
        detail: format!("worst gap {worst:.2e}, {errors} failed instances"),
    }
}

fn resource_oracle(seed: u64) -> Check {
    let mut slices = 0;
    let mut bad = 0;
    for s in seed..seed + INSTANCES {
        let scen = tiny(s);
        let Ok(prob) = initialize(&scen)
            .map_err(|e| e.to_string())
            .and_then(|it| ResourceProblem::from_iterate(&scen, &it).map_err(|e| e.to_string()))
        else {
            bad += 1;
            continue;
        };
        for n in 0..prob.slots() {
            let slice = prob.slot(n);
            slices += 1;
            let ok = match (refine_resource_program(&slice, 1e-10, 200, 1e-9), oracle_resource_grid(&slice, 200)) {
                (Ok((_, ours)), Ok(grid)) => {
                    (ours - grid.value).abs() <= grid.two_step_variation.max(1e-9 * grid.value)
                }
                _ => false,
            };
            bad += usize::from(!ok);
        }
    }
    Check {
        name: "resource allocation vs grid",
        pass: bad == 0,
        detail: format!("{bad}/{slices} slices outside two grid steps"),
    }
}

fn driver(seed: u64, opts: &SolveOptions) -> Check {
    let mut problems = Vec::new();
    for s in seed..seed + INSTANCES {
        let scen = tiny(s);
        let runs: Vec<_> = Scheme::ALL.iter().map(|&sc| (sc, run_scheme(&scen, opts, sc))).collect();
        let Ok(prop) = &runs[0].1 else {
            problems.push(format!("seed {s}: proposed failed"));
            continue;
        };
        for (sc, r) in &runs {
            match r {
                Ok(sol) => {
                    if sol.objective_history.windows(2).any(|w| w[1] < w[0]) {
                        problems.push(format!("seed {s}: {sc} not monotone"));
                    }
                    if sol.objective() > prop.objective() * (1.0 + 1e-6) {
                        problems.push(format!("seed {s}: {sc} beats proposed"));
                    }
                }
                Err(e) => problems.push(format!("seed {s}: {sc}: {e}")),
            }
        }
    }
    Check {
        name: "monotone histories, proposed dominates",
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{INSTANCES} instances x 4 schemes")
        } else {
            problems.join("; ")
        },
    }
}

pub fn run_all(seed: u64, opts: &SolveOptions) -> Vec<Check> {
    vec![
        surrogates(),
        fading_bound(seed),
        cache_oracle(seed, opts),
        resource_oracle(seed),
        driver(seed, opts),
    ]
}

pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| format!("{:<width$}  {}  {}\n", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail))
        .collect()
}
