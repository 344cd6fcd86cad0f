//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skycache::bcd::{initialize, run_cache_schedule, run_scheme, Scheme, Solution, SolveOptions};
use skycache::channel::orbital_velocity;
use skycache::harness::{
    monte_carlo_rate, oracle_cache_exhaustive, oracle_resource_grid, run_sweep, SweepParameter, SweepSpec,
};
use skycache::scenario::{generate_scenario, noise_power_w, w_to_dbm};
use skycache::subproblems::{
    log_recip_lb, penalty, penalty_surrogate, refine_resource_program, theta_surrogate, ResourceProblem,
};
use skycache::{Exec, RateContext};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

fn orbital_speed() -> Outcome {
    let v = orbital_velocity(2000e3);
    outcome((v - 6900.5).abs() <= 0.5, format!("v = {v:.3} m/s, expected 6900.5 ± 0.5"))
}

fn noise_power() -> Outcome {
    let dbm = w_to_dbm(noise_power_w(20e6).expect("positive bandwidth"));
    outcome((dbm + 101.0).abs() <= 0.05, format!("σ² = {dbm:.4} dBm, expected -101 ± 0.05"))
}

fn surrogates() -> Outcome {
    let mut worst_tight: f64 = 0.0;
    let mut violations = 0usize;
    let mut points = 0usize;
    let grid = |n: usize, hi: f64| (0..=n).map(move |i| hi * i as f64 / n as f64);

    // Penalty κη(η-1): tangent at η0 is a global under-estimator.
    for kappa in [0.1, 1.0, 10.0] {
        for e0 in grid(100, 1.0) {
            let exact = penalty(e0, kappa);
            worst_tight = worst_tight.max((penalty_surrogate(e0, e0, kappa) - exact).abs() / exact.abs().max(1.0));
            for e in grid(100, 1.0) {
                points += 1;
                if penalty_surrogate(e, e0, kappa) > kappa * e * (e - 1.0) + 1e-15 {
                    violations += 1;
                }
            }
        }
    }
    // Θ(b, φ) ≤ bφ on [0,1]×[0,20], tight at the expansion point.
    for &(b0, p0) in &[(0.0, 0.0), (0.3, 2.0), (1.0, 20.0), (0.5, 7.5), (0.05, 13.0)] {
        worst_tight = worst_tight.max((theta_surrogate(b0, p0, b0, p0) - b0 * p0).abs() / (b0 * p0).abs().max(1.0));
        for b in grid(100, 1.0) {
            for phi in grid(2000, 20.0) {
                points += 1;
                if theta_surrogate(b, phi, b0, p0) > b * phi + 1e-12 * (1.0 + b * phi) {
                    violations += 1;
                }
            }
        }
    }
    // Tangent of log₂(1 + ψ/ν) in ν.
    for &(nu0, psi) in &[(1.0, 0.5), (1e6, 3e6), (2.5, 1e-3), (1e3, 0.0), (4.0, 40.0)] {
        let exact = |nu: f64| (1.0 + psi / nu).log2();
        let tight = log_recip_lb(nu0, nu0, psi).expect("positive slack");
        worst_tight = worst_tight.max((tight - exact(nu0)).abs() / exact(nu0).abs().max(1.0));
        for i in 0..1000 {
            let nu = nu0 * 10f64.powf(-1.0 + 2.0 * i as f64 / 999.0);
            points += 1;
            if log_recip_lb(nu, nu0, psi).expect("positive slack") > exact(nu) + 1e-12 * (1.0 + exact(nu)) {
                violations += 1;
            }
        }
    }
    outcome(
        worst_tight <= 1e-12 && violations == 0,
        format!("worst tightness error {worst_tight:.1e}, {violations} direction violations in {points} points"),
    )
}

fn rate_lower_bound() -> Outcome {
    let scen = generate_scenario(1, 4, 1000.0);
    let traj = skycache::Trajectory::straight(&scen);
    let ctx = RateContext::new(&scen, &traj);
    let h = scen.uav.altitude_m;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fails = 0;
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let b = rng.random_range(0.01..=1.0);
        let p = rng.random_range(0.0..=1.0) * scen.uav.p_max_w;
        let horiz = rng.random_range(0.0..1500.0);
        let d = (h * h + horiz * horiz).sqrt();
        let lb = ctx.access_rate_lb(b, p, [horiz, 0.0], [0.0, 0.0]);
        let mc = monte_carlo_rate(&scen, b, p, d, 100_000, 7 + i, Exec::Parallel).expect("sample count");
        let margin = (mc.mean - lb + 3.0 * mc.stderr) / mc.mean.max(1.0);
        worst = worst.min(margin);
        if mc.mean < lb - 3.0 * mc.stderr {
            fails += 1;
        }
    }
    outcome(fails == 0, format!("{fails}/200 tuples below bound, smallest relative margin {worst:.3e}"))
}

struct MediumRun {
    proposed: Result<Solution, String>,
    baselines: Vec<(Scheme, Result<Solution, String>)>,
}

fn medium_runs() -> Vec<MediumRun> {
    let seeds: Vec<u64> = (0..20).collect();
    let opts = SolveOptions::default();
    Exec::Parallel.map(&seeds, |&seed| {
        let scen = common::medium(seed);
        let run = |s| run_scheme(&scen, &opts, s).map_err(|e| e.to_string());
        MediumRun {
            proposed: run(Scheme::Proposed),
            baselines: [Scheme::Bs1, Scheme::Bs2, Scheme::Bs3].into_iter().map(|s| (s, run(s))).collect(),
        }
    })
}

fn monotone_convergence(runs: &[MediumRun]) -> Outcome {
    let mut bad = Vec::new();
    let mut max_iters = 0;
    for (seed, r) in runs.iter().enumerate() {
        match &r.proposed {
            Ok(sol) => {
                max_iters = max_iters.max(sol.outer_iterations());
                let mono = sol.objective_history.windows(2).all(|w| w[1] >= w[0] - 1e-9);
                if !mono || sol.outer_iterations() > 100 {
                    bad.push(format!("seed {seed}"));
                }
            }
            Err(e) => bad.push(format!("seed {seed}: {e}")),
        }
    }
    outcome(
        bad.is_empty(),
        format!("{}/20 monotone within 100 passes (most passes {max_iters}){}", 20 - bad.len(), list(&bad)),
    )
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", items.join(", "))
    }
}

fn cache_oracle() -> Outcome {
    let opts = SolveOptions::default();
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for seed in 0..20 {
        let scen = common::tiny(seed);
        let init = initialize(&scen).expect("tiny instances are feasible");
        let sched = run_cache_schedule(&scen, &init, &opts).expect("cache LP solves");
        let ctx = RateContext::new(&scen, &init.traj);
        let ours = ctx.min_throughput(&sched.rounded, &init.alloc).unwrap_or(0.0);
        let best = oracle_cache_exhaustive(&scen, &init.alloc, &init.traj).expect("within enumeration limit");
        let gap = (best.objective - ours) / best.objective;
        worst = worst.max(gap.abs());
        if gap.abs() > 0.01 {
            bad.push(format!("seed {seed}"));
        }
    }
    outcome(bad.is_empty(), format!("worst relative gap {worst:.2e} over 20 instances{}", list(&bad)))
}

fn resource_oracle() -> Outcome {
    let mut bad = Vec::new();
    let mut slices = 0;
    let mut worst: f64 = 0.0;
    let mut scenarios: Vec<_> = (0..5).map(common::tiny).collect();
    let mut single = common::tiny(11);
    single.users.truncate(1);
    scenarios.push(single);
    for (i, scen) in scenarios.iter().enumerate() {
        let init = initialize(scen).expect("tiny instances are feasible");
        let prob = ResourceProblem::from_iterate(scen, &init).expect("delivery slots exist");
        for n in 0..prob.slots() {
            let slice = prob.slot(n);
            let (_, ours) = refine_resource_program(&slice, 1e-10, 200, 1e-9).expect("slice solves");
            let grid = oracle_resource_grid(&slice, 200).expect("one slot, at most two users");
            slices += 1;
            let tol = grid.two_step_variation.max(1e-9 * grid.value);
            worst = worst.max((ours - grid.value).abs() / tol);
            if (ours - grid.value).abs() > tol {
                bad.push(format!("scenario {i} slot {n}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{slices} slices, largest gap {worst:.3} of the two-step tolerance{}", list(&bad)),
    )
}

fn dominance(runs: &[MediumRun]) -> Outcome {
    let mut bad = Vec::new();
    let mut smallest_lead = f64::INFINITY;
    for (seed, r) in runs.iter().enumerate() {
        let Ok(p) = &r.proposed else {
            bad.push(format!("seed {seed}: proposed failed"));
            continue;
        };
        for (scheme, b) in &r.baselines {
            match b {
                Ok(b) => {
                    let lead = (p.objective() - b.objective()) / b.objective();
                    smallest_lead = smallest_lead.min(lead);
                    if p.objective() < b.objective() * (1.0 - 1e-9) {
                        bad.push(format!("seed {seed} vs {scheme}"));
                    }
                }
                Err(e) => bad.push(format!("seed {seed} {scheme}: {e}")),
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("smallest relative lead over a baseline {smallest_lead:.3e}{}", list(&bad)),
    )
}

fn nondecreasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9))
}

fn trends() -> Outcome {
    let opts = SolveOptions::default();
    let base = generate_scenario(7, 4, 1000.0);
    let sweep = |param, values: Vec<f64>, schemes: Vec<Scheme>, scen: &skycache::Scenario| {
        let spec = SweepSpec {
            parameter: param,
            values,
            schemes,
            seed: 7,
            repetitions: 1,
        };
        run_sweep(&spec, scen, &opts, Exec::Parallel).expect("valid sweep spec")
    };
    let slots = sweep(SweepParameter::SlotCount, vec![40.0, 80.0, 120.0, 160.0], vec![Scheme::Proposed], &base);
    let slot_tp: Vec<f64> = slots.iter().map(|r| r.min_tp_bits).collect();

    let mut small_files = base.clone();
    small_files.catalog.file_size_bits = 5e6;
    let cache = sweep(SweepParameter::CacheSize, vec![0.0, 2.0, 5.0, 10.0], vec![Scheme::Bs2], &small_files);
    let cache_tp: Vec<f64> = cache.iter().map(|r| r.min_tp_bits).collect();
    let cache_flat = cache_tp.iter().all(|v| v.is_finite() && close_rel(*v, cache_tp[0], 1e-9));

    let mut long = base.clone();
    long.slot_count = 120;
    let power = sweep(
        SweepParameter::PMax,
        (1..=8).map(|i| 5.0 * i as f64).collect(),
        vec![Scheme::Proposed],
        &long,
    );
    let power_tp: Vec<f64> = power.iter().map(|r| r.min_tp_bits).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.3e}", x)).collect::<Vec<_>>().join(" ");
    outcome(
        nondecreasing(&slot_tp) && cache_flat && nondecreasing(&power_tp),
        format!(
            "N sweep [{}] {}; BS2 over cache size [{}] {}; P_max sweep [{}] {}",
            fmt(&slot_tp),
            if nondecreasing(&slot_tp) { "nondecreasing" } else { "NOT monotone" },
            fmt(&cache_tp),
            if cache_flat { "constant" } else { "NOT constant" },
            fmt(&power_tp),
            if nondecreasing(&power_tp) { "nondecreasing" } else { "NOT monotone" },
        ),
    )
}

fn binarity(runs: &[MediumRun]) -> Outcome {
    let solved: Vec<&Solution> = runs.iter().filter_map(|r| r.proposed.as_ref().ok()).collect();
    let binary = solved.iter().filter(|s| s.binarity_gap <= 1e-3 && !s.cache_fallback).count();
    let flagged = solved.iter().filter(|s| s.binarity_gap > 1e-3).all(|s| s.cache_fallback);
    let share = binary as f64 / runs.len() as f64;
    outcome(
        share >= 0.9 && flagged,
        format!("{binary}/{} runs binary without fallback; non-binary runs flagged: {flagged}", runs.len()),
    )
}

fn main() {
    let start = Instant::now();
    let mut all_pass = true;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        all_pass &= o.pass;
        println!(
            "criterion {id:>2} {} {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    };
    report(1, "orbital velocity", &mut orbital_speed);
    report(2, "noise power", &mut noise_power);
    report(3, "surrogate tightness and direction", &mut surrogates);
    report(4, "rate lower bound under fading", &mut rate_lower_bound);
    let t = Instant::now();
    let runs = medium_runs();
    println!("(20 medium scenarios x 4 schemes solved in {:.1} s)", t.elapsed().as_secs_f64());
    report(5, "monotone convergence", &mut || monotone_convergence(&runs));
    report(6, "cache placement vs exhaustive oracle", &mut cache_oracle);
    report(7, "resource allocation vs grid oracle", &mut resource_oracle);
    report(8, "dominance over baselines", &mut || dominance(&runs));
    report(9, "parameter trends", &mut trends);
    report(10, "cache binarity", &mut || binarity(&runs));
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !all_pass {
        std::process::exit(1);
    }
}
