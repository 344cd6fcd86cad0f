mod common;

use proptest::prelude::*;
use skycache::channel::{min_throughput, orbital_velocity, uav_user_distance, user_throughput, RateContext};
use skycache::{Allocation, CacheVector, Trajectory};

#[test]
fn doubling_distance_costs_six_db() {
    let s = common::medium(1);
    let traj = Trajectory::straight(&s);
    let ctx = RateContext::new(&s, &traj);
    let w = [0.0, 0.0];
    let h = s.uav.altitude_m;
    let near = ctx.access_gain_per_w(w, w);
    let far = ctx.access_gain_per_w([h * 3f64.sqrt(), 0.0], w);
    assert!((uav_user_distance([h * 3f64.sqrt(), 0.0], w, h) - 2.0 * h).abs() < 1e-9);
    assert!((10.0 * (near / far).log10() - 6.0206).abs() < 1e-4);
}

#[test]
fn zero_resources_give_zero_rate() {
    let s = common::medium(1);
    let traj = Trajectory::straight(&s);
    let ctx = RateContext::new(&s, &traj);
    let w = s.users[0].position;
    assert_eq!(ctx.access_rate_lb(0.0, s.uav.p_max_w, traj.q[1], w), 0.0);
    assert_eq!(ctx.access_rate_lb(0.5, 0.0, traj.q[1], w), 0.0);
}

#[test]
fn satellite_moves_at_orbital_speed() {
    let s = common::medium(2);
    let traj = Trajectory::straight(&s);
    let ctx = RateContext::new(&s, &traj);
    let v = orbital_velocity(s.satellite.altitude_m);
    for pair in ctx.sat_positions.windows(2) {
        let d = ((pair[1][0] - pair[0][0]).powi(2) + (pair[1][1] - pair[0][1]).powi(2)).sqrt();
        assert!(d <= v * s.slot_duration_s * (1.0 + 1e-12));
    }
    for pair in ctx.backhaul_distances.windows(2) {
        assert!((pair[1] - pair[0]).abs() <= v * s.slot_duration_s + s.max_step_m() + 1e-6);
    }
}

#[test]
fn delivery_slot_rounds_up_partial_slots() {
    let mut s = common::medium(3);
    let traj = Trajectory::straight(&s);
    let rbar = RateContext::new(&s, &traj).mean_backhaul_rate;
    s.catalog.file_size_bits = 2.3 * s.slot_duration_s * rbar;
    let ctx = RateContext::new(&s, &traj);
    let none = CacheVector::zeros(s.catalog.file_count);
    assert_eq!(ctx.delivery_slot(0, &none).unwrap(), 4);
    let full = CacheVector::from_files(s.catalog.file_count, &[s.file_of(0)]);
    assert_eq!(ctx.backhaul_time(0, &full).unwrap(), 0.0);
    assert_eq!(ctx.delivery_slot(0, &full).unwrap(), 1);
    let mut half = CacheVector::zeros(s.catalog.file_count);
    half.eta[s.file_of(0)] = 0.5;
    let t0 = ctx.backhaul_time(0, &none).unwrap();
    assert!((ctx.backhaul_time(0, &half).unwrap() - 0.5 * t0).abs() <= 1e-12 * t0);
}

#[test]
fn files_beyond_horizon_are_reported() {
    let mut s = common::medium(3);
    s.catalog.file_size_bits = 1e12;
    let traj = Trajectory::straight(&s);
    let none = CacheVector::zeros(s.catalog.file_count);
    assert!(min_throughput(&s, &none, &Allocation::uniform(&s), &traj).is_err());
}

fn random_alloc(s: &skycache::Scenario, seed: u64) -> Allocation {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = s.user_count();
    let mut a = Allocation::uniform(s);
    for n in 0..s.slot_count {
        let bw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let pw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let (sb, sp) = (bw.iter().sum::<f64>(), pw.iter().sum::<f64>());
        a.b[n] = bw.iter().map(|x| x / sb).collect();
        a.p[n] = pw.iter().map(|x| x / sp * s.uav.p_max_w).collect();
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn throughput_grows_with_power(seed in 0u64..1000, k in 0usize..4, scale in 1.0f64..4.0) {
        let s = common::medium(seed);
        let traj = Trajectory::straight(&s);
        let eta = CacheVector::from_files(s.catalog.file_count, &[0, 1, 2]);
        let a = random_alloc(&s, seed);
        let mut b = a.clone();
        for row in &mut b.p {
            row[k] *= scale;
        }
        let lo = user_throughput(&s, k, &eta, &a, &traj);
        let hi = user_throughput(&s, k, &eta, &b, &traj);
        if let (Ok(lo), Ok(hi)) = (lo, hi) {
            prop_assert!(hi >= lo);
        }
    }

    #[test]
    fn caching_never_delays_delivery(seed in 0u64..1000, lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let s = common::medium(seed);
        let traj = Trajectory::straight(&s);
        let ctx = RateContext::new(&s, &traj);
        let f = s.file_of(0);
        let mut a = CacheVector::zeros(s.catalog.file_count);
        let mut b = a.clone();
        a.eta[f] = lo;
        b.eta[f] = hi;
        if let Ok(na) = ctx.delivery_slot(0, &a) {
            prop_assert!(ctx.delivery_slot(0, &b).unwrap() <= na);
        }
        let alloc = random_alloc(&s, seed);
        if let (Ok(ta), Ok(tb)) = (ctx.user_throughput(0, &a, &alloc), ctx.user_throughput(0, &b, &alloc)) {
            prop_assert!(tb >= ta * (1.0 - 1e-12));
        }
    }

    #[test]
    fn min_is_permutation_invariant(seed in 0u64..1000, rot in 1usize..4) {
        let s = common::medium(seed);
        let traj = Trajectory::straight(&s);
        let eta = CacheVector::from_files(s.catalog.file_count, &[0, 1, 2]);
        let a = random_alloc(&s, seed);
        let mut p = s.clone();
        p.users.rotate_left(rot);
        let mut pa = a.clone();
        for n in 0..s.slot_count {
            pa.b[n].rotate_left(rot);
            pa.p[n].rotate_left(rot);
        }
        let x = min_throughput(&s, &eta, &a, &traj).unwrap();
        let y = min_throughput(&p, &eta, &pa, &traj).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * x.abs());
    }
}
