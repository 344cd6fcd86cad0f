mod common;

use std::io::Write;

use proptest::prelude::*;
use skycache::channel::zipf_prob;
use skycache::scenario::{
    db_to_linear, dbm_to_w, load_scenario, load_scenario_with, noise_power_w, parse_scenario, w_to_dbm, ScenarioDefaults,
    ScenarioError,
};
use skycache::{generate_scenario, Scenario};

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn loads_units_from_file() {
    let f = write_temp(
        "[uav]\np_max_dbm = 15.0\n[radio]\nbeta0_db = -40.0\n[catalog]\nfile_size_mbits = 2.5\n",
    );
    let s = load_scenario(f.path()).unwrap();
    assert!((s.uav.p_max_w - 0.03162).abs() < 1e-5);
    assert!((s.radio.beta0 - 1e-4).abs() < 1e-16);
    assert_eq!(s.catalog.file_size_bits, 2.5e6);
}

#[test]
fn cache_equal_to_catalog_fails_validation() {
    let f = write_temp("[catalog]\nfile_count = 6\ncache_capacity_files = 6\n");
    assert!(matches!(load_scenario(f.path()), Err(ScenarioError::Invalid(_))));
}

#[test]
fn missing_file_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nowhere.toml");
    let err = load_scenario(&path).unwrap_err();
    assert!(matches!(err, ScenarioError::Io { .. }));
    assert!(err.to_string().contains("nowhere.toml"), "{err}");
}

#[test]
fn overrides_take_precedence_over_file() {
    let f = write_temp("[time]\nslot_count = 90\n");
    let s = load_scenario_with(f.path(), &["time.slot_count=100".into()]).unwrap();
    assert_eq!(s.slot_count, 100);
    assert!(load_scenario_with(f.path(), &["time.slot_count".into()]).is_err());
}

#[test]
fn noise_floor_examples() {
    assert!((w_to_dbm(noise_power_w(1.0).unwrap()) + 174.0).abs() < 1e-9);
    assert!((w_to_dbm(noise_power_w(2e6).unwrap()) + 110.99).abs() < 5e-3);
    assert!(noise_power_w(-1.0).is_err());
}

#[test]
fn conversions_invert() {
    for x in [-30.0, 0.0, 15.0, 49.03] {
        assert!((w_to_dbm(dbm_to_w(x)) - x).abs() < 1e-12);
    }
    assert!((db_to_linear(-40.0) - 1e-4).abs() < 1e-18);
}

#[test]
fn generation_is_deterministic_and_in_area() {
    let a = generate_scenario(11, 7, 1000.0);
    let b = generate_scenario(11, 7, 1000.0);
    assert_eq!(a, b);
    assert_ne!(a, generate_scenario(12, 7, 1000.0));
    assert_eq!(a.user_count(), 7);
    for u in &a.users {
        assert!((0.0..=1000.0).contains(&u.position[0]) && (0.0..=1000.0).contains(&u.position[1]));
        assert!((1..=a.catalog.file_count).contains(&u.requested_file));
    }
    a.validate().unwrap();
}

#[test]
fn redrawn_users_keep_parameters() {
    let a = common::medium(3);
    let b = a.with_redrawn_users(4);
    assert_ne!(a.users, b.users);
    assert_eq!((a.catalog.clone(), a.uav.clone(), a.slot_count), (b.catalog, b.uav, b.slot_count));
}

#[test]
fn requests_follow_zipf() {
    // 30 files, 20 users, 600 seeds: 12000 draws.
    let d = ScenarioDefaults::default();
    let f_count = d.file_count;
    let mut counts = vec![0usize; f_count];
    let mut total = 0usize;
    for seed in 0..600 {
        for u in d.generate(seed, 20, 1000.0).users {
            counts[u.requested_file - 1] += 1;
            total += 1;
        }
    }
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let e = total as f64 * zipf_prob(i + 1, f_count, d.zipf_exponent).unwrap();
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 29 degrees of freedom, 0.1% upper quantile.
    assert!(chi2 < 58.3, "chi2 = {chi2}");
}

fn roundtrip_close(a: &Scenario, b: &Scenario) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    let close2 = |x: [f64; 2], y: [f64; 2]| close(x[0], y[0]) && close(x[1], y[1]);
    a.users.len() == b.users.len()
        && a.users.iter().zip(&b.users).all(|(u, v)| {
            u.id == v.id && u.requested_file == v.requested_file && close2(u.position, v.position)
        })
        && close(a.area_side_m, b.area_side_m)
        && a.catalog.file_count == b.catalog.file_count
        && a.catalog.cache_capacity_files == b.catalog.cache_capacity_files
        && close(a.catalog.file_size_bits, b.catalog.file_size_bits)
        && close(a.catalog.zipf_exponent, b.catalog.zipf_exponent)
        && close(a.satellite.altitude_m, b.satellite.altitude_m)
        && close2(a.satellite.initial_position, b.satellite.initial_position)
        && close(a.satellite.tx_power_w, b.satellite.tx_power_w)
        && close(a.satellite.backhaul_bandwidth_hz, b.satellite.backhaul_bandwidth_hz)
        && close(a.uav.altitude_m, b.uav.altitude_m)
        && close(a.uav.v_max_mps, b.uav.v_max_mps)
        && close(a.uav.p_max_w, b.uav.p_max_w)
        && close(a.uav.access_bandwidth_hz, b.uav.access_bandwidth_hz)
        && close2(a.uav.start, b.uav.start)
        && close2(a.uav.end, b.uav.end)
        && close(a.radio.beta0, b.radio.beta0)
        && close(a.radio.noise_psd_dbm_per_hz, b.radio.noise_psd_dbm_per_hz)
        && a.slot_count == b.slot_count
        && close(a.slot_duration_s, b.slot_duration_s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toml_round_trip(seed in 0u64..10_000, users in 1usize..12, pmax in -10.0f64..30.0, q in 0.1f64..80.0) {
        let d = ScenarioDefaults { p_max_dbm: pmax, file_size_bits: q * 1e6, ..ScenarioDefaults::default() };
        let s = d.generate(seed, users, 1000.0);
        let back = parse_scenario(&s.to_toml(), &[]).unwrap();
        prop_assert!(roundtrip_close(&s, &back), "{s:?}\n{back:?}");
    }

    #[test]
    fn generated_scenarios_validate(seed in 0u64..10_000, users in 1usize..20) {
        let s = generate_scenario(seed, users, 1000.0);
        prop_assert!(s.validate().is_ok());
        let total: f64 = (1..=s.catalog.file_count)
            .map(|f| zipf_prob(f, s.catalog.file_count, s.catalog.zipf_exponent).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
