mod common;

use skycache::harness::{
    export_csv, export_summary, export_trajectory, export_users, monte_carlo_rate, oracle_cache_exhaustive,
    oracle_resource_grid, read_results_csv, summarize, HarnessError, RESULTS_HEADER,
};
use skycache::bcd::initialize;
use skycache::subproblems::ResourceProblem;
use skycache::{
    run_sweep, Allocation, CacheVector, Exec, Iterate, ResultRow, Scheme, SolveOptions, SweepParameter,
    SweepSpec, Trajectory,
};

#[test]
fn cache_oracle_counts_placements() {
    let s = common::tiny(1);
    let traj = Trajectory::straight(&s);
    let o = oracle_cache_exhaustive(&s, &Allocation::uniform(&s), &traj).unwrap();
    // C(4,0) + C(4,1) + C(4,2)
    assert_eq!(o.candidates, 11);
    assert!(o.eta.total() <= 2.0);
}

#[test]
fn cache_oracle_caches_requested_files_when_everything_fits() {
    let mut s = common::tiny(2);
    s.catalog.cache_capacity_files = s.catalog.file_count;
    let traj = Trajectory::straight(&s);
    let alloc = Allocation::uniform(&s);
    let o = oracle_cache_exhaustive(&s, &alloc, &traj).unwrap();
    let all = CacheVector::from_files(s.catalog.file_count, &(0..s.catalog.file_count).collect::<Vec<_>>());
    let v_all = skycache::min_throughput(&s, &all, &alloc, &traj).unwrap();
    assert_eq!(o.objective, v_all);
}

#[test]
fn cache_oracle_refuses_large_catalogs() {
    let s = common::medium(1);
    let mut big = s.clone();
    big.catalog.file_count = 30;
    big.catalog.cache_capacity_files = 10;
    let err = oracle_cache_exhaustive(&big, &Allocation::uniform(&big), &Trajectory::straight(&big)).unwrap_err();
    assert!(matches!(err, HarnessError::TooManyCandidates { .. }));
}

#[test]
fn grid_oracle_single_user_takes_everything() {
    let mut s = common::scenario(4, 1, 40, 2, 1, 5e6);
    s.users[0].requested_file = 1;
    let it = Iterate::evaluate(
        &s,
        CacheVector::from_files(2, &[0]),
        Allocation::uniform(&s),
        Trajectory::straight(&s),
        0.0,
    )
    .unwrap();
    let prob = ResourceProblem::from_iterate(&s, &it).unwrap();
    let g = oracle_resource_grid(&prob.slot(3), 100).unwrap();
    assert_eq!((g.b[0], g.p_frac[0]), (1.0, 1.0));
    assert!(oracle_resource_grid(&prob, 100).is_err());
}

#[test]
fn grid_oracle_splits_evenly_between_twins() {
    let mut s = common::scenario(4, 2, 40, 2, 1, 5e6);
    s.users[0].position = [400.0, 350.0];
    s.users[1].position = [600.0, 350.0];
    for u in &mut s.users {
        u.requested_file = 1;
    }
    s.uav.start = [500.0, 0.0];
    s.uav.end = [500.0, 700.0];
    let it = Iterate::evaluate(
        &s,
        CacheVector::from_files(2, &[0]),
        Allocation::uniform(&s),
        Trajectory::straight(&s),
        0.0,
    )
    .unwrap();
    let prob = ResourceProblem::from_iterate(&s, &it).unwrap();
    let g = oracle_resource_grid(&prob.slot(10), 200).unwrap();
    assert!((g.b[0] - 0.5).abs() <= 1.0 / 200.0 + 1e-12, "{:?}", g.b);
    assert!((g.p_frac[0] - 0.5).abs() <= 1.0 / 200.0 + 1e-12, "{:?}", g.p_frac);
}

#[test]
fn monte_carlo_properties() {
    let s = common::medium(1);
    let h = s.uav.altitude_m;
    let zero = monte_carlo_rate(&s, 0.5, 0.0, h, 10_000, 3, Exec::Parallel).unwrap();
    assert_eq!((zero.mean, zero.stderr), (0.0, 0.0));
    let a = monte_carlo_rate(&s, 1.0, s.uav.p_max_w, h, 50_000, 3, Exec::Sequential).unwrap();
    let b = monte_carlo_rate(&s, 1.0, s.uav.p_max_w, h, 50_000, 3, Exec::Parallel).unwrap();
    assert_eq!(a, b);
    assert!(a.stderr > 0.0 && a.stderr < 0.01 * a.mean);
    assert!(monte_carlo_rate(&s, 1.0, s.uav.p_max_w, h, 9_999, 3, Exec::Parallel).is_err());
}

fn small_spec(parameter: SweepParameter, values: Vec<f64>) -> SweepSpec {
    SweepSpec {
        parameter,
        values,
        schemes: vec![Scheme::Proposed, Scheme::Bs3],
        seed: 5,
        repetitions: 2,
    }
}

#[test]
fn sweep_rows_are_ordered_and_consistent() {
    let base = common::tiny(3);
    let spec = small_spec(SweepParameter::PMax, vec![10.0, 20.0]);
    let opts = SolveOptions::default();
    let rows = run_sweep(&spec, &base, &opts, Exec::Parallel).unwrap();
    let keys: Vec<(Scheme, f64, u64)> = rows.iter().map(|r| (r.scheme, r.value, r.seed)).collect();
    assert_eq!(
        keys,
        vec![
            (Scheme::Proposed, 10.0, 5),
            (Scheme::Proposed, 10.0, 6),
            (Scheme::Proposed, 20.0, 5),
            (Scheme::Proposed, 20.0, 6),
            (Scheme::Bs3, 10.0, 5),
            (Scheme::Bs3, 10.0, 6),
            (Scheme::Bs3, 20.0, 5),
            (Scheme::Bs3, 20.0, 6),
        ]
    );
    for r in &rows {
        assert!(r.is_ok(), "{r:?}");
        assert_eq!(r.param, "p_max");
        assert!(r.total_tp_bits >= base.user_count() as f64 * r.min_tp_bits * (1.0 - 1e-12));
    }
    let seq = run_sweep(&spec, &base, &opts, Exec::Sequential).unwrap();
    for (a, b) in rows.iter().zip(&seq) {
        assert_eq!((a.min_tp_bits, a.total_tp_bits, a.iters), (b.min_tp_bits, b.total_tp_bits, b.iters));
    }
    let summary = summarize(&rows);
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|s| s.solved == 2 && s.repetitions == 2));
}

#[test]
fn sweep_marks_invalid_values() {
    let base = common::tiny(3);
    let mut spec = small_spec(SweepParameter::CacheSize, vec![1.0, 4.0]);
    spec.repetitions = 1;
    let rows = run_sweep(&spec, &base, &SolveOptions::default(), Exec::Sequential).unwrap();
    assert!(rows[0].is_ok());
    assert_eq!(rows[1].status, "error");
    assert!(rows[1].min_tp_bits.is_nan());
}

#[test]
fn sweep_spec_rules() {
    let err = SweepSpec::from_toml("parameter = \"slot_count\"\nvalues = []\n").unwrap_err();
    assert!(matches!(err, HarnessError::Spec(_)));
    let spec = SweepSpec::from_toml("parameter = \"p_max\"\nvalues = [5.0, 10.0]\nschemes = [\"bs2\"]\n").unwrap();
    assert_eq!((spec.schemes.clone(), spec.seed, spec.repetitions), (vec![Scheme::Bs2], 0, 1));
    assert!(SweepSpec::from_toml("parameter = \"p_max\"\nvalues = [1.0]\nspeed = 3\n").is_err());
    let base = common::tiny(1);
    let bad = SweepSpec {
        values: vec![],
        ..spec
    };
    assert!(run_sweep(&bad, &base, &SolveOptions::default(), Exec::Sequential).is_err());
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        ResultRow {
            scheme: Scheme::Proposed,
            param: "slot_count".into(),
            value: 60.0,
            min_tp_bits: 1.0 / 3.0 * 1e7,
            total_tp_bits: std::f64::consts::PI * 1e8,
            iters: 7,
            wall_s: 0.125,
            seed: 3,
            status: "converged".into(),
        },
        ResultRow {
            scheme: Scheme::Bs2,
            param: "slot_count".into(),
            value: 60.0,
            min_tp_bits: f64::NAN,
            total_tp_bits: f64::NAN,
            iters: 0,
            wall_s: 0.0,
            seed: 3,
            status: "infeasible".into(),
        },
    ];
    let path = dir.path().join("results.csv");
    export_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
    let back = read_results_csv(&path).unwrap();
    assert_eq!(back[0], rows[0]);
    assert!(back[1].min_tp_bits.is_nan() && back[1].status == "infeasible");

    export_summary(&summarize(&rows), &dir.path().join("summary.csv")).unwrap();
    let s = common::tiny(1);
    let it = initialize(&s).unwrap();
    export_trajectory(&it.traj, &dir.path().join("traj.csv")).unwrap();
    export_users(&s, &dir.path().join("users.csv")).unwrap();
    let traj = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    assert_eq!(traj.lines().count(), s.slot_count + 2);
    assert!(read_results_csv(&dir.path().join("missing.csv")).is_err());
}
