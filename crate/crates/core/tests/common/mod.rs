#![allow(dead_code)]

use skycache::scenario::{Scenario, ScenarioDefaults};

/// Default parameters with the sizes used across the integration tests.
pub fn scenario(seed: u64, users: usize, slots: usize, files: usize, capacity: usize, file_bits: f64) -> Scenario {
    let d = ScenarioDefaults {
        slot_count: slots,
        file_count: files,
        cache_capacity_files: capacity,
        file_size_bits: file_bits,
        ..ScenarioDefaults::default()
    };
    d.generate(seed, users, 1000.0)
}

/// The medium instance family: K=4, N=40, F=10, S=3, Q=5 Mbit.
pub fn medium(seed: u64) -> Scenario {
    scenario(seed, 4, 40, 10, 3, 5e6)
}

/// Tiny instances for exhaustive cache checks: F=4, S=2, K=2, N=6 with short,
/// feasible end points.
pub fn tiny(seed: u64) -> Scenario {
    let mut s = scenario(seed, 2, 6, 4, 2, 0.5e6);
    s.uav.start = [450.0, 500.0];
    s.uav.end = [550.0, 550.0];
    s
}
