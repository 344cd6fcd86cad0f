//! Decision variables shared by the channel model, subproblems and driver.

use crate::scenario::Scenario;

/// Per-file caching variable, relaxed to `[0, 1]` during optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheVector {
    pub eta: Vec<f64>,
}

impl CacheVector {
    pub fn zeros(file_count: usize) -> Self {
        Self {
            eta: vec![0.0; file_count],
        }
    }

    pub fn from_files(file_count: usize, cached: &[usize]) -> Self {
        let mut eta = vec![0.0; file_count];
        for &f in cached {
            eta[f] = 1.0;
        }
        Self { eta }
    }

    pub fn total(&self) -> f64 {
        self.eta.iter().sum()
    }

    /// `max_f min(η_f, 1 - η_f)`: zero exactly when the vector is binary.
    pub fn binarity_gap(&self) -> f64 {
        self.eta.iter().fold(0.0, |m: f64, &e| m.max(e.min(1.0 - e)))
    }
}

/// Bandwidth fractions and transmit powers, indexed `[slot - 1][user]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub b: Vec<Vec<f64>>,
    /// Watts.
    pub p: Vec<Vec<f64>>,
}

impl Allocation {
    /// `b = 1/K`, `p = P_max/K` in every slot.
    pub fn uniform(scen: &Scenario) -> Self {
        let k = scen.user_count();
        let n = scen.slot_count;
        Self {
            b: vec![vec![1.0 / k as f64; k]; n],
            p: vec![vec![scen.uav.p_max_w / k as f64; k]; n],
        }
    }
}

/// Waypoints `q_0 ..= q_N` in metres.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub q: Vec<[f64; 2]>,
}

impl Trajectory {
    /// `N` equal steps from the start to the end point.
    pub fn straight(scen: &Scenario) -> Self {
        let n = scen.slot_count;
        let (a, b) = (scen.uav.start, scen.uav.end);
        let q = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            })
            .collect();
        Self { q }
    }

    /// Longest per-slot displacement.
    pub fn max_step(&self) -> f64 {
        self.q
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .fold(0.0, f64::max)
    }
}

/// Everything carried from one block update to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub eta: CacheVector,
    pub alloc: Allocation,
    pub traj: Trajectory,
    /// True min-throughput of `(eta, alloc, traj)` in bits.
    pub chi: f64,
    pub kappa: f64,
    /// Spectral efficiency `log₂(1 + SNR)` per `[slot - 1][user]`, tight at `alloc`.
    pub slack_phi: Vec<Vec<f64>>,
    /// `(H² + ‖q_n - w_k‖²)^(α/2)` per `[slot - 1][user]`, tight at `traj`.
    pub slack_nu: Vec<Vec<f64>>,
    /// Receive SNR numerator `e^{-E} p β₀ / σ²` per `[slot - 1][user]`.
    pub psi: Vec<Vec<f64>>,
}
