//! Geometry, orbital motion, link rates and the per-user throughput objective.

use crate::scenario::Scenario;
use crate::state::{Allocation, CacheVector, Trajectory};

pub const GRAVITATIONAL_CONSTANT: f64 = 6.67259e-11;
pub const EARTH_MASS_KG: f64 = 5.9736e24;
pub const EARTH_RADIUS_M: f64 = 6.371e6;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("file index {file} outside 1..={count}")]
    FileIndex { file: usize, count: usize },
    #[error("zipf exponent {0} outside [0, 1)")]
    ZipfExponent(f64),
    #[error("user {user}: backhaul rate is zero, so an uncached file never arrives")]
    UnboundedTime { user: usize },
    #[error("user {user}: backhaul delivery completes in slot {slot}, beyond the {horizon}-slot horizon")]
    DeliveryInfeasible {
        user: usize,
        slot: usize,
        horizon: usize,
    },
}

/// Zipf request probability of 1-based file `f` among `file_count` files.
pub fn zipf_prob(f: usize, file_count: usize, rho: f64) -> Result<f64, ChannelError> {
    if f == 0 || f > file_count {
        return Err(ChannelError::FileIndex {
            file: f,
            count: file_count,
        });
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(ChannelError::ZipfExponent(rho));
    }
    let norm: f64 = (1..=file_count).map(|i| (i as f64).powf(-rho)).sum();
    Ok((f as f64).powf(-rho) / norm)
}

/// Circular orbital speed at altitude `altitude_m`.
pub fn orbital_velocity(altitude_m: f64) -> f64 {
    (GRAVITATIONAL_CONSTANT * EARTH_MASS_KG / (EARTH_RADIUS_M + altitude_m)).sqrt()
}

pub fn uav_user_distance(q: [f64; 2], w: [f64; 2], altitude_m: f64) -> f64 {
    (altitude_m * altitude_m + sq_dist(q, w)).sqrt()
}

pub(crate) fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// `⌈x⌉`, forgiving round-off just above an integer.
fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Link-level quantities of one scenario along one trajectory.
#[derive(Clone, Debug)]
pub struct RateContext<'a> {
    pub scen: &'a Scenario,
    pub traj: &'a Trajectory,
    pub sat_speed_mps: f64,
    /// Satellite position for slots `0..=N`.
    pub sat_positions: Vec<[f64; 3]>,
    /// Satellite-UAV distance for slots `0..=N`.
    pub backhaul_distances: Vec<f64>,
    /// Backhaul rate for slots `0..=N`, bits/s.
    pub backhaul_rates: Vec<f64>,
    /// Mean backhaul rate over slots `1..=N`.
    pub mean_backhaul_rate: f64,
    pub backhaul_noise_w: f64,
    pub access_noise_w: f64,
}

impl<'a> RateContext<'a> {
    pub fn new(scen: &'a Scenario, traj: &'a Trajectory) -> Self {
        let n = scen.slot_count;
        debug_assert_eq!(traj.q.len(), n + 1);
        let v = orbital_velocity(scen.satellite.altitude_m);
        let s0 = scen.satellite.initial_position;
        let sat_positions: Vec<[f64; 3]> = (0..=n)
            .map(|i| {
                [
                    s0[0] + v * i as f64 * scen.slot_duration_s,
                    s0[1],
                    scen.satellite.altitude_m,
                ]
            })
            .collect();
        let mut ctx = Self {
            scen,
            traj,
            sat_speed_mps: v,
            sat_positions,
            backhaul_distances: Vec::new(),
            backhaul_rates: Vec::new(),
            mean_backhaul_rate: 0.0,
            backhaul_noise_w: scen.backhaul_noise_w(),
            access_noise_w: scen.access_noise_w(),
        };
        ctx.backhaul_distances = (0..=n).map(|i| ctx.sat_uav_distance(i, traj.q[i])).collect();
        ctx.backhaul_rates = (0..=n).map(|i| ctx.backhaul_rate(i, traj.q[i])).collect();
        ctx.mean_backhaul_rate = ctx.backhaul_rates[1..].iter().sum::<f64>() / n as f64;
        ctx
    }

    pub fn sat_uav_distance(&self, slot: usize, q: [f64; 2]) -> f64 {
        let s = self.sat_positions[slot];
        let dz = s[2] - self.scen.uav.altitude_m;
        ((s[0] - q[0]).powi(2) + (s[1] - q[1]).powi(2) + dz * dz).sqrt()
    }

    pub fn backhaul_rate(&self, slot: usize, q: [f64; 2]) -> f64 {
        self.backhaul_rate_with_power(slot, q, self.scen.satellite.tx_power_w)
    }

    pub fn backhaul_rate_with_power(&self, slot: usize, q: [f64; 2], tx_power_w: f64) -> f64 {
        let d = self.sat_uav_distance(slot, q);
        let snr = tx_power_w * self.scen.radio.beta0 / (d.powf(self.scen.radio.alpha) * self.backhaul_noise_w);
        self.scen.satellite.backhaul_bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
    }

    /// `e^{-E} β₀ / (dist^α σ₂²)`: access SNR per watt of transmit power.
    pub fn access_gain_per_w(&self, q: [f64; 2], w: [f64; 2]) -> f64 {
        let r = &self.scen.radio;
        let d = uav_user_distance(q, w, self.scen.uav.altitude_m);
        (-r.euler_gamma).exp() * r.beta0 / (d.powf(r.alpha) * self.access_noise_w)
    }

    /// Lower bound on the expected access rate, bits/s.
    pub fn access_rate_lb(&self, b: f64, p: f64, q: [f64; 2], w: [f64; 2]) -> f64 {
        b * self.scen.uav.access_bandwidth_hz * (p * self.access_gain_per_w(q, w)).ln_1p() / std::f64::consts::LN_2
    }

    /// Seconds needed to push the uncached part of user `k`'s file over the backhaul.
    pub fn backhaul_time(&self, k: usize, eta: &CacheVector) -> Result<f64, ChannelError> {
        let e = eta.eta[self.scen.file_of(k)];
        if e >= 1.0 {
            return Ok(0.0);
        }
        if !(self.mean_backhaul_rate > 0.0) {
            return Err(ChannelError::UnboundedTime { user: k });
        }
        Ok((1.0 - e) * self.scen.catalog.file_size_bits / self.mean_backhaul_rate)
    }

    /// Slot `n₂ = 1 + ⌈t₁/δt⌉` after which user `k` can be served its file.
    pub fn delivery_slot(&self, k: usize, eta: &CacheVector) -> Result<usize, ChannelError> {
        let t = self.backhaul_time(k, eta)?;
        let slot = 1 + ceil_tolerant(t / self.scen.slot_duration_s) as usize;
        if slot > self.scen.slot_count {
            return Err(ChannelError::DeliveryInfeasible {
                user: k,
                slot,
                horizon: self.scen.slot_count,
            });
        }
        Ok(slot)
    }

    /// Weight of slots `1..=N` in user `k`'s throughput:
    /// `η` everywhere plus `1 - η` after the delivery slot.
    pub fn slot_weights(&self, k: usize, eta: &CacheVector) -> Result<Vec<f64>, ChannelError> {
        let n2 = self.delivery_slot(k, eta)?;
        Ok(weights_for(eta.eta[self.scen.file_of(k)], n2, self.scen.slot_count))
    }

    pub fn access_rates(&self, k: usize, alloc: &Allocation) -> Vec<f64> {
        let w = self.scen.users[k].position;
        (1..=self.scen.slot_count)
            .map(|n| self.access_rate_lb(alloc.b[n - 1][k], alloc.p[n - 1][k], self.traj.q[n], w))
            .collect()
    }

    /// Expected bits delivered to user `k`, weighted by its request probability.
    pub fn user_throughput(&self, k: usize, eta: &CacheVector, alloc: &Allocation) -> Result<f64, ChannelError> {
        let w = self.slot_weights(k, eta)?;
        let r = self.access_rates(k, alloc);
        let sum: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
        Ok(self.scen.slot_duration_s * self.scen.request_prob(k) * sum)
    }

    pub fn per_user_throughput(&self, eta: &CacheVector, alloc: &Allocation) -> Result<Vec<f64>, ChannelError> {
        (0..self.scen.user_count())
            .map(|k| self.user_throughput(k, eta, alloc))
            .collect()
    }

    pub fn min_throughput(&self, eta: &CacheVector, alloc: &Allocation) -> Result<f64, ChannelError> {
        Ok(self
            .per_user_throughput(eta, alloc)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

pub(crate) fn weights_for(eta_f: f64, delivery_slot: usize, slot_count: usize) -> Vec<f64> {
    (1..=slot_count)
        .map(|n| eta_f + if n > delivery_slot { 1.0 - eta_f } else { 0.0 })
        .collect()
}

pub fn user_throughput(
    scen: &Scenario,
    k: usize,
    eta: &CacheVector,
    alloc: &Allocation,
    traj: &Trajectory,
) -> Result<f64, ChannelError> {
    RateContext::new(scen, traj).user_throughput(k, eta, alloc)
}

pub fn min_throughput(
    scen: &Scenario,
    eta: &CacheVector,
    alloc: &Allocation,
    traj: &Trajectory,
) -> Result<f64, ChannelError> {
    RateContext::new(scen, traj).min_throughput(eta, alloc)
}
