//! Problem instances: users, catalog, satellite, UAV and radio parameters.
//!
//! Configuration files use human units (km, dBm, dB, MHz, Mbits). A
//! [`Scenario`] holds everything in SI units (m, W, Hz, bits, s) and is
//! immutable once validated.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::zipf_prob;

pub const EULER_GAMMA: f64 = 0.5772156649;
/// Thermal noise density used by [`noise_power_w`].
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("bandwidth must be positive, got {0} Hz")]
    Bandwidth(f64),
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Thermal noise power over `bandwidth_hz` at -174 dBm/Hz, in watts.
pub fn noise_power_w(bandwidth_hz: f64) -> Result<f64, ScenarioError> {
    noise_power_with_psd(THERMAL_NOISE_DBM_PER_HZ, bandwidth_hz)
}

pub fn noise_power_with_psd(psd_dbm_per_hz: f64, bandwidth_hz: f64) -> Result<f64, ScenarioError> {
    if !(bandwidth_hz > 0.0) {
        return Err(ScenarioError::Bandwidth(bandwidth_hz));
    }
    Ok(dbm_to_w(psd_dbm_per_hz + 10.0 * bandwidth_hz.log10()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundUser {
    pub id: usize,
    pub position: [f64; 2],
    /// 1-based file index.
    pub requested_file: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContentCatalog {
    pub file_count: usize,
    pub file_size_bits: f64,
    pub zipf_exponent: f64,
    pub cache_capacity_files: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SatelliteParams {
    pub altitude_m: f64,
    pub initial_position: [f64; 2],
    pub tx_power_w: f64,
    pub backhaul_bandwidth_hz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UavParams {
    pub altitude_m: f64,
    pub v_max_mps: f64,
    pub p_max_w: f64,
    pub access_bandwidth_hz: f64,
    pub start: [f64; 2],
    pub end: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadioParams {
    pub beta0: f64,
    pub alpha: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub euler_gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub users: Vec<GroundUser>,
    pub area_side_m: f64,
    pub catalog: ContentCatalog,
    pub satellite: SatelliteParams,
    pub uav: UavParams,
    pub radio: RadioParams,
    pub slot_count: usize,
    pub slot_duration_s: f64,
}

impl Scenario {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Request probability of user `k`'s file.
    pub fn request_prob(&self, k: usize) -> f64 {
        zipf_prob(
            self.users[k].requested_file,
            self.catalog.file_count,
            self.catalog.zipf_exponent,
        )
        .expect("validated scenario")
    }

    /// 0-based index of the file user `k` requests.
    pub fn file_of(&self, k: usize) -> usize {
        self.users[k].requested_file - 1
    }

    pub fn max_step_m(&self) -> f64 {
        self.uav.v_max_mps * self.slot_duration_s
    }

    pub fn access_noise_w(&self) -> f64 {
        noise_power_with_psd(self.radio.noise_psd_dbm_per_hz, self.uav.access_bandwidth_hz)
            .expect("validated scenario")
    }

    pub fn backhaul_noise_w(&self) -> f64 {
        noise_power_with_psd(
            self.radio.noise_psd_dbm_per_hz,
            self.satellite.backhaul_bandwidth_hz,
        )
        .expect("validated scenario")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        let c = &self.catalog;
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        if !(self.area_side_m > 0.0) {
            return bad(format!("area side must be positive, got {} m", self.area_side_m));
        }
        if c.file_count == 0 {
            return bad("file_count must be at least 1".into());
        }
        if c.cache_capacity_files >= c.file_count {
            return bad(format!(
                "cache capacity S = {} must be smaller than file count F = {}",
                c.cache_capacity_files, c.file_count
            ));
        }
        if !(c.file_size_bits > 0.0) {
            return bad(format!("file size must be positive, got {} bits", c.file_size_bits));
        }
        if !(c.zipf_exponent > 0.0 && c.zipf_exponent < 1.0) {
            return bad(format!("zipf exponent must lie in (0, 1), got {}", c.zipf_exponent));
        }
        let slack = 1e-9 * self.area_side_m;
        for u in &self.users {
            let [x, y] = u.position;
            if !(x >= -slack && y >= -slack && x <= self.area_side_m + slack && y <= self.area_side_m + slack) {
                return bad(format!(
                    "user {} at ({x}, {y}) m lies outside the {} m area",
                    u.id, self.area_side_m
                ));
            }
            if u.requested_file == 0 || u.requested_file > c.file_count {
                return bad(format!(
                    "user {} requests file {} outside 1..={}",
                    u.id, u.requested_file, c.file_count
                ));
            }
        }
        let s = &self.satellite;
        if !(s.altitude_m > 0.0) {
            return bad(format!("satellite altitude must be positive, got {} m", s.altitude_m));
        }
        if !(s.tx_power_w > 0.0) {
            return bad(format!("satellite power must be positive, got {} W", s.tx_power_w));
        }
        if !(s.backhaul_bandwidth_hz > 0.0) {
            return bad("backhaul bandwidth must be positive".into());
        }
        let u = &self.uav;
        if !(u.altitude_m > 0.0) {
            return bad(format!("UAV altitude must be positive, got {} m", u.altitude_m));
        }
        if !(u.v_max_mps > 0.0) {
            return bad(format!("UAV speed limit must be positive, got {} m/s", u.v_max_mps));
        }
        if !(u.p_max_w > 0.0) {
            return bad(format!("UAV power budget must be positive, got {} W", u.p_max_w));
        }
        if !(u.access_bandwidth_hz > 0.0) {
            return bad("access bandwidth must be positive".into());
        }
        let r = &self.radio;
        if !(r.beta0 > 0.0) {
            return bad(format!("beta0 must be positive, got {}", r.beta0));
        }
        if !(r.alpha >= 2.0) {
            return bad(format!("path-loss exponent must be at least 2, got {}", r.alpha));
        }
        if r.alpha != 2.0 {
            return bad(format!(
                "path-loss exponent {} is not supported; the trajectory block needs alpha = 2",
                r.alpha
            ));
        }
        if self.slot_count < 2 {
            return bad(format!("slot_count must be at least 2, got {}", self.slot_count));
        }
        if !(self.slot_duration_s > 0.0) {
            return bad(format!("slot duration must be positive, got {} s", self.slot_duration_s));
        }
        let dx = u.start[0] - u.end[0];
        let dy = u.start[1] - u.end[1];
        let reach = self.slot_count as f64 * self.max_step_m();
        if dx.hypot(dy) > reach * (1.0 + 1e-12) {
            return bad(format!(
                "endpoints are {:.3} m apart but the UAV can cover only {reach:.3} m",
                dx.hypot(dy)
            ));
        }
        Ok(())
    }

    /// Configuration with every user listed explicitly.
    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            users: UsersConfig {
                area_side_km: self.area_side_m / 1e3,
                count: Some(self.users.len()),
                seed: None,
                positions_km: Some(
                    self.users
                        .iter()
                        .map(|u| [u.position[0] / 1e3, u.position[1] / 1e3])
                        .collect(),
                ),
                requested_files: Some(self.users.iter().map(|u| u.requested_file).collect()),
            },
            catalog: CatalogConfig {
                file_count: self.catalog.file_count,
                file_size_mbits: self.catalog.file_size_bits / 1e6,
                zipf_exponent: self.catalog.zipf_exponent,
                cache_capacity_files: self.catalog.cache_capacity_files,
            },
            satellite: SatelliteConfig {
                altitude_km: self.satellite.altitude_m / 1e3,
                initial_position_km: km(self.satellite.initial_position),
                tx_power_dbm: w_to_dbm(self.satellite.tx_power_w),
                backhaul_bandwidth_mhz: self.satellite.backhaul_bandwidth_hz / 1e6,
            },
            uav: UavConfig {
                altitude_km: self.uav.altitude_m / 1e3,
                v_max_mps: self.uav.v_max_mps,
                p_max_dbm: w_to_dbm(self.uav.p_max_w),
                access_bandwidth_mhz: self.uav.access_bandwidth_hz / 1e6,
                start_km: km(self.uav.start),
                end_km: km(self.uav.end),
            },
            radio: RadioConfig {
                beta0_db: linear_to_db(self.radio.beta0),
                alpha: self.radio.alpha,
                noise_psd_dbm_per_hz: self.radio.noise_psd_dbm_per_hz,
                euler_gamma: self.radio.euler_gamma,
            },
            time: TimeConfig {
                slot_count: self.slot_count,
                slot_duration_s: self.slot_duration_s,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_config()).expect("scenario config always serializes")
    }

    /// Same parameters with freshly drawn user positions and requests.
    pub fn with_redrawn_users(&self, seed: u64) -> Scenario {
        let mut s = self.clone();
        s.users = draw_users(
            seed,
            self.users.len(),
            self.area_side_m,
            self.catalog.file_count,
            self.catalog.zipf_exponent,
        );
        s
    }
}

fn km(p: [f64; 2]) -> [f64; 2] {
    [p[0] / 1e3, p[1] / 1e3]
}

fn m(p: [f64; 2]) -> [f64; 2] {
    [p[0] * 1e3, p[1] * 1e3]
}

/// Index in `1..=F` drawn from the Zipf request distribution.
pub fn sample_zipf<R: Rng>(rng: &mut R, file_count: usize, rho: f64) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for f in 1..=file_count {
        acc += zipf_prob(f, file_count, rho).expect("valid index");
        if u < acc {
            return f;
        }
    }
    file_count
}

/// Uniform positions in `[0, area]²` and Zipf requests. Positions and requests
/// use separate ChaCha streams so fixing one does not perturb the other.
pub fn draw_users(seed: u64, count: usize, area_side_m: f64, file_count: usize, rho: f64) -> Vec<GroundUser> {
    let mut pos = ChaCha8Rng::seed_from_u64(seed);
    let mut req = ChaCha8Rng::seed_from_u64(seed);
    req.set_stream(1);
    (0..count)
        .map(|id| GroundUser {
            id,
            position: [
                pos.random_range(0.0..=area_side_m),
                pos.random_range(0.0..=area_side_m),
            ],
            requested_file: sample_zipf(&mut req, file_count, rho),
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub users: UsersConfig,
    #[serde(default)]
    pub catalog: CatalogConfig,
    #[serde(default)]
    pub satellite: SatelliteConfig,
    #[serde(default)]
    pub uav: UavConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub time: TimeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersConfig {
    pub area_side_km: f64,
    /// Number of users to generate when `positions_km` is absent.
    pub count: Option<usize>,
    /// Seed for generated positions and requests.
    pub seed: Option<u64>,
    pub positions_km: Option<Vec<[f64; 2]>>,
    /// 1-based file indices, one per user.
    pub requested_files: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogConfig {
    pub file_count: usize,
    pub file_size_mbits: f64,
    pub zipf_exponent: f64,
    pub cache_capacity_files: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SatelliteConfig {
    pub altitude_km: f64,
    pub initial_position_km: [f64; 2],
    pub tx_power_dbm: f64,
    pub backhaul_bandwidth_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavConfig {
    pub altitude_km: f64,
    pub v_max_mps: f64,
    pub p_max_dbm: f64,
    pub access_bandwidth_mhz: f64,
    pub start_km: [f64; 2],
    pub end_km: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub beta0_db: f64,
    pub alpha: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub euler_gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub slot_count: usize,
    pub slot_duration_s: f64,
}

/// Simulation-section parameter values used when a config omits a key.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDefaults {
    pub user_count: usize,
    pub area_side_m: f64,
    pub slot_count: usize,
    pub slot_duration_s: f64,
    pub v_max_mps: f64,
    pub file_count: usize,
    pub cache_capacity_files: usize,
    pub zipf_exponent: f64,
    pub file_size_bits: f64,
    pub access_bandwidth_hz: f64,
    pub backhaul_bandwidth_hz: f64,
    pub sat_tx_power_dbm: f64,
    pub p_max_dbm: f64,
    pub sat_altitude_m: f64,
    pub uav_altitude_m: f64,
    pub beta0_db: f64,
    pub alpha: f64,
    pub uav_start_m: [f64; 2],
    pub uav_end_m: [f64; 2],
    pub sat_start_m: [f64; 2],
}

impl Default for ScenarioDefaults {
    fn default() -> Self {
        Self {
            user_count: 4,
            area_side_m: 1000.0,
            slot_count: 80,
            slot_duration_s: 0.5,
            v_max_mps: 50.0,
            file_count: 30,
            cache_capacity_files: 10,
            zipf_exponent: 0.8,
            file_size_bits: 40e6,
            access_bandwidth_hz: 20e6,
            backhaul_bandwidth_hz: 50e6,
            sat_tx_power_dbm: 49.03,
            p_max_dbm: 15.0,
            sat_altitude_m: 2000e3,
            uav_altitude_m: 1e3,
            beta0_db: -40.0,
            alpha: 2.0,
            uav_start_m: [1000.0, 700.0],
            uav_end_m: [300.0, 0.0],
            sat_start_m: [-345e3, 0.0],
        }
    }
}

impl ScenarioDefaults {
    pub fn generate(&self, seed: u64, user_count: usize, area_side_m: f64) -> Scenario {
        Scenario {
            users: draw_users(seed, user_count, area_side_m, self.file_count, self.zipf_exponent),
            area_side_m,
            catalog: ContentCatalog {
                file_count: self.file_count,
                file_size_bits: self.file_size_bits,
                zipf_exponent: self.zipf_exponent,
                cache_capacity_files: self.cache_capacity_files,
            },
            satellite: SatelliteParams {
                altitude_m: self.sat_altitude_m,
                initial_position: self.sat_start_m,
                tx_power_w: dbm_to_w(self.sat_tx_power_dbm),
                backhaul_bandwidth_hz: self.backhaul_bandwidth_hz,
            },
            uav: UavParams {
                altitude_m: self.uav_altitude_m,
                v_max_mps: self.v_max_mps,
                p_max_w: dbm_to_w(self.p_max_dbm),
                access_bandwidth_hz: self.access_bandwidth_hz,
                start: self.uav_start_m,
                end: self.uav_end_m,
            },
            radio: RadioParams {
                beta0: db_to_linear(self.beta0_db),
                alpha: self.alpha,
                noise_psd_dbm_per_hz: THERMAL_NOISE_DBM_PER_HZ,
                euler_gamma: EULER_GAMMA,
            },
            slot_count: self.slot_count,
            slot_duration_s: self.slot_duration_s,
        }
    }
}

/// Default-parameter scenario with `user_count` users uniform in a square of
/// side `area_side_m`. Deterministic in `seed`.
pub fn generate_scenario(seed: u64, user_count: usize, area_side_m: f64) -> Scenario {
    ScenarioDefaults::default().generate(seed, user_count, area_side_m)
}

impl Default for UsersConfig {
    fn default() -> Self {
        let d = ScenarioDefaults::default();
        Self {
            area_side_km: d.area_side_m / 1e3,
            count: None,
            seed: None,
            positions_km: None,
            requested_files: None,
        }
    }
}

impl Default for CatalogConfig {
    fn default() -> Self {
        let d = ScenarioDefaults::default();
        Self {
            file_count: d.file_count,
            file_size_mbits: d.file_size_bits / 1e6,
            zipf_exponent: d.zipf_exponent,
            cache_capacity_files: d.cache_capacity_files,
        }
    }
}

impl Default for SatelliteConfig {
    fn default() -> Self {
        let d = ScenarioDefaults::default();
        Self {
            altitude_km: d.sat_altitude_m / 1e3,
            initial_position_km: km(d.sat_start_m),
            tx_power_dbm: d.sat_tx_power_dbm,
            backhaul_bandwidth_mhz: d.backhaul_bandwidth_hz / 1e6,
        }
    }
}

impl Default for UavConfig {
    fn default() -> Self {
        let d = ScenarioDefaults::default();
        Self {
            altitude_km: d.uav_altitude_m / 1e3,
            v_max_mps: d.v_max_mps,
            p_max_dbm: d.p_max_dbm,
            access_bandwidth_mhz: d.access_bandwidth_hz / 1e6,
            start_km: km(d.uav_start_m),
            end_km: km(d.uav_end_m),
        }
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        let d = ScenarioDefaults::default();
        Self {
            beta0_db: d.beta0_db,
            alpha: d.alpha,
            noise_psd_dbm_per_hz: THERMAL_NOISE_DBM_PER_HZ,
            euler_gamma: EULER_GAMMA,
        }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        let d = ScenarioDefaults::default();
        Self {
            slot_count: d.slot_count,
            slot_duration_s: d.slot_duration_s,
        }
    }
}

impl ScenarioConfig {
    /// Converts to SI units, generating users where the config leaves them out,
    /// and validates.
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let c = &self.catalog;
        let area = self.users.area_side_km * 1e3;
        let seed = self.users.seed.unwrap_or(0);
        let users = match &self.users.positions_km {
            Some(pos) => {
                if let Some(n) = self.users.count {
                    if n != pos.len() {
                        return Err(ScenarioError::Invalid(format!(
                            "users.count = {n} but {} positions are listed",
                            pos.len()
                        )));
                    }
                }
                let files = match &self.users.requested_files {
                    Some(f) if f.len() != pos.len() => {
                        return Err(ScenarioError::Invalid(format!(
                            "{} requested files listed for {} users",
                            f.len(),
                            pos.len()
                        )))
                    }
                    Some(f) => f.clone(),
                    None => draw_users(seed, pos.len(), area.max(1.0), c.file_count.max(1), c.zipf_exponent)
                        .into_iter()
                        .map(|u| u.requested_file)
                        .collect(),
                };
                pos.iter()
                    .zip(files)
                    .enumerate()
                    .map(|(id, (p, f))| GroundUser {
                        id,
                        position: m(*p),
                        requested_file: f,
                    })
                    .collect()
            }
            None => {
                let count = self.users.count.unwrap_or(ScenarioDefaults::default().user_count);
                if !(area > 0.0) || c.file_count == 0 || !(c.zipf_exponent >= 0.0 && c.zipf_exponent < 1.0) {
                    return Err(ScenarioError::Invalid(
                        "cannot generate users: area, file_count and zipf_exponent must be valid".into(),
                    ));
                }
                let mut users = draw_users(seed, count, area, c.file_count, c.zipf_exponent);
                if let Some(files) = &self.users.requested_files {
                    if files.len() != count {
                        return Err(ScenarioError::Invalid(format!(
                            "{} requested files listed for {count} users",
                            files.len()
                        )));
                    }
                    for (u, &f) in users.iter_mut().zip(files) {
                        u.requested_file = f;
                    }
                }
                users
            }
        };
        let s = Scenario {
            users,
            area_side_m: area,
            catalog: ContentCatalog {
                file_count: c.file_count,
                file_size_bits: c.file_size_mbits * 1e6,
                zipf_exponent: c.zipf_exponent,
                cache_capacity_files: c.cache_capacity_files,
            },
            satellite: SatelliteParams {
                altitude_m: self.satellite.altitude_km * 1e3,
                initial_position: m(self.satellite.initial_position_km),
                tx_power_w: dbm_to_w(self.satellite.tx_power_dbm),
                backhaul_bandwidth_hz: self.satellite.backhaul_bandwidth_mhz * 1e6,
            },
            uav: UavParams {
                altitude_m: self.uav.altitude_km * 1e3,
                v_max_mps: self.uav.v_max_mps,
                p_max_w: dbm_to_w(self.uav.p_max_dbm),
                access_bandwidth_hz: self.uav.access_bandwidth_mhz * 1e6,
                start: m(self.uav.start_km),
                end: m(self.uav.end_km),
            },
            radio: RadioParams {
                beta0: db_to_linear(self.radio.beta0_db),
                alpha: self.radio.alpha,
                noise_psd_dbm_per_hz: self.radio.noise_psd_dbm_per_hz,
                euler_gamma: self.radio.euler_gamma,
            },
            slot_count: self.time.slot_count,
            slot_duration_s: self.time.slot_duration_s,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Parses a `section.key=value` override. The value is read as a TOML value
/// (number, bool, array, quoted string) and falls back to a bare string.
pub fn parse_override(spec: &str) -> Result<(String, String, toml::Value), ScenarioError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ScenarioError::Parse(format!("override `{spec}` is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| ScenarioError::Parse(format!("override key `{path}` must be section.key")))?;
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((section.to_string(), key.to_string(), value))
}

/// Parses scenario text, applies `section.key=value` overrides, then validates.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    for o in overrides {
        let (section, key, value) = parse_override(o)?;
        let entry = table
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(t) = entry else {
            return Err(ScenarioError::Parse(format!("`{section}` is not a section")));
        };
        t.insert(key, value);
    }
    let cfg: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    cfg.build()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario_with(path, &[])
}

pub fn load_scenario_with(path: &Path, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        let s = parse_scenario("[uav]\np_max_dbm = 15.0\n[radio]\nbeta0_db = -40.0\n", &[]).unwrap();
        assert!((s.uav.p_max_w - 0.03162277660168379).abs() < 1e-15);
        assert!((s.radio.beta0 - 1e-4).abs() < 1e-18);
        assert_eq!(s.uav.start, [1000.0, 700.0]);
    }

    #[test]
    fn cache_as_large_as_catalog_is_rejected() {
        let err = parse_scenario("[catalog]\nfile_count = 5\ncache_capacity_files = 5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("smaller than file count"), "{err}");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let s = parse_scenario("", &["catalog.cache_capacity_files=5".into(), "users.count=3".into()]).unwrap();
        assert_eq!(s.catalog.cache_capacity_files, 5);
        assert_eq!(s.user_count(), 3);
        let err = parse_scenario("", &["catalog.cache_capacity_files=30".into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(_)));
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        assert!(matches!(parse_scenario("[uav]\nspeed = 3\n", &[]), Err(ScenarioError::Parse(_))));
        assert!(matches!(parse_scenario("[wings]\n", &[]), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn alpha_other_than_two_is_rejected() {
        let err = parse_scenario("[radio]\nalpha = 3.0\n", &[]).unwrap_err();
        assert!(err.to_string().contains("alpha = 2"), "{err}");
    }

    #[test]
    fn unreachable_endpoints_are_rejected() {
        let err = parse_scenario("[time]\nslot_count = 4\n", &[]).unwrap_err();
        assert!(err.to_string().contains("endpoints"), "{err}");
    }

    #[test]
    fn noise_power_values() {
        assert!((w_to_dbm(noise_power_w(1.0).unwrap()) + 174.0).abs() < 1e-12);
        let n20 = noise_power_w(20e6).unwrap();
        assert!((n20 - 7.962143411069938e-14).abs() < 1e-26);
        assert!(noise_power_w(0.0).is_err());
    }
}
