//! Parameter sweeps, brute-force oracles and CSV export.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bcd::{run_scheme, Scheme, Solution, SolveOptions, DriverError};
use crate::channel::{ChannelError, RateContext};
use crate::par::Exec;
use crate::scenario::{dbm_to_w, Scenario, ScenarioError};
use crate::state::{Allocation, CacheVector, Trajectory};
use crate::subproblems::ResourceProblem;

pub const RESULTS_HEADER: [&str; 9] = [
    "scheme",
    "param",
    "value",
    "min_tp_bits",
    "total_tp_bits",
    "iters",
    "wall_s",
    "seed",
    "status",
];

/// Largest number of placements the exhaustive cache oracle will evaluate.
pub const CACHE_ORACLE_LIMIT: usize = 100_000;

const MC_CHUNK: usize = 8192;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error("{count} cache placements exceed the oracle limit of {limit}")]
    TooManyCandidates { count: usize, limit: usize },
    #[error("oracle precondition failed: {0}")]
    Oracle(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Formats with 17 significant digits so values survive a text round trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SlotCount,
    /// Cache capacity in files.
    CacheSize,
    FileSizeBits,
    /// UAV power budget in dBm.
    PMax,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::SlotCount => "slot_count",
            SweepParameter::CacheSize => "cache_size",
            SweepParameter::FileSizeBits => "file_size_bits",
            SweepParameter::PMax => "p_max",
        }
    }

    /// `scen` with this parameter set to `value`, validated.
    pub fn apply(self, scen: &Scenario, value: f64) -> Result<Scenario, HarnessError> {
        let mut s = scen.clone();
        let count = |v: f64| -> Result<usize, HarnessError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(HarnessError::Spec(format!("{} needs whole numbers, got {v}", self.name())))
            }
        };
        match self {
            SweepParameter::SlotCount => s.slot_count = count(value)?,
            SweepParameter::CacheSize => s.catalog.cache_capacity_files = count(value)?,
            SweepParameter::FileSizeBits => s.catalog.file_size_bits = value,
            SweepParameter::PMax => s.uav.p_max_w = dbm_to_w(value),
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn one() -> usize {
    1
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::Spec("values must not be empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Spec("values must be finite".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Spec("values must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Spec("at least one scheme is required".into()));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::Spec("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub param: String,
    pub value: f64,
    pub min_tp_bits: f64,
    pub total_tp_bits: f64,
    pub iters: usize,
    pub wall_s: f64,
    pub seed: u64,
    /// `converged`, `max-outer`, `infeasible` or `error`.
    pub status: String,
}

impl ResultRow {
    pub fn from_outcome(
        scheme: Scheme,
        param: &str,
        value: f64,
        seed: u64,
        wall_s: f64,
        outcome: &Result<Solution, DriverError>,
    ) -> Self {
        let (min, total, iters, status) = match outcome {
            Ok(sol) => (
                sol.objective(),
                sol.total_throughput(),
                sol.outer_iterations(),
                sol.status.name().to_string(),
            ),
            Err(DriverError::Infeasible(_)) => (f64::NAN, f64::NAN, 0, "infeasible".to_string()),
            Err(_) => (f64::NAN, f64::NAN, 0, "error".to_string()),
        };
        Self {
            scheme,
            param: param.to_string(),
            value,
            min_tp_bits: min,
            total_tp_bits: total,
            iters,
            wall_s,
            seed,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "converged" || self.status == "max-outer"
    }
}

/// Runs every `(scheme, value, repetition)` of `spec` on mutations of `base`.
///
/// Repetition 0 keeps the users of `base`; repetition `r >= 1` redraws them
/// with seed `spec.seed + r`. Rows come back ordered by scheme, value and
/// repetition whatever the execution mode.
pub fn run_sweep(
    spec: &SweepSpec,
    base: &Scenario,
    opts: &SolveOptions,
    exec: Exec,
) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let mut scenarios = Vec::new();
    for &value in &spec.values {
        let mut per_rep = Vec::new();
        for r in 0..spec.repetitions {
            let seed = spec.seed + r as u64;
            let s = if r == 0 { base.clone() } else { base.with_redrawn_users(seed) };
            per_rep.push((seed, spec.parameter.apply(&s, value)));
        }
        scenarios.push(per_rep);
    }
    let mut items = Vec::new();
    for &scheme in &spec.schemes {
        for (vi, &value) in spec.values.iter().enumerate() {
            for r in 0..spec.repetitions {
                items.push((scheme, vi, value, r));
            }
        }
    }
    let name = spec.parameter.name();
    let rows = exec.map(&items, |&(scheme, vi, value, r)| {
        let (seed, scen) = &scenarios[vi][r];
        match scen {
            Ok(scen) => {
                let t = Instant::now();
                let outcome = run_scheme(scen, opts, scheme);
                if let Err(e) = &outcome {
                    log::warn!("{scheme} at {name}={value} (seed {seed}): {e}");
                }
                ResultRow::from_outcome(scheme, name, value, *seed, t.elapsed().as_secs_f64(), &outcome)
            }
            Err(e) => {
                log::warn!("{name}={value} (seed {seed}) is not a valid scenario: {e}");
                ResultRow {
                    scheme,
                    param: name.to_string(),
                    value,
                    min_tp_bits: f64::NAN,
                    total_tp_bits: f64::NAN,
                    iters: 0,
                    wall_s: 0.0,
                    seed: *seed,
                    status: "error".into(),
                }
            }
        }
    });
    Ok(rows)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, HarnessError> {
    let file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn flush(mut w: csv::Writer<File>, path: &Path) -> Result<(), HarnessError> {
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn export_csv(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(RESULTS_HEADER).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.param.clone(),
            fmt_float(r.value),
            fmt_float(r.min_tp_bits),
            fmt_float(r.total_tp_bits),
            r.iters.to_string(),
            fmt_float(r.wall_s),
            r.seed.to_string(),
            r.status.clone(),
        ])
        .map_err(&err)?;
    }
    flush(w, path)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let err = csv_err(path);
    let mut rd = csv::Reader::from_path(path).map_err(&err)?;
    let headers = rd.headers().map_err(&err)?.clone();
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(HarnessError::Spec(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str| HarnessError::Spec(format!("{}: malformed {what}", path.display()));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(&err)?;
        let float = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(RESULTS_HEADER[i]));
        rows.push(ResultRow {
            scheme: rec[0].parse().map_err(|_| bad("scheme"))?,
            param: rec[1].to_string(),
            value: float(2)?,
            min_tp_bits: float(3)?,
            total_tp_bits: float(4)?,
            iters: rec[5].parse().map_err(|_| bad("iters"))?,
            wall_s: float(6)?,
            seed: rec[7].parse().map_err(|_| bad("seed"))?,
            status: rec[8].to_string(),
        });
    }
    Ok(rows)
}

pub fn export_trajectory(traj: &Trajectory, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["slot", "x_m", "y_m"]).map_err(&err)?;
    for (n, q) in traj.q.iter().enumerate() {
        w.write_record([n.to_string(), fmt_float(q[0]), fmt_float(q[1])])
            .map_err(&err)?;
    }
    flush(w, path)
}

pub fn export_users(scen: &Scenario, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["id", "x_m", "y_m", "file"]).map_err(&err)?;
    for u in &scen.users {
        w.write_record([
            u.id.to_string(),
            fmt_float(u.position[0]),
            fmt_float(u.position[1]),
            u.requested_file.to_string(),
        ])
        .map_err(&err)?;
    }
    flush(w, path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub param: String,
    pub value: f64,
    pub median_min_tp_bits: f64,
    pub median_total_tp_bits: f64,
    /// Repetitions that produced a solution.
    pub solved: usize,
    pub repetitions: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median over repetitions of every `(scheme, value)` group, in row order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|g| g[0].scheme == r.scheme && g[0].param == r.param && g[0].value == r.value)
        {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    for g in groups {
        let ok: Vec<&&ResultRow> = g.iter().filter(|r| r.is_ok()).collect();
        out.push(SummaryRow {
            scheme: g[0].scheme,
            param: g[0].param.clone(),
            value: g[0].value,
            median_min_tp_bits: median(ok.iter().map(|r| r.min_tp_bits).collect()),
            median_total_tp_bits: median(ok.iter().map(|r| r.total_tp_bits).collect()),
            solved: ok.len(),
            repetitions: g.len(),
        });
    }
    out
}

pub fn export_summary(rows: &[SummaryRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record([
        "scheme",
        "param",
        "value",
        "median_min_tp_bits",
        "median_total_tp_bits",
        "solved",
        "repetitions",
    ])
    .map_err(&err)?;
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.param.clone(),
            fmt_float(r.value),
            fmt_float(r.median_min_tp_bits),
            fmt_float(r.median_total_tp_bits),
            r.solved.to_string(),
            r.repetitions.to_string(),
        ])
        .map_err(&err)?;
    }
    flush(w, path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheOracle {
    pub eta: CacheVector,
    pub objective: f64,
    /// Placements enumerated, feasible or not.
    pub candidates: usize,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    let k = k.min(n - k);
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Best binary placement with at most `S` files for fixed resources and
/// trajectory, by enumeration. Ties go to the lexicographically smallest vector.
pub fn oracle_cache_exhaustive(
    scen: &Scenario,
    alloc: &Allocation,
    traj: &Trajectory,
) -> Result<CacheOracle, HarnessError> {
    let f_count = scen.catalog.file_count;
    let cap = scen.catalog.cache_capacity_files.min(f_count);
    let count = (0..=cap).fold(0usize, |acc, s| acc.saturating_add(binomial(f_count, s)));
    if count > CACHE_ORACLE_LIMIT {
        return Err(HarnessError::TooManyCandidates {
            count,
            limit: CACHE_ORACLE_LIMIT,
        });
    }
    let ctx = RateContext::new(scen, traj);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut seen = 0;
    let mut chosen = Vec::new();
    fn walk(
        start: usize,
        left: usize,
        f_count: usize,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        visit(chosen);
        if left == 0 {
            return;
        }
        for f in start..f_count {
            chosen.push(f);
            walk(f + 1, left - 1, f_count, chosen, visit);
            chosen.pop();
        }
    }
    let mut visit = |files: &[usize]| {
        seen += 1;
        let eta = CacheVector::from_files(f_count, files);
        let Ok(v) = ctx.min_throughput(&eta, alloc) else {
            return;
        };
        let better = match &best {
            None => true,
            Some((b, bv)) => v > *bv || (v == *bv && eta.eta.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less)),
        };
        if better {
            best = Some((eta.eta, v));
        }
    };
    walk(0, cap, f_count, &mut chosen, &mut visit);
    let (eta, objective) = best.ok_or_else(|| {
        HarnessError::Oracle("no placement delivers every requested file within the horizon".into())
    })?;
    Ok(CacheOracle {
        eta: CacheVector { eta },
        objective,
        candidates: seen,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOracle {
    pub b: Vec<f64>,
    /// Power as a fraction of `P_max`.
    pub p_frac: Vec<f64>,
    pub value: f64,
    /// Largest change of the objective within two grid steps of the optimum.
    pub two_step_variation: f64,
}

/// Grid search over a single-slot resource problem with one or two users.
///
/// Rates grow in both bandwidth and power, so for two users the search runs
/// along the budget boundary `b₁ + b₂ = 1`, `p₁ + p₂ = 1`.
pub fn oracle_resource_grid(slice: &ResourceProblem, steps: usize) -> Result<GridOracle, HarnessError> {
    if slice.slots() != 1 {
        return Err(HarnessError::Oracle(format!("expected one slot, got {}", slice.slots())));
    }
    let k = slice.users();
    if k == 0 || k > 2 || steps == 0 {
        return Err(HarnessError::Oracle(format!("expected 1 or 2 users and a positive step count, got {k} users")));
    }
    let point = |i: usize, j: usize| -> (Vec<f64>, Vec<f64>) {
        let (x, y) = (i as f64 / steps as f64, j as f64 / steps as f64);
        if k == 1 {
            (vec![x], vec![y])
        } else {
            (vec![x, 1.0 - x], vec![y, 1.0 - y])
        }
    };
    let value = |i: usize, j: usize| {
        let (b, p) = point(i, j);
        slice.value(&[b], &[p])
    };
    let mut best = (0, 0, f64::NEG_INFINITY);
    for i in 0..=steps {
        for j in 0..=steps {
            let v = value(i, j);
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    let (bi, bj, bv) = best;
    let mut variation: f64 = 0.0;
    for i in bi.saturating_sub(2)..=(bi + 2).min(steps) {
        for j in bj.saturating_sub(2)..=(bj + 2).min(steps) {
            variation = variation.max((value(i, j) - bv).abs());
        }
    }
    let (b, p) = point(bi, bj);
    Ok(GridOracle {
        b,
        p_frac: p,
        value: bv,
        two_step_variation: variation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    /// Bits per second.
    pub mean: f64,
    pub stderr: f64,
}

/// Monte-Carlo mean of the access rate under Rayleigh fading at distance `dist`.
///
/// Samples are drawn in fixed-size chunks, each on its own ChaCha stream, and
/// reduced in chunk order, so the estimate is bitwise identical in every
/// execution mode.
pub fn monte_carlo_rate(
    scen: &Scenario,
    b: f64,
    p: f64,
    dist: f64,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<McEstimate, HarnessError> {
    if samples < 10_000 {
        return Err(HarnessError::Oracle(format!("need at least 10000 samples, got {samples}")));
    }
    let snr = p * scen.radio.beta0 / (dist.powf(scen.radio.alpha) * scen.access_noise_w());
    let scale = b * scen.uav.access_bandwidth_hz;
    let chunks: Vec<(u64, usize)> = (0..samples.div_ceil(MC_CHUNK))
        .map(|c| (c as u64, MC_CHUNK.min(samples - c * MC_CHUNK)))
        .collect();
    let partial = exec.map(&chunks, |&(c, len)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let h: f64 = Exp1.sample(&mut rng);
            let r = scale * (snr * h).ln_1p() / std::f64::consts::LN_2;
            s += r;
            s2 += r * r;
        }
        (s, s2)
    });
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, x| (a.0 + x.0, a.1 + x.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(4, 0), 1);
        assert_eq!(binomial(30, 10), 30_045_015);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn sweep_spec_rules() {
        let ok = SweepSpec::from_toml("parameter = \"slot_count\"\nvalues = [40, 80]\n").unwrap();
        assert_eq!(ok.schemes.len(), 4);
        assert_eq!(ok.repetitions, 1);
        assert!(SweepSpec::from_toml("parameter = \"slot_count\"\nvalues = []\n").is_err());
        assert!(SweepSpec::from_toml("parameter = \"p_max\"\nvalues = [20, 10]\n").is_err());
        assert!(SweepSpec::from_toml("parameter = \"speed\"\nvalues = [1]\n").is_err());
    }
}
