mod validate;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use skycache::bcd::compare;
use skycache::harness::{export_csv, export_summary, export_trajectory, export_users, fmt_float, summarize};
use skycache::scenario::load_scenario_with;
use skycache::{run_scheme, run_sweep, Exec, Scenario, Scheme, Solution, SolveOptions, SolveStatus, SweepSpec};

#[derive(Parser, Debug)]
#[command(name = "skycache", version, about = "Cache placement, resource allocation and trajectory design for a satellite-backhauled UAV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and write the solution files.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Scheme to run.
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
    },
    /// Run the proposed scheme and all three baselines on one scenario.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep one parameter over the values in a sweep spec.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep spec (TOML): parameter, values, schemes, seed, repetitions.
        #[arg(long, value_name = "PATH")]
        spec: PathBuf,
        /// Worker threads for sweep points (1 runs sequentially, 0 uses every core).
        #[arg(long, default_value_t = 1, value_name = "INT")]
        jobs: usize,
    },
    /// Cross-check the solver against brute-force and Monte-Carlo oracles.
    Validate {
        /// Directory for the check table; printed only when omitted.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Offset added to the seeds of the generated test instances.
        #[arg(long, default_value_t = 0, value_name = "INT")]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file (TOML with [users], [catalog], [satellite], [uav], [radio], [time]).
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Seed for drawing users the scenario file does not list.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Override a scenario key, e.g. `--set catalog.cache_capacity_files=5`. Repeatable.
    #[arg(long = "set", value_name = "K=V")]
    overrides: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Relative objective change that ends the outer loop.
    #[arg(long, default_value_t = 1e-4, value_name = "FLOAT")]
    eps: f64,
    /// Outer iteration limit.
    #[arg(long, default_value_t = 100, value_name = "INT")]
    max_outer: usize,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            eps_outer: self.eps,
            max_outer: self.max_outer,
            ..SolveOptions::default()
        }
    }
}

impl RunArgs {
    fn load(&self) -> Result<Scenario> {
        let mut overrides = Vec::new();
        if let Some(seed) = self.seed {
            overrides.push(format!("users.seed={seed}"));
        }
        overrides.extend(self.overrides.iter().cloned());
        load_scenario_with(&self.scenario, &overrides).with_context(|| "cannot load scenario".to_string())
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_history(sol: &Solution, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["outer", "min_tp_bits"])?;
    for (i, v) in sol.objective_history.iter().enumerate() {
        w.write_record([i.to_string(), fmt_float(*v)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_cache(sol: &Solution, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["file", "cached", "relaxed"])?;
    for (f, (r, x)) in sol.rounded_eta.eta.iter().zip(&sol.relaxed_eta.eta).enumerate() {
        w.write_record([(f + 1).to_string(), (*r as u8).to_string(), fmt_float(*x)])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_text(scen: &Scenario, sol: &Solution, wall_s: f64) -> String {
    let cached: Vec<String> = sol
        .rounded_eta
        .eta
        .iter()
        .enumerate()
        .filter(|(_, &e)| e == 1.0)
        .map(|(f, _)| (f + 1).to_string())
        .collect();
    let mut s = String::new();
    s += &format!("scheme            {}\n", sol.scheme);
    s += &format!("status            {}\n", sol.status.name());
    s += &format!("outer iterations  {}\n", sol.outer_iterations());
    s += &format!("min throughput    {:.6e} bits\n", sol.objective());
    s += &format!("total throughput  {:.6e} bits\n", sol.total_throughput());
    s += &format!("cached files      [{}]\n", cached.join(", "));
    s += &format!("binarity gap      {:.3e}{}\n", sol.binarity_gap, if sol.cache_fallback { " (fallback rounding)" } else { "" });
    s += &format!("rejected steps    {}\n", sol.rejected_steps);
    s += &format!("wall time         {wall_s:.3} s\n");
    s += "user  file  throughput_bits\n";
    for (k, tp) in sol.per_user_throughput.iter().enumerate() {
        s += &format!("{k:>4}  {:>4}  {tp:.6e}\n", scen.users[k].requested_file);
    }
    s
}

fn cmd_solve(run: &RunArgs, scheme: Scheme) -> Result<ExitCode> {
    let scen = run.load()?;
    let opts = run.solver.options();
    let t = Instant::now();
    let sol = run_scheme(&scen, &opts, scheme)?;
    let wall = t.elapsed().as_secs_f64();
    let out = run.out_dir()?;
    write_text(&out.join("summary.txt"), &summary_text(&scen, &sol, wall))?;
    write_history(&sol, &out.join("history.csv"))?;
    export_trajectory(&sol.iterate.traj, &out.join("trajectory.csv"))?;
    write_cache(&sol, &out.join("cache.csv"))?;
    export_users(&scen, &out.join("users.csv"))?;
    println!(
        "{}: min throughput {:.6e} bits after {} outer iterations ({})",
        sol.scheme,
        sol.objective(),
        sol.outer_iterations(),
        sol.status.name()
    );
    Ok(match sol.status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::MaxOuter => ExitCode::from(2),
    })
}

fn cmd_compare(run: &RunArgs) -> Result<ExitCode> {
    let scen = run.load()?;
    let opts = run.solver.options();
    let out = run.out_dir()?;
    let path = out.join("comparison.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["scheme", "min_tp_bits", "total_tp_bits", "iters", "status"])?;
    let mut failed = false;
    for (scheme, r) in compare(&scen, &opts, &Scheme::ALL, Exec::Sequential) {
        match r {
            Ok(sol) => {
                println!("{scheme:<9} {:.6e} bits ({})", sol.objective(), sol.status.name());
                w.write_record([
                    scheme.name().to_string(),
                    fmt_float(sol.objective()),
                    fmt_float(sol.total_throughput()),
                    sol.outer_iterations().to_string(),
                    sol.status.name().to_string(),
                ])?;
            }
            Err(e) => {
                eprintln!("{scheme}: {e}");
                failed = true;
                let nan = fmt_float(f64::NAN);
                w.write_record([scheme.name(), &nan, &nan, "0", "error"])?;
            }
        }
    }
    w.flush()?;
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn cmd_sweep(run: &RunArgs, spec_path: &Path, jobs: usize) -> Result<ExitCode> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("cannot read {}", spec_path.display()))?;
    let spec = SweepSpec::from_toml(&text).with_context(|| format!("bad sweep spec {}", spec_path.display()))?;
    let scen = run.load()?;
    let opts = run.solver.options();
    let exec = if jobs == 1 { Exec::Sequential } else { Exec::Parallel };
    let rows = exec.install(jobs, || run_sweep(&spec, &scen, &opts, exec))?;
    let out = run.out_dir()?;
    export_csv(&rows, &out.join("results.csv"))?;
    let summary = summarize(&rows);
    export_summary(&summary, &out.join("summary.csv"))?;
    for s in &summary {
        println!(
            "{:<9} {}={:<10} median min {:.6e} bits ({}/{} solved)",
            s.scheme, s.param, s.value, s.median_min_tp_bits, s.solved, s.repetitions
        );
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} sweep points did not produce a solution", rows.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(out: Option<&Path>, seed: u64, solver: &SolverArgs) -> Result<ExitCode> {
    let opts = solver.options();
    if let Err(e) = opts.validate() {
        bail!(e);
    }
    let checks = validate::run_all(seed, &opts);
    let table = validate::table(&checks);
    print!("{table}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_text(&dir.join("validate.txt"), &table)?;
    }
    Ok(if checks.iter().all(|c| c.pass) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { run, scheme } => cmd_solve(run, *scheme),
        Command::Compare { run } => cmd_compare(run),
        Command::Sweep { run, spec, jobs } => cmd_sweep(run, spec, *jobs),
        Command::Validate { out, seed, solver } => cmd_validate(out.as_deref(), *seed, solver),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
