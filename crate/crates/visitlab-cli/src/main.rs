//! Experiment driver over the `visitlab` library: simulate visit processes,
//! verify them against the limit law, run the periodic-point bundle, check
//! the exact independent-shift oracle, and reprint saved reports.
//!
//! Exit codes: 0 everything passed, 1 a statistical test failed, 2 bad usage
//! or configuration (including step-budget refusals), 3 runtime fault.
//!
//! Per-trajectory randomness is split from the master seed as
//! `trajectory_stream(master, eps_index, trajectory_index)`, so any (radius,
//! seed) task can be reproduced in isolation and re-runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use visitlab::billiard::sample_mu;
use visitlab::cluster::{run_periodic_bundle, BundleParams, ClusterError, PeriodicSiteConfig};
use visitlab::config::{ConfigError, ExperimentConfig, TargetSpec};
use visitlab::geometry::Table;
use visitlab::maps::{BitShiftOrbit, ToralAutomorphism};
use visitlab::process::{
    extract_barrier_process, extract_billiard_process, extract_doubling_process,
    extract_toral_process, ProcessError, Realization, MAX_STEPS,
};
use visitlab::rng::{stream, trajectory_stream};
use visitlab::stats::{
    auto_rectangles, dispersion_test, iid_oracle_check, interarrival_test, kallenberg_check,
    ks_test, pruned_interarrival_test, spatial_gof, AvoidanceWindow, StatsError, TestReport,
    DEFAULT_ALPHA,
};
use visitlab::targets::{
    empirical_pruned_marks, measure_torus, BilliardTarget, CornerBarrier, IntensityModel,
    MeasureEstimate, TorusTarget,
};
use visitlab::Vec2;

// Stream labels for CLI-owned random draws (measure estimation, empirical
// mark references, the oracle). ASCII tags, disjoint from the library's.
const MEASURE_TAG: u64 = 0x4D45_4153;
const MARKS_TAG: u64 = 0x4D52_4B53;
const ORACLE_TAG: u64 = 0x4F52_4143;

#[derive(Parser)]
#[command(
    name = "visitlab",
    version,
    about = "Simulate and verify Poisson limit laws for visits to small sets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured experiment and write one CSV + JSON per (radius, seed).
    Simulate {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for realizations and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Test saved realizations against the limiting Poisson law.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the simulated realizations; the report lands here too.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's per-test significance level.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Full periodic-point bundle: pruning, separation, compound-Poisson fit.
    Cluster {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Check Monte Carlo joint avoidance against the exact product model.
    Oracle {
        /// Avoidance window as `start,steps,measure`; repeatable.
        #[arg(long = "window", value_name = "P,Q,MU")]
        windows: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Optional directory for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reprint the summary tables of saved reports.
    Report {
        /// Directory holding report.json / bundle.json / oracle.json.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors beyond "a hypothesis test rejected": exit 2 for bad input, 3 for
/// faults while running.
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        match e {
            // The step budget is a consequence of the config; refuse as such.
            ProcessError::HorizonTooLarge { .. } | ProcessError::BadMeasure(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            // Not enough data is fixable by the user: more seeds or horizon.
            StatsError::TooFewEvents { .. } | StatsError::OverlappingWindows => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::Stats(s) => s.into(),
            ClusterError::Process(p) => p.into(),
            ClusterError::Map(m) => CliError::Config(m.to_string()),
            ClusterError::Target(t) => CliError::Config(t.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate {
            config,
            out,
            seed,
            jobs,
        } => cmd_simulate(&config, &out, seed, jobs).map(|()| true),
        Cmd::Verify { config, out, alpha } => cmd_verify(&config, &out, alpha),
        Cmd::Cluster {
            config,
            out,
            seed,
            alpha,
        } => cmd_cluster(&config, &out, seed, alpha),
        Cmd::Oracle {
            windows,
            budget,
            seed,
            alpha,
            out,
        } => cmd_oracle(&windows, budget, seed, alpha, out.as_deref()),
        Cmd::Report { out } => cmd_report(&out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let (label, msg) = match &e {
                CliError::Config(m) => ("config", m),
                CliError::Runtime(m) => ("fault", m),
            };
            eprintln!("visitlab: {label}: {msg}");
            e.code()
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Everything fixed per radius before trajectories launch.
struct EpsPlan {
    index: usize,
    eps: f64,
    /// Measure used for the time normalization of this radius.
    mu_a: f64,
    billiard: Option<BilliardTarget>,
    barrier: Option<CornerBarrier>,
    torus: Option<TorusTarget>,
    interval: Option<(f64, f64)>,
    /// Monte Carlo estimate when no closed form exists (pruned sets).
    measure: Option<MeasureEstimate>,
}

#[derive(Serialize)]
struct ManifestEntry {
    index: usize,
    eps: f64,
    mu_a: f64,
    steps_per_seed: u64,
    measure: Option<MeasureEstimate>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    master_seed: u64,
    radii: Vec<ManifestEntry>,
    files: Vec<String>,
}

fn plan_radii(
    cfg: &ExperimentConfig,
    table: Option<&Table>,
    map: Option<&ToralAutomorphism>,
    master: u64,
) -> Result<Vec<EpsPlan>, CliError> {
    let mut plans = Vec::new();
    for (index, &eps) in cfg.run.eps.iter().enumerate() {
        let billiard = cfg.billiard_target(eps);
        let barrier = match table {
            Some(t) => cfg.barrier(t, eps)?,
            None => None,
        };
        let torus = match map {
            Some(m) => cfg.torus_target(m, eps)?,
            None => None,
        };
        let interval = cfg.doubling_interval();

        let mut measure = None;
        let mu_a = if let (Some(bt), Some(t)) = (&billiard, table) {
            bt.analytic_measure(t)
        } else if let (Some(b), Some(t)) = (&barrier, table) {
            // Flow clock: crossings per unit flow time.
            b.analytic_measure(t) / t.mean_free_path()
        } else if let (Some(tt), Some(m)) = (&torus, map) {
            match tt.analytic_measure() {
                Some(v) => v,
                None => {
                    let est = measure_torus(tt, m, cfg.run.mc_budget, &mut stream(
                        master,
                        &[MEASURE_TAG, index as u64],
                    ))
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                    let v = est.estimate;
                    measure = Some(est);
                    v
                }
            }
        } else if let Some((lo, hi)) = interval {
            hi - lo
        } else {
            unreachable!("validated config always yields a target");
        };

        plans.push(EpsPlan {
            index,
            eps,
            mu_a,
            billiard,
            barrier,
            torus,
            interval,
            measure,
        });
    }
    Ok(plans)
}

/// One trajectory: derive its stream, run the family's extractor.
fn realize(
    cfg: &ExperimentConfig,
    table: Option<&Table>,
    map: Option<&ToralAutomorphism>,
    plan: &EpsPlan,
    seed_idx: u32,
    master: u64,
) -> Result<Realization, CliError> {
    let mut rng = trajectory_stream(master, plan.index as u64, seed_idx as u64);
    let label = ((plan.index as u64) << 32) | seed_idx as u64;
    let horizon = cfg.run.horizon;
    let r = if let (Some(bt), Some(t)) = (&plan.billiard, table) {
        let start = sample_mu(t, &mut rng);
        extract_billiard_process(t, bt, plan.mu_a, start, horizon, label)
            .map_err(CliError::from)?
    } else if let (Some(b), Some(t)) = (&plan.barrier, table) {
        let start = sample_mu(t, &mut rng);
        extract_barrier_process(t, b, start, horizon, label).map_err(CliError::from)?
    } else if let (Some(tt), Some(m)) = (&plan.torus, map) {
        let x0 = Vec2::new(rng.gen(), rng.gen());
        extract_toral_process(m, tt, plan.mu_a, x0, horizon, label).map_err(CliError::from)?
    } else if let Some(interval) = plan.interval {
        let mut orbit = BitShiftOrbit::new(rng);
        extract_doubling_process(&mut orbit, interval, horizon, label).map_err(CliError::from)?
    } else {
        unreachable!("plan carries exactly one target")
    };
    Ok(r)
}

fn file_stem(index: usize, seed_idx: u32) -> String {
    format!("eps{index:02}_seed{seed_idx:04}")
}

fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let cfg = load_config(config_path)?;
    let master = seed_override.unwrap_or(cfg.run.master_seed);
    let table = cfg.build_table()?;
    let map = cfg.build_map()?;
    let plans = plan_radii(&cfg, table.as_ref(), map.as_ref(), master)?;

    // Refuse impossible budgets before any file is written.
    for p in &plans {
        let steps = (cfg.run.horizon / p.mu_a).ceil();
        if steps > MAX_STEPS as f64 {
            return Err(CliError::Config(format!(
                "eps {} needs {steps:.3e} raw steps per trajectory, beyond the {MAX_STEPS:.1e} cap; \
                 shrink run.horizon or raise eps",
                p.eps
            )));
        }
    }

    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let tasks: Vec<(usize, u32)> = plans
        .iter()
        .flat_map(|p| (0..cfg.run.seeds).map(move |s| (p.index, s)))
        .collect();

    // Work-stealing over (radius, seed); every task owns its two files.
    let files: Vec<String> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(index, s)| -> Result<String, CliError> {
                let plan = &plans[index];
                let r = realize(&cfg, table.as_ref(), map.as_ref(), plan, s, master)?;
                let stem = file_stem(index, s);
                fs::write(out.join(format!("{stem}.csv")), r.to_csv())?;
                let json = serde_json::to_string_pretty(&r)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                fs::write(out.join(format!("{stem}.json")), json + "\n")?;
                Ok(stem)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let manifest = Manifest {
        config: &cfg,
        master_seed: master,
        radii: plans
            .iter()
            .map(|p| ManifestEntry {
                index: p.index,
                eps: p.eps,
                mu_a: p.mu_a,
                steps_per_seed: (cfg.run.horizon / p.mu_a).ceil() as u64,
                measure: p.measure.clone(),
            })
            .collect(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("manifest.json"), json + "\n")?;
    println!(
        "simulate: {} realizations ({} radii x {} seeds) -> {}",
        plans.len() * cfg.run.seeds as usize,
        plans.len(),
        cfg.run.seeds,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EpsReport {
    eps: f64,
    realizations: usize,
    reports: Vec<TestReport>,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a ExperimentConfig,
    alpha: f64,
    /// Number of tests the Bonferroni correction divides alpha by.
    bonferroni_m: usize,
    groups: Vec<EpsReport>,
    overall_pass: bool,
}

fn load_realizations(dir: &Path) -> Result<Vec<Realization>, CliError> {
    let reserved = ["manifest.json", "report.json", "bundle.json", "oracle.json"];
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| !reserved.contains(&n))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!(
            "no realization files in {}; run `visitlab simulate` first",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(&p)?;
        let r: Realization = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
        out.push(r);
    }
    Ok(out)
}

/// The per-radius battery for the configured family.
fn battery(
    cfg: &ExperimentConfig,
    group: &[Realization],
    alpha: f64,
) -> Result<Vec<TestReport>, CliError> {
    let window = group
        .iter()
        .map(|r| r.window)
        .fold(f64::INFINITY, f64::min);
    let marks: Vec<(f64, f64)> = group
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.mark))
        .collect();
    let mut reports = Vec::new();
    match &cfg.target {
        TargetSpec::PrunedBall { period, .. } => {
            // Dead-time-adjusted gaps plus marks against the empirical
            // pruned reference; plain exponential gaps would structurally
            // reject because returns within q0 * period steps are pruned.
            let map = cfg.build_map()?.expect("pruned target implies toral");
            let eps = group[0].eps;
            let site = match cfg.torus_target(&map, eps)? {
                Some(TorusTarget::Pruned(site)) => site,
                _ => unreachable!("pruned spec builds a pruned target"),
            };
            let exclusion = (site.q0 * period) as u64;
            reports.push(pruned_interarrival_test(group, exclusion, alpha)?);
            let reference = empirical_pruned_marks(
                &map,
                &site,
                40_000,
                &mut stream(cfg.run.master_seed, &[MARKS_TAG, eps.to_bits()]),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            reports.push(spatial_gof(&marks, &reference, (4, 4), alpha)?);
            let rects = auto_rectangles(&reference, window, 6);
            reports.push(kallenberg_check(group, &rects, &reference, alpha)?);
        }
        TargetSpec::Interval { .. } => {
            // One-dimensional marks: grid tests degenerate, use KS directly.
            reports.push(interarrival_test(group, alpha)?);
            reports.push(dispersion_test(group, 1.0, alpha)?);
            let xs: Vec<f64> = marks.iter().map(|m| m.0).collect();
            reports.push(ks_test(
                "interval marks vs uniform",
                &xs,
                |x| x.clamp(0.0, 1.0),
                alpha,
            )?);
        }
        _ => {
            let intensity = reference_intensity(cfg)?;
            reports.push(interarrival_test(group, alpha)?);
            reports.push(dispersion_test(group, 1.0, alpha)?);
            reports.push(spatial_gof(&marks, &intensity, (8, 8), alpha)?);
            let rects = auto_rectangles(&intensity, window, 6);
            reports.push(kallenberg_check(group, &rects, &intensity, alpha)?);
        }
    }
    Ok(reports)
}

fn reference_intensity(cfg: &ExperimentConfig) -> Result<IntensityModel, CliError> {
    Ok(match &cfg.target {
        TargetSpec::PhaseBall { .. } | TargetSpec::TorusBall { .. } => {
            IntensityModel::UniformSquare
        }
        TargetSpec::PositionStrip { .. } => IntensityModel::CosineStrip,
        TargetSpec::CornerBarrier => IntensityModel::CosineBarrier,
        other => {
            return Err(CliError::Config(format!(
                "no closed-form mark reference for target `{}`",
                other.kind_name()
            )))
        }
    })
}

fn cmd_verify(config_path: &Path, out: &Path, alpha: Option<f64>) -> Result<bool, CliError> {
    let cfg = load_config(config_path)?;
    let alpha = alpha.unwrap_or(cfg.run.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Config(format!("--alpha {alpha} outside (0, 1)")));
    }
    let all = load_realizations(out)?;

    // Group by radius, largest first (simulate writes one eps per value).
    let mut radii: Vec<f64> = all.iter().map(|r| r.eps).collect();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();

    let mut groups = Vec::new();
    for &eps in &radii {
        let group: Vec<Realization> = all.iter().filter(|r| r.eps == eps).cloned().collect();
        let n = group.len();
        let reports = battery(&cfg, &group, alpha)?;
        groups.push(EpsReport {
            eps,
            realizations: n,
            reports,
        });
    }

    let m: usize = groups.iter().map(|g| g.reports.len()).sum();
    let mut overall_pass = true;
    for g in &groups {
        println!("eps = {} ({} realizations)", g.eps, g.realizations);
        for r in &g.reports {
            println!("  {}", r.summary_line());
            // Family-wise control: reject only below alpha / m.
            if r.p_value < alpha / m as f64 {
                overall_pass = false;
            }
        }
    }
    println!(
        "verdict: {} ({} tests, Bonferroni alpha {})",
        if overall_pass { "PASS" } else { "FAIL" },
        m,
        alpha / m as f64
    );

    let report = VerifyReport {
        config: &cfg,
        alpha,
        bonferroni_m: m,
        groups,
        overall_pass,
    };
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("report.json"), json + "\n")?;
    Ok(overall_pass)
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

fn cmd_cluster(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    alpha_override: Option<f64>,
) -> Result<bool, CliError> {
    let cfg = load_config(config_path)?;
    let (center, period, q0) = match &cfg.target {
        TargetSpec::PrunedBall { center, period, q0 } => {
            (Vec2::new(center[0], center[1]), *period, *q0)
        }
        other => {
            return Err(CliError::Config(format!(
                "cluster requires a pruned_ball target, got `{}`",
                other.kind_name()
            )))
        }
    };
    let map = cfg.build_map()?.expect("pruned target implies toral");
    let site = PeriodicSiteConfig {
        map,
        center,
        period,
        q0,
        eps_ladder: cfg.run.eps.clone(),
        a: cfg.run.separation_a,
    };
    let params = BundleParams {
        horizon: cfg.run.horizon,
        seeds: cfg.run.seeds,
        master_seed: seed_override.unwrap_or(cfg.run.master_seed),
        mc_budget: cfg.run.mc_budget,
        alpha: alpha_override.unwrap_or(cfg.run.alpha),
    };
    let bundle = run_periodic_bundle(&site, &params)?;

    fs::create_dir_all(out)?;
    for (i, eb) in bundle.ladder.iter().enumerate() {
        let mut csv = String::from("size\n");
        for s in &eb.sizes {
            csv.push_str(&format!("{s}\n"));
        }
        fs::write(out.join(format!("sizes_eps{i:02}.csv")), csv)?;
    }
    let json =
        serde_json::to_string_pretty(&bundle).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("bundle.json"), json + "\n")?;

    println!(
        "pruning depth q0 = {} (certified contraction exponent {})",
        bundle.q0, bundle.certificate_q
    );
    for eb in &bundle.ladder {
        println!(
            "eps = {}: theta_hat = {:.4}, {} clusters",
            eb.eps,
            eb.theta_hat,
            eb.clusters
        );
        for r in eb.reports() {
            println!("  {}", r.summary_line());
        }
    }
    println!("  {}", bundle.theta_drift.summary_line());
    let pass = bundle.all_pass();
    println!("verdict: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn parse_window(s: &str) -> Result<AvoidanceWindow, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || CliError::Config(format!("--window `{s}` is not `start,steps,measure`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let p: u64 = parts[0].trim().parse().map_err(|_| bad())?;
    let q: u64 = parts[1].trim().parse().map_err(|_| bad())?;
    let mu: f64 = parts[2].trim().parse().map_err(|_| bad())?;
    if q == 0 || !(mu > 0.0 && mu < 1.0) {
        return Err(bad());
    }
    Ok(AvoidanceWindow { p, q, mu })
}

fn cmd_oracle(
    windows: &[String],
    budget: usize,
    seed: u64,
    alpha: f64,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    if windows.is_empty() {
        return Err(CliError::Config(
            "at least one --window start,steps,measure is required".into(),
        ));
    }
    let windows = windows
        .iter()
        .map(|w| parse_window(w))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = stream(seed, &[ORACLE_TAG]);
    let report = iid_oracle_check(&windows, budget, alpha, &mut rng)?;
    println!("{}", report.summary_line());
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(dir.join("oracle.json"), json + "\n")?;
    }
    Ok(report.pass)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Walk any saved report and reprint its test lines; a node is a test when
/// it has `name`, `p_value`, and `pass` fields.
fn walk_reports(v: &Value, lines: &mut Vec<String>, all_pass: &mut bool) {
    match v {
        Value::Object(map) => {
            if let (Some(Value::String(name)), Some(p), Some(Value::Bool(pass))) =
                (map.get("name"), map.get("p_value"), map.get("pass"))
            {
                let p = p.as_f64().unwrap_or(f64::NAN);
                lines.push(format!(
                    "{} {name}: p = {p:.4}",
                    if *pass { "pass" } else { "FAIL" }
                ));
                if !pass {
                    *all_pass = false;
                }
            }
            if let Some(Value::Bool(false)) = map.get("overall_pass") {
                *all_pass = false;
            }
            for val in map.values() {
                walk_reports(val, lines, all_pass);
            }
        }
        Value::Array(items) => {
            for val in items {
                walk_reports(val, lines, all_pass);
            }
        }
        _ => {}
    }
}

fn cmd_report(out: &Path) -> Result<bool, CliError> {
    let mut found = false;
    let mut all_pass = true;
    for name in ["report.json", "bundle.json", "oracle.json"] {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        found = true;
        let text = fs::read_to_string(&path)?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let mut lines = Vec::new();
        walk_reports(&v, &mut lines, &mut all_pass);
        println!("{name}:");
        for l in lines {
            println!("  {l}");
        }
    }
    if !found {
        return Err(CliError::Config(format!(
            "no report.json, bundle.json, or oracle.json in {}",
            out.display()
        )));
    }
    println!("verdict: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(all_pass)
}
