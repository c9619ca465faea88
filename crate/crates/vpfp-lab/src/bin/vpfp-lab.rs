//! Command-line entry point: config-driven simulations and the assertion
//! suite, with reproducible seeding and machine-readable outputs.
//!
//! Exit codes: 0 success, 1 assertion failure (`check`), 2 configuration
//! error, 3 numerical-guard abort (e.g. boundary-mass breach).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vpfp_lab::config::{parse_config_str, parse_override, ConfigError, LabConfig};
use vpfp_lab::dynamics::{
    simulate_coupled, CoupledRunOptions, DynamicsError, IntegratorConfig,
};
use vpfp_lab::experiments::{
    chaos_rate_sweep, concentration_sweep, lambda_deviation_curve, run_check_suite,
    solve_reference_pde, ExperimentError, F0Spec,
};
use vpfp_lab::meanfield::{FieldHistory, MeanfieldError};
use vpfp_lab::metrics::coupling_discrepancy;
use vpfp_lab::output::{now_ms, write_atomic, Csv, CsvField, RunManifest};
use vpfp_lab::rng::NoiseStreamSpec;

#[derive(Parser)]
#[command(
    name = "vpfp-lab",
    version,
    about = "1D Coulomb particle system laboratory: coupled simulations, kinetic reference solves, and bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Configuration file (flat key-value with [section] headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; omitted selects a random seed and prints it.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = auto).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeatable `section.key=value` config override.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single coupled simulation and dump trajectory statistics.
    Simulate(CommonArgs),
    /// Sweep the ensemble size and fit the discrepancy decay rate.
    ChaosRate(CommonArgs),
    /// Tail curves of the averaged discrepancy against the explicit bound.
    Concentration(CommonArgs),
    /// Solve the kinetic reference equation and dump grid snapshots.
    Pde(CommonArgs),
    /// Run the full invariant and bound assertion suite.
    Check(CommonArgs),
}

enum ToolError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<ConfigError> for ToolError {
    fn from(e: ConfigError) -> Self {
        ToolError::Config(e.to_string())
    }
}

impl From<ExperimentError> for ToolError {
    fn from(e: ExperimentError) -> Self {
        ToolError::Numerical(e.to_string())
    }
}

impl From<DynamicsError> for ToolError {
    fn from(e: DynamicsError) -> Self {
        ToolError::Numerical(e.to_string())
    }
}

impl From<MeanfieldError> for ToolError {
    fn from(e: MeanfieldError) -> Self {
        ToolError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for ToolError {
    fn from(e: std::io::Error) -> Self {
        ToolError::Io(e.to_string())
    }
}

fn resolve_config(args: &CommonArgs) -> Result<LabConfig, ToolError> {
    let mut cfg = LabConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ToolError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let kv = parse_config_str(&text)?;
        cfg.apply_kv(&kv)?;
    }
    for item in &args.overrides {
        let (key, value) = parse_override(item)?;
        let mut kv = std::collections::BTreeMap::new();
        kv.insert(key, value);
        cfg.apply_kv(&kv)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    } else if args.config.is_none() && cfg.seed == 0 {
        // No explicit seed anywhere: pick one and announce it.
        let picked = now_ms() as u64 ^ (std::process::id() as u64) << 32;
        eprintln!("selected random seed {picked}");
        cfg.seed = picked;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }
    cfg.validate()?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .ok();
    }
    Ok(cfg)
}

fn out_path(cfg: &LabConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out_dir).join(name)
}

fn finish_manifest(
    mut manifest: RunManifest,
    cfg: &LabConfig,
    pass: bool,
) -> Result<(), ToolError> {
    manifest.finish(pass);
    manifest.write(&out_path(cfg, "manifest.json"))?;
    Ok(())
}

fn cmd_simulate(cfg: &LabConfig) -> Result<bool, ToolError> {
    let mut manifest = RunManifest::new("simulate", cfg.seed, cfg.resolved_kv());
    let pde = solve_reference_pde(cfg)?;
    let fields = FieldHistory::from_solution(&pde);
    let f0 = F0Spec::from_config(cfg);
    let n = cfg.n_list[0];
    let noise = NoiseStreamSpec::new(cfg.seed, 0);
    let initial = f0.sample(n, &noise)?;
    let icfg = IntegratorConfig::new(cfg.dt, cfg.t, cfg.scheme)?;
    let opts = CoupledRunOptions {
        paired_initial: None,
        series_stride: if cfg.series_stride > 0 {
            cfg.series_stride
        } else {
            (icfg.steps() / 64).max(1)
        },
        snapshot_stride: Some(if cfg.snapshot_stride > 0 {
            cfg.snapshot_stride
        } else {
            (icfg.steps() / 8).max(1)
        }),
    };
    let out = simulate_coupled(&initial, &cfg.kernel_spec(), &fields, &icfg, &noise, &opts)?;

    let mut traj = Csv::new(&["step", "t", "i", "x", "v", "y", "w"]);
    for &(step, t, i, x, v, y, w) in &out.snapshots {
        traj.row(&[
            CsvField::Int(step as i64),
            CsvField::Real(t),
            CsvField::Int(i as i64),
            CsvField::Real(x),
            CsvField::Real(v),
            CsvField::Real(y),
            CsvField::Real(w),
        ]);
    }
    let traj_path = out_path(cfg, "trajectory.csv");
    write_atomic(&traj_path, traj.finish().as_bytes())?;
    manifest.outputs.push(traj_path.display().to_string());

    let mut series = Csv::new(&["step", "t", "mean_discrepancy", "mean_running_sup"]);
    for &(step, t, inst, sup) in &out.stats.series {
        series.row(&[
            CsvField::Int(step as i64),
            CsvField::Real(t),
            CsvField::Real(inst),
            CsvField::Real(sup),
        ]);
    }
    let series_path = out_path(cfg, "series.csv");
    write_atomic(&series_path, series.finish().as_bytes())?;
    manifest.outputs.push(series_path.display().to_string());

    println!(
        "simulate: N={n} t={} final mean discrepancy {}",
        cfg.t,
        coupling_discrepancy(&out.stats)
    );
    finish_manifest(manifest, cfg, true)?;
    Ok(true)
}

fn cmd_chaos_rate(cfg: &LabConfig) -> Result<bool, ToolError> {
    let mut manifest = RunManifest::new("chaos-rate", cfg.seed, cfg.resolved_kv());
    let pde = solve_reference_pde(cfg)?;
    let report = chaos_rate_sweep(cfg, &pde)?;
    let mut csv = Csv::new(&["n", "replicas", "mean_discrepancy", "std_error", "bound"]);
    for row in &report.rows {
        csv.row(&[
            CsvField::Int(row.n as i64),
            CsvField::Int(row.replicas as i64),
            CsvField::Real(row.mean),
            CsvField::Real(row.std_err),
            CsvField::Real(row.bound),
        ]);
    }
    let path = out_path(cfg, "chaos_rate.csv");
    write_atomic(&path, csv.finish().as_bytes())?;
    manifest.outputs.push(path.display().to_string());

    let summary = serde_json::to_string_pretty(&report).expect("report serializes");
    let spath = out_path(cfg, "chaos_rate_summary.json");
    write_atomic(&spath, summary.as_bytes())?;
    manifest.outputs.push(spath.display().to_string());

    match report.slope {
        Some(s) => println!("chaos-rate: fitted log-log slope {s:.4}"),
        None if report.rows.len() < 2 => {
            println!("chaos-rate: slope needs at least two ensemble sizes")
        }
        None => println!("chaos-rate: slope undefined (zero-mean control run)"),
    }
    let pass = report
        .rows
        .iter()
        .all(|r| r.mean <= r.bound + 3.0 * r.std_err);
    finish_manifest(manifest, cfg, pass)?;
    Ok(pass)
}

fn cmd_concentration(cfg: &LabConfig) -> Result<bool, ToolError> {
    let mut manifest = RunManifest::new("concentration", cfg.seed, cfg.resolved_kv());
    let pde = solve_reference_pde(cfg)?;
    let report = concentration_sweep(cfg, &pde)?;
    if report.empty_range {
        println!(
            "concentration: admissible threshold range is empty (lo {:.4} > hi {:.4}); reporting anyway",
            report.admissible.0, report.admissible.1
        );
    }
    let path = out_path(cfg, "concentration.csv");
    write_atomic(&path, report.curve.to_csv().as_bytes())?;
    manifest.outputs.push(path.display().to_string());

    let lam = lambda_deviation_curve(
        cfg,
        cfg.lambda_check_n,
        cfg.lambda_check_replicas,
        &[0.15, 0.2, 0.25, 0.3],
    )?;
    let lpath = out_path(cfg, "lambda_deviation.csv");
    write_atomic(&lpath, lam.to_csv().as_bytes())?;
    manifest.outputs.push(lpath.display().to_string());

    let summary = serde_json::to_string_pretty(&report).expect("report serializes");
    let spath = out_path(cfg, "concentration_summary.json");
    write_atomic(&spath, summary.as_bytes())?;
    manifest.outputs.push(spath.display().to_string());

    let pass = report.curve.holds() && lam.holds();
    finish_manifest(manifest, cfg, pass)?;
    Ok(pass)
}

fn cmd_pde(cfg: &LabConfig) -> Result<bool, ToolError> {
    let mut manifest = RunManifest::new("pde", cfg.seed, cfg.resolved_kv());
    let pde = solve_reference_pde(cfg)?;
    for (idx, (t, f)) in pde.snapshots.iter().enumerate() {
        let mut csv = Csv::new(&["x", "v", "f"]);
        for ix in 0..f.nx {
            for iv in 0..f.nv {
                csv.row(&[
                    CsvField::Real(f.x_center(ix)),
                    CsvField::Real(f.v_center(iv)),
                    CsvField::Real(f.at(ix, iv)),
                ]);
            }
        }
        let path = out_path(cfg, &format!("pde_snapshot_{idx:03}.csv"));
        write_atomic(&path, csv.finish().as_bytes())?;
        manifest.outputs.push(path.display().to_string());
        println!("pde: snapshot {idx:03} at t = {t}");
    }
    // Field dump at the final time.
    let field = pde.fields.last().expect("solution stores fields");
    let mut csv = Csv::new(&["x", "F"]);
    for (x, v) in field.xs.iter().zip(&field.values) {
        csv.row(&[CsvField::Real(*x), CsvField::Real(*v)]);
    }
    let fpath = out_path(cfg, "pde_field_final.csv");
    write_atomic(&fpath, csv.finish().as_bytes())?;
    manifest.outputs.push(fpath.display().to_string());

    println!(
        "pde: kappa_t = {}, int ||rho||_inf = {}, max mass drift {:.3e}",
        pde.kappa(),
        pde.int_rho_sup(),
        pde.mass_drift_max
    );
    finish_manifest(manifest, cfg, true)?;
    Ok(true)
}

fn cmd_check(cfg: &LabConfig) -> Result<bool, ToolError> {
    let mut manifest = RunManifest::new("check", cfg.seed, cfg.resolved_kv());
    let report = run_check_suite(cfg)?;
    println!(
        "{:<34} {:>14} {:>14} {:>14}  status",
        "assertion", "empirical", "bound", "margin"
    );
    for c in &report.checks {
        let status = if c.vacuous {
            "PASS (vacuous)"
        } else if c.pass {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "{:<34} {:>14.6e} {:>14.6e} {:>14.6e}  {status}",
            c.name,
            c.empirical,
            c.bound,
            c.margin()
        );
    }
    if let Some(slope) = report.chaos.slope {
        println!("chaos slope: {slope:.4} (expect near -0.5 at full scale)");
    }
    println!(
        "check: {} assertions, wall {} ms, overall {}",
        report.checks.len(),
        report.wall_ms,
        if report.pass { "PASS" } else { "FAIL" }
    );

    let mut csv = Csv::new(&["assertion", "empirical", "bound", "slack", "vacuous", "pass"]);
    for c in &report.checks {
        csv.row(&[
            CsvField::Text(&c.name),
            CsvField::Real(c.empirical),
            CsvField::Real(c.bound),
            CsvField::Real(c.slack),
            CsvField::Int(c.vacuous as i64),
            CsvField::Int(c.pass as i64),
        ]);
    }
    let path = out_path(cfg, "check_assertions.csv");
    write_atomic(&path, csv.finish().as_bytes())?;
    manifest.outputs.push(path.display().to_string());

    let jpath = out_path(cfg, "check_report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&jpath, json.as_bytes())?;
    manifest.outputs.push(jpath.display().to_string());

    finish_manifest(manifest, cfg, report.pass)?;
    Ok(report.pass)
}

type CommandRunner = fn(&LabConfig) -> Result<bool, ToolError>;

fn run(cli: Cli) -> Result<bool, ToolError> {
    let (args, runner): (&CommonArgs, CommandRunner) =
        match &cli.command {
            Command::Simulate(a) => (a, cmd_simulate),
            Command::ChaosRate(a) => (a, cmd_chaos_rate),
            Command::Concentration(a) => (a, cmd_concentration),
            Command::Pde(a) => (a, cmd_pde),
            Command::Check(a) => (a, cmd_check),
        };
    let cfg = resolve_config(args)?;
    runner(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(ToolError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(ToolError::Numerical(msg)) => {
            eprintln!("numerical guard: {msg}");
            ExitCode::from(3)
        }
        Err(ToolError::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(3)
        }
    }
}
