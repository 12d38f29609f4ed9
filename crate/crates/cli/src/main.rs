//! `crowdest` — command-line front end for the crowd-size estimation
//! pipeline.
//!
//! Three subcommands mirror the pipeline phases:
//!
//! * `field` materializes the blockage-probability table `(r, theta, p1,
//!   p2)` for a density, with optional cache reuse.
//! * `sweep` runs seeded Monte Carlo estimation sweeps over true crowd
//!   sizes and emits JSON results plus plot-ready CSV tables.
//! * `validate` runs the randomized geometry property suites and writes a
//!   machine-readable report.
//!
//! Every flag can also be set through an environment variable with the
//! `CROWDEST_` prefix (e.g. `CROWDEST_SEED=7 crowdest sweep ...`).

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crowdest_core::props::{self, Injection};
use crowdest_core::sim::{self, ExperimentSpec, SCHEMA_VERSION};
use crowdest_core::{
    build_sobol_cloud, BlockageField, DensitySpec, SceneConfig, SpatialDensity, SweepResult,
};

#[derive(Parser)]
#[command(name = "crowdest", version, about = "Crowd-size estimation from radar occlusion geometry")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the blockage-probability field table for each configured density.
    Field(FieldArgs),
    /// Run estimation sweeps over true crowd sizes and emit result artifacts.
    Sweep(SweepArgs),
    /// Run the randomized geometry property suites and write a report.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Scene + density config: either one density spec or a suite file
    /// with a "densities" array.
    #[arg(long, env = "CROWDEST_CONFIG")]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out", env = "CROWDEST_OUT")]
    out: PathBuf,
    /// log2 of the Sobol cloud size used for spatial integrals.
    #[arg(long, default_value_t = 14, env = "CROWDEST_SOBOL_M")]
    sobol_m: u32,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value_t = 0, env = "CROWDEST_WORKERS")]
    workers: usize,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Reuse an existing field table when its sidecar metadata matches.
    #[arg(long, env = "CROWDEST_CACHE")]
    cache: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Master seed for all realizations.
    #[arg(long, default_value_t = 0, env = "CROWDEST_SEED")]
    seed: u64,
    /// Realizations per true crowd size.
    #[arg(long, default_value_t = 10_000, env = "CROWDEST_REALIZATIONS")]
    realizations: u32,
    /// Largest candidate crowd size.
    #[arg(long, default_value_t = 30, env = "CROWDEST_N_MAX")]
    n_max: u32,
    /// True crowd sizes to sweep: a range "1..30" (inclusive) or a
    /// comma-separated list "5,10,25". Defaults to 1..n_max.
    #[arg(long, env = "CROWDEST_N_VALUES")]
    n_values: Option<String>,
    /// Also estimate with the uniform-prior baseline (default on).
    #[arg(long, overrides_with = "no_baseline")]
    baseline: bool,
    /// Disable the uniform-prior baseline.
    #[arg(long, overrides_with = "baseline")]
    no_baseline: bool,
    /// Skip the per-realization blockage-explanation audit.
    #[arg(long, env = "CROWDEST_NO_AUDIT")]
    no_audit: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out", env = "CROWDEST_OUT")]
    out: PathBuf,
    /// Samples per pairwise-predicate suite.
    #[arg(long, default_value_t = 100_000, env = "CROWDEST_SAMPLES")]
    samples: u64,
    /// Random crowds for the coverage and equivalence suites.
    #[arg(long, default_value_t = 2_000, env = "CROWDEST_CROWDS")]
    crowds: u64,
    /// Seed for the randomized suites.
    #[arg(long, default_value_t = 0, env = "CROWDEST_SEED")]
    seed: u64,
    /// Inject a known defect into the suite-side oracle; the report must
    /// then contain counterexamples (self-test of the suites).
    #[arg(long, value_enum)]
    inject: Option<InjectArg>,
    /// Scene radii, as "rho,r_max".
    #[arg(long, default_value = "0.25,14.5", env = "CROWDEST_SCENE")]
    scene: String,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum InjectArg {
    /// Flip the radial-order predicate (farther agents treated as blockers).
    RadialFlip,
}

/// Parsed configuration: one scene shared by one or more densities.
struct LoadedConfig {
    scene: SceneConfig,
    densities: Vec<DensitySpec>,
}

fn default_scene() -> SceneConfig {
    SceneConfig::new(0.25, 14.5).expect("default scene is valid")
}

fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("config {} is not valid JSON", path.display()))?;
    if value.get("densities").is_some() {
        let scene = match value.get("scene") {
            Some(s) => serde_json::from_value(s.clone())
                .with_context(|| format!("bad \"scene\" in {}", path.display()))?,
            None => default_scene(),
        };
        let densities: Vec<DensitySpec> = serde_json::from_value(value["densities"].clone())
            .with_context(|| format!("bad \"densities\" in {}", path.display()))?;
        if densities.is_empty() {
            bail!("config {} has an empty \"densities\" array", path.display());
        }
        Ok(LoadedConfig { scene, densities })
    } else {
        let spec: DensitySpec = serde_json::from_value(value)
            .with_context(|| format!("config {} is not a density spec", path.display()))?;
        let scene = spec.scene.unwrap_or_else(default_scene);
        Ok(LoadedConfig {
            scene,
            densities: vec![DensitySpec { scene: None, ..spec }],
        })
    }
}

fn density_name(spec: &DensitySpec, index: usize) -> String {
    spec.name
        .clone()
        .unwrap_or_else(|| format!("density{index}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn cmd_field(args: &FieldArgs) -> Result<()> {
    let cfg = load_config(&args.io.config)?;
    fs::create_dir_all(&args.io.out)
        .with_context(|| format!("cannot create {}", args.io.out.display()))?;
    let cloud = Arc::new(build_sobol_cloud(&cfg.scene, args.io.sobol_m)?);
    for (i, spec) in cfg.densities.iter().enumerate() {
        let name = density_name(spec, i);
        let density = SpatialDensity::from_spec(spec, &cfg.scene)?;
        let csv_path = args.io.out.join(format!("field_{name}.csv"));
        let meta_path = args.io.out.join(format!("field_{name}.meta.json"));
        let meta = json!({
            "schema_version": SCHEMA_VERSION,
            "sobol_m": args.io.sobol_m,
            "scene": cfg.scene,
            "density": spec,
        });

        let started = Instant::now();
        let (field, cached) = if args.cache && csv_path.exists() && meta_path.exists() {
            let on_disk: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
            if on_disk == meta {
                let reader = BufReader::new(fs::File::open(&csv_path)?);
                (
                    BlockageField::read_csv(cloud.clone(), &density, reader)
                        .with_context(|| format!("stale cache {}", csv_path.display()))?,
                    true,
                )
            } else {
                log::info!("{name}: cache metadata mismatch, recomputing");
                (BlockageField::build(cloud.clone(), &density), false)
            }
        } else {
            (BlockageField::build(cloud.clone(), &density), false)
        };
        log::info!(
            "{name}: field {} in {:.1}s",
            if cached { "loaded from cache" } else { "computed" },
            started.elapsed().as_secs_f64()
        );

        if !cached {
            let file = fs::File::create(&csv_path)
                .with_context(|| format!("cannot create {}", csv_path.display()))?;
            field.write_csv(BufWriter::new(file))?;
            write_json(&meta_path, &meta)?;
        }

        let stats = |v: &[f64]| {
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for &x in v {
                lo = lo.min(x);
                hi = hi.max(x);
                sum += x;
            }
            json!({"min": lo, "max": hi, "mean": sum / v.len() as f64})
        };
        write_json(
            &args.io.out.join(format!("field_{name}.summary.json")),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "density": name,
                "points": field.p1().len(),
                "p1": stats(field.p1()),
                "p2": stats(field.p2()),
            }),
        )?;
        println!("{name}: field table -> {}", csv_path.display());
    }
    Ok(())
}

fn parse_n_values(text: &str, n_max: u32) -> Result<Vec<u32>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let lo: u32 = a.trim().parse().context("bad range start")?;
        let hi: u32 = b.trim().parse().context("bad range end")?;
        if lo < 1 || hi < lo {
            bail!("empty or invalid range {text:?}");
        }
        return Ok((lo..=hi).collect());
    }
    let vals: Vec<u32> = text
        .split(',')
        .map(|s| s.trim().parse::<u32>().with_context(|| format!("bad value {s:?}")))
        .collect::<Result<_>>()?;
    if vals.is_empty() || vals.iter().any(|&n| n < 1 || n > n_max) {
        bail!("n-values must be within 1..={n_max}");
    }
    Ok(vals)
}

fn write_estimates_csv(path: &Path, name: &str, result: &SweepResult) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "density,true_n,n_star,n_star_baseline,abs_err,abs_err_baseline"
    )?;
    for e in &result.entries {
        let (base, base_err) = match e.n_star_baseline {
            Some(b) => (
                b.to_string(),
                (b as i64 - e.true_n as i64).abs().to_string(),
            ),
            None => (String::new(), String::new()),
        };
        writeln!(
            w,
            "{name},{},{},{base},{},{base_err}",
            e.true_n,
            e.n_star,
            (e.n_star as i64 - e.true_n as i64).abs(),
        )?;
    }
    Ok(())
}

fn write_pmfs_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "true_n,n_visible,mass")?;
    for e in &result.entries {
        for (k, &m) in e.empirical.mass.iter().enumerate() {
            if m > 0.0 {
                writeln!(w, "{},{k},{:.16e}", e.true_n, m)?;
            }
        }
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = load_config(&args.io.config)?;
    fs::create_dir_all(&args.io.out)
        .with_context(|| format!("cannot create {}", args.io.out.display()))?;
    let n_values = match &args.n_values {
        Some(text) => parse_n_values(text, args.n_max)?,
        None => (1..=args.n_max).collect(),
    };
    let baseline = !args.no_baseline;
    let mut table: Vec<(String, f64, Option<f64>)> = Vec::new();
    for (i, spec) in cfg.densities.iter().enumerate() {
        let name = density_name(spec, i);
        let espec = ExperimentSpec {
            scene: cfg.scene,
            density: spec.clone(),
            n_values: n_values.clone(),
            realizations: args.realizations,
            n_max: args.n_max,
            master_seed: args.seed,
            sobol_m: args.io.sobol_m,
            baseline,
            workers: args.io.workers,
            audit: !args.no_audit,
        };
        let started = Instant::now();
        let result = sim::run_sweep(&espec)
            .with_context(|| format!("sweep failed for density {name}"))?;
        log::info!("{name}: sweep in {:.1}s", started.elapsed().as_secs_f64());

        // Flush artifacts per density so partial progress survives a failure
        // in a later density.
        write_json(&args.io.out.join(format!("sweep_{name}.json")), &result)?;
        write_estimates_csv(
            &args.io.out.join(format!("estimates_{name}.csv")),
            &name,
            &result,
        )?;
        write_pmfs_csv(&args.io.out.join(format!("pmfs_{name}.csv")), &result)?;
        match result.baseline_mae {
            Some(b) => println!("{name}: MAE {:.3} (uniform baseline {b:.3})", result.mae),
            None => println!("{name}: MAE {:.3}", result.mae),
        }
        table.push((name, result.mae, result.baseline_mae));
    }

    let mae_path = args.io.out.join("mae_table.csv");
    let mut w = BufWriter::new(fs::File::create(&mae_path)?);
    writeln!(w, "density,mae,baseline_mae")?;
    for (name, mae, base) in &table {
        match base {
            Some(b) => writeln!(w, "{name},{mae:.16e},{b:.16e}")?,
            None => writeln!(w, "{name},{mae:.16e},")?,
        }
    }
    drop(w);
    println!("aggregate MAE table -> {}", mae_path.display());
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let (rho, r_max) = args
        .scene
        .split_once(',')
        .context("scene must be \"rho,r_max\"")?;
    let scene = SceneConfig::new(
        rho.trim().parse().context("bad rho")?,
        r_max.trim().parse().context("bad r_max")?,
    )?;
    let injection = args.inject.map(|i| match i {
        InjectArg::RadialFlip => Injection::RadialFlip,
    });
    let reports = props::run_all(&scene, args.samples, args.crowds, args.seed, injection);
    let pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        println!(
            "{}: {} ({} samples{})",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.samples,
            if r.counterexamples.is_empty() {
                String::new()
            } else {
                format!(", {} counterexamples", r.counterexamples.len())
            }
        );
    }
    let report_path = args.out.join("validate_report.json");
    write_json(
        &report_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "samples": args.samples,
            "crowds": args.crowds,
            "seed": args.seed,
            "injection": injection,
            "suites": reports,
            "pass": pass,
        }),
    )?;
    println!("report -> {}", report_path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(
        match level {
            log::LevelFilter::Warn => "warn",
            log::LevelFilter::Info => "info",
            _ => "debug",
        },
    ))
    .init();
    match &cli.cmd {
        Cmd::Field(args) => cmd_field(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Validate(args) => cmd_validate(args),
    }
}
