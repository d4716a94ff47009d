//! `planedetect`: simulate 2-DOF laser scans of polygonal scenes, extract
//! planes with RANSAC, outline them as convex hulls, and run threshold
//! sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or parse error, 3 detection
//! produced no planes under `--require-planes`.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use planedetect_core::config::{AppConfig, SweepSpecFile};
use planedetect_core::detect::{detect_planes, RansacParams};
use planedetect_core::experiment::{min_clean_threshold, run_threshold_sweep, Density};
use planedetect_core::geom::Point3;
use planedetect_core::hull::{build_regions_from_merge, merge_overlapping_detailed};
use planedetect_core::io::{
    planes_from_doc, read_cloud, read_labels_csv, read_planes_json, read_scene_json, write_cloud,
    write_labels_csv, write_planes_json, write_provenance_csv, write_regions_json,
    write_regions_ply, write_scene_json, write_sweep_means_csv, write_sweep_trials_csv,
    CloudFormat,
};
use planedetect_core::scan::{simulate_scan, SceneModel};
use planedetect_core::scenes::{all_builtin_scenes, builtin_scene, BUILTIN_SCENE_NAMES};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "planedetect",
    version,
    about = "Plane detection toolkit for simulated 3D laser scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scan of a scene and write the point cloud.
    Simulate(SimulateArgs),
    /// Detect planes in a point cloud with sequential RANSAC.
    Detect(DetectArgs),
    /// Merge coplanar planes and outline each region as a convex hull.
    MergeHull(MergeHullArgs),
    /// Run a threshold-vs-density sweep from a spec file.
    Sweep(SweepArgs),
    /// List built-in scenes, or emit one as JSON.
    Scenes(ScenesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scene name.
    #[arg(long, conflicts_with = "scene_file")]
    scene: Option<String>,
    /// Scene JSON file (requires --origin).
    #[arg(long)]
    scene_file: Option<PathBuf>,
    /// Sensor origin as "x,y,z" (defaults to the built-in recommendation).
    #[arg(long, value_parser = parse_point)]
    origin: Option<Point3>,
    /// Output cloud path.
    #[arg(long)]
    out: PathBuf,
    /// Cloud format; inferred from the output extension when omitted.
    #[arg(long)]
    format: Option<CloudFormat>,
    /// Override the scanner yaw step, degrees.
    #[arg(long)]
    yaw_step: Option<f64>,
    /// Override the range-noise standard deviation, meters.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Override the scanner noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a per-point facet-provenance CSV.
    #[arg(long)]
    provenance: Option<PathBuf>,
    /// Pipeline config JSON (scanner section applies; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Input cloud path.
    #[arg(long = "in")]
    input: PathBuf,
    /// Cloud format; inferred from the input extension when omitted.
    #[arg(long)]
    format: Option<CloudFormat>,
    /// Override the minimum inlier count (threshold).
    #[arg(long)]
    threshold: Option<usize>,
    /// Override the RANSAC seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output planes JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also write a per-point label CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Exit with code 3 if no plane is detected.
    #[arg(long)]
    require_planes: bool,
    /// Pipeline config JSON (ransac section applies; flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct MergeHullArgs {
    /// Planes JSON from `detect`.
    #[arg(long)]
    planes: PathBuf,
    /// The cloud the planes were detected in.
    #[arg(long)]
    cloud: PathBuf,
    /// Cloud format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<CloudFormat>,
    /// Label CSV from `detect` (rebuilds each plane's inlier set).
    #[arg(long)]
    labels: PathBuf,
    /// Output regions JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the regions as an ASCII PLY mesh.
    #[arg(long)]
    ply: Option<PathBuf>,
    /// Pipeline config JSON (merge section applies).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Directory for trials.csv and means.csv (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    /// Count planes before merging instead of after.
    #[arg(long)]
    premerge: bool,
}

#[derive(Args)]
struct ScenesArgs {
    /// Emit this built-in scene as JSON instead of listing.
    #[arg(long, requires = "out")]
    emit: Option<String>,
    /// Output path for --emit.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Status output; ignores write failures (e.g. a closed pipe) because the
/// command's real products are its output files.
macro_rules! status {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn parse_point(s: &str) -> Result<Point3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated numbers, e.g. 5,4,1.5".into());
    }
    let mut v = [0.0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| format!("invalid coordinate {part:?}"))?;
        if !slot.is_finite() {
            return Err(format!("non-finite coordinate {part:?}"));
        }
    }
    Ok(Point3::new(v[0], v[1], v[2]))
}

/// Errors carrying their process exit code.
enum CliError {
    /// Bad arguments or argument combinations (exit 1).
    Usage(String),
    /// File, parse, or config-file failures (exit 2).
    Io(String),
    /// `--require-planes` with an empty detection (exit 3).
    NoPlanes,
}

impl CliError {
    fn report(&self) -> ExitCode {
        match self {
            CliError::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
            CliError::Io(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            CliError::NoPlanes => {
                eprintln!("error: no planes detected");
                ExitCode::from(3)
            }
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn load_config(path: &Option<PathBuf>) -> Result<AppConfig, CliError> {
    match path {
        Some(p) => AppConfig::load(p).map_err(io_err),
        None => Ok(AppConfig::default()),
    }
}

fn cloud_format(path: &Path, flag: Option<CloudFormat>) -> CloudFormat {
    flag.unwrap_or_else(|| CloudFormat::infer(path))
}

fn resolve_scene(args: &SimulateArgs) -> Result<(SceneModel, Point3), CliError> {
    match (&args.scene, &args.scene_file) {
        (Some(name), None) => {
            let b = builtin_scene(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown scene {name:?}; available: {}",
                    BUILTIN_SCENE_NAMES.join(", ")
                ))
            })?;
            Ok((b.scene, args.origin.unwrap_or(b.sensor_origin)))
        }
        (None, Some(path)) => {
            let scene = read_scene_json(path).map_err(io_err)?;
            let origin = args.origin.ok_or_else(|| {
                CliError::Usage("--origin is required with --scene-file".into())
            })?;
            Ok((scene, origin))
        }
        _ => Err(CliError::Usage(
            "exactly one of --scene or --scene-file is required".into(),
        )),
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let (scene, origin) = resolve_scene(args)?;
    let mut scanner = config.scanner;
    if let Some(step) = args.yaw_step {
        scanner.yaw_step_deg = step;
    }
    if let Some(sigma) = args.noise_sigma {
        scanner.noise_sigma_m = sigma;
    }
    if let Some(seed) = args.seed {
        scanner.seed = seed;
    }
    scanner
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let scan = simulate_scan(&scene, &scanner, origin);
    let format = cloud_format(&args.out, args.format);
    write_cloud(&scan.cloud, &args.out, format).map_err(io_err)?;
    if let Some(prov) = &args.provenance {
        write_provenance_csv(&scan.provenance, prov).map_err(io_err)?;
    }
    status!(
        "scene {}: {} returns from {} beams -> {}",
        scene.name(),
        scan.cloud.len(),
        planedetect_core::scan::scan_point_count(&scanner),
        args.out.display()
    );
    Ok(())
}

fn run_detect(args: &DetectArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let mut params: RansacParams = config.ransac;
    if let Some(t) = args.threshold {
        params.min_inliers = t;
    }
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let format = cloud_format(&args.input, args.format);
    let cloud = read_cloud(&args.input, format).map_err(io_err)?;
    let result = detect_planes(&cloud, &params);
    write_planes_json(&result, &args.out).map_err(io_err)?;
    if let Some(labels) = &args.labels {
        write_labels_csv(cloud.len(), &result.planes, labels).map_err(io_err)?;
    }
    status!(
        "{} planes, {} residual points, {} iterations -> {}",
        result.planes.len(),
        result.residual_indices.len(),
        result.iterations_used,
        args.out.display()
    );
    if args.require_planes && result.planes.is_empty() {
        return Err(CliError::NoPlanes);
    }
    Ok(())
}

fn run_merge_hull(args: &MergeHullArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let format = cloud_format(&args.cloud, args.format);
    let cloud = read_cloud(&args.cloud, format).map_err(io_err)?;
    let doc = read_planes_json(&args.planes).map_err(io_err)?;
    let labels = read_labels_csv(&args.labels).map_err(io_err)?;
    if labels.len() != cloud.len() {
        return Err(CliError::Io(format!(
            "labels cover {} points but the cloud has {}",
            labels.len(),
            cloud.len()
        )));
    }
    let planes = planes_from_doc(&doc, &labels).map_err(io_err)?;
    let merge = merge_overlapping_detailed(
        &planes,
        &cloud,
        config.merge.angle_eps_rad,
        config.merge.dist_eps_m,
    );
    let regions = build_regions_from_merge(&merge, &cloud);
    write_regions_json(&regions, &args.out).map_err(io_err)?;
    if let Some(ply) = &args.ply {
        write_regions_ply(&regions, ply).map_err(io_err)?;
    }
    status!(
        "{} planes -> {} regions ({} degenerate dropped) -> {}",
        planes.len(),
        regions.regions.len(),
        regions.degenerate_dropped,
        args.out.display()
    );
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut spec = SweepSpecFile::load(&args.spec).map_err(io_err)?;
    if args.premerge {
        spec.count_premerge = true;
    }
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;
    let report = run_threshold_sweep(&spec);
    let trials = args.out_dir.join("trials.csv");
    let means = args.out_dir.join("means.csv");
    write_sweep_trials_csv(&report, &trials).map_err(io_err)?;
    write_sweep_means_csv(&report, &means).map_err(io_err)?;
    for density in [Density::High, Density::Low] {
        match min_clean_threshold(&report, density) {
            Some(t) => status!("{density}: min clean threshold {t}"),
            None => status!("{density}: no clean threshold in the swept range"),
        }
    }
    status!("wrote {} and {}", trials.display(), means.display());
    Ok(())
}

fn run_scenes(args: &ScenesArgs) -> Result<(), CliError> {
    if let Some(name) = &args.emit {
        let b = builtin_scene(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown scene {name:?}; available: {}",
                BUILTIN_SCENE_NAMES.join(", ")
            ))
        })?;
        let out = args.out.as_ref().expect("clap enforces --out with --emit");
        write_scene_json(&b.scene, out).map_err(io_err)?;
        status!("wrote {}", out.display());
        return Ok(());
    }
    for b in all_builtin_scenes() {
        let o = b.sensor_origin;
        status!(
            "{:<10} {:>2} facets, sensor origin ({}, {}, {})",
            b.scene.name(),
            b.scene.facets().len(),
            o.x,
            o.y,
            o.z
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Detect(args) => run_detect(args),
        Command::MergeHull(args) => run_merge_hull(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Scenes(args) => run_scenes(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
