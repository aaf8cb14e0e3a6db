//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use csd_core::train::{run_optimization, Providers};
use csd_core::Camera;

use crate::config::{MeshFormat, RunConfig};
use crate::error::{CliError, Result};
use crate::extract::extract_mesh;
use crate::files::write_bytes;
use crate::record::{Recorder, CONFIG_FILE};
use crate::verify::{run_suite, SUITES};
use crate::{obj, ply, png_io};

#[derive(Debug, Parser)]
#[command(name = "csd", version, about = "Text-to-3D Gaussian splatting with coupled single- and multi-view scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a Gaussian cloud and write checkpoints, snapshots and metrics.
    Optimize(OptimizeArgs),
    /// Extract a colored triangle mesh from a cloud checkpoint.
    ExtractMesh(ExtractArgs),
    /// Run an oracle suite.
    Verify(VerifyArgs),
    /// Render a cloud from one camera to PNG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set csd.lambda=0.3`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory; overrides `run.output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 is the bit-reference, 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Cloud checkpoint (PLY).
    #[arg(long)]
    pub cloud: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<MeshFormat>,
    /// Output mesh path; defaults to `mesh.<format>` next to the cloud.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Density threshold; overrides `mesh.threshold`.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// One of kl-identity, render-oracle, gradient, score, reduction, or all.
    pub suite: String,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub azimuth: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 15.0)]
    pub elevation: f64,
    #[arg(long, default_value_t = 2.2)]
    pub radius: f64,
    #[arg(long, default_value_t = 50.0)]
    pub fov: f64,
    /// Image side in pixels.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Write an alpha channel instead of compositing over white.
    #[arg(long)]
    pub alpha: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<MeshFormat, String> {
    match s {
        "obj" => Ok(MeshFormat::Obj),
        "ply" => Ok(MeshFormat::Ply),
        _ => Err(format!("unknown mesh format `{s}`, expected obj or ply")),
    }
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    RunConfig::load(args.config.as_deref(), &args.overrides)
}

fn config_name(args: &ConfigArgs) -> String {
    args.config.as_deref().and_then(Path::file_stem).map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn optimize(args: &OptimizeArgs) -> Result<PathBuf> {
    let config = load(&args.config)?;
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir(&config_name(&args.config)));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let train = config.train_config();
    let schedule = config.schedule().map_err(|e| CliError::config("schedule", e.to_string()))?;
    let single = config.provider.single()?;
    let multi = config.provider.multi()?;
    write_bytes(&dir.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    let mut recorder = Recorder::new(
        &dir,
        config.run.snapshot_every,
        config.run.checkpoint_every,
        config.resolution.cap,
        train.csd.background,
        train.csd.render,
    )?;
    let providers = Providers { single: single.as_ref(), multi: &multi };
    let out = pool.install(|| run_optimization(&train, &providers, &schedule, &mut recorder));
    let out = match (out, recorder.failure.take()) {
        (_, Some(failure)) => return Err(failure),
        (out, None) => out?,
    };
    recorder.finish(&out.cloud, &out.adapter)?;
    eprintln!("{} Gaussians, {} rejected steps, written to {}", out.cloud.len(), out.rejected, dir.display());
    Ok(dir)
}

pub fn extract(args: &ExtractArgs) -> Result<PathBuf> {
    let mut config = load(&args.config)?;
    if let Some(t) = args.threshold {
        config.mesh.threshold = t;
    }
    if let Some(f) = args.format {
        config.mesh.format = f;
    }
    config.validate()?;
    let cloud = ply::read_cloud(&args.cloud)?;
    let (mesh, report) = extract_mesh(&cloud, &config.mesh, &config.fit_config())?;
    let ext = match config.mesh.format {
        MeshFormat::Obj => "obj",
        MeshFormat::Ply => "ply",
    };
    let out = args.out.clone().unwrap_or_else(|| args.cloud.with_file_name(format!("mesh.{ext}")));
    match config.mesh.format {
        MeshFormat::Obj => obj::write_obj(&out, &mesh)?,
        MeshFormat::Ply => ply::write_mesh(&out, &mesh)?,
    }
    eprintln!(
        "{} occupied voxels, {} vertices, {} faces, fit loss {:.3e}, written to {}",
        report.occupied,
        mesh.vertices.len(),
        mesh.faces.len(),
        report.fit.final_loss,
        out.display()
    );
    Ok(out)
}

/// Runs the named suite (or all) and prints every check; returns whether all
/// passed.
pub fn verify(args: &VerifyArgs) -> Result<bool> {
    let names: Vec<&str> = match args.suite.as_str() {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => return Err(CliError::Usage(format!("unknown suite `{s}`, expected one of {} or all", SUITES.join(", ")))),
    };
    let mut passed = true;
    for name in names {
        let report = run_suite(name).expect("listed suite");
        println!("{report}");
        passed &= report.passed();
    }
    Ok(passed)
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let cloud = ply::read_cloud(&args.cloud)?;
    let cam = Camera::new(args.azimuth, args.elevation, args.radius, args.fov, args.size, args.size)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let bg = if args.alpha { [0.0; 3] } else { [1.0; 3] };
    let img = csd_core::render::render(&cloud, &cam, &bg)?;
    png_io::write_render(&args.out, &img, args.alpha)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Optimize(a) => optimize(a).map(|_| 0),
        Command::ExtractMesh(a) => extract(a).map(|_| 0),
        Command::Verify(a) => verify(a).map(|ok| if ok { 0 } else { 1 }),
        Command::Render(a) => render(a).map(|_| 0),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
