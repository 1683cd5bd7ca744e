//! Command-line driver: argument parsing, file I/O, report assembly and exit
//! codes. Analysis lives in the `semcurv` library.

pub mod json;
pub mod manifest;
pub mod reports;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use semcurv::geometry_check::{run_suite, Faults};
use semcurv::landscape::{
    fit_bundle_pca, foliation_export, layer_frames, rasterize_in, render_svg, Bounds, LandscapeError,
};
use semcurv::lensing::{align_triples, compare_triple, summarize_cohort};
use semcurv::null_model::{null_statistics_all, NullConfig};
use semcurv::stats::{paired_test, pooled_test};
use semcurv::{load_bundle, AnalysisConfig, TrajectoryBundle};

use manifest::{check_manifest, InputDigest, RunManifest};
use reports::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => EXIT_IO,
            Self::Usage(_) => EXIT_USAGE,
            Self::Analysis(_) => EXIT_ANALYSIS,
        }
    }
}

fn analysis<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Analysis(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "semcurv",
    version,
    about = "Curvature analysis of layerwise token-embedding trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-trajectory turning angles, tail counts and length-to-chord ratios.
    Analyze(AnalyzeArgs),
    /// Pooled Monte-Carlo and paired t-tests against the isotropic null.
    Nulltest(NulltestArgs),
    /// Divergence metrics for aligned (with, without, base) triples.
    Lensing(LensingArgs),
    /// Shared PCA plane, per-layer frames and smoothed angle grids.
    Landscape(LandscapeArgs),
    /// Identity and gradient checks of the toy attention geometry.
    GeometryCheck(GeometryArgs),
    /// Checks that a report embeds a run manifest.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    /// Turning angles strictly below this many degrees count as flat.
    #[arg(long = "flat-deg", default_value_t = 80.0)]
    pub flat_deg: f64,
    /// Turning angles strictly above this many degrees count as sharp.
    #[arg(long = "sharp-deg", default_value_t = 100.0)]
    pub sharp_deg: f64,
}

impl ThresholdArgs {
    fn config(&self) -> Result<AnalysisConfig, CliError> {
        AnalysisConfig::new(self.flat_deg, self.sharp_deg, AnalysisConfig::default().degenerate_eps)
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
pub struct NulltestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Null draws per trajectory.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
pub struct LensingArgs {
    #[arg(long)]
    pub with: PathBuf,
    #[arg(long)]
    pub without: PathBuf,
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be a positive finite number".into())
    }
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for frames.json, grids.json and landscape.svg.
    #[arg(long)]
    pub out: PathBuf,
    /// Grid cells per side.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..=4096))]
    pub grid: u64,
    /// Kernel bandwidth as a fraction of the plane's diagonal.
    #[arg(long, default_value_t = 0.08, value_parser = positive_fraction)]
    pub bandwidth: f64,
    /// Also write landscape.svg.
    #[arg(long)]
    pub render: bool,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn render<T: serde::Serialize>(report: &T) -> Result<String, CliError> {
    json::to_canonical_string(report).map_err(analysis("serializing report"))
}

fn load(role: &str, path: &Path) -> Result<(TrajectoryBundle, InputDigest), CliError> {
    let bytes = read(path)?;
    let bundle = load_bundle(&bytes).map_err(|e| CliError::Analysis(format!("{}: {e}", path.display())))?;
    Ok((bundle, InputDigest::new(role, path, &bytes)))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Nulltest(a) => nulltest(a),
        Command::Lensing(a) => lensing(a),
        Command::Landscape(a) => landscape(a),
        Command::GeometryCheck(a) => geometry_check(a, Faults::default()),
        Command::Validate(a) => validate(a),
    }
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let cfg = a.thresholds.config()?;
    let (bundle, digest) = load("input", &a.input)?;
    let manifest = RunManifest::new("analyze", ThresholdConfig::from(&cfg), vec![digest]);
    emit(a.out.as_deref(), &render(&analyze_report(&bundle, &cfg, manifest))?)
}

fn nulltest(a: NulltestArgs) -> Result<(), CliError> {
    let cfg = a.thresholds.config()?;
    let samples = usize::try_from(a.samples).map_err(|e| CliError::Usage(e.to_string()))?;
    let ncfg = NullConfig::new(samples, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let (bundle, digest) = load("input", &a.input)?;
    let sums = summaries(&bundle, &cfg);
    let nulls = null_statistics_all(&bundle.trajectories, &cfg, &ncfg);
    let pooled = pooled_test(&sums, &nulls).map_err(analysis("pooled test"))?;
    let paired = paired_test(&sums, &nulls).map_err(analysis("paired test"))?;
    let manifest = RunManifest::new(
        "nulltest",
        NullTestConfig {
            thresholds: (&cfg).into(),
            samples,
            seed: a.seed,
        },
        vec![digest],
    );
    let report = null_test_report(&bundle, &sums, &nulls, &pooled, &paired, manifest);
    emit(a.out.as_deref(), &render(&report)?)
}

fn lensing(a: LensingArgs) -> Result<(), CliError> {
    let eps = AnalysisConfig::default().degenerate_eps;
    let (with, dw) = load("with", &a.with)?;
    let (without, dwo) = load("without", &a.without)?;
    let (base, db) = load("base", &a.base)?;
    let triples = align_triples(&with.trajectories, &without.trajectories, &base.trajectories)
        .map_err(analysis("aligning triples"))?;
    let reports = triples
        .iter()
        .map(|t| compare_triple(t, eps).map_err(analysis(&t.triple_id)))
        .collect::<Result<Vec<_>, _>>()?;
    let cohort = summarize_cohort(&reports).map_err(analysis("cohort"))?;
    let manifest = RunManifest::new("lensing", LensingConfig { degenerate_eps: eps }, vec![dw, dwo, db]);
    emit(a.out.as_deref(), &render(&lensing_report(&reports, &cohort, manifest))?)
}

fn landscape(a: LandscapeArgs) -> Result<(), CliError> {
    let cfg = a.thresholds.config()?;
    let (bundle, digest) = load("input", &a.input)?;
    let resolution = a.grid as usize;
    let proj = fit_bundle_pca(&bundle).map_err(analysis("PCA"))?;
    let frames = layer_frames(&bundle, &cfg, &proj);
    let foliation = foliation_export(&bundle, &cfg, &proj);
    let bounds = Bounds::around(frames.iter().flat_map(|f| f.token_points.iter().map(|t| &t.position)))
        .ok_or_else(|| CliError::Analysis("bundle has no internal layers to draw".into()))?;
    let grids = frames
        .iter()
        .map(|f| match rasterize_in(f, bounds, resolution, a.bandwidth) {
            Ok(g) => Ok((f.layer_index, Some(g))),
            Err(LandscapeError::NoDefinedAngles) => Ok((f.layer_index, None)),
            Err(e) => Err(CliError::Analysis(format!("layer {}: {e}", f.layer_index))),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let config = LandscapeConfig {
        thresholds: (&cfg).into(),
        grid: resolution,
        bandwidth: a.bandwidth,
        render: a.render,
    };
    let manifest = RunManifest::new("landscape", config, vec![digest]);
    write(
        &a.out.join("frames.json"),
        &render(&frames_report(&proj, &frames, &foliation, manifest.clone()))?,
    )?;
    write(
        &a.out.join("grids.json"),
        &render(&grids_report(resolution, &bounds, &grids, manifest))?,
    )?;
    if a.render {
        let (drawn_frames, drawn_grids): (Vec<_>, Vec<_>) = frames
            .iter()
            .zip(&grids)
            .filter_map(|(f, (_, g))| Some((f.clone(), g.clone()?)))
            .unzip();
        write(&a.out.join("landscape.svg"), &render_svg(&drawn_frames, &drawn_grids))?;
    }
    Ok(())
}

/// Runs the toy geometry suite; `faults` is a test hook.
pub fn geometry_check(a: GeometryArgs, faults: Faults) -> Result<(), CliError> {
    let trials = usize::try_from(a.trials).map_err(|e| CliError::Usage(e.to_string()))?;
    let suite = run_suite(a.seed, trials, faults).map_err(analysis("geometry suite"))?;
    let manifest = RunManifest::new("geometry-check", GeometryConfig { seed: a.seed, trials }, Vec::new());
    emit(a.out.as_deref(), &render(&geometry_report(&suite, manifest))?)?;
    match suite.checks.iter().find(|c| !c.passed()) {
        None => Ok(()),
        Some(c) => Err(CliError::Analysis(format!(
            "{} failed: residual {:e} above tolerance {:e} at case seed {}",
            c.name,
            c.max_residual,
            c.tolerance,
            c.first_failure.unwrap_or(c.worst_seed)
        ))),
    }
}

fn validate(a: ValidateArgs) -> Result<(), CliError> {
    let bytes = read(&a.input)?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Analysis(format!("{}: {e}", a.input.display())))?;
    check_manifest(&value).map_err(|e| CliError::Analysis(format!("{}: {e}", a.input.display())))
}
