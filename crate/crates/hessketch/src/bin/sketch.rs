//! Experiment front end: generates factors, evaluates the theorem bounds,
//! and runs sketching ensembles, writing JSON and CSV artifacts.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical degeneracy, 4 i/o.
//! `HESSSKETCH_THREADS` caps the worker pool. Reports carry no timestamps,
//! so a rerun with the same config overwrites its artifacts byte-identically.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hessketch::bounds::{condition_threshold, TheoremReport};
use hessketch::datagen::{gen_factor, Distribution, SyntheticSpec};
use hessketch::elliptic::{
    assemble_operator, assemble_sensitivity_factor, drop_zero_rows, shepp_logan_media, Grid2D,
    LayoutPreset,
};
use hessketch::ensemble::{run_condition_ensemble_with_summary, EnsembleConfig, MomentReport};
use hessketch::error::{HskError, Result};
use hessketch::io;
use hessketch::numkit::GramFactor;
use hessketch::serde_util::float_to_text;
use hessketch::sketch::SamplingMode;
use hessketch::spectral::{summarize, SpectralSummary};

#[derive(Parser)]
#[command(
    name = "sketch",
    version,
    about = "Row-subsampling experiments for Gram-structured Hessians"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic factor and report its spectral summary.
    Synthetic(SyntheticArgs),
    /// Assemble the elliptic sensitivity factor for a layout preset.
    Elliptic(EllipticArgs),
    /// Evaluate the theorem bounds at one or more sample sizes.
    Bounds(BoundsArgs),
    /// Run a condition-number ensemble at one or more sample sizes.
    Ensemble(EnsembleArgs),
    /// Monte Carlo moment estimates of the hollow-part norm.
    Moments(MomentsArgs),
}

/// Flags describing where the factor comes from: a saved HSK1 file or a
/// synthetic draw.
#[derive(Args, Clone)]
struct FactorFlags {
    /// Load the factor from an HSK1 file instead of generating one.
    #[arg(long)]
    from_factor: Option<PathBuf>,
    /// Synthetic distribution: gaussian | uniform | bernoulli.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Seed for factor generation; defaults to the experiment seed.
    #[arg(long)]
    factor_seed: Option<u64>,
    /// Bernoulli success probability.
    #[arg(long)]
    bernoulli_p: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct FactorFileCfg {
    from_factor: Option<PathBuf>,
    dist: Option<String>,
    n: Option<usize>,
    r: Option<usize>,
    factor_seed: Option<u64>,
    bernoulli_p: Option<f64>,
}

/// Resolved factor provenance, embedded in every report.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum FactorSource {
    File { from_factor: PathBuf },
    Synthetic(SyntheticSpec),
}

fn resolve_factor(
    flags: &FactorFlags,
    file: &FactorFileCfg,
    default_seed: u64,
) -> Result<(GramFactor, FactorSource)> {
    let from = flags.from_factor.clone().or_else(|| file.from_factor.clone());
    if let Some(path) = from {
        let factor = io::load_factor(&path)?;
        return Ok((factor, FactorSource::File { from_factor: path }));
    }
    let dist_text = flags
        .dist
        .clone()
        .or_else(|| file.dist.clone())
        .ok_or_else(|| HskError::Config("need --from-factor or --dist/--n/--r".into()))?;
    let dist: Distribution = dist_text
        .parse()
        .map_err(HskError::Config)?;
    let n = flags
        .n
        .or(file.n)
        .ok_or_else(|| HskError::Config("synthetic factor needs --n".into()))?;
    let r = flags
        .r
        .or(file.r)
        .ok_or_else(|| HskError::Config("synthetic factor needs --r".into()))?;
    let seed = flags.factor_seed.or(file.factor_seed).unwrap_or(default_seed);
    let mut spec = SyntheticSpec::new(n, r, dist, seed);
    if let Some(p) = flags.bernoulli_p.or(file.bernoulli_p) {
        spec.bernoulli_p = p;
    }
    let factor = gen_factor(&spec)?.factor;
    Ok((factor, FactorSource::Synthetic(spec)))
}

#[derive(Args)]
struct SyntheticArgs {
    #[command(flatten)]
    factor: FactorFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for phi.hsk and the summary reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EllipticArgs {
    /// Layout preset: paper-D1 | paper-D2.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid nodes per side.
    #[arg(long)]
    grid: Option<usize>,
    /// Use harmonic instead of arithmetic face averaging.
    #[arg(long)]
    harmonic: bool,
    /// Override the preset's source fraction.
    #[arg(long)]
    fraction: Option<f64>,
    /// Override the preset's detector radius (Chebyshev, in grid units).
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct EllipticFileCfg {
    preset: Option<String>,
    seed: Option<u64>,
    grid: Option<usize>,
    harmonic: Option<bool>,
    fraction: Option<f64>,
    radius: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    factor: FactorFlags,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    factor: FactorFlags,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling mode: with-replacement | without-replacement.
    #[arg(long)]
    mode: Option<String>,
    /// Quantile failure probability for the refined diagonal parameters.
    #[arg(long)]
    eta: Option<f64>,
    /// Rank-recording thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    rank_thresholds: Vec<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct EnsembleFileCfg {
    #[serde(flatten)]
    factor: FactorFileCfg,
    m: Option<Vec<usize>>,
    trials: Option<usize>,
    seed: Option<u64>,
    mode: Option<String>,
    eta: Option<f64>,
    rank_thresholds: Option<Vec<f64>>,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    factor: FactorFlags,
    #[arg(long)]
    m: Option<usize>,
    /// Even moment orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<u32>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load_cfg<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| HskError::Config(format!("bad config file {}: {e}", p.display())))
        }
    }
}

fn parse_mode(text: Option<String>) -> Result<SamplingMode> {
    match text {
        None => Ok(SamplingMode::WithReplacement),
        Some(t) => t.parse().map_err(HskError::Config),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryReport<'a> {
    source: &'a FactorSource,
    seed: u64,
    summary: &'a SpectralSummary,
}

fn write_summary(out: &Path, source: &FactorSource, seed: u64, summary: &SpectralSummary) -> Result<()> {
    io::write_json(&out.join("summary.json"), &SummaryReport { source, seed, summary })?;
    io::write_text(&out.join("summary.csv"), &io::summary_csv(summary))
}

fn run_synthetic(args: SyntheticArgs) -> Result<()> {
    let file: FactorFileCfg = load_cfg(&args.config)?;
    let seed = args.seed.or(file.factor_seed).unwrap_or(0);
    let (factor, source) = resolve_factor(&args.factor, &file, seed)?;
    ensure_out(&args.out)?;
    io::save_factor(&args.out.join("phi.hsk"), &factor)?;
    let summary = summarize(&factor)?;
    write_summary(&args.out, &source, seed, &summary)
}

#[derive(Serialize)]
struct EllipticReport {
    preset: String,
    grid_nodes_per_side: usize,
    harmonic: bool,
    seed: u64,
    pair_count: usize,
    solve_count: usize,
    dropped_zero_rows: Vec<usize>,
    summary: SpectralSummary,
}

fn run_elliptic(args: EllipticArgs) -> Result<()> {
    let file: EllipticFileCfg = load_cfg(&args.config)?;
    let preset_text = args
        .preset
        .or(file.preset)
        .ok_or_else(|| HskError::Config("elliptic needs --preset".into()))?;
    let preset: LayoutPreset = preset_text.parse().map_err(HskError::Config)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let nodes = args.grid.or(file.grid).unwrap_or(65);
    let harmonic = args.harmonic || file.harmonic.unwrap_or(false);

    let grid = Grid2D::new(nodes)?;
    let media = shepp_logan_media(&grid);
    let system = assemble_operator(&grid, &media, harmonic)?;
    let (mut fraction, mut radius) = preset.params();
    if let Some(f) = args.fraction.or(file.fraction) {
        fraction = f;
    }
    if let Some(rad) = args.radius.or(file.radius) {
        radius = rad;
    }
    let layout = hessketch::elliptic::build_layout(&grid, preset.domain(), fraction, radius, seed)?;
    let assembly = assemble_sensitivity_factor(&system, &layout)?;
    let (factor, dropped) = drop_zero_rows(&assembly.factor)?;
    let summary = summarize(&factor)?;

    ensure_out(&args.out)?;
    io::save_factor(&args.out.join("phi.hsk"), &factor)?;
    io::write_json(&args.out.join("layout.json"), &layout)?;
    let mut layout_csv = String::from("source,detector\n");
    for &(a, b) in &layout.pairs {
        layout_csv.push_str(&format!("{a},{b}\n"));
    }
    io::write_text(&args.out.join("layout.csv"), &layout_csv)?;
    let mut media_csv = String::from("ix,iy,sigma\n");
    for idx in 0..grid.n_nodes() {
        let (ix, iy) = grid.node_coords(idx);
        media_csv.push_str(&format!("{ix},{iy},{}\n", float_to_text(media.sigma[idx])));
    }
    io::write_text(&args.out.join("media.csv"), &media_csv)?;
    io::write_text(&args.out.join("summary.csv"), &io::summary_csv(&summary))?;
    io::write_json(
        &args.out.join("elliptic.json"),
        &EllipticReport {
            preset: preset_text,
            grid_nodes_per_side: nodes,
            harmonic,
            seed,
            pair_count: layout.r(),
            solve_count: assembly.solve_count,
            dropped_zero_rows: dropped,
            summary,
        },
    )
}

#[derive(Serialize)]
struct BoundsReportDoc<'a> {
    source: &'a FactorSource,
    seed: u64,
    summary: &'a SpectralSummary,
    reports: &'a [TheoremReport],
}

fn bounds_reports(summary: &SpectralSummary, ms: &[usize]) -> Result<Vec<TheoremReport>> {
    ms.iter()
        .map(|&m| condition_threshold(summary, m, summary.r))
        .collect()
}

fn run_bounds(args: BoundsArgs) -> Result<()> {
    let file: FactorFileCfg = load_cfg(&args.config)?;
    let seed = args.seed.unwrap_or(0);
    let (factor, source) = resolve_factor(&args.factor, &file, seed)?;
    if args.m.is_empty() {
        return Err(HskError::Config("bounds needs at least one --m".into()));
    }
    let summary = summarize(&factor)?;
    let reports = bounds_reports(&summary, &args.m)?;
    ensure_out(&args.out)?;
    write_summary(&args.out, &source, seed, &summary)?;
    io::write_json(
        &args.out.join("bounds.json"),
        &BoundsReportDoc { source: &source, seed, summary: &summary, reports: &reports },
    )?;
    io::write_text(&args.out.join("bounds.csv"), &io::bounds_csv(&reports))?;
    for rep in &reports {
        println!("{}", serde_json::to_string(rep).expect("report serializes"));
    }
    Ok(())
}

fn run_ensemble(args: EnsembleArgs) -> Result<()> {
    let file: EnsembleFileCfg = load_cfg(&args.config)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let (factor, source) = resolve_factor(&args.factor, &file.factor, seed)?;
    let ms = if args.m.is_empty() {
        file.m.clone().unwrap_or_default()
    } else {
        args.m.clone()
    };
    if ms.is_empty() {
        return Err(HskError::Config("ensemble needs at least one --m".into()));
    }
    let trials = args.trials.or(file.trials).unwrap_or(1000);
    let mode = parse_mode(args.mode.or(file.mode))?;
    let summary = summarize(&factor)?;

    ensure_out(&args.out)?;
    write_summary(&args.out, &source, seed, &summary)?;
    let reports = bounds_reports(&summary, &ms)?;
    io::write_text(&args.out.join("bounds.csv"), &io::bounds_csv(&reports))?;
    io::write_json(&args.out.join("bounds.json"), &reports)?;

    for &m in &ms {
        let mut cfg = EnsembleConfig::new(m, trials, seed, mode);
        if let Some(eta) = args.eta.or(file.eta) {
            cfg.eta = eta;
        }
        if !args.rank_thresholds.is_empty() {
            cfg.rank_thresholds = args.rank_thresholds.clone();
        } else if let Some(thr) = &file.rank_thresholds {
            cfg.rank_thresholds = thr.clone();
        }
        let report = run_condition_ensemble_with_summary(&factor, &summary, &cfg)?;
        io::write_json(&args.out.join(format!("ensemble_m{m}.json")), &report)?;
        io::write_text(
            &args.out.join(format!("ensemble_m{m}.csv")),
            &io::ensemble_csv(&report.records),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MomentsDoc<'a> {
    source: &'a FactorSource,
    seed: u64,
    m: usize,
    trials: usize,
    mode: SamplingMode,
    summary: &'a SpectralSummary,
    moments: &'a [MomentReport],
}

fn run_moments(args: MomentsArgs) -> Result<()> {
    let file: FactorFileCfg = load_cfg(&args.config)?;
    let seed = args.seed.unwrap_or(0);
    let (factor, source) = resolve_factor(&args.factor, &file, seed)?;
    let m = args
        .m
        .ok_or_else(|| HskError::Config("moments needs --m".into()))?;
    let orders = if args.p.is_empty() { vec![2, 4, 8] } else { args.p.clone() };
    let trials = args.trials.unwrap_or(1000);
    let mode = parse_mode(args.mode)?;
    let summary = summarize(&factor)?;
    let moments = orders
        .iter()
        .map(|&p| hessketch::ensemble::moment_estimate(&factor, &summary, m, p, trials, seed, mode))
        .collect::<Result<Vec<_>>>()?;
    ensure_out(&args.out)?;
    io::write_json(
        &args.out.join("moments.json"),
        &MomentsDoc { source: &source, seed, m, trials, mode, summary: &summary, moments: &moments },
    )?;
    let mut csv = String::from("m,p,estimate,bound\n");
    for rep in &moments {
        csv.push_str(&format!(
            "{m},{},{},{}\n",
            rep.p,
            float_to_text(rep.estimate),
            float_to_text(rep.bound)
        ));
    }
    io::write_text(&args.out.join("moments.csv"), &csv)
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("HESSSKETCH_THREADS") {
        let k: usize = raw
            .parse()
            .map_err(|_| HskError::Config(format!("HESSSKETCH_THREADS must be a count, got '{raw}'")))?;
        if k == 0 {
            return Err(HskError::Config("HESSSKETCH_THREADS must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| HskError::Config(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synthetic(a) => run_synthetic(a),
        Cmd::Elliptic(a) => run_elliptic(a),
        Cmd::Bounds(a) => run_bounds(a),
        Cmd::Ensemble(a) => run_ensemble(a),
        Cmd::Moments(a) => run_moments(a),
    }
}

fn main() {
    let status = init_threads().and_then(|_| run(Cli::parse()));
    if let Err(e) = status {
        let record = serde_json::json!({
            "error": e.to_string(),
            "exit_code": e.exit_code(),
        });
        eprintln!("{record}");
        std::process::exit(e.exit_code());
    }
}
