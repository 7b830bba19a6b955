use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use synscale::calibration::write_optima_csv;
use synscale::occupancy::{DeviceSpec, KernelSpec, Limiter, Limits};
use synscale::{
    device_preset, fit_gscale, occupancy, recommend_block_size, run, select_optima, sweep, FitResult, MemReport,
    StorageChoice,
};

use crate::config::{validate_config, ExperimentConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StorageArg {
    Dense,
    Sparse,
}

fn storage(arg: Option<StorageArg>) -> StorageChoice {
    match arg {
        None => StorageChoice::PerGroup,
        Some(StorageArg::Dense) => StorageChoice::Dense,
        Some(StorageArg::Sparse) => StorageChoice::Sparse,
    }
}

fn internal(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).map_err(internal(&path))?);
    fill(&mut w).and_then(|_| w.flush()).map_err(internal(&path))?;
    Ok(path)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(internal(dir))
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment config (JSON).
    pub config: PathBuf,
    /// Overrides the storage of every synapse group.
    #[arg(long, value_enum)]
    pub storage: Option<StorageArg>,
    /// Overrides the network seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One run; writes `raster.csv` and `summary.json`.
pub fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let spec = cfg.network(args.seed)?;
    let result = run(&spec, storage(args.storage))?;
    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    write_file(&dir, "raster.csv", |w| result.raster.write_csv(w))?;
    let summary = result.summary_json()?;
    write_file(&dir, "summary.json", |w| writeln!(w, "{summary}"))?;
    let out = |e: std::io::Error| CliError::Internal(e.to_string());
    writeln!(stdout, "{} steps, {} spikes, {} non-finite neurons", result.steps, result.raster.spikes.len(), result.sum_nans)
        .map_err(out)?;
    for (pop, rate) in &result.avg_spike {
        writeln!(stdout, "  {pop}: {rate} Hz").map_err(out)?;
    }
    writeln!(stdout, "wrote raster.csv and summary.json to {}", dir.display()).map_err(out)
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Experiment config (JSON) with a `sweep` section.
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub storage: Option<StorageArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Reference {
    n_conn: usize,
    g_scale: f64,
    avg_spike: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Optimum {
    n_conn: usize,
    g_scale: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FitReport<'a> {
    reference: Reference,
    /// The selected optima the curve was fitted to.
    points: Vec<Optimum>,
    excluded_n_conn: &'a [usize],
    fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

/// Sweep, optimum selection and hyperbolic fit. Writes `simulation_result.out`,
/// `optima.csv`, `fit.json`, and `sweep_failures.csv` when any cell failed.
pub fn calibrate(args: &CalibrateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let Some(sweep_cfg) = cfg.sweep.clone() else {
        return Err(CliError::User("config has no `sweep` section".into()));
    };
    validate_config(&cfg)?;
    let (ref_n, ref_g) = sweep_cfg.reference();
    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;

    let template = |n: usize, g: f64| cfg.network_at(n, g);
    let outcome = sweep(
        &template,
        &sweep_cfg.n_conn_values,
        &sweep_cfg.g_scale_values,
        &sweep_cfg.target_population,
        storage(args.storage),
        cfg.parallelism,
    )?;
    write_file(&dir, "simulation_result.out", |w| outcome.write_csv(w))?;
    let failures_path = dir.join("sweep_failures.csv");
    let err = |e: std::io::Error| CliError::Internal(e.to_string());
    if outcome.failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(internal(&failures_path))?;
        }
    } else {
        write_file(&dir, "sweep_failures.csv", |w| outcome.write_failures_csv(w))?;
        writeln!(stderr, "warning: {} sweep cell(s) failed, see sweep_failures.csv", outcome.failures.len()).map_err(err)?;
    }

    for r in outcome.rows.iter().filter(|r| r.sum_nans > 0) {
        writeln!(
            stderr,
            "warning: nConn = {}, gScale = {}: {} non-finite neurons, excluded from selection",
            r.n_conn, r.g_scale, r.sum_nans
        )
        .map_err(err)?;
    }
    let selection = select_optima(&outcome.rows, ref_n, ref_g)?;
    for w in selection.warnings() {
        writeln!(stderr, "{w}").map_err(err)?;
    }
    write_file(&dir, "optima.csv", |w| write_optima_csv(&selection.optima, w))?;

    let points: Vec<(f64, f64)> = selection.optima.iter().map(|&(n, g)| (n as f64, g)).collect();
    let (fit, skipped) = match fit_gscale(&points) {
        Ok(f) => (Some(f), None),
        Err(e @ (synscale::Error::TooFewPoints { .. } | synscale::Error::DuplicateX(_))) => {
            writeln!(stderr, "warning: fit skipped: {e}").map_err(err)?;
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let report = FitReport {
        reference: Reference { n_conn: ref_n, g_scale: ref_g, avg_spike: selection.reference_avg_spike },
        points: selection.optima.iter().map(|&(n_conn, g_scale)| Optimum { n_conn, g_scale }).collect(),
        excluded_n_conn: &selection.excluded,
        fit,
        skipped,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&dir, "fit.json", |w| writeln!(w, "{json}"))?;

    writeln!(stdout, "{} rows, {} optima, reference rate {} Hz", outcome.rows.len(), selection.optima.len(), selection.reference_avg_spike)
        .map_err(err)?;
    if let Some(f) = fit {
        writeln!(
            stdout,
            "gScale = {} / ({} + nConn) + {}  (MAPE {:.3}%, converged: {})",
            f.k1, f.k2, f.k3, f.mape_percent, f.converged
        )
        .map_err(err)?;
    }
    writeln!(stdout, "wrote results to {}", dir.display()).map_err(err)
}

#[derive(Debug, Args)]
pub struct OccupancyArgs {
    /// Device preset (cc20, cc30, cc35).
    #[arg(long, conflicts_with = "device_file", required_unless_present = "device_file")]
    pub device: Option<String>,
    /// Device description (JSON).
    #[arg(long)]
    pub device_file: Option<PathBuf>,
    /// Threads per block; ignored with --recommend.
    #[arg(long, required_unless_present = "recommend")]
    pub threads: Option<u32>,
    /// Registers per thread.
    #[arg(long, default_value_t = 0)]
    pub regs: u32,
    /// Shared memory per block, bytes.
    #[arg(long, default_value_t = 0)]
    pub shared: u32,
    /// Search every multiple of the warp size for the best block size.
    #[arg(long)]
    pub recommend: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CurvePoint {
    threads: u32,
    occupancy: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RecommendationReport {
    block_size: u32,
    occupancy: f64,
    curve: Vec<CurvePoint>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OccupancyReport {
    device: DeviceSpec,
    kernel: KernelSpec,
    warps_per_block: u32,
    limits: Limits,
    active_blocks: u32,
    active_warps: u32,
    occupancy: f64,
    limiters: Vec<Limiter>,
    recommendation: Option<RecommendationReport>,
}

pub fn occupancy_report(args: &OccupancyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let device = match (&args.device, &args.device_file) {
        (Some(name), _) => device_preset(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
            let dev: DeviceSpec = serde_json::from_str(&text).map_err(|e| CliError::User(format!("device file: {e}")))?;
            dev.check()?;
            dev
        }
        (None, None) => return Err(CliError::User("give --device or --device-file".into())),
    };
    let (kernel, result, recommendation) = if args.recommend {
        let rec = recommend_block_size(&device, args.regs, args.shared)?;
        let kernel = KernelSpec { threads_per_block: rec.block_size, regs_per_thread: args.regs, shared_mem_per_block: args.shared };
        let report = RecommendationReport {
            block_size: rec.block_size,
            occupancy: rec.result.occupancy,
            curve: rec.curve.iter().map(|&(threads, occupancy)| CurvePoint { threads, occupancy }).collect(),
        };
        (kernel, rec.result, Some(report))
    } else {
        let threads = args.threads.ok_or_else(|| CliError::User("--threads is required without --recommend".into()))?;
        let kernel = KernelSpec { threads_per_block: threads, regs_per_thread: args.regs, shared_mem_per_block: args.shared };
        let result = occupancy(&device, &kernel)?;
        (kernel, result, None)
    };
    let report = OccupancyReport {
        device,
        kernel,
        warps_per_block: result.warps_per_block,
        limits: result.limits,
        active_blocks: result.active_blocks,
        active_warps: result.active_warps,
        occupancy: result.occupancy,
        limiters: result.limiters,
        recommendation,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(stdout, "{json}").map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Debug, Args)]
pub struct MemReportArgs {
    #[arg(long = "n-pre", alias = "nPre")]
    pub n_pre: u64,
    #[arg(long = "n-post", alias = "nPost")]
    pub n_post: u64,
    /// Connections per presynaptic neuron.
    #[arg(long = "n-conn", alias = "nConn")]
    pub n_conn: u64,
}

pub fn mem_report(args: &MemReportArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let report = MemReport::new(args.n_pre, args.n_post, args.n_conn)?;
    writeln!(stdout, "{report}").map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub config: PathBuf,
}

pub fn validate(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let spec = validate_config(&cfg)?;
    let cells = cfg.sweep.as_ref().map_or(0, |s| s.n_conn_values.len() * s.g_scale_values.len());
    writeln!(
        stdout,
        "ok: {} populations, {} neurons, {} synapse groups, {} steps, {} sweep cells",
        spec.populations.len(),
        spec.total_neurons(),
        spec.synapses.len(),
        spec.steps(),
        cells
    )
    .map_err(|e| CliError::Internal(e.to_string()))
}
