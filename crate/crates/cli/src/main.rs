//! Command-line front end: simulate -> reconstruct -> metrics -> export,
//! plus provenance verification. Every flag has a config-file equivalent
//! (`--config file.json`, CLI flags win); outputs embed enough provenance
//! to re-derive them byte for byte.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dynct::error::Error;
use dynct::io::{
    self, encode_sinogram, encode_volume, geometry_from_header, MetricsRow, Provenance,
};
use dynct::metrics::stack_metrics;
use dynct::phantom::{
    make_stem_phantom, simulate_measurements, NoiseConfig, NoiseModel, PhantomConfig,
    SimulationConfig,
};
use dynct::projector::Geometry;
use dynct::recon::{a_priori_sparsity_for, default_params, reconstruct, Method, ReconOutput};
use dynct::solver::CombineMode;
use dynct::types::VolumeStack;

#[derive(Parser)]
#[command(name = "dynct", version, about = "Sparse dynamic CT reconstruction toolkit")]
struct Cli {
    /// Worker thread count (default: DYNCT_THREADS env var, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dynamic stem phantom and simulate noisy measurements.
    Simulate(SimulateArgs),
    /// Reconstruct a sinogram stack with fbp, haar, sh2d or sh3d.
    Reconstruct(ReconstructArgs),
    /// Compare a reconstruction against a reference stack; writes CSV.
    Metrics(MetricsArgs),
    /// Export selected frames as 16-bit PGM images.
    Export(ExportArgs),
    /// Re-derive a simulation output from its embedded provenance and
    /// byte-compare.
    Verify(VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("DYNCT_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0); // 0 = rayon default (all cores)
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> dynct::Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Export(a) => cmd_export(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> dynct::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                offset: e.column() as u64,
                msg: format!("bad config: {e}"),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

/// Fully resolved simulation configuration; this exact structure is embedded
/// as provenance in both output files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimulateConfig {
    n: usize,
    frames: usize,
    projections: usize,
    detectors: Option<usize>,
    detector_spacing: f64,
    spread_points: usize,
    seed: u64,
    noise_seed: u64,
    sigma_rel: f64,
    noise_model: NoiseModel,
    supersample: usize,
    bin_factor: usize,
    background_level: f64,
    ring_level: f64,
    agent_peak: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let phantom = PhantomConfig::desk();
        let noise = NoiseConfig::default();
        let sim = SimulationConfig::default();
        Self {
            n: phantom.side,
            frames: phantom.frames,
            projections: 30,
            detectors: None,
            detector_spacing: 1.0,
            spread_points: phantom.spread_points,
            seed: phantom.seed,
            noise_seed: noise.seed,
            sigma_rel: noise.sigma_rel,
            noise_model: noise.model,
            supersample: sim.supersample,
            bin_factor: sim.bin_factor,
            background_level: phantom.background_level,
            ring_level: phantom.ring_level,
            agent_peak: phantom.agent_peak,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file holding a SimulateConfig; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    projections: Option<usize>,
    #[arg(long)]
    detectors: Option<usize>,
    #[arg(long)]
    detector_spacing: Option<f64>,
    #[arg(long)]
    spread_points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    sigma_rel: Option<f64>,
    /// relative_std or relative_variance
    #[arg(long)]
    noise_model: Option<String>,
    #[arg(long)]
    supersample: Option<usize>,
    #[arg(long)]
    bin_factor: Option<usize>,
    #[arg(long)]
    background_level: Option<f64>,
    #[arg(long)]
    ring_level: Option<f64>,
    #[arg(long)]
    agent_peak: Option<f64>,
}

impl SimulateArgs {
    fn resolve(&self) -> dynct::Result<SimulateConfig> {
        let mut cfg: SimulateConfig = load_config(&self.config)?;
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        take!(n);
        take!(frames);
        take!(projections);
        take!(detector_spacing);
        take!(spread_points);
        take!(seed);
        take!(noise_seed);
        take!(sigma_rel);
        take!(supersample);
        take!(bin_factor);
        take!(background_level);
        take!(ring_level);
        take!(agent_peak);
        if self.detectors.is_some() {
            cfg.detectors = self.detectors;
        }
        if let Some(m) = &self.noise_model {
            cfg.noise_model = match m.as_str() {
                "relative_std" => NoiseModel::RelativeStd,
                "relative_variance" => NoiseModel::RelativeVariance,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown noise model {other:?}"
                    )))
                }
            };
        }
        Ok(cfg)
    }
}

fn simulate_geometry(cfg: &SimulateConfig) -> dynct::Result<Geometry> {
    let base = Geometry::parallel(cfg.n, cfg.projections)?;
    Geometry::new(
        cfg.n,
        cfg.detectors.unwrap_or(base.detectors),
        cfg.detector_spacing,
        base.angles,
    )
}

/// Run a resolved simulation in memory; returns (truth, sinogram, geometry).
fn run_simulation(
    cfg: &SimulateConfig,
) -> dynct::Result<(VolumeStack, dynct::types::SinogramStack, Geometry)> {
    let phantom = PhantomConfig {
        side: cfg.n,
        frames: cfg.frames,
        spread_points: cfg.spread_points,
        seed: cfg.seed,
        background_level: cfg.background_level,
        ring_level: cfg.ring_level,
        agent_peak: cfg.agent_peak,
    };
    let geom = simulate_geometry(cfg)?;
    if !geom.covers_diagonal() {
        eprintln!(
            "{}",
            serde_json::json!({"warning": "detector array does not cover the image diagonal"})
        );
    }
    let truth = make_stem_phantom(&phantom)?;
    let sim = SimulationConfig {
        supersample: cfg.supersample,
        bin_factor: cfg.bin_factor,
    };
    let noise = NoiseConfig {
        sigma_rel: cfg.sigma_rel,
        seed: cfg.noise_seed,
        model: cfg.noise_model,
    };
    let y = simulate_measurements(&truth, &geom, &sim, &noise)?;
    Ok((truth, y, geom))
}

/// Geometry the binned sinogram conforms to (what reconstruction uses).
fn binned_geometry(cfg: &SimulateConfig, geom: &Geometry, detectors: usize) -> dynct::Result<Geometry> {
    Geometry::new(
        cfg.n,
        detectors,
        geom.detector_spacing * cfg.bin_factor as f64 / cfg.supersample as f64,
        geom.angles.clone(),
    )
}

fn cmd_simulate(args: SimulateArgs) -> dynct::Result<()> {
    let cfg = args.resolve()?;
    let (truth, y, geom) = run_simulation(&cfg)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let prov = Provenance::new("simulate", serde_json::to_value(&cfg).unwrap());
    let out_geom = binned_geometry(&cfg, &geom, y.detectors())?;
    let truth_path = args.out_dir.join("truth.stk");
    let sino_path = args.out_dir.join("sinogram.stk");
    io::write_volume_stack(&truth_path, &truth, Some(prov.clone()))?;
    io::write_sinogram_stack(&sino_path, &y, Some(&out_geom), Some(prov))?;
    println!(
        "{}",
        serde_json::json!({
            "truth": truth_path,
            "sinogram": sino_path,
            "frames": truth.frames(),
            "projections": geom.projections(),
            "detectors": y.detectors(),
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// reconstruct

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReconstructConfig {
    method: String,
    gamma: Option<f64>,
    lambda: Option<f64>,
    max_iters: Option<usize>,
    delta1: Option<f64>,
    delta2: Option<f64>,
    c_pr: Option<f64>,
    omega: Option<f64>,
    kappa: Option<f64>,
    zeta: Option<f64>,
    combine: Option<String>,
    seed: Option<u64>,
    haar_levels: Option<u32>,
    sh2d_scales: Option<usize>,
    sh3d_scales: Option<usize>,
    record_objective: Option<bool>,
    stale_dual_threshold: Option<bool>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            method: "sh3d".into(),
            gamma: None,
            lambda: None,
            max_iters: None,
            delta1: None,
            delta2: None,
            c_pr: None,
            omega: None,
            kappa: None,
            zeta: None,
            combine: None,
            seed: None,
            haar_levels: None,
            sh2d_scales: None,
            sh3d_scales: None,
            record_objective: None,
            stale_dual_threshold: None,
        }
    }
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input sinogram stack.
    #[arg(long)]
    input: PathBuf,
    /// Output reconstruction stack.
    #[arg(long)]
    output: PathBuf,
    /// Solver report JSON (default: <output>.report.json).
    #[arg(long)]
    report: Option<PathBuf>,
    /// fbp | haar | sh2d | sh3d
    #[arg(long)]
    method: Option<String>,
    /// Compute the sparsity target from this reference stack (ground truth
    /// or a dense-angle reconstruction) instead of the method default.
    #[arg(long)]
    c_pr_from: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    c_pr: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    /// average | middle (merge mode for inflated stacks)
    #[arg(long)]
    combine: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    haar_levels: Option<u32>,
    #[arg(long)]
    sh2d_scales: Option<usize>,
    #[arg(long)]
    sh3d_scales: Option<usize>,
    #[arg(long)]
    record_objective: Option<bool>,
    #[arg(long)]
    stale_dual_threshold: Option<bool>,
}

#[derive(Serialize)]
struct ReconReportFile {
    method: String,
    projections: usize,
    frames: usize,
    solver: Option<dynct::solver::SolveReport>,
    time_per_iteration_s: Option<f64>,
    inflation: Option<dynct::recon::InflationNote>,
}

fn cmd_reconstruct(args: ReconstructArgs) -> dynct::Result<()> {
    let mut cfg: ReconstructConfig = load_config(&args.config)?;
    if let Some(m) = &args.method {
        cfg.method = m.clone();
    }
    macro_rules! take {
        ($field:ident) => {
            if args.$field.is_some() {
                cfg.$field = args.$field;
            }
        };
    }
    take!(gamma);
    take!(lambda);
    take!(max_iters);
    take!(delta1);
    take!(delta2);
    take!(c_pr);
    take!(omega);
    take!(kappa);
    take!(zeta);
    take!(seed);
    take!(haar_levels);
    take!(sh2d_scales);
    take!(sh3d_scales);
    take!(record_objective);
    take!(stale_dual_threshold);
    if args.combine.is_some() {
        cfg.combine = args.combine.clone();
    }

    let method = Method::from_str(&cfg.method)?;
    let (y, header) = io::read_sinogram_stack(&args.input)?;
    let geom = geometry_from_header(&header)?;

    let mut params = default_params(method);
    if let Some(v) = cfg.gamma {
        params.pdfp.gamma = v;
    }
    if let Some(v) = cfg.lambda {
        params.pdfp.lambda = v;
    }
    if let Some(v) = cfg.max_iters {
        params.pdfp.max_iters = v;
    }
    if let Some(v) = cfg.record_objective {
        params.pdfp.record_objective = v;
    }
    if let Some(v) = cfg.stale_dual_threshold {
        params.pdfp.stale_dual_threshold = v;
    }
    if let Some(v) = cfg.delta1 {
        params.cwds.delta1 = v;
    }
    if let Some(v) = cfg.delta2 {
        params.cwds.delta2 = v;
    }
    if let Some(v) = cfg.omega {
        params.cwds.omega = v;
    }
    if let Some(v) = cfg.kappa {
        params.cwds.kappa = v;
    }
    if let Some(v) = cfg.zeta {
        params.cwds.zeta = v;
    }
    if let Some(v) = cfg.seed {
        params.seed = v;
    }
    if let Some(v) = cfg.haar_levels {
        params.haar_levels = v;
    }
    if let Some(v) = cfg.sh2d_scales {
        params.sh2d_scales = v;
    }
    if let Some(v) = cfg.sh3d_scales {
        params.sh3d_scales = v;
    }
    if let Some(mode) = &cfg.combine {
        params.combine = match mode.as_str() {
            "average" => CombineMode::Average,
            "middle" => CombineMode::Middle,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown combine mode {other:?}"
                )))
            }
        };
    }
    if let Some(v) = cfg.c_pr {
        params.cwds.c_pr = v;
    } else if let Some(path) = &args.c_pr_from {
        if method != Method::Fbp {
            let (reference, _) = io::read_volume_stack(path)?;
            let scales = match method {
                Method::Sh3d => params.sh3d_scales,
                _ => params.sh2d_scales,
            };
            let c_pr = a_priori_sparsity_for(
                method,
                &reference,
                params.cwds.kappa,
                params.haar_levels,
                scales,
            )?;
            params.cwds.c_pr = c_pr;
            cfg.c_pr = Some(c_pr);
        }
    }

    let ReconOutput {
        stack,
        report,
        inflation,
    } = reconstruct(&y, &geom, method, &params)?;

    let prov_config = serde_json::json!({
        "reconstruct": cfg,
        "input": args.input,
        "projections": geom.projections(),
    });
    io::write_volume_stack(
        &args.output,
        &stack,
        Some(Provenance::new("reconstruct", prov_config)),
    )?;

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| append_ext(&args.output, "report.json"));
    let time_per_iteration_s = report
        .as_ref()
        .filter(|r| r.iterations > 0)
        .map(|r| r.total_seconds / r.iterations as f64);
    let file = ReconReportFile {
        method: method.name().to_string(),
        projections: geom.projections(),
        frames: stack.frames(),
        solver: report,
        time_per_iteration_s,
        inflation,
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&file).unwrap())
        .map_err(|e| Error::io(&report_path, e))?;
    println!(
        "{}",
        serde_json::json!({
            "output": args.output,
            "report": report_path,
            "method": method.name(),
            "iterations": file.solver.as_ref().map(|r| r.iterations),
        })
    );
    Ok(())
}

fn append_ext(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// metrics

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct MetricsConfig {
    method_label: Option<String>,
    projections: Option<usize>,
    mean_first_last: Option<bool>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    recon: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
    /// Method label for the CSV (default: from the recon file provenance).
    #[arg(long)]
    method_label: Option<String>,
    /// Projection count for the CSV (default: from provenance).
    #[arg(long)]
    projections: Option<usize>,
    /// Emit a single mean_first_last row instead of per-frame rows.
    #[arg(long)]
    mean_first_last: bool,
}

fn cmd_metrics(args: MetricsArgs) -> dynct::Result<()> {
    let cfg: MetricsConfig = load_config(&args.config)?;
    let (recon, recon_header) = io::read_volume_stack(&args.recon)?;
    let (reference, _) = io::read_volume_stack(&args.reference)?;

    let from_prov = |key: &str| -> Option<serde_json::Value> {
        recon_header
            .provenance
            .as_ref()
            .and_then(|p| p.config.get(key).cloned())
    };
    let method_label = args
        .method_label
        .or(cfg.method_label)
        .or_else(|| {
            from_prov("reconstruct")
                .and_then(|r| r.get("method").cloned())
                .and_then(|v| v.as_str().map(String::from))
        })
        .unwrap_or_else(|| "unknown".into());
    let projections = args
        .projections
        .or(cfg.projections)
        .or_else(|| {
            from_prov("projections")
                .and_then(|v| v.as_u64())
                .map(|v| v as usize)
        })
        .unwrap_or(0);
    let mean_mode = args.mean_first_last || cfg.mean_first_last.unwrap_or(false);

    let report = stack_metrics(&recon, &reference)?;
    let mut rows = Vec::new();
    if mean_mode {
        let m = report.mean_first_last();
        rows.push(MetricsRow {
            method: method_label.clone(),
            projections,
            frame: "mean_first_last".into(),
            rel_l2: m.rel_l2,
            psnr: m.psnr,
            hpsi: m.hpsi,
        });
    } else {
        for (t, m) in report.per_frame.iter().enumerate() {
            rows.push(MetricsRow {
                method: method_label.clone(),
                projections,
                frame: t.to_string(),
                rel_l2: m.rel_l2,
                psnr: m.psnr,
                hpsi: m.hpsi,
            });
        }
    }
    io::write_metrics_csv(&args.output, &rows)?;
    println!(
        "{}",
        serde_json::json!({
            "output": args.output,
            "rows": rows.len(),
            "stack_rel_l2": report.rel_l2,
            "stack_psnr": report.psnr,
            "stack_hpsi": report.hpsi,
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// export

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ExportConfig {
    frames: Option<String>,
    window: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated frame indices, or "all".
    #[arg(long)]
    frames: Option<String>,
    /// Linear window "lo:hi" (default 0:max over the stack).
    #[arg(long)]
    window: Option<String>,
}

fn cmd_export(args: ExportArgs) -> dynct::Result<()> {
    let cfg: ExportConfig = load_config(&args.config)?;
    let (stack, _) = io::read_volume_stack(&args.input)?;
    let frames_spec = args.frames.or(cfg.frames).unwrap_or_else(|| "all".into());
    let indices: Vec<usize> = if frames_spec == "all" {
        (0..stack.frames()).collect()
    } else {
        frames_spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad frame index {s:?}")))
            })
            .collect::<dynct::Result<Vec<_>>>()?
    };
    for &t in &indices {
        if t >= stack.frames() {
            return Err(Error::InvalidArgument(format!(
                "frame {t} out of range (stack has {})",
                stack.frames()
            )));
        }
    }
    let window = match args.window.or(cfg.window) {
        None => {
            let hi = stack.data().iter().fold(f64::MIN, |m, &v| m.max(v));
            (0.0, if hi > 0.0 { hi } else { 1.0 })
        }
        Some(spec) => {
            let (lo, hi) = spec
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument("window must be lo:hi".into()))?;
            (
                lo.parse()
                    .map_err(|_| Error::InvalidArgument("bad window lower bound".into()))?,
                hi.parse()
                    .map_err(|_| Error::InvalidArgument("bad window upper bound".into()))?,
            )
        }
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let mut written = 0usize;
    for &t in &indices {
        let path = args.out_dir.join(format!("frame_{t:04}.pgm"));
        io::write_pgm16(&path, &stack.frame_image(t), window)?;
        written += 1;
    }
    println!(
        "{}",
        serde_json::json!({ "written": written, "out_dir": args.out_dir })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
}

fn cmd_verify(args: VerifyArgs) -> dynct::Result<()> {
    let on_disk = std::fs::read(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let newline = on_disk
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(Error::Parse {
            path: args.input.clone(),
            offset: on_disk.len() as u64,
            msg: "missing header newline".into(),
        })?;
    let header: io::StackHeader =
        serde_json::from_slice(&on_disk[..newline]).map_err(|e| Error::Parse {
            path: args.input.clone(),
            offset: e.column() as u64,
            msg: format!("bad header: {e}"),
        })?;
    let prov = header.provenance.as_ref().ok_or_else(|| {
        Error::InvalidArgument("file carries no provenance to verify against".into())
    })?;
    if prov.command != "simulate" {
        return Err(Error::InvalidArgument(format!(
            "verify supports simulate outputs, found command {:?}",
            prov.command
        )));
    }
    let cfg: SimulateConfig =
        serde_json::from_value(prov.config.clone()).map_err(|e| Error::Parse {
            path: args.input.clone(),
            offset: 0,
            msg: format!("bad provenance config: {e}"),
        })?;
    let expected_hash = io::config_hash(&serde_json::to_value(&cfg).unwrap());
    if expected_hash != prov.config_hash {
        return Err(Error::InvalidArgument(
            "provenance config hash mismatch".into(),
        ));
    }
    let (truth, y, geom) = run_simulation(&cfg)?;
    let fresh_prov = Provenance::new("simulate", serde_json::to_value(&cfg).unwrap());
    let rebuilt = match header.kind {
        io::StackKind::Volume => encode_volume(&truth, Some(fresh_prov)).1,
        io::StackKind::Sinogram => {
            let out_geom = binned_geometry(&cfg, &geom, y.detectors())?;
            encode_sinogram(&y, Some(&out_geom), Some(fresh_prov)).1
        }
    };
    if rebuilt != on_disk {
        return Err(Error::Numeric(format!(
            "re-derived bytes differ from {} ({} vs {} bytes)",
            args.input.display(),
            rebuilt.len(),
            on_disk.len()
        )));
    }
    println!(
        "{}",
        serde_json::json!({ "verified": true, "path": args.input })
    );
    Ok(())
}
