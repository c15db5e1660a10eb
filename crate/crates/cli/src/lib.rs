//! Command-line driver: runs pipeline stages one at a time or end to end,
//! generates synthetic scenes, evaluates against ground truth, and sweeps
//! evaluation and filter parameters.
//!
//! Every configuration key can be given in a `key=value` file passed with
//! `--config` and overridden on the command line as `--key=value`
//! (for example `--eval.lambda=0.25`). Command-line values win over the
//! file, which wins over the profile defaults.

pub mod dataset;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aerialdet::pipeline::{self, PipelineConfig};
use aerialdet::synth::{self, LayoutParams, SceneSpec};
use aerialdet::{BinaryMask, Error, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dataset::SequenceEntry;

/// Exit status for each failure class.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const IO: u8 = 2;
    pub const DATA: u8 = 3;
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) | Error::Parse { .. } => exit::USAGE,
        Error::Io { .. } | Error::Format { .. } | Error::Unsupported { .. } => exit::IO,
        Error::Inconsistent(_) | Error::Dimension(_) | Error::OutOfBounds { .. } => exit::DATA,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "aerialdet",
    version,
    about = "Spatio-temporal post-processing for aerial vehicle detection"
)]
#[command(
    after_help = "Any configuration key may be passed as --KEY=VALUE, e.g. --morph.close_radius=3 --eval.lambda=0.25"
)]
struct Cli {
    /// Flat key=value configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic scene: frames, ground truth, and scene metadata
    GenSynth(GenSynthArgs),
    /// Saliency enhancement placeholder: copies frames through unchanged
    Enhance(StageArgs),
    /// Hysteresis-threshold saliency frames into masks
    Threshold(StageArgs),
    /// Open then close masks
    Morph(StageArgs),
    /// Label masks and discard static objects; writes detections and masks
    Temporal(StageArgs),
    /// Score masks against ground truth; writes metrics.csv
    Evaluate(GtArgs),
    /// Run every stage and write all intermediate artifacts
    Run(RunArgs),
    /// Detect once, then score at each overlap threshold
    SweepLambda(SweepLambdaArgs),
    /// Re-run the pipeline at each closing radius
    SweepDisk(SweepDiskArgs),
}

#[derive(Args, Debug)]
struct StageArgs {
    /// Input directory (sets input_dir)
    #[arg(long, value_name = "DIR")]
    input: Option<PathBuf>,
    /// Output directory (sets output_dir)
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GtArgs {
    #[command(flatten)]
    io: StageArgs,
    /// Ground-truth directory with one <frame>.txt per frame (sets gt_dir)
    #[arg(long, value_name = "DIR")]
    gt: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: GtArgs,
}

#[derive(Args, Debug)]
struct SweepLambdaArgs {
    #[command(flatten)]
    data: GtArgs,
    /// Comma-separated values or START:STOP:STEP
    #[arg(long, value_name = "LIST")]
    lambdas: String,
}

#[derive(Args, Debug)]
struct SweepDiskArgs {
    #[command(flatten)]
    data: GtArgs,
    /// Comma-separated radii or START:STOP[:STEP]
    #[arg(long, value_name = "LIST")]
    radii: String,
}

#[derive(Args, Debug)]
struct GenSynthArgs {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    output: PathBuf,
    /// Scene file; when absent a random layout is drawn from --seed
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    /// RNG seed for layout and noise (overrides the scene file's seed)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "scene")]
    width: Option<usize>,
    #[arg(long, conflicts_with = "scene")]
    height: Option<usize>,
    #[arg(long, conflicts_with = "scene")]
    frames: Option<usize>,
    /// Number of moving vehicles
    #[arg(long, conflicts_with = "scene")]
    vehicles: Option<usize>,
    /// Number of static clutter blobs
    #[arg(long, conflicts_with = "scene")]
    clutter: Option<usize>,
    /// Uniform noise amplitude
    #[arg(long, conflicts_with = "scene")]
    noise: Option<f64>,
    #[arg(long, conflicts_with = "scene")]
    background: Option<f64>,
    #[arg(long, conflicts_with = "scene")]
    vehicle_intensity: Option<f64>,
    #[arg(long, conflicts_with = "scene")]
    clutter_intensity: Option<f64>,
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let (rest, overrides) = split_overrides(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
        }
    };
    match execute(cli, overrides) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("aerialdet: error: {e}");
            exit_code(&e)
        }
    }
}

/// Pulls `--key=value` and `--key value` configuration overrides out of the
/// argument list, leaving everything else for the subcommand parser.
fn split_overrides(args: Vec<OsString>) -> (Vec<OsString>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.to_str().and_then(|s| s.strip_prefix("--")) else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (flag, None),
        };
        if !pipeline::is_config_key(key) {
            rest.push(arg);
            continue;
        }
        let key = key.to_string();
        match inline.or_else(|| it.next().and_then(|v| v.into_string().ok())) {
            Some(value) => overrides.push((key, value)),
            // No value: hand the flag to clap so it reports the usage error.
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn execute(cli: Cli, mut overrides: Vec<(String, String)>) -> Result<()> {
    if let Command::GenSynth(args) = &cli.command {
        if !overrides.is_empty() || cli.config.is_some() {
            return Err(Error::Parameter("gen-synth takes no pipeline configuration".into()));
        }
        return gen_synth(args);
    }
    let dirs = match &cli.command {
        Command::GenSynth(_) => unreachable!(),
        Command::Enhance(a) | Command::Threshold(a) | Command::Morph(a) | Command::Temporal(a) => (a, None),
        Command::Evaluate(a) => (&a.io, a.gt.as_ref()),
        Command::Run(a) => (&a.data.io, a.data.gt.as_ref()),
        Command::SweepLambda(a) => (&a.data.io, a.data.gt.as_ref()),
        Command::SweepDisk(a) => (&a.data.io, a.data.gt.as_ref()),
    };
    let mut push = |key: &str, value: Option<&PathBuf>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v.to_string_lossy().into_owned()));
        }
    };
    push("input_dir", dirs.0.input.as_ref());
    push("output_dir", dirs.0.output.as_ref());
    push("gt_dir", dirs.1);

    let file_layer = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            pipeline::parse_key_values(&text, &path.display().to_string())?
        }
        None => Vec::new(),
    };
    let cfg = PipelineConfig::resolve(&[&file_layer, &overrides])?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Parameter(format!("threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::GenSynth(_) => unreachable!(),
        Command::Enhance(_) => enhance(&cfg),
        Command::Threshold(_) => threshold(&cfg),
        Command::Morph(_) => morph(&cfg),
        Command::Temporal(_) => temporal(&cfg),
        Command::Evaluate(_) => evaluate(&cfg),
        Command::Run(_) => run_all(&cfg),
        Command::SweepLambda(a) => sweep_lambda(&cfg, &a.lambdas),
        Command::SweepDisk(a) => sweep_disk(&cfg, &a.radii),
    })
}

fn require<'a>(dir: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    dir.as_deref()
        .ok_or_else(|| Error::Parameter(format!("{key} is required (set it in the config or with a flag)")))
}

/// Writes `text` to `<output_dir>/<name>` when an output directory is set,
/// otherwise to stdout.
fn emit(cfg: &PipelineConfig, name: &str, text: &str) -> Result<()> {
    match &cfg.output_dir {
        Some(dir) => {
            dataset::create_dir(dir)?;
            dataset::write_text(&dir.join(name), text)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Frames {
    entries: Vec<SequenceEntry>,
    images: Vec<aerialdet::SaliencyImage>,
}

fn load_input_frames(cfg: &PipelineConfig) -> Result<Frames> {
    let entries = dataset::list_sequence(require(&cfg.input_dir, "input_dir")?)?;
    let images = dataset::load_frames(&entries)?;
    pipeline::check_same_size(images.iter().map(|f| (f.width(), f.height())), "frame")?;
    Ok(Frames { entries, images })
}

fn load_input_masks(cfg: &PipelineConfig) -> Result<(Vec<SequenceEntry>, Vec<BinaryMask>)> {
    let entries = dataset::list_sequence(require(&cfg.input_dir, "input_dir")?)?;
    let masks = dataset::load_masks(&entries)?;
    Ok((entries, masks))
}

fn load_gt(
    cfg: &PipelineConfig,
    entries: &[SequenceEntry],
    size: (usize, usize),
) -> Result<Vec<Vec<aerialdet::GroundTruthObject>>> {
    dataset::load_ground_truth(require(&cfg.gt_dir, "gt_dir")?, entries, size.0, size.1)
}

/// Stands in for an external saliency enhancer: validates the sequence and
/// copies each frame file unchanged.
fn enhance(cfg: &PipelineConfig) -> Result<()> {
    let frames = load_input_frames(cfg)?;
    let out = require(&cfg.output_dir, "output_dir")?;
    dataset::create_dir(out)?;
    frames.entries.par_iter().try_for_each(|e| {
        let target = out.join(e.path.file_name().expect("listed files have names"));
        std::fs::copy(&e.path, &target)
            .map(drop)
            .map_err(|source| Error::Io { path: target, source })
    })
}

fn threshold(cfg: &PipelineConfig) -> Result<()> {
    let frames = load_input_frames(cfg)?;
    let out = require(&cfg.output_dir, "output_dir")?;
    let masks: Vec<BinaryMask> = frames
        .images
        .par_iter()
        .map(|f| aerialdet::hysteresis_threshold(f, &cfg.threshold))
        .collect();
    dataset::write_masks(out, &frames.entries, &masks.iter().collect::<Vec<_>>())
}

fn morph(cfg: &PipelineConfig) -> Result<()> {
    let (entries, masks) = load_input_masks(cfg)?;
    let out = require(&cfg.output_dir, "output_dir")?;
    let filtered: Vec<BinaryMask> = masks.par_iter().map(|m| pipeline::morph_filter(m, cfg)).collect();
    dataset::write_masks(out, &entries, &filtered.iter().collect::<Vec<_>>())
}

/// Labels, filters, and writes detections plus the surviving-object masks.
fn write_detections(
    out: &Path,
    entries: &[SequenceEntry],
    spatial: &[aerialdet::FrameDetections],
    temporal: &[aerialdet::FrameDetections],
    mask_dir: &Path,
) -> Result<()> {
    dataset::create_dir(out)?;
    dataset::write_text(&out.join("detections_spatial.txt"), &dataset::detections_text(spatial))?;
    dataset::write_text(
        &out.join("detections_temporal.txt"),
        &dataset::detections_text(temporal),
    )?;
    let masks: Vec<BinaryMask> = temporal.par_iter().map(|d| d.to_mask()).collect();
    dataset::write_masks(mask_dir, entries, &masks.iter().collect::<Vec<_>>())
}

fn temporal(cfg: &PipelineConfig) -> Result<()> {
    let (entries, masks) = load_input_masks(cfg)?;
    let out = require(&cfg.output_dir, "output_dir")?;
    let (spatial, temporal) = pipeline::detect_from_masks(&masks, cfg)?;
    write_detections(out, &entries, &spatial, &temporal, out)
}

fn evaluate(cfg: &PipelineConfig) -> Result<()> {
    let (entries, masks) = load_input_masks(cfg)?;
    let detections: Vec<aerialdet::FrameDetections> = masks
        .par_iter()
        .enumerate()
        .map(|(t, m)| aerialdet::label_components(m, t))
        .collect();
    let gt = load_gt(cfg, &entries, (masks[0].width(), masks[0].height()))?;
    let report = pipeline::evaluate(&detections, &gt, &dataset::frame_names(&entries), cfg.lambda, cfg.beta2)?;
    emit(cfg, "metrics.csv", &report.to_csv())
}

/// Output layout: `threshold/`, `morph/`, `temporal/` mask directories,
/// `detections_spatial.txt`, `detections_temporal.txt`, and `metrics.csv`
/// when a ground-truth directory is configured.
fn run_all(cfg: &PipelineConfig) -> Result<()> {
    let frames = load_input_frames(cfg)?;
    let out = require(&cfg.output_dir, "output_dir")?;
    let gt = match cfg.gt_dir {
        Some(_) => {
            let f = &frames.images[0];
            Some(load_gt(cfg, &frames.entries, (f.width(), f.height()))?)
        }
        None => None,
    };
    let result = pipeline::detect_sequence(&frames.images, cfg)?;
    let thresholded: Vec<&BinaryMask> = result.masks.iter().map(|m| &m.thresholded).collect();
    let filtered: Vec<&BinaryMask> = result.masks.iter().map(|m| &m.filtered).collect();
    dataset::write_masks(&out.join("threshold"), &frames.entries, &thresholded)?;
    dataset::write_masks(&out.join("morph"), &frames.entries, &filtered)?;
    write_detections(
        out,
        &frames.entries,
        &result.spatial,
        &result.temporal,
        &out.join("temporal"),
    )?;
    if let Some(gt) = gt {
        let names = dataset::frame_names(&frames.entries);
        let report = pipeline::evaluate(&result.temporal, &gt, &names, cfg.lambda, cfg.beta2)?;
        dataset::write_text(&out.join("metrics.csv"), &report.to_csv())?;
    }
    Ok(())
}

fn sweep_lambda(cfg: &PipelineConfig, list: &str) -> Result<()> {
    let lambdas = parse_real_list(list, "lambdas")?;
    let frames = load_input_frames(cfg)?;
    let f = &frames.images[0];
    let gt = load_gt(cfg, &frames.entries, (f.width(), f.height()))?;
    let result = pipeline::detect_sequence(&frames.images, cfg)?;
    let rows = pipeline::sweep_lambda(&result.temporal, &gt, &lambdas, cfg.beta2)?;
    emit(cfg, "sweep_lambda.csv", &pipeline::lambda_csv(&rows))
}

fn sweep_disk(cfg: &PipelineConfig, list: &str) -> Result<()> {
    let radii = parse_count_list(list, "radii")?;
    let frames = load_input_frames(cfg)?;
    let f = &frames.images[0];
    let gt = load_gt(cfg, &frames.entries, (f.width(), f.height()))?;
    let rows = pipeline::sweep_disk(&frames.images, &gt, cfg, &radii)?;
    emit(cfg, "sweep_disk.csv", &pipeline::disk_csv(&rows))
}

fn gen_synth(args: &GenSynthArgs) -> Result<()> {
    let spec = match &args.scene {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let mut spec = SceneSpec::parse(&text, &path.display().to_string())?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            spec
        }
        None => {
            let d = LayoutParams::default();
            let p = LayoutParams {
                width: args.width.unwrap_or(d.width),
                height: args.height.unwrap_or(d.height),
                frames: args.frames.unwrap_or(d.frames),
                vehicles: args.vehicles.unwrap_or(d.vehicles),
                clutter: args.clutter.unwrap_or(d.clutter),
                noise: args.noise.unwrap_or(d.noise),
                background: args.background.unwrap_or(d.background),
                vehicle_intensity: args.vehicle_intensity.unwrap_or(d.vehicle_intensity),
                clutter_intensity: args.clutter_intensity.unwrap_or(d.clutter_intensity),
                ..d
            };
            synth::random_layout(&p, args.seed.unwrap_or(0))?
        }
    };
    write_scene(&spec, &args.output)
}

/// Renders `spec` into `out/frames/frame_NNNN.pgm` and `out/gt/frame_NNNN.txt`,
/// plus `scene.txt` (re-loadable with `--scene`) and `scene.meta`.
pub fn write_scene(spec: &SceneSpec, out: &Path) -> Result<()> {
    spec.validate()?;
    let digits = spec.frames.saturating_sub(1).to_string().len().max(4);
    let (frame_dir, gt_dir) = (out.join("frames"), out.join("gt"));
    dataset::create_dir(&frame_dir)?;
    dataset::create_dir(&gt_dir)?;
    (0..spec.frames).into_par_iter().try_for_each(|t| {
        let name = format!("frame_{t:0digits$}");
        aerialdet::save_frame(&spec.render_frame(t), frame_dir.join(format!("{name}.pgm")))?;
        let gt = aerialdet::metrics::format_ground_truth(&spec.ground_truth(t));
        dataset::write_text(&gt_dir.join(format!("{name}.txt")), &gt)
    })?;
    dataset::write_text(&out.join("scene.txt"), &spec.to_text())?;
    let mut meta = String::new();
    let _ = writeln!(meta, "generator=aerialdet {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(meta, "rng={}", synth::RNG_ALGORITHM);
    let _ = writeln!(meta, "seed={}", spec.seed);
    let _ = writeln!(meta, "frames={}", spec.frames);
    dataset::write_text(&out.join("scene.meta"), &meta)
}

/// Expands `a,b,c` or `start:stop:step` (inclusive of `stop`).
pub fn parse_real_list(text: &str, what: &str) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::Parameter(format!("{what}: {reason}"));
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{s:?} is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts[..] {
        [list] => list.split(',').filter(|s| !s.trim().is_empty()).map(num).collect(),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(bad(format!("empty range {text:?}")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // Rounded so that 0.1 + 0.05 prints and compares as 0.15.
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        _ => Err(bad(format!("expected a comma list or START:STOP:STEP, got {text:?}"))),
    }
}

/// Expands `a,b,c` or `start:stop[:step]` (inclusive of `stop`).
pub fn parse_count_list(text: &str, what: &str) -> Result<Vec<usize>> {
    let bad = |reason: String| Error::Parameter(format!("{what}: {reason}"));
    let num = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| bad(format!("{s:?} is not a non-negative integer")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts[..] {
        [list] => list.split(',').filter(|s| !s.trim().is_empty()).map(num).collect(),
        [start, stop] | [start, stop, _] => {
            let step = if parts.len() == 3 { num(parts[2])? } else { 1 };
            let (start, stop) = (num(start)?, num(stop)?);
            if step == 0 || stop < start {
                return Err(bad(format!("empty range {text:?}")));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        _ => Err(bad(format!("expected a comma list or START:STOP[:STEP], got {text:?}"))),
    }
}
