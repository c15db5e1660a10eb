//! Stage composition, configuration profiles and sensitivity sweeps.
//!
//! Spatial stage: hysteresis threshold, opening with a 2x2 square, closing
//! with a disk, 8-connected labeling. Temporal stage: static-object removal
//! over the whole sequence. Frames are processed in parallel on the current
//! rayon pool; results are collected in frame order, so the output does not
//! depend on the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagery::{BinaryMask, SaliencyImage};
use crate::metrics::{self, GroundTruthObject, Matching, MetricsReport};
use crate::morphology::{self, StructuringElement};
use crate::objects::{label_components, FrameDetections};
use crate::report::{fmt_opt, fmt_sig6};
use crate::temporal::{self, TemporalConfig};
use crate::thresholding::{hysteresis_threshold, simple_threshold, HysteresisConfig};

/// Dataset profile selecting resolution-dependent defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Closing radius 1 (3x3 disk), delta 2, lambda 0.1.
    LowRes,
    /// Closing radius 7 (15x15 disk), delta 5, lambda 0.25.
    HighRes,
    /// No defaults: every algorithm key must be given.
    Custom,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low_res" => Ok(Profile::LowRes),
            "high_res" => Ok(Profile::HighRes),
            "custom" => Ok(Profile::Custom),
            other => Err(Error::Parameter(format!(
                "unknown profile {other:?} (expected low_res, high_res or custom)"
            ))),
        }
    }
}

/// Every algorithm key; `custom` requires all of them.
pub const ALGORITHM_KEYS: &[&str] = &[
    "threshold.hi",
    "threshold.lo",
    "threshold.nbhd_hi",
    "threshold.nbhd_lo",
    "threshold.sub_mean",
    "morph.open_size",
    "morph.close_radius",
    "temporal.iou_threshold",
    "temporal.delta",
    "eval.lambda",
    "eval.beta2",
];

/// Keys that are not algorithm parameters.
pub const RUN_KEYS: &[&str] = &["profile", "input_dir", "gt_dir", "output_dir", "threads"];

pub fn is_config_key(key: &str) -> bool {
    ALGORITHM_KEYS.contains(&key) || RUN_KEYS.contains(&key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub profile: Profile,
    pub threshold: HysteresisConfig,
    pub open_size: usize,
    pub close_radius: usize,
    pub temporal: TemporalConfig,
    pub lambda: f64,
    pub beta2: f64,
    pub input_dir: Option<PathBuf>,
    pub gt_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl PipelineConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (close_radius, delta, lambda) = match profile {
            Profile::HighRes => (7, 5.0, 0.25),
            Profile::LowRes | Profile::Custom => (1, 2.0, 0.1),
        };
        PipelineConfig {
            profile,
            threshold: HysteresisConfig::default(),
            open_size: 2,
            close_radius,
            temporal: TemporalConfig {
                iou_threshold: 0.75,
                delta,
            },
            lambda,
            beta2: 0.3,
            input_dir: None,
            gt_dir: None,
            output_dir: None,
            threads: 0,
        }
    }

    /// Builds a config from layered `key=value` settings; later layers win.
    /// Pass the config file's pairs first and command-line flags last.
    pub fn resolve(layers: &[&[(String, String)]]) -> Result<Self> {
        let mut merged: BTreeMap<&str, &str> = BTreeMap::new();
        for layer in layers {
            for (k, v) in layer.iter() {
                if !is_config_key(k) {
                    return Err(Error::Parameter(format!("unknown configuration key {k:?}")));
                }
                merged.insert(k, v);
            }
        }
        let profile: Profile = merged.get("profile").map_or(Ok(Profile::LowRes), |p| p.parse())?;
        if profile == Profile::Custom {
            let missing: Vec<&str> = ALGORITHM_KEYS
                .iter()
                .copied()
                .filter(|k| !merged.contains_key(k))
                .collect();
            if !missing.is_empty() {
                return Err(Error::Parameter(format!(
                    "profile custom requires every key; missing {}",
                    missing.join(", ")
                )));
            }
        }
        let mut cfg = PipelineConfig::for_profile(profile);
        for (&k, &v) in &merged {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parameter(format!("{key}: expected a number, got {value:?}")))
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("{key}: expected a non-negative integer, got {value:?}")))
        };
        match key {
            "profile" => {}
            "threshold.hi" => self.threshold.hi = real()?,
            "threshold.lo" => self.threshold.lo = real()?,
            "threshold.nbhd_hi" => self.threshold.nbhd_hi = real()?,
            "threshold.nbhd_lo" => self.threshold.nbhd_lo = real()?,
            "threshold.sub_mean" => self.threshold.sub_mean = real()?,
            "morph.open_size" => self.open_size = count()?,
            "morph.close_radius" => self.close_radius = count()?,
            "temporal.iou_threshold" => self.temporal.iou_threshold = real()?,
            "temporal.delta" => self.temporal.delta = real()?,
            "eval.lambda" => self.lambda = real()?,
            "eval.beta2" => self.beta2 = real()?,
            "input_dir" => self.input_dir = Some(PathBuf::from(value)),
            "gt_dir" => self.gt_dir = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "threads" => self.threads = count()?,
            other => return Err(Error::Parameter(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.threshold.validate()?;
        self.temporal.validate()?;
        if self.open_size == 0 {
            return Err(Error::Parameter("morph.open_size must be >= 1".into()));
        }
        if self.close_radius == 0 {
            return Err(Error::Parameter("morph.close_radius must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::Parameter(format!(
                "eval.lambda = {} outside [0, 1)",
                self.lambda
            )));
        }
        if self.beta2 < 0.0 {
            return Err(Error::Parameter(format!("eval.beta2 = {} must be >= 0", self.beta2)));
        }
        Ok(())
    }

    pub fn opening_element(&self) -> StructuringElement {
        StructuringElement::square(self.open_size).expect("validated size")
    }

    pub fn closing_element(&self) -> StructuringElement {
        StructuringElement::disk(self.close_radius).expect("validated radius")
    }
}

/// Parses flat `key=value` text. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, context: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("{context}:{}", lineno + 1), "expected key=value"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Thresholded and morphologically filtered masks of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMasks {
    pub thresholded: BinaryMask,
    pub filtered: BinaryMask,
}

pub fn morph_filter(mask: &BinaryMask, cfg: &PipelineConfig) -> BinaryMask {
    let opened = morphology::open(mask, &cfg.opening_element());
    morphology::close(&opened, &cfg.closing_element())
}

pub fn spatial_masks(img: &SaliencyImage, cfg: &PipelineConfig) -> SpatialMasks {
    let thresholded = hysteresis_threshold(img, &cfg.threshold);
    let filtered = morph_filter(&thresholded, cfg);
    SpatialMasks { thresholded, filtered }
}

/// Everything the detection stages produce for a sequence.
#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub masks: Vec<SpatialMasks>,
    /// Detections after spatial processing.
    pub spatial: Vec<FrameDetections>,
    /// Detections after temporal filtering.
    pub temporal: Vec<FrameDetections>,
}

/// Fails unless every frame has the dimensions of the first.
pub fn check_same_size(dims: impl IntoIterator<Item = (usize, usize)>, what: &str) -> Result<()> {
    let mut it = dims.into_iter().enumerate();
    if let Some((_, first)) = it.next() {
        for (i, d) in it {
            if d != first {
                return Err(Error::Inconsistent(format!(
                    "{what} {i} is {}x{}, expected {}x{}",
                    d.0, d.1, first.0, first.1
                )));
            }
        }
    }
    Ok(())
}

/// Labels each mask and applies the temporal filter.
pub fn detect_from_masks(
    masks: &[BinaryMask],
    cfg: &PipelineConfig,
) -> Result<(Vec<FrameDetections>, Vec<FrameDetections>)> {
    check_same_size(masks.iter().map(|m| (m.width(), m.height())), "mask")?;
    let spatial: Vec<FrameDetections> = masks
        .par_iter()
        .enumerate()
        .map(|(t, m)| label_components(m, t))
        .collect();
    let temporal = temporal::filter_static(&spatial, &cfg.temporal)?;
    Ok((spatial, temporal))
}

/// Runs the spatial and temporal stages over a registered sequence.
pub fn detect_sequence(frames: &[SaliencyImage], cfg: &PipelineConfig) -> Result<SequenceOutput> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::Parameter("no input frames".into()));
    }
    check_same_size(frames.iter().map(|f| (f.width(), f.height())), "frame")?;
    let masks: Vec<SpatialMasks> = frames.par_iter().map(|f| spatial_masks(f, cfg)).collect();
    let filtered: Vec<BinaryMask> = masks.iter().map(|m| m.filtered.clone()).collect();
    let (spatial, temporal) = detect_from_masks(&filtered, cfg)?;
    Ok(SequenceOutput {
        masks,
        spatial,
        temporal,
    })
}

/// Plain fixed-threshold detection with no post-processing.
pub fn baseline_detections(frames: &[SaliencyImage], threshold: f64) -> Vec<FrameDetections> {
    frames
        .par_iter()
        .enumerate()
        .map(|(t, f)| label_components(&simple_threshold(f, threshold), t))
        .collect()
}

/// Classifies each frame's detections against its ground truth.
pub fn evaluate(
    detections: &[FrameDetections],
    ground_truth: &[Vec<GroundTruthObject>],
    names: &[String],
    lambda: f64,
    beta2: f64,
) -> Result<MetricsReport> {
    if detections.len() != ground_truth.len() || detections.len() != names.len() {
        return Err(Error::Inconsistent(format!(
            "{} detection frames, {} ground-truth frames, {} names",
            detections.len(),
            ground_truth.len(),
            names.len()
        )));
    }
    let tallies = detections
        .par_iter()
        .zip(ground_truth.par_iter())
        .map(|(d, g)| metrics::evaluate_frame(g, d, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::new(names.iter().cloned().zip(tallies).collect(), beta2))
}

/// One row of a lambda sweep, from counts pooled over all frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRow {
    pub lambda: f64,
    pub tally: metrics::DetectionTally,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub f_beta: Option<f64>,
}

/// Re-thresholds one matching per frame at each lambda.
pub fn sweep_lambda(
    detections: &[FrameDetections],
    ground_truth: &[Vec<GroundTruthObject>],
    lambdas: &[f64],
    beta2: f64,
) -> Result<Vec<LambdaRow>> {
    if lambdas.is_empty() {
        return Err(Error::Parameter("lambda sweep needs at least one value".into()));
    }
    if detections.len() != ground_truth.len() {
        return Err(Error::Inconsistent(
            "detection and ground-truth frame counts differ".into(),
        ));
    }
    let matchings: Vec<Matching> = detections
        .par_iter()
        .zip(ground_truth.par_iter())
        .map(|(d, g)| Matching::new(&metrics::overlap_matrix(g, d)))
        .collect();
    lambdas
        .iter()
        .map(|&lambda| {
            let mut pooled = metrics::DetectionTally::default();
            for m in &matchings {
                pooled += m.tally(lambda)?;
            }
            Ok(LambdaRow {
                lambda,
                tally: pooled,
                precision: pooled.precision(),
                recall: pooled.recall(),
                f1: pooled.f1(),
                f_beta: metrics::f_beta(&pooled, beta2),
            })
        })
        .collect()
}

pub const LAMBDA_HEADER: &str = "lambda,tp,fn,precision,recall,f1,f_beta";

pub fn lambda_csv(rows: &[LambdaRow]) -> String {
    let mut s = format!("{LAMBDA_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_sig6(r.lambda),
            r.tally.tp,
            r.tally.fn_,
            fmt_opt(r.precision),
            fmt_opt(r.recall),
            fmt_opt(r.f1),
            fmt_opt(r.f_beta)
        );
    }
    s
}

/// One row of a closing-radius sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskRow {
    pub radius: usize,
    /// F1 from counts pooled over all frames.
    pub f1: Option<f64>,
    /// Mean of per-frame F1.
    pub f1_mean: Option<f64>,
}

/// Re-runs the full pipeline once per closing radius, in the given order.
pub fn sweep_disk(
    frames: &[SaliencyImage],
    ground_truth: &[Vec<GroundTruthObject>],
    cfg: &PipelineConfig,
    radii: &[usize],
) -> Result<Vec<DiskRow>> {
    if radii.is_empty() {
        return Err(Error::Parameter("disk sweep needs at least one radius".into()));
    }
    if let Some(r) = radii.iter().find(|&&r| r < 1) {
        return Err(Error::Parameter(format!("disk radius {r} must be >= 1")));
    }
    let names: Vec<String> = (0..frames.len()).map(|t| t.to_string()).collect();
    radii
        .iter()
        .map(|&radius| {
            let cfg = PipelineConfig {
                close_radius: radius,
                ..cfg.clone()
            };
            let out = detect_sequence(frames, &cfg)?;
            let report = evaluate(&out.temporal, ground_truth, &names, cfg.lambda, cfg.beta2)?;
            Ok(DiskRow {
                radius,
                f1: report.aggregate.1.f1,
                f1_mean: report.mean_f1(),
            })
        })
        .collect()
}

pub const DISK_HEADER: &str = "radius,f1,f1_mean";

pub fn disk_csv(rows: &[DiskRow]) -> String {
    let mut s = format!("{DISK_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.radius, fmt_opt(r.f1), fmt_opt(r.f1_mean));
    }
    s
}
