//! Detection evaluation against rectangular ground truth.
//!
//! Every ground-truth rectangle and detection is compared through the
//! Jaccard ratio of their pixel sets. A greedy descending-overlap matching
//! pairs each GT with at most one detection; a matched pair whose overlap
//! exceeds the threshold `lambda` is a true positive. The remaining touches
//! become splits (extra detections on a GT) or merges (extra GTs under a
//! detection that is already some GT's true positive). Detections touching
//! no GT are false positives; GTs without a true positive are false
//! negatives. There are no true negatives.

use std::fmt::Write as _;
use std::ops::AddAssign;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objects::FrameDetections;
use crate::report::fmt_opt;

/// A filled ground-truth rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruthObject {
    pub frame_index: usize,
    pub min_row: usize,
    pub min_col: usize,
    pub height: usize,
    pub width: usize,
}

impl GroundTruthObject {
    pub fn new(frame_index: usize, min_row: usize, min_col: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Parameter(format!(
                "ground-truth rectangle must be at least 1x1, got {height}x{width}"
            )));
        }
        Ok(GroundTruthObject {
            frame_index,
            min_row,
            min_col,
            height,
            width,
        })
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.min_row
            && row < self.min_row + self.height
            && col >= self.min_col
            && col < self.min_col + self.width
    }

    /// Rasterized pixels in raster order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        (self.min_row..self.min_row + self.height)
            .flat_map(|r| (self.min_col..self.min_col + self.width).map(move |c| (r, c)))
            .collect()
    }

    fn fits(&self, frame_width: usize, frame_height: usize) -> bool {
        self.min_row + self.height <= frame_height && self.min_col + self.width <= frame_width
    }
}

/// Parses one GT file body: lines of `min_row,min_col,height,width`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_ground_truth(
    text: &str,
    frame_index: usize,
    frame_width: usize,
    frame_height: usize,
    context: &str,
) -> Result<Vec<GroundTruthObject>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let where_ = format!("{context}:{}", lineno + 1);
        let fields: Vec<usize> = line
            .split(',')
            .map(|f| f.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(&where_, e.to_string()))?;
        let [r, c, h, w] = fields[..] else {
            return Err(Error::parse(
                &where_,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let gt = GroundTruthObject::new(frame_index, r, c, h, w).map_err(|e| Error::parse(&where_, e.to_string()))?;
        if !gt.fits(frame_width, frame_height) {
            return Err(Error::Inconsistent(format!(
                "{where_}: rectangle {r},{c},{h},{w} exceeds {frame_width}x{frame_height} frame"
            )));
        }
        out.push(gt);
    }
    Ok(out)
}

pub fn load_ground_truth(
    path: impl AsRef<Path>,
    frame_index: usize,
    frame_width: usize,
    frame_height: usize,
) -> Result<Vec<GroundTruthObject>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(
        &text,
        frame_index,
        frame_width,
        frame_height,
        &path.display().to_string(),
    )
}

/// Writes GT rectangles in the format read by [`parse_ground_truth`].
pub fn format_ground_truth(gt: &[GroundTruthObject]) -> String {
    gt.iter()
        .map(|g| format!("{},{},{},{}\n", g.min_row, g.min_col, g.height, g.width))
        .collect()
}

/// Jaccard overlaps between GT objects (rows) and detections (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl OverlapMatrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} overlap matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("overlap entries must lie in [0, 1]".into()));
        }
        Ok(OverlapMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, gt: usize, det: usize) -> f64 {
        self.data[gt * self.cols + det]
    }
}

pub fn overlap_matrix(gt: &[GroundTruthObject], det: &FrameDetections) -> OverlapMatrix {
    let cols = det.objects.len();
    let mut data = vec![0.0; gt.len() * cols];
    for (i, g) in gt.iter().enumerate() {
        for (j, d) in det.objects.iter().enumerate() {
            let b = d.bbox();
            if b.max_row < g.min_row
                || b.min_row >= g.min_row + g.height
                || b.max_col < g.min_col
                || b.min_col >= g.min_col + g.width
            {
                continue;
            }
            let inter = d.pixels().iter().filter(|&&(r, c)| g.contains(r, c)).count();
            if inter > 0 {
                let union = g.area() + d.area() - inter;
                data[i * cols + j] = inter as f64 / union as f64;
            }
        }
    }
    OverlapMatrix {
        rows: gt.len(),
        cols,
        data,
    }
}

/// Counts of the five detection classes. True negatives are always zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionTally {
    pub tp: usize,
    pub s: usize,
    pub m: usize,
    pub fn_: usize,
    pub fp: usize,
}

impl AddAssign for DetectionTally {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.s += o.s;
        self.m += o.m;
        self.fn_ += o.fn_;
        self.fp += o.fp;
    }
}

impl DetectionTally {
    pub fn tn(&self) -> usize {
        0
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Percentage of wrong classifications, `100 (FP + FN) / (TP + FN + FP + TN)`.
pub fn pwc(t: &DetectionTally) -> Option<f64> {
    let den = t.tp + t.fn_ + t.fp + t.tn();
    (den > 0).then(|| 100.0 * (t.fp + t.fn_) as f64 / den as f64)
}

/// Weighted harmonic mean of precision and recall.
///
/// With no true positives but some errors the score is 0, the limit that
/// `2TP / (2TP + FP + FN)` also gives. An all-zero tally has no score.
pub fn f_beta(t: &DetectionTally, beta2: f64) -> Option<f64> {
    if t.tp == 0 {
        return (t.fp + t.fn_ > 0).then_some(0.0);
    }
    let p = t.precision()?;
    let r = t.recall()?;
    Some((1.0 + beta2) * p * r / (beta2 * p + r))
}

/// The greedy GT-to-detection pairing, independent of `lambda`.
#[derive(Debug, Clone)]
pub struct Matching {
    gts: usize,
    dets: usize,
    /// Positive entries as `(gt, det, overlap)`.
    touches: Vec<(usize, usize, f64)>,
    /// For each GT, its matched detection and the pair's overlap.
    matched: Vec<Option<(usize, f64)>>,
}

impl Matching {
    pub fn new(ovlp: &OverlapMatrix) -> Self {
        let mut touches = Vec::new();
        for i in 0..ovlp.rows {
            for j in 0..ovlp.cols {
                let v = ovlp.get(i, j);
                if v > 0.0 {
                    touches.push((i, j, v));
                }
            }
        }
        let mut order = touches.clone();
        // descending overlap, ties to lower GT then lower detection index
        order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        let mut matched = vec![None; ovlp.rows];
        let mut det_taken = vec![false; ovlp.cols];
        for (i, j, v) in order {
            if matched[i].is_none() && !det_taken[j] {
                matched[i] = Some((j, v));
                det_taken[j] = true;
            }
        }
        Matching {
            gts: ovlp.rows,
            dets: ovlp.cols,
            touches,
            matched,
        }
    }

    /// Detection matched to each GT, if any.
    pub fn pairs(&self) -> &[Option<(usize, f64)>] {
        &self.matched
    }

    /// Classifies every GT and detection at overlap threshold `lambda`.
    pub fn tally(&self, lambda: f64) -> Result<DetectionTally> {
        check_lambda(lambda)?;
        let tp_of_gt: Vec<Option<usize>> = self
            .matched
            .iter()
            .map(|m| m.and_then(|(j, v)| (v > lambda).then_some(j)))
            .collect();
        let mut det_is_tp = vec![false; self.dets];
        for j in tp_of_gt.iter().flatten() {
            det_is_tp[*j] = true;
        }
        let tp = det_is_tp.iter().filter(|&&b| b).count();
        let mut tally = DetectionTally {
            tp,
            fn_: self.gts - tp,
            ..DetectionTally::default()
        };
        let mut det_touched = vec![false; self.dets];
        for &(i, j, _) in &self.touches {
            det_touched[j] = true;
            if tp_of_gt[i] == Some(j) {
                continue;
            }
            if det_is_tp[j] {
                tally.m += 1;
            } else {
                tally.s += 1;
            }
        }
        tally.fp = det_touched.iter().filter(|&&t| !t).count();
        Ok(tally)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Parameter(format!("overlap threshold {lambda} outside [0, 1)")));
    }
    Ok(())
}

pub fn classify_detections(ovlp: &OverlapMatrix, lambda: f64) -> Result<DetectionTally> {
    check_lambda(lambda)?;
    Matching::new(ovlp).tally(lambda)
}

/// Sample mean and 95% confidence half-width of a per-frame series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    /// Frames with a defined value.
    pub n: usize,
    pub mean: Option<f64>,
    /// `1.96 s / sqrt(n)`, present when `n >= 2`.
    pub ci95: Option<f64>,
}

/// Mean and normal-approximation 95% CI half-width; absent values are skipped.
pub fn frame_statistics(values: &[Option<f64>]) -> FrameStats {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let n = defined.len();
    if n == 0 {
        return FrameStats {
            n,
            mean: None,
            ci95: None,
        };
    }
    let mean = defined.iter().sum::<f64>() / n as f64;
    let ci95 = (n >= 2).then(|| {
        let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * var.sqrt() / (n as f64).sqrt()
    });
    FrameStats {
        n,
        mean: Some(mean),
        ci95,
    }
}

/// Metric values derived from one tally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValues {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub f_beta: Option<f64>,
    pub pwc: Option<f64>,
}

impl MetricValues {
    pub fn from_tally(t: &DetectionTally, beta2: f64) -> Self {
        MetricValues {
            precision: t.precision(),
            recall: t.recall(),
            f1: t.f1(),
            f_beta: f_beta(t, beta2),
            pwc: pwc(t),
        }
    }
}

/// Per-frame, pooled, and per-frame-mean metrics for one evaluated sequence.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub beta2: f64,
    pub frames: Vec<(String, DetectionTally, MetricValues)>,
    /// Counts summed over frames, and metrics computed from those sums.
    pub aggregate: (DetectionTally, MetricValues),
    /// Per-frame means of each column, in CSV column order.
    pub means: Vec<FrameStats>,
}

pub const REPORT_HEADER: &str = "frame,tp,s,m,fn,fp,precision,recall,f1,f_beta,pwc";

impl MetricsReport {
    pub fn new(frames: Vec<(String, DetectionTally)>, beta2: f64) -> Self {
        let mut pooled = DetectionTally::default();
        let frames: Vec<_> = frames
            .into_iter()
            .map(|(name, t)| {
                pooled += t;
                let v = MetricValues::from_tally(&t, beta2);
                (name, t, v)
            })
            .collect();
        let column = |f: &dyn Fn(&DetectionTally, &MetricValues) -> Option<f64>| -> FrameStats {
            let series: Vec<Option<f64>> = frames.iter().map(|(_, t, v)| f(t, v)).collect();
            frame_statistics(&series)
        };
        let means = vec![
            column(&|t, _| Some(t.tp as f64)),
            column(&|t, _| Some(t.s as f64)),
            column(&|t, _| Some(t.m as f64)),
            column(&|t, _| Some(t.fn_ as f64)),
            column(&|t, _| Some(t.fp as f64)),
            column(&|_, v| v.precision),
            column(&|_, v| v.recall),
            column(&|_, v| v.f1),
            column(&|_, v| v.f_beta),
            column(&|_, v| v.pwc),
        ];
        MetricsReport {
            beta2,
            frames,
            aggregate: (pooled, MetricValues::from_tally(&pooled, beta2)),
            means,
        }
    }

    /// CSV with one row per frame, an `aggregate` row of pooled counts, a
    /// `mean` row of per-frame means and a `ci95` row of their half-widths.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(REPORT_HEADER);
        s.push('\n');
        let metric_cells = |v: &MetricValues| {
            [v.precision, v.recall, v.f1, v.f_beta, v.pwc]
                .iter()
                .map(|x| fmt_opt(*x))
                .collect::<Vec<_>>()
                .join(",")
        };
        for (name, t, v) in &self.frames {
            let _ = writeln!(
                s,
                "{name},{},{},{},{},{},{}",
                t.tp,
                t.s,
                t.m,
                t.fn_,
                t.fp,
                metric_cells(v)
            );
        }
        let (t, v) = &self.aggregate;
        let _ = writeln!(
            s,
            "aggregate,{},{},{},{},{},{}",
            t.tp,
            t.s,
            t.m,
            t.fn_,
            t.fp,
            metric_cells(v)
        );
        let row = |label: &str, pick: fn(&FrameStats) -> Option<f64>| {
            let cells: Vec<String> = self.means.iter().map(|st| fmt_opt(pick(st))).collect();
            format!("{label},{}\n", cells.join(","))
        };
        s.push_str(&row("mean", |st| st.mean));
        s.push_str(&row("ci95", |st| st.ci95));
        s
    }

    pub fn mean_f1(&self) -> Option<f64> {
        self.means[7].mean
    }
}

/// Evaluates one frame's detections at threshold `lambda`.
pub fn evaluate_frame(gt: &[GroundTruthObject], det: &FrameDetections, lambda: f64) -> Result<DetectionTally> {
    classify_detections(&overlap_matrix(gt, det), lambda)
}
