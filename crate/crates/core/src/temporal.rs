//! Removal of static detections across adjacent registered frames.
//!
//! An object in frame `t` is discarded when some object in frame `t + 1`
//! overlaps it with IoU above `iou_threshold` and has its centroid closer
//! than `delta` pixels. The last frame is compared against its predecessor.
//! Every decision is made against the unfiltered neighbor frame.

use crate::error::{Error, Result};
use crate::objects::{DetectedObject, FrameDetections};

/// Parameters of the static-object test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalConfig {
    pub iou_threshold: f64,
    /// Maximum centroid displacement in pixels.
    pub delta: f64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            iou_threshold: 0.75,
            delta: 2.0,
        }
    }
}

impl TemporalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Parameter(format!(
                "temporal.iou_threshold = {} outside (0, 1]",
                self.iou_threshold
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "temporal.delta = {} must be positive",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Jaccard index of two pixel sets.
pub fn iou(a: &DetectedObject, b: &DetectedObject) -> f64 {
    let inter = a.intersection_count(b);
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

fn centroid_distance(a: &DetectedObject, b: &DetectedObject) -> f64 {
    let (ar, ac) = a.centroid();
    let (br, bc) = b.centroid();
    (ar - br).hypot(ac - bc)
}

/// True when `obj` has a static counterpart in `neighbor`.
pub fn is_static(obj: &DetectedObject, neighbor: &FrameDetections, cfg: &TemporalConfig) -> bool {
    neighbor
        .objects
        .iter()
        .any(|k| iou(obj, k) > cfg.iou_threshold && centroid_distance(obj, k) < cfg.delta)
}

/// Drops static objects from every frame of `sequence`.
///
/// Surviving objects are returned unchanged, in their original order.
pub fn filter_static(sequence: &[FrameDetections], cfg: &TemporalConfig) -> Result<Vec<FrameDetections>> {
    cfg.validate()?;
    if sequence.is_empty() {
        return Err(Error::Parameter("temporal filtering needs at least one frame".into()));
    }
    if sequence.len() == 1 {
        return Ok(sequence.to_vec());
    }
    let last = sequence.len() - 1;
    Ok(sequence
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            let neighbor = if t < last { &sequence[t + 1] } else { &sequence[t - 1] };
            FrameDetections {
                frame_index: frame.frame_index,
                width: frame.width,
                height: frame.height,
                objects: frame
                    .objects
                    .iter()
                    .filter(|o| !is_static(o, neighbor, cfg))
                    .cloned()
                    .collect(),
            }
        })
        .collect())
}
