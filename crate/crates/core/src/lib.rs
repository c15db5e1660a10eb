//! Spatio-temporal post-processing for vehicle detection in registered
//! aerial video.
//!
//! A normalized saliency frame goes through multi-neighborhood hysteresis
//! thresholding, binary opening and closing, and 8-connected labeling.
//! Detections that stay put between adjacent frames are then dropped. The
//! [`metrics`] module scores detections against rectangular ground truth,
//! and [`synth`] renders registered scenes with exact ground truth.

pub mod error;
pub mod imagery;
pub mod metrics;
pub mod morphology;
pub mod objects;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod temporal;
pub mod thresholding;

pub use error::{Error, Result};
pub use imagery::{load_frame, load_mask, normalize, save_frame, save_mask, BinaryMask, RawImage, SaliencyImage};
pub use metrics::{
    classify_detections, f_beta, frame_statistics, overlap_matrix, pwc, DetectionTally, GroundTruthObject,
    MetricsReport, OverlapMatrix,
};
pub use morphology::{close, dilate, erode, make_disk, open, StructuringElement};
pub use objects::{label_components, BBox, DetectedObject, FrameDetections};
pub use pipeline::{PipelineConfig, Profile};
pub use synth::{random_layout, LayoutParams, SceneSpec};
pub use temporal::{filter_static, iou, TemporalConfig};
pub use thresholding::{hysteresis_threshold, neighborhood_mean, HysteresisConfig, Neighborhood};
