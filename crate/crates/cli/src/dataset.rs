//! Directory-level input and output: frame sequences, mask sequences,
//! ground-truth files, and the artifacts written by each stage.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use aerialdet::metrics::{self, GroundTruthObject};
use aerialdet::objects::DETECTIONS_HEADER;
use aerialdet::{BinaryMask, Error, FrameDetections, Result, SaliencyImage};
use rayon::prelude::*;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "png"];

/// An image file in a sequence directory.
#[derive(Debug, Clone)]
pub struct SequenceEntry {
    pub path: PathBuf,
    /// File name without extension; names output files and CSV rows.
    pub stem: String,
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lists the images in `dir`, ordered by file name. Temporal order comes
/// from this ordering, so frame numbers must be zero-padded.
pub fn list_sequence(dir: &Path) -> Result<Vec<SequenceEntry>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_image || !path.is_file() {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| {
                io_err(
                    &path,
                    io::Error::new(io::ErrorKind::InvalidData, "file name is not UTF-8"),
                )
            })?
            .to_string();
        entries.push(SequenceEntry { path, stem });
    }
    entries.sort_by(|a, b| a.path.file_name().cmp(&b.path.file_name()));
    if entries.is_empty() {
        return Err(io_err(
            dir,
            io::Error::new(io::ErrorKind::NotFound, "no .pgm or .png images"),
        ));
    }
    if let Some(w) = entries.windows(2).find(|w| w[0].stem == w[1].stem) {
        return Err(Error::Inconsistent(format!(
            "{}: two images share the name {:?}",
            dir.display(),
            w[0].stem
        )));
    }
    Ok(entries)
}

pub fn load_frames(entries: &[SequenceEntry]) -> Result<Vec<SaliencyImage>> {
    entries.par_iter().map(|e| aerialdet::load_frame(&e.path)).collect()
}

pub fn load_masks(entries: &[SequenceEntry]) -> Result<Vec<BinaryMask>> {
    let masks: Vec<BinaryMask> = entries
        .par_iter()
        .map(|e| aerialdet::load_mask(&e.path))
        .collect::<Result<_>>()?;
    aerialdet::pipeline::check_same_size(masks.iter().map(|m| (m.width(), m.height())), "mask")?;
    Ok(masks)
}

/// Reads `<gt_dir>/<stem>.txt` for every entry.
pub fn load_ground_truth(
    gt_dir: &Path,
    entries: &[SequenceEntry],
    width: usize,
    height: usize,
) -> Result<Vec<Vec<GroundTruthObject>>> {
    entries
        .par_iter()
        .enumerate()
        .map(|(t, e)| metrics::load_ground_truth(gt_dir.join(format!("{}.txt", e.stem)), t, width, height))
        .collect()
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes one `<stem>.pgm` mask per entry into `dir`.
pub fn write_masks(dir: &Path, entries: &[SequenceEntry], masks: &[&BinaryMask]) -> Result<()> {
    create_dir(dir)?;
    masks
        .par_iter()
        .zip(entries.par_iter())
        .try_for_each(|(m, e)| aerialdet::save_mask(m, dir.join(format!("{}.pgm", e.stem))))
}

/// Detection table for a whole sequence.
pub fn detections_text(detections: &[FrameDetections]) -> String {
    let mut s = format!("{DETECTIONS_HEADER}\n");
    for d in detections {
        s.push_str(&d.to_lines());
    }
    s
}

pub fn frame_names(entries: &[SequenceEntry]) -> Vec<String> {
    entries.iter().map(|e| e.stem.clone()).collect()
}
