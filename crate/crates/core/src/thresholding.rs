//! Multi-neighborhood hysteresis thresholding.
//!
//! Each pixel is labeled from the input image alone, never from labels
//! already assigned to its neighbors:
//!
//! 1. value above `hi` is foreground;
//! 2. value below `lo` is background;
//! 3. otherwise the 3x3 neighborhood mean decides: above `nbhd_hi` is
//!    foreground, below `nbhd_lo` is background, and anything in between is
//!    foreground only if the center-plus-4-neighbor mean or the
//!    center-plus-4-diagonal mean exceeds `sub_mean`.
//!
//! Neighbors falling outside the image are dropped from both the sum and the
//! count of a mean.

use crate::error::{Error, Result};
use crate::imagery::{BinaryMask, SaliencyImage};

/// Thresholds for [`hysteresis_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisConfig {
    pub hi: f64,
    pub lo: f64,
    pub nbhd_hi: f64,
    pub nbhd_lo: f64,
    pub sub_mean: f64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        HysteresisConfig {
            hi: 5.0 / 8.0,
            lo: 1.0 / 8.0,
            nbhd_hi: 3.0 / 5.0,
            nbhd_lo: 1.0 / 6.0,
            sub_mean: 0.5,
        }
    }
}

impl HysteresisConfig {
    /// Checks that every threshold is in `[0, 1]` and that each pair is ordered.
    ///
    /// `lo == hi` is accepted: it reduces the first two rules to a plain
    /// threshold, with only exact ties reaching the neighborhood rules.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hi", self.hi),
            ("lo", self.lo),
            ("nbhd_hi", self.nbhd_hi),
            ("nbhd_lo", self.nbhd_lo),
            ("sub_mean", self.sub_mean),
        ];
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("threshold.{name} = {v} outside [0, 1]")));
            }
        }
        if self.lo > self.hi {
            return Err(Error::Parameter(format!(
                "threshold.lo ({}) exceeds threshold.hi ({})",
                self.lo, self.hi
            )));
        }
        if self.nbhd_lo > self.nbhd_hi {
            return Err(Error::Parameter(format!(
                "threshold.nbhd_lo ({}) exceeds threshold.nbhd_hi ({})",
                self.nbhd_lo, self.nbhd_hi
            )));
        }
        Ok(())
    }
}

/// Which neighbors of a pixel enter a neighborhood mean. The center pixel
/// is always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    /// All 8 surrounding pixels.
    Full8,
    /// North, south, east, west.
    Plus4,
    /// The four diagonal neighbors.
    Diag4,
}

impl Neighborhood {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Full8 => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
            Neighborhood::Plus4 => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Neighborhood::Diag4 => &[(-1, -1), (-1, 1), (1, -1), (1, 1)],
        }
    }
}

/// Mean of the pixel at `(row, col)` and its in-bounds neighbors of `kind`.
pub fn neighborhood_mean(img: &SaliencyImage, row: usize, col: usize, kind: Neighborhood) -> Result<f64> {
    if row >= img.height() || col >= img.width() {
        return Err(Error::OutOfBounds {
            row,
            col,
            height: img.height(),
            width: img.width(),
        });
    }
    Ok(mean_at(img, row, col, kind))
}

#[inline]
fn mean_at(img: &SaliencyImage, row: usize, col: usize, kind: Neighborhood) -> f64 {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let mut sum = img.get(row, col);
    let mut count = 1usize;
    for &(dr, dc) in kind.offsets() {
        let (r, c) = (row as isize + dr, col as isize + dc);
        if r >= 0 && r < h && c >= 0 && c < w {
            sum += img.get(r as usize, c as usize);
            count += 1;
        }
    }
    sum / count as f64
}

/// Labels every pixel of `img` as foreground or background.
pub fn hysteresis_threshold(img: &SaliencyImage, cfg: &HysteresisConfig) -> BinaryMask {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![false; w * h];
    for row in 0..h {
        let line = &mut out[row * w..(row + 1) * w];
        for (col, px) in line.iter_mut().enumerate() {
            *px = classify_pixel(img, row, col, cfg);
        }
    }
    BinaryMask::new(w, h, out).expect("dimensions copied from a valid image")
}

#[inline]
fn classify_pixel(img: &SaliencyImage, row: usize, col: usize, cfg: &HysteresisConfig) -> bool {
    let v = img.get(row, col);
    if v > cfg.hi {
        return true;
    }
    if v < cfg.lo {
        return false;
    }
    let m8 = mean_at(img, row, col, Neighborhood::Full8);
    if m8 > cfg.nbhd_hi {
        return true;
    }
    if m8 < cfg.nbhd_lo {
        return false;
    }
    mean_at(img, row, col, Neighborhood::Plus4) > cfg.sub_mean
        || mean_at(img, row, col, Neighborhood::Diag4) > cfg.sub_mean
}

/// Plain single-level thresholding: foreground iff value > `t`.
pub fn simple_threshold(img: &SaliencyImage, t: f64) -> BinaryMask {
    let data = img.data().iter().map(|&v| v > t).collect();
    BinaryMask::new(img.width(), img.height(), data).expect("dimensions copied from a valid image")
}
