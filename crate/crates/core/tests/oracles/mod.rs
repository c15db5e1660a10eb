//! Naive reference implementations used to cross-check the production code.
//! Each one is written straight from the definition and shares no code with
//! the crate beyond the image containers.
#![allow(dead_code)]

use std::collections::VecDeque;

use aerialdet::{BinaryMask, HysteresisConfig, SaliencyImage};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn in_bounds(h: usize, w: usize, r: isize, c: isize) -> bool {
    r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w
}

/// Mean of the center pixel and those of `offsets` that lie inside the image.
fn local_mean(img: &SaliencyImage, r: usize, c: usize, offsets: &[(isize, isize)]) -> f64 {
    let mut values = vec![img.get(r, c)];
    for &(dr, dc) in offsets {
        let (rr, cc) = (r as isize + dr, c as isize + dc);
        if in_bounds(img.height(), img.width(), rr, cc) {
            values.push(img.get(rr as usize, cc as usize));
        }
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Step 1 / Step 2 / Step 3 with Cases 1-3, transcribed rule by rule.
pub fn literal_threshold(img: &SaliencyImage, cfg: &HysteresisConfig) -> BinaryMask {
    let eight = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
    let four = [(-1, 0), (0, -1), (0, 1), (1, 0)];
    let diag = [(-1, -1), (-1, 1), (1, -1), (1, 1)];
    BinaryMask::from_fn(img.width(), img.height(), |r, c| {
        let v = img.get(r, c);
        // Step 1
        if v > cfg.hi {
            return true;
        }
        // Step 2
        if v < cfg.lo {
            return false;
        }
        // Step 3: v in [lo, hi]
        assert!(v >= cfg.lo && v <= cfg.hi);
        let nm = local_mean(img, r, c, &eight);
        if nm > cfg.nbhd_hi {
            return true; // Case 1
        }
        if nm < cfg.nbhd_lo {
            return false; // Case 2
        }
        // Case 3
        let m4 = local_mean(img, r, c, &four);
        let md = local_mean(img, r, c, &diag);
        m4 > cfg.sub_mean || md > cfg.sub_mean
    })
    .unwrap()
}

/// Random 8x8-style image; about a tenth of the pixels take a value exactly
/// equal to one of the thresholds so equality branches get exercised.
pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, cfg: &HysteresisConfig) -> SaliencyImage {
    let specials = [cfg.hi, cfg.lo, cfg.nbhd_hi, cfg.nbhd_lo, cfg.sub_mean, 0.0, 1.0];
    SaliencyImage::from_fn(w, h, |_, _| {
        if rng.random_bool(0.1) {
            specials[rng.random_range(0..specials.len())]
        } else {
            rng.random_range(0.0..=1.0)
        }
    })
    .unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density)).unwrap()
}

/// Dilation as the union of the mask translated by every footprint offset.
pub fn dilate_oracle(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    let mut out = BinaryMask::empty(w, h).unwrap();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            for &(dr, dc) in offsets {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if in_bounds(h, w, rr, cc) {
                    out.set(rr as usize, cc as usize, true);
                }
            }
        }
    }
    out
}

/// Erosion from the set definition: the whole translated footprint must be
/// inside the image and foreground.
pub fn erode_oracle(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    BinaryMask::from_fn(w, h, |r, c| {
        offsets.iter().all(|&(dr, dc)| {
            let (rr, cc) = (r as isize + dr, c as isize + dc);
            in_bounds(h, w, rr, cc) && mask.get(rr as usize, cc as usize)
        })
    })
    .unwrap()
}

/// Closing on an unbounded plane, restricted back to the frame.
pub fn close_oracle(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    let pad = offsets
        .iter()
        .map(|&(r, c)| r.unsigned_abs().max(c.unsigned_abs()))
        .max()
        .unwrap();
    let (h, w) = (mask.height(), mask.width());
    let big = BinaryMask::from_fn(w + 2 * pad, h + 2 * pad, |r, c| {
        r >= pad && c >= pad && r < h + pad && c < w + pad && mask.get(r - pad, c - pad)
    })
    .unwrap();
    let closed = erode_oracle(&dilate_oracle(&big, offsets), offsets);
    BinaryMask::from_fn(w, h, |r, c| closed.get(r + pad, c + pad)).unwrap()
}

/// Label image from breadth-first flood fill over 8-neighbors. Labels are
/// assigned in raster order of each component's first pixel, starting at 1.
pub fn flood_fill_labels(mask: &BinaryMask) -> Vec<usize> {
    let (h, w) = (mask.height(), mask.width());
    let mut labels = vec![0usize; w * h];
    let mut next = 0;
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) || labels[r * w + c] != 0 {
                continue;
            }
            next += 1;
            labels[r * w + c] = next;
            let mut queue = VecDeque::from([(r, c)]);
            while let Some((pr, pc)) = queue.pop_front() {
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let (rr, cc) = (pr as isize + dr, pc as isize + dc);
                        if !in_bounds(h, w, rr, cc) {
                            continue;
                        }
                        let (rr, cc) = (rr as usize, cc as usize);
                        if mask.get(rr, cc) && labels[rr * w + cc] == 0 {
                            labels[rr * w + cc] = next;
                            queue.push_back((rr, cc));
                        }
                    }
                }
            }
        }
    }
    labels
}

/// Label image built from a detection list.
pub fn labels_of(d: &aerialdet::FrameDetections) -> Vec<usize> {
    let mut labels = vec![0usize; d.width * d.height];
    for o in &d.objects {
        for &(r, c) in o.pixels() {
            labels[r * d.width + c] = o.id;
        }
    }
    labels
}
