//! 8-connected component labeling and per-object geometry.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imagery::BinaryMask;

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

/// One 8-connected set of foreground pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedObject {
    pub id: usize,
    /// Member pixels as `(row, col)`, sorted in raster order.
    pixels: Vec<(usize, usize)>,
    centroid: (f64, f64),
    bbox: BBox,
}

impl DetectedObject {
    /// Builds an object from its pixel set, sorting and deduplicating it.
    /// Connectivity is not checked here.
    pub fn from_pixels(id: usize, mut pixels: Vec<(usize, usize)>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::Parameter("object needs at least one pixel".into()));
        }
        pixels.sort_unstable();
        pixels.dedup();
        let n = pixels.len() as f64;
        let (sr, sc) = pixels
            .iter()
            .fold((0.0, 0.0), |(a, b), &(r, c)| (a + r as f64, b + c as f64));
        let bbox = pixels.iter().fold(
            BBox {
                min_row: usize::MAX,
                min_col: usize::MAX,
                max_row: 0,
                max_col: 0,
            },
            |b, &(r, c)| BBox {
                min_row: b.min_row.min(r),
                min_col: b.min_col.min(c),
                max_row: b.max_row.max(r),
                max_col: b.max_col.max(c),
            },
        );
        Ok(DetectedObject {
            id,
            pixels,
            centroid: (sr / n, sc / n),
            bbox,
        })
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Unweighted mean of member coordinates as `(row, col)`.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Number of pixels shared with `other`.
    pub fn intersection_count(&self, other: &DetectedObject) -> usize {
        if !bbox_overlap(&self.bbox, &other.bbox) {
            return 0;
        }
        sorted_intersection(&self.pixels, &other.pixels)
    }

    /// Same object with every pixel moved by `(dr, dc)`.
    pub fn translated(&self, dr: usize, dc: usize) -> DetectedObject {
        let pixels = self.pixels.iter().map(|&(r, c)| (r + dr, c + dc)).collect();
        DetectedObject::from_pixels(self.id, pixels).expect("non-empty")
    }
}

pub fn centroid(obj: &DetectedObject) -> (f64, f64) {
    obj.centroid()
}

fn bbox_overlap(a: &BBox, b: &BBox) -> bool {
    a.min_row <= b.max_row && b.min_row <= a.max_row && a.min_col <= b.max_col && b.min_col <= a.max_col
}

fn sorted_intersection(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// All objects found in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub objects: Vec<DetectedObject>,
}

impl FrameDetections {
    /// Paints the objects back into a mask of the frame's size.
    pub fn to_mask(&self) -> BinaryMask {
        let mut mask = BinaryMask::empty(self.width, self.height).expect("frame dimensions");
        for obj in &self.objects {
            for &(r, c) in obj.pixels() {
                mask.set(r, c, true);
            }
        }
        mask
    }

    /// One comma-separated line per object:
    /// `frame_index,id,area,centroid_row,centroid_col,min_row,min_col,max_row,max_col`.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for o in &self.objects {
            let (cr, cc) = o.centroid();
            let b = o.bbox();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                self.frame_index,
                o.id,
                o.area(),
                crate::report::fmt_sig6(cr),
                crate::report::fmt_sig6(cc),
                b.min_row,
                b.min_col,
                b.max_row,
                b.max_col
            );
        }
        s
    }
}

/// Header line for files of [`FrameDetections::to_lines`] rows.
pub const DETECTIONS_HEADER: &str = "frame_index,id,area,centroid_row,centroid_col,min_row,min_col,max_row,max_col";

/// Disjoint-set forest with path halving and union by rank.
struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new() -> Self {
        DisjointSets {
            parent: Vec::new(),
            rank: Vec::new(),
        }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.rank.push(0);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

const NONE: u32 = u32::MAX;

/// Labels the 8-connected foreground components of `mask`.
///
/// Object ids run densely from 1 in raster order of each object's first
/// pixel; pixel lists are in raster order.
pub fn label_components(mask: &BinaryMask, frame_index: usize) -> FrameDetections {
    let (w, h) = (mask.width(), mask.height());
    let mut provisional = vec![NONE; w * h];
    let mut sets = DisjointSets::new();

    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            // already-visited neighbors: W, NW, N, NE
            let mut label = NONE;
            let consider = |rr: usize, cc: usize, label: &mut u32, sets: &mut DisjointSets| {
                let l = provisional[rr * w + cc];
                if l != NONE {
                    if *label == NONE {
                        *label = l;
                    } else {
                        sets.union(*label, l);
                    }
                }
            };
            if c > 0 {
                consider(r, c - 1, &mut label, &mut sets);
            }
            if r > 0 {
                if c > 0 {
                    consider(r - 1, c - 1, &mut label, &mut sets);
                }
                consider(r - 1, c, &mut label, &mut sets);
                if c + 1 < w {
                    consider(r - 1, c + 1, &mut label, &mut sets);
                }
            }
            if label == NONE {
                label = sets.make();
            }
            provisional[r * w + c] = label;
        }
    }

    // second pass: dense ids by first appearance of each root in raster order
    let mut dense = vec![NONE; sets.parent.len()];
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let l = provisional[r * w + c];
            if l == NONE {
                continue;
            }
            let root = sets.find(l) as usize;
            if dense[root] == NONE {
                dense[root] = groups.len() as u32;
                groups.push(Vec::new());
            }
            groups[dense[root] as usize].push((r, c));
        }
    }

    let objects = groups
        .into_iter()
        .enumerate()
        .map(|(i, px)| DetectedObject::from_pixels(i + 1, px).expect("non-empty group"))
        .collect();
    FrameDetections {
        frame_index,
        width: w,
        height: h,
        objects,
    }
}
