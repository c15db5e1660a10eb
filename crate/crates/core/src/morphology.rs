//! Binary erosion, dilation, opening and closing with flat structuring elements.
//!
//! Conventions:
//!
//! * `dilate(m, se)(p)` is foreground iff `m(p - o)` is foreground for some
//!   offset `o` in `se` (Minkowski sum). Targets outside the image are dropped.
//! * `erode(m, se)(p)` is foreground iff `p + o` is inside the image and
//!   foreground for every `o` in `se`. Out-of-bounds pixels count as background.
//! * `open = dilate(erode(m))`, which is anti-extensive for any footprint,
//!   including the top-left anchored `square(2)`.
//! * `close` dilates without clipping at the frame edge and then erodes, so
//!   objects touching the border are not eaten by the erosion step. This
//!   keeps `m ⊆ close(m)` for every mask.
//!
//! The kernels work on rows packed into `u64` words: each footprint offset
//! becomes one shifted OR (dilation) or AND (erosion) over whole words.

use crate::error::{Error, Result};
use crate::imagery::BinaryMask;

/// Footprint shape, kept alongside the offsets for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `n`x`n` square anchored at its top-left pixel.
    Square(usize),
    /// Euclidean disk of the given radius centered on the origin.
    Disk(usize),
    /// Arbitrary offset set.
    Custom,
}

/// A flat binary structuring element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
    shape: Shape,
}

impl StructuringElement {
    /// `n`x`n` square with offsets `0 <= dr, dc < n`.
    pub fn square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("square structuring element needs size >= 1".into()));
        }
        let n = n as isize;
        let offsets = (0..n).flat_map(|dr| (0..n).map(move |dc| (dr, dc))).collect();
        Ok(StructuringElement {
            offsets,
            shape: Shape::Square(n as usize),
        })
    }

    /// Disk `{(dr, dc) : dr² + dc² <= radius²}`. A radius-r disk spans
    /// `(2r+1)x(2r+1)`, so radius 1 is the 3x3 plus and radius 7 is 15x15.
    pub fn disk(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Parameter("disk radius must be >= 1".into()));
        }
        let r = radius as isize;
        let offsets = (-r..=r)
            .flat_map(|dr| (-r..=r).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| dr * dr + dc * dc <= r * r)
            .collect();
        Ok(StructuringElement {
            offsets,
            shape: Shape::Disk(radius),
        })
    }

    /// Arbitrary footprint. Duplicate offsets are removed.
    pub fn from_offsets(mut offsets: Vec<(isize, isize)>) -> Result<Self> {
        offsets.sort_unstable();
        offsets.dedup();
        if offsets.is_empty() {
            return Err(Error::Parameter("structuring element must be non-empty".into()));
        }
        Ok(StructuringElement {
            offsets,
            shape: Shape::Custom,
        })
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Point reflection through the origin.
    pub fn reflected(&self) -> StructuringElement {
        let mut offsets: Vec<_> = self.offsets.iter().map(|&(r, c)| (-r, -c)).collect();
        offsets.sort_unstable();
        StructuringElement {
            offsets,
            shape: Shape::Custom,
        }
    }

    /// Bounding box of the offsets as `(min_dr, min_dc, max_dr, max_dc)`.
    pub fn extent(&self) -> (isize, isize, isize, isize) {
        self.offsets.iter().fold(
            (isize::MAX, isize::MAX, isize::MIN, isize::MIN),
            |(a, b, c, d), &(r, cc)| (a.min(r), b.min(cc), c.max(r), d.max(cc)),
        )
    }
}

pub fn make_disk(radius: usize) -> Result<StructuringElement> {
    StructuringElement::disk(radius)
}

/// Row-packed bitmap.
#[derive(Clone)]
struct Bits {
    width: usize,
    height: usize,
    words: usize,
    data: Vec<u64>,
}

impl Bits {
    fn zeros(width: usize, height: usize) -> Self {
        let words = width.div_ceil(64);
        Bits {
            width,
            height,
            words,
            data: vec![0; words * height],
        }
    }

    fn from_mask(mask: &BinaryMask) -> Self {
        let mut bits = Bits::zeros(mask.width(), mask.height());
        for (r, row) in mask.data().chunks_exact(mask.width()).enumerate() {
            let out = &mut bits.data[r * bits.words..(r + 1) * bits.words];
            for (c, _) in row.iter().enumerate().filter(|(_, &b)| b) {
                out[c / 64] |= 1 << (c % 64);
            }
        }
        bits
    }

    fn to_mask(&self) -> BinaryMask {
        let mut data = Vec::with_capacity(self.width * self.height);
        for r in 0..self.height {
            let row = self.row(r);
            data.extend((0..self.width).map(|c| row[c / 64] >> (c % 64) & 1 == 1));
        }
        BinaryMask::new(self.width, self.height, data).expect("bitmap dimensions are non-zero")
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    fn tail_mask(&self) -> u64 {
        match self.width % 64 {
            0 => u64::MAX,
            n => (1u64 << n) - 1,
        }
    }

    /// Copies `self` into a larger zeroed bitmap at `(top, left)`.
    fn padded(&self, top: usize, left: usize, bottom: usize, right: usize) -> Bits {
        let mut out = Bits::zeros(self.width + left + right, self.height + top + bottom);
        for r in 0..self.height {
            let src = self.row(r);
            let dst = &mut out.data[(r + top) * out.words..(r + top + 1) * out.words];
            // out bit (left + c) = src bit c
            for (i, w) in dst.iter_mut().enumerate() {
                *w = shifted_word(src, i, -(left as isize));
            }
        }
        out
    }

    fn cropped(&self, top: usize, left: usize, width: usize, height: usize) -> Bits {
        let mut out = Bits::zeros(width, height);
        let tail = out.tail_mask();
        for r in 0..height {
            let src = self.row(r + top);
            let dst = &mut out.data[r * out.words..(r + 1) * out.words];
            for (i, w) in dst.iter_mut().enumerate() {
                *w = shifted_word(src, i, left as isize);
            }
            if let Some(last) = dst.last_mut() {
                *last &= tail;
            }
        }
        out
    }
}

/// Word `i` of the bit vector `src` shifted so that output bit `c` holds
/// input bit `c + k`. Bits shifted in from outside `src` are zero.
#[inline]
fn shifted_word(src: &[u64], i: usize, k: isize) -> u64 {
    let q = k.div_euclid(64);
    let s = k.rem_euclid(64) as u32;
    let at = |j: isize| -> u64 {
        if j >= 0 && (j as usize) < src.len() {
            src[j as usize]
        } else {
            0
        }
    };
    let j = i as isize + q;
    if s == 0 {
        at(j)
    } else {
        (at(j) >> s) | (at(j + 1) << (64 - s))
    }
}

fn dilate_bits(src: &Bits, se: &StructuringElement) -> Bits {
    let mut out = Bits::zeros(src.width, src.height);
    let tail = out.tail_mask();
    let h = src.height as isize;
    for r in 0..src.height {
        let dst = &mut out.data[r * src.words..(r + 1) * src.words];
        for &(dr, dc) in &se.offsets {
            let sr = r as isize - dr;
            if sr < 0 || sr >= h {
                continue;
            }
            let row = src.row(sr as usize);
            for (i, w) in dst.iter_mut().enumerate() {
                *w |= shifted_word(row, i, -dc);
            }
        }
        if let Some(last) = dst.last_mut() {
            *last &= tail;
        }
    }
    out
}

fn erode_bits(src: &Bits, se: &StructuringElement) -> Bits {
    let mut out = Bits::zeros(src.width, src.height);
    let tail = out.tail_mask();
    let h = src.height as isize;
    for r in 0..src.height {
        let dst = &mut out.data[r * src.words..(r + 1) * src.words];
        dst.fill(u64::MAX);
        for &(dr, dc) in &se.offsets {
            let sr = r as isize + dr;
            if sr < 0 || sr >= h {
                dst.fill(0);
                break;
            }
            let row = src.row(sr as usize);
            for (i, w) in dst.iter_mut().enumerate() {
                *w &= shifted_word(row, i, dc);
            }
        }
        if let Some(last) = dst.last_mut() {
            *last &= tail;
        }
    }
    out
}

/// Binary dilation; see the module docs for the boundary rule.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_bits(&Bits::from_mask(mask), se).to_mask()
}

/// Binary erosion; pixels whose footprint leaves the image become background.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_bits(&Bits::from_mask(mask), se).to_mask()
}

/// Opening: erosion followed by dilation with the same footprint.
pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_bits(&erode_bits(&Bits::from_mask(mask), se), se).to_mask()
}

/// Closing: dilation followed by erosion, computed on a canvas padded by the
/// footprint extent and cropped back to the input size.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (min_r, min_c, max_r, max_c) = se.extent();
    let pad_r = min_r.unsigned_abs().max(max_r.unsigned_abs());
    let pad_c = min_c.unsigned_abs().max(max_c.unsigned_abs());
    let src = Bits::from_mask(mask);
    let canvas = src.padded(pad_r, pad_c, pad_r, pad_c);
    let closed = erode_bits(&dilate_bits(&canvas, se), se);
    closed.cropped(pad_r, pad_c, mask.width(), mask.height()).to_mask()
}
