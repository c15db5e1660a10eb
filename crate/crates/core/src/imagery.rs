//! Grayscale frames, binary masks, and PGM/PNG file I/O.
//!
//! Frames are read from PGM (P2 or P5, any maxval up to 65535) or 8-bit
//! grayscale PNG and linearly normalized to `[0, 1]` per frame. Masks are
//! always written as binary PGM (P5, maxval 255) with background stored as
//! 0 and foreground as 255.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A grayscale image with an arbitrary real-valued range, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("raw image contains non-finite values".into()));
        }
        Ok(RawImage { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl From<SaliencyImage> for RawImage {
    fn from(img: SaliencyImage) -> Self {
        RawImage {
            width: img.width,
            height: img.height,
            data: img.data,
        }
    }
}

/// A normalized grayscale frame with every intensity in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl SaliencyImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!("saliency value {v} outside [0, 1]")));
        }
        Ok(SaliencyImage { width, height, data })
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Per-pixel foreground/background labels, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(BinaryMask { width, height, data })
    }

    /// An all-background mask.
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pixelwise complement.
    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    /// Masks of different dimensions are never subsets of each other.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "image must be at least 1x1, got {width}x{height}"
        )));
    }
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::Dimension(format!(
            "{width}x{height} image needs {} samples, got {len}",
            width.saturating_mul(height)
        ))),
    }
}

/// Linear min-max normalization onto `[0, 1]`.
///
/// A constant image maps to all zeros.
pub fn normalize(raw: &RawImage) -> SaliencyImage {
    let (min, max) = raw
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    let data = if range > 0.0 {
        raw.data
            .iter()
            // clamp absorbs rounding when min is large relative to range
            .map(|&v| ((v - min) / range).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; raw.data.len()]
    };
    SaliencyImage {
        width: raw.width,
        height: raw.height,
        data,
    }
}

/// Reads a PGM or 8-bit grayscale PNG frame without normalizing it.
pub fn load_raw(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(path, &bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::Unsupported {
            path: path.to_path_buf(),
            reason: format!("netpbm variant P{} is not grayscale PGM", bytes[1] as char),
        })
    } else {
        Err(Error::Unsupported {
            path: path.to_path_buf(),
            reason: "not a PGM or PNG file".into(),
        })
    }
}

/// Reads a frame and normalizes it to `[0, 1]`.
pub fn load_frame(path: impl AsRef<Path>) -> Result<SaliencyImage> {
    load_raw(path).map(|raw| normalize(&raw))
}

/// Writes a mask as P5 PGM with background 0 and foreground 255.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let body: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_pgm8(path.as_ref(), mask.width, mask.height, &body)
}

/// Reads a mask written by [`save_mask`]. Any nonzero sample is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let raw = load_raw(path)?;
    Ok(BinaryMask {
        width: raw.width,
        height: raw.height,
        data: raw.data.iter().map(|&v| v > 0.0).collect(),
    })
}

/// Writes a `[0, 1]` image as 8-bit P5 PGM, rounding to the nearest level.
pub fn save_frame(img: &SaliencyImage, path: impl AsRef<Path>) -> Result<()> {
    let body = quantize(&img.data);
    write_pgm8(path.as_ref(), img.width, img.height, &body)
}

/// Maps `[0, 1]` intensities to 8-bit levels with round-half-up.
pub fn quantize(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8)
        .collect()
}

fn write_pgm8(path: &Path, width: usize, height: usize, body: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write!(out, "P5\n{width} {height}\n255\n")
        .and_then(|_| out.write_all(body))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn next_uint(&mut self) -> Option<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<RawImage> {
    let malformed = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let binary = bytes[1] == b'5';
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.next_uint().ok_or_else(|| malformed("missing width".into()))?;
    let height = cur.next_uint().ok_or_else(|| malformed("missing height".into()))?;
    let maxval = cur.next_uint().ok_or_else(|| malformed("missing maxval".into()))?;
    if width == 0 || height == 0 {
        return Err(malformed(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            reason: format!("maxval {maxval} (must be 1..=65535)"),
        });
    }
    let n = usize::try_from(width * height).map_err(|_| malformed("image too large".into()))?;
    let mut data = Vec::with_capacity(n);

    if binary {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(malformed("missing whitespace after maxval".into())),
        }
        let sample_bytes = if maxval < 256 { 1 } else { 2 };
        let body = &bytes[cur.pos..];
        if body.len() < n * sample_bytes {
            return Err(malformed(format!(
                "truncated body: need {} bytes, found {}",
                n * sample_bytes,
                body.len()
            )));
        }
        for i in 0..n {
            let v = if sample_bytes == 1 {
                body[i] as u64
            } else {
                u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as u64
            };
            if v > maxval {
                return Err(malformed(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    } else {
        for i in 0..n {
            let v = cur
                .next_uint()
                .ok_or_else(|| malformed(format!("truncated body: found {i} of {n} samples")))?;
            if v > maxval {
                return Err(malformed(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    }
    RawImage::new(width as usize, height as usize, data)
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<RawImage> {
    let malformed = |e: png::DecodingError| match e {
        png::DecodingError::IoError(source) => Error::io(path, source),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    };
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(malformed)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            reason: format!(
                "PNG must be 8-bit grayscale, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        });
    }
    if info.interlaced {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            reason: "interlaced PNG".into(),
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; width * height];
    let frame = reader.next_frame(&mut buf).map_err(malformed)?;
    let data = rows_to_samples(&buf, frame.line_size, width, height);
    RawImage::new(width, height, data)
}

fn rows_to_samples(buf: &[u8], stride: usize, width: usize, height: usize) -> Vec<f64> {
    (0..height)
        .flat_map(|r| buf[r * stride..r * stride + width].iter().map(|&b| b as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(width: usize, height: usize, data: &[f64]) -> RawImage {
        RawImage::new(width, height, data.to_vec()).unwrap()
    }

    #[test]
    fn normalize_8bit_endpoints() {
        let img = normalize(&raw(3, 1, &[0.0, 128.0, 255.0]));
        assert_eq!(img.data()[0], 0.0);
        assert!((img.data()[1] - 128.0 / 255.0).abs() < 1e-12);
        assert_eq!(img.data()[2], 1.0);
    }

    #[test]
    fn normalize_constant_is_zero() {
        let img = normalize(&raw(2, 2, &[77.0; 4]));
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_min_max_formula() {
        let img = normalize(&raw(3, 1, &[10.0, 20.0, 30.0]));
        assert_eq!(img.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn empty_image_is_dimension_error() {
        assert!(matches!(RawImage::new(0, 3, vec![]), Err(Error::Dimension(_))));
        assert!(matches!(RawImage::new(2, 2, vec![1.0; 3]), Err(Error::Dimension(_))));
    }

    #[test]
    fn saliency_rejects_out_of_range() {
        assert!(SaliencyImage::new(1, 1, vec![1.5]).is_err());
        assert!(SaliencyImage::new(1, 1, vec![-0.1]).is_err());
    }

    #[test]
    fn load_ascii_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        std::fs::write(&p, "P2\n# comment\n2 2\n255\n0 255 128 64\n").unwrap();
        let img = load_frame(&p).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        let want = [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0];
        for (a, b) in img.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((img.data()[2] - 0.50196).abs() < 1e-5);
        assert!((img.data()[3] - 0.25098).abs() < 1e-5);
    }

    #[test]
    fn load_single_pixel_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.pgm");
        std::fs::write(&p, "P2 1 1 255 5").unwrap();
        assert_eq!(load_frame(&p).unwrap().data(), &[0.0]);
    }

    #[test]
    fn load_16bit_binary_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.pgm");
        let mut bytes = b"P5 2 1 1000\n".to_vec();
        bytes.extend_from_slice(&500u16.to_be_bytes());
        bytes.extend_from_slice(&1000u16.to_be_bytes());
        std::fs::write(&p, bytes).unwrap();
        assert_eq!(load_raw(&p).unwrap().data(), &[500.0, 1000.0]);
    }

    #[test]
    fn truncated_pgm_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pgm");
        std::fs::write(&p, "P2\n2 2\n255\n0 1 2\n").unwrap();
        assert!(matches!(load_frame(&p), Err(Error::Format { .. })));
        let p5 = dir.path().join("t5.pgm");
        std::fs::write(&p5, b"P5\n2 2\n255\n\x00\x01").unwrap();
        assert!(matches!(load_frame(&p5), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_header_and_depth_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.pgm");
        std::fs::write(&p, "P5\nx 2\n255\n").unwrap();
        assert!(matches!(load_frame(&p), Err(Error::Format { .. })));
        std::fs::write(&p, "P5\n1 1\n70000\n\0\0\0").unwrap();
        assert!(matches!(load_frame(&p), Err(Error::Unsupported { .. })));
        std::fs::write(&p, "P6\n1 1\n255\nabc").unwrap();
        assert!(matches!(load_frame(&p), Err(Error::Unsupported { .. })));
        assert!(matches!(
            load_frame(dir.path().join("missing.pgm")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn sample_above_maxval_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        std::fs::write(&p, "P2 1 1 10 11").unwrap();
        assert!(matches!(load_frame(&p), Err(Error::Format { .. })));
    }

    fn write_png(path: &Path, w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) {
        let file = File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc.write_header().unwrap();
        writer.write_image_data(data).unwrap();
    }

    #[test]
    fn load_gray8_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_png(&p, 3, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[10, 20, 30]);
        assert_eq!(load_frame(&p).unwrap().data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn png_other_depths_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        write_png(&p, 1, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[1, 2, 3]);
        assert!(matches!(load_frame(&p), Err(Error::Unsupported { .. })));
        let p16 = dir.path().join("g16.png");
        write_png(&p16, 1, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[0, 1]);
        assert!(matches!(load_frame(&p16), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn save_mask_fixed_encoding() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let mask = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        save_mask(&mask, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes, b"P5\n2 2\n255\n\xff\x00\x00\xff");

        save_mask(&BinaryMask::empty(3, 2).unwrap(), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.ends_with(&[0; 6]));
        assert_eq!(bytes.len(), b"P5\n3 2\n255\n".len() + 6);
    }

    #[test]
    fn save_mask_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("no/such/dir/m.pgm");
        let err = save_mask(&BinaryMask::empty(1, 1).unwrap(), p).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn save_frame_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.pgm");
        let img = SaliencyImage::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        save_frame(&img, &p).unwrap();
        assert_eq!(load_raw(&p).unwrap().data(), &[0.0, 128.0, 255.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
            (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
                proptest::collection::vec(any::<bool>(), w * h).prop_map(move |d| BinaryMask::new(w, h, d).unwrap())
            })
        }

        fn raw_strategy() -> impl Strategy<Value = RawImage> {
            (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
                proptest::collection::vec(-1000.0f64..1000.0, w * h).prop_map(move |d| RawImage::new(w, h, d).unwrap())
            })
        }

        proptest! {
            #[test]
            fn mask_round_trip(mask in mask_strategy()) {
                let dir = tempfile::tempdir().unwrap();
                let p = dir.path().join("m.pgm");
                save_mask(&mask, &p).unwrap();
                let back = load_mask(&p).unwrap();
                prop_assert_eq!(&back, &mask);
                let q = dir.path().join("m2.pgm");
                save_mask(&back, &q).unwrap();
                prop_assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
            }

            #[test]
            fn normalize_idempotent_and_spans_unit_range(raw in raw_strategy()) {
                let once = normalize(&raw);
                let twice = normalize(&RawImage::from(once.clone()));
                prop_assert_eq!(&once, &twice);
                let constant = raw.data().iter().all(|&v| v == raw.data()[0]);
                if !constant {
                    prop_assert!(once.data().contains(&0.0));
                    prop_assert!(once.data().contains(&1.0));
                }
                prop_assert!(once.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
