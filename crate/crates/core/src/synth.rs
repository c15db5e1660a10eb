//! Synthetic registered aerial scenes with exact ground truth.
//!
//! Vehicles are bright filled rectangles translated by a constant integer
//! velocity each frame. Clutter blobs are drawn at the same place in every
//! frame, so after thresholding they are exactly the static detections the
//! temporal filter targets. Uniform noise in `[-noise, +noise]` is added to
//! every pixel and the result clipped to `[0, 1]`.
//!
//! Noise for frame `t` comes from ChaCha8 seeded with `seed` on stream `t`,
//! so each frame can be regenerated on its own.

use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imagery::SaliencyImage;
use crate::metrics::GroundTruthObject;

/// Identifier recorded in scene metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64(seed), stream = frame index)";

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub row: i64,
    pub col: i64,
    pub height: usize,
    pub width: usize,
    /// Displacement per frame in pixels, `(rows, cols)`.
    pub velocity: (i64, i64),
    pub intensity: f64,
    /// Width of a background stripe cut through the middle columns, splitting
    /// the vehicle into two fragments. Ground truth still covers the whole
    /// rectangle.
    pub gap: usize,
}

impl VehicleSpec {
    /// Top-left corner at frame `t`.
    pub fn position(&self, t: usize) -> (i64, i64) {
        let t = t as i64;
        (self.row + t * self.velocity.0, self.col + t * self.velocity.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterSpec {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    pub intensity: f64,
}

/// A complete scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background: f64,
    pub noise: f64,
    pub seed: u64,
    pub vehicles: Vec<VehicleSpec>,
    pub clutter: Vec<ClutterSpec>,
}

/// Rendered frames and the per-frame vehicle rectangles.
#[derive(Debug, Clone)]
pub struct Scene {
    pub frames: Vec<SaliencyImage>,
    pub ground_truth: Vec<Vec<GroundTruthObject>>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Parameter(m));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return err("scene needs non-zero width, height and frame count".into());
        }
        if !(0.0..=1.0).contains(&self.background) {
            return err(format!("background {} outside [0, 1]", self.background));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return err(format!("noise amplitude {} must be non-negative", self.noise));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.height == 0 || v.width == 0 {
                return err(format!("vehicle {i} has zero size"));
            }
            if !(v.intensity <= 1.0 && v.intensity > self.background) {
                return err(format!(
                    "vehicle {i} intensity {} must be in (background, 1]",
                    v.intensity
                ));
            }
            if v.gap >= v.width {
                return err(format!("vehicle {i} gap {} must be narrower than its width", v.gap));
            }
            // motion is linear, so the end frames bound the path
            for t in [0, self.frames - 1] {
                let (r, c) = v.position(t);
                if r < 0 || c < 0 || r as usize + v.height > self.height || c as usize + v.width > self.width {
                    return err(format!(
                        "vehicle {i} leaves the {}x{} frame at frame {t}",
                        self.width, self.height
                    ));
                }
            }
        }
        for (i, c) in self.clutter.iter().enumerate() {
            if c.height == 0 || c.width == 0 {
                return err(format!("clutter {i} has zero size"));
            }
            if !(0.0..=1.0).contains(&c.intensity) {
                return err(format!("clutter {i} intensity {} outside [0, 1]", c.intensity));
            }
            if c.row + c.height > self.height || c.col + c.width > self.width {
                return err(format!("clutter {i} lies outside the frame"));
            }
        }
        Ok(())
    }

    /// Vehicle rectangles at frame `t`.
    pub fn ground_truth(&self, t: usize) -> Vec<GroundTruthObject> {
        self.vehicles
            .iter()
            .map(|v| {
                let (r, c) = v.position(t);
                GroundTruthObject::new(t, r as usize, c as usize, v.height, v.width).expect("validated size")
            })
            .collect()
    }

    /// Noise-free intensities of frame `t`.
    fn clean_frame(&self, t: usize) -> Vec<f64> {
        let mut px = vec![self.background; self.width * self.height];
        let mut fill = |r0: usize, c0: usize, h: usize, w: usize, v: f64, skip: Option<(usize, usize)>| {
            for r in r0..r0 + h {
                for c in c0..c0 + w {
                    if let Some((a, b)) = skip {
                        if c >= a && c < b {
                            continue;
                        }
                    }
                    px[r * self.width + c] = v;
                }
            }
        };
        for k in &self.clutter {
            fill(k.row, k.col, k.height, k.width, k.intensity, None);
        }
        for v in &self.vehicles {
            let (r, c) = v.position(t);
            let (r, c) = (r as usize, c as usize);
            let skip = (v.gap > 0).then(|| {
                let a = c + (v.width - v.gap) / 2;
                (a, a + v.gap)
            });
            fill(r, c, v.height, v.width, v.intensity, skip);
        }
        px
    }

    pub fn render_frame(&self, t: usize) -> SaliencyImage {
        let mut px = self.clean_frame(t);
        if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t as u64);
            for p in &mut px {
                *p = (*p + rng.random_range(-self.noise..=self.noise)).clamp(0.0, 1.0);
            }
        }
        SaliencyImage::new(self.width, self.height, px).expect("intensities clipped to [0, 1]")
    }

    pub fn render(&self) -> Result<Scene> {
        self.validate()?;
        Ok(Scene {
            frames: (0..self.frames).map(|t| self.render_frame(t)).collect(),
            ground_truth: (0..self.frames).map(|t| self.ground_truth(t)).collect(),
        })
    }

    /// Serializes to the flat `key=value` format read by [`SceneSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "height={}", self.height);
        let _ = writeln!(s, "frames={}", self.frames);
        let _ = writeln!(s, "background={}", self.background);
        let _ = writeln!(s, "noise={}", self.noise);
        let _ = writeln!(s, "seed={}", self.seed);
        for v in &self.vehicles {
            let _ = writeln!(
                s,
                "vehicle={},{},{},{},{},{},{},{}",
                v.row, v.col, v.height, v.width, v.velocity.0, v.velocity.1, v.intensity, v.gap
            );
        }
        for c in &self.clutter {
            let _ = writeln!(
                s,
                "clutter={},{},{},{},{}",
                c.row, c.col, c.height, c.width, c.intensity
            );
        }
        s
    }

    /// Parses a scene file.
    ///
    /// ```text
    /// width=256
    /// height=160
    /// frames=20
    /// background=0.3
    /// noise=0.15
    /// seed=7
    /// # row,col,height,width,vel_row,vel_col,intensity[,gap]
    /// vehicle=10,4,8,12,0,5,0.9
    /// # row,col,height,width,intensity
    /// clutter=100,30,6,6,0.9
    /// ```
    pub fn parse(text: &str, context: &str) -> Result<SceneSpec> {
        let mut spec = SceneSpec {
            width: 0,
            height: 0,
            frames: 0,
            background: 0.0,
            noise: 0.0,
            seed: 0,
            vehicles: Vec::new(),
            clutter: Vec::new(),
        };
        let mut seen = std::collections::HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("{context}:{}", lineno + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&at, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let num =
                |v: &str| -> Result<f64> { v.parse().map_err(|_| Error::parse(&at, format!("bad number {v:?}"))) };
            let uint = |v: &str| -> Result<usize> {
                v.parse()
                    .map_err(|_| Error::parse(&at, format!("bad non-negative integer {v:?}")))
            };
            let int =
                |v: &str| -> Result<i64> { v.parse().map_err(|_| Error::parse(&at, format!("bad integer {v:?}"))) };
            if key != "vehicle" && key != "clutter" && !seen.insert(key.to_string()) {
                return Err(Error::parse(&at, format!("duplicate key {key}")));
            }
            match key {
                "width" => spec.width = uint(value)?,
                "height" => spec.height = uint(value)?,
                "frames" => spec.frames = uint(value)?,
                "background" => spec.background = num(value)?,
                "noise" => spec.noise = num(value)?,
                "seed" => spec.seed = value.parse().map_err(|_| Error::parse(&at, "bad seed"))?,
                "vehicle" => {
                    let f: Vec<&str> = value.split(',').map(str::trim).collect();
                    if f.len() != 7 && f.len() != 8 {
                        return Err(Error::parse(
                            &at,
                            "vehicle needs row,col,height,width,vel_row,vel_col,intensity[,gap]",
                        ));
                    }
                    spec.vehicles.push(VehicleSpec {
                        row: int(f[0])?,
                        col: int(f[1])?,
                        height: uint(f[2])?,
                        width: uint(f[3])?,
                        velocity: (int(f[4])?, int(f[5])?),
                        intensity: num(f[6])?,
                        gap: f.get(7).map(|g| uint(g)).transpose()?.unwrap_or(0),
                    });
                }
                "clutter" => {
                    let f: Vec<&str> = value.split(',').map(str::trim).collect();
                    if f.len() != 5 {
                        return Err(Error::parse(&at, "clutter needs row,col,height,width,intensity"));
                    }
                    spec.clutter.push(ClutterSpec {
                        row: uint(f[0])?,
                        col: uint(f[1])?,
                        height: uint(f[2])?,
                        width: uint(f[3])?,
                        intensity: num(f[4])?,
                    });
                }
                other => return Err(Error::parse(&at, format!("unknown key {other}"))),
            }
        }
        for required in ["width", "height", "frames"] {
            if !seen.contains(required) {
                return Err(Error::parse(context, format!("missing key {required}")));
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Parameters for [`random_layout`]: vehicles travel horizontally in their
/// own lanes at the top of the frame, and clutter fills the area below.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutParams {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub vehicles: usize,
    pub clutter: usize,
    pub vehicle_size: (usize, usize),
    /// Inclusive range of horizontal speeds in pixels per frame.
    pub speed: (usize, usize),
    /// Inclusive range of clutter side lengths.
    pub clutter_size: (usize, usize),
    pub background: f64,
    pub vehicle_intensity: f64,
    pub clutter_intensity: f64,
    pub noise: f64,
    /// Empty rows around each lane and between clutter blobs.
    pub margin: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            width: 256,
            height: 160,
            frames: 20,
            vehicles: 5,
            clutter: 10,
            vehicle_size: (8, 12),
            speed: (4, 6),
            clutter_size: (5, 10),
            background: 0.3,
            vehicle_intensity: 0.9,
            clutter_intensity: 0.9,
            noise: 0.0,
            margin: 4,
        }
    }
}

/// Draws a random scene layout from `seed`.
pub fn random_layout(p: &LayoutParams, seed: u64) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let (vh, vw) = p.vehicle_size;
    let lane = vh + 2 * p.margin;
    let lanes_end = lane * p.vehicles;
    if lanes_end >= p.height || p.speed.0 > p.speed.1 || p.speed.1 == 0 {
        return Err(Error::Parameter(
            "layout does not fit: too many lanes or bad speed range".into(),
        ));
    }
    let steps = p.frames.saturating_sub(1);
    let mut vehicles = Vec::with_capacity(p.vehicles);
    for k in 0..p.vehicles {
        let speed = rng.random_range(p.speed.0..=p.speed.1);
        let travel = speed * steps;
        if travel + vw > p.width {
            return Err(Error::Parameter(format!(
                "frame width {} too small for speed {speed} over {} frames",
                p.width, p.frames
            )));
        }
        let slack = p.width - travel - vw;
        let start = rng.random_range(0..=slack);
        let rightward = rng.random_bool(0.5);
        let (col, vel) = if rightward {
            (start, speed as i64)
        } else {
            (start + travel, -(speed as i64))
        };
        vehicles.push(VehicleSpec {
            row: (k * lane + p.margin) as i64,
            col: col as i64,
            height: vh,
            width: vw,
            velocity: (0, vel),
            intensity: p.vehicle_intensity,
            gap: 0,
        });
    }

    let zone_top = lanes_end + p.margin;
    let mut clutter: Vec<ClutterSpec> = Vec::with_capacity(p.clutter);
    let mut attempts = 0;
    while clutter.len() < p.clutter {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::Parameter("could not place all clutter blobs".into()));
        }
        let h = rng.random_range(p.clutter_size.0..=p.clutter_size.1);
        let w = rng.random_range(p.clutter_size.0..=p.clutter_size.1);
        if zone_top + h + p.margin > p.height || w + 2 * p.margin > p.width {
            return Err(Error::Parameter("no room for clutter below the lanes".into()));
        }
        let row = rng.random_range(zone_top..=p.height - h - p.margin);
        let col = rng.random_range(p.margin..=p.width - w - p.margin);
        let m = p.margin;
        let clear = clutter.iter().all(|o| {
            row + h + m <= o.row || o.row + o.height + m <= row || col + w + m <= o.col || o.col + o.width + m <= col
        });
        if clear {
            clutter.push(ClutterSpec {
                row,
                col,
                height: h,
                width: w,
                intensity: p.clutter_intensity,
            });
        }
    }

    let spec = SceneSpec {
        width: p.width,
        height: p.height,
        frames: p.frames,
        background: p.background,
        noise: p.noise,
        seed,
        vehicles,
        clutter,
    };
    spec.validate()?;
    Ok(spec)
}
