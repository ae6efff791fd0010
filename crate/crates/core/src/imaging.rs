//! Raster types and binary PGM/PPM input/output.
//!
//! Only 8-bit binary netpbm files are handled: `P5` (graymap) and `P6`
//! (pixmap). Colour input is collapsed to luminance with the BT.601 weights
//! at load time; everything downstream works on a single luma plane.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::{round_half_away, Scalar};

/// A rectified grayscale image with samples in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LumaImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> LumaImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::config(format!(
                "image buffer holds {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        let hi = T::of(255.0);
        if let Some(bad) = data.iter().find(|v| !(**v >= T::zero() && **v <= hi)) {
            return Err(Error::config(format!("luma sample {bad} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a per-pixel function; values are clamped to `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let hi = T::of(255.0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_nan() { T::zero() } else { v.max(T::zero()).min(hi) });
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_size<U>(&self, other: &LumaImage<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Samples rounded to the nearest byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| round_half_away(v.as_f64()).clamp(0, 255) as u8)
            .collect()
    }
}

/// Levels per pixel of a disparity map: pixel, half-pixel or quarter-pixel steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Precision {
    Pixel,
    Half,
    Quarter,
}

impl Precision {
    #[inline]
    pub fn levels_per_pixel(self) -> u32 {
        match self {
            Precision::Pixel => 1,
            Precision::Half => 2,
            Precision::Quarter => 4,
        }
    }

    pub fn from_levels_per_pixel(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Precision::Pixel),
            2 => Ok(Precision::Half),
            4 => Ok(Precision::Quarter),
            other => Err(Error::config(format!(
                "precision must be 1, 2 or 4 levels per pixel, got {other}"
            ))),
        }
    }
}

/// Disparity level type; one level is `1 / precision` of a pixel.
pub type Level = u16;

/// Per-pixel disparity in integer levels. Invalid pixels (holes, unknown
/// ground truth) hold [`DisparityMap::INVALID`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    precision: Precision,
    levels: Vec<Level>,
}

impl DisparityMap {
    pub const INVALID: Level = Level::MAX;

    pub fn new(width: usize, height: usize, precision: Precision, levels: Vec<Level>) -> Result<Self> {
        if levels.len() != width * height {
            return Err(Error::config(format!(
                "disparity buffer holds {} entries, expected {}x{}",
                levels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            precision,
            levels,
        })
    }

    pub fn filled(width: usize, height: usize, precision: Precision, level: Level) -> Self {
        Self {
            width,
            height,
            precision,
            levels: vec![level; width * height],
        }
    }

    pub fn invalid(width: usize, height: usize, precision: Precision) -> Self {
        Self::filled(width, height, precision, Self::INVALID)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn precision(&self) -> Precision {
        self.precision
    }

    #[inline]
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    #[inline]
    pub fn levels_mut(&mut self) -> &mut [Level] {
        &mut self.levels
    }

    /// Stored level, or `None` for an invalid pixel.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Level> {
        let v = self.levels[y * self.width + x];
        (v != Self::INVALID).then_some(v)
    }

    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> Level {
        self.levels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, level: Level) {
        self.levels[y * self.width + x] = level;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.raw(x, y) != Self::INVALID
    }

    /// True when no pixel is a hole.
    pub fn is_total(&self) -> bool {
        self.levels.iter().all(|&l| l != Self::INVALID)
    }

    pub fn valid_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l != Self::INVALID).count()
    }

    /// Disparity in pixels, `None` on holes.
    #[inline]
    pub fn pixels(&self, x: usize, y: usize) -> Option<f64> {
        self.get(x, y)
            .map(|l| l as f64 / self.precision.levels_per_pixel() as f64)
    }

    /// Multiplies every valid level by `factor`, e.g. to express an adjacent
    /// view disparity over a baseline `factor` times longer.
    pub fn scale_levels(&self, factor: u32) -> Result<Self> {
        let mut levels = Vec::with_capacity(self.levels.len());
        for &l in &self.levels {
            if l == Self::INVALID {
                levels.push(l);
                continue;
            }
            let scaled = l as u32 * factor;
            if scaled >= Self::INVALID as u32 {
                return Err(Error::config(format!(
                    "level {l} times {factor} overflows the disparity range"
                )));
            }
            levels.push(scaled as Level);
        }
        Ok(Self {
            levels,
            ..self.clone()
        })
    }

    /// Re-expresses levels in another precision, rounding to the nearest level.
    pub fn with_precision(&self, precision: Precision) -> Self {
        let from = self.precision.levels_per_pixel() as f64;
        let to = precision.levels_per_pixel() as f64;
        let levels = self
            .levels
            .iter()
            .map(|&l| {
                if l == Self::INVALID {
                    l
                } else {
                    round_half_away(l as f64 / from * to) as Level
                }
            })
            .collect();
        Self {
            width: self.width,
            height: self.height,
            precision,
            levels,
        }
    }

    /// Number of pixels whose stored value differs between the two maps.
    pub fn count_changed(&self, other: &DisparityMap) -> usize {
        self.levels
            .iter()
            .zip(&other.levels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Per-pixel boolean region, e.g. an evaluation mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::config(format!(
                "mask holds {} entries, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &PixelMask) -> PixelMask {
        PixelMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect(),
        }
    }
}

/// Decoded netpbm raster before luminance conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub samples: Vec<u8>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Parses a binary `P5`/`P6` buffer.
pub fn parse_pnm(bytes: &[u8], path: &Path) -> Result<Pnm> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(format_err(path, "missing netpbm magic number"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                reason: format!("netpbm variant P{} is not binary graymap or pixmap", other as char),
            })
        }
    };

    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments may separate header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(format_err(path, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, format!("expected header field {}", i + 1)));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| format_err(path, format!("header value {text} out of range")))?;
    }
    let [width, height, maxval] = fields;
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(format_err(path, "missing whitespace after maxval")),
    }
    if maxval != 255 {
        return Err(Error::Unsupported {
            path: path.to_path_buf(),
            reason: format!("maxval {maxval} (only 255 is supported)"),
        });
    }
    if width == 0 || height == 0 {
        return Err(format_err(path, "zero image dimension"));
    }
    let n = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| format_err(path, "image dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() < n {
        return Err(format_err(
            path,
            format!("raster has {} bytes, expected {n}", payload.len()),
        ));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        samples: payload[..n].to_vec(),
    })
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&bytes, path)
}

/// BT.601 luma of an 8-bit RGB triple, rounded to the nearest integer.
#[inline]
pub fn bt601_luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    round_half_away(y).clamp(0, 255) as u8
}

impl Pnm {
    /// Luminance bytes: graymaps pass through, pixmaps go through BT.601.
    pub fn luma_bytes(&self) -> Vec<u8> {
        if self.channels == 1 {
            self.samples.clone()
        } else {
            self.samples
                .chunks_exact(3)
                .map(|px| bt601_luma(px[0], px[1], px[2]))
                .collect()
        }
    }
}

pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<LumaImage<T>> {
    let pnm = read_pnm(path.as_ref())?;
    let data = pnm.luma_bytes().into_iter().map(|b| T::of(b as f64)).collect();
    Ok(LumaImage {
        width: pnm.width,
        height: pnm.height,
        data,
    })
}

/// Serializes a `P5` graymap.
pub fn encode_pgm(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, samples: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_pgm(width, height, samples))
        .map_err(|e| Error::io(path, e))
}

pub fn save_image<T: Scalar>(img: &LumaImage<T>, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(path, img.width, img.height, &img.to_bytes())
}

/// Encodes disparity as `round(level / precision * scale)`, clamped to a byte.
/// Invalid pixels encode as 0.
pub fn disparity_to_bytes(map: &DisparityMap, scale: f64) -> Vec<u8> {
    let p = map.precision.levels_per_pixel() as f64;
    map.levels
        .iter()
        .map(|&l| {
            if l == DisparityMap::INVALID {
                0
            } else {
                round_half_away(l as f64 / p * scale).clamp(0, 255) as u8
            }
        })
        .collect()
}

pub fn save_disparity(map: &DisparityMap, path: impl AsRef<Path>, scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config(format!("disparity scale must be positive, got {scale}")));
    }
    write_pgm(path, map.width, map.height, &disparity_to_bytes(map, scale))
}

/// Decodes a ground-truth graymap: `level = round(sample / scale * precision)`.
/// With `zero_is_unknown`, zero samples become invalid pixels.
pub fn load_ground_truth(
    path: impl AsRef<Path>,
    scale: f64,
    precision: Precision,
    zero_is_unknown: bool,
) -> Result<DisparityMap> {
    let path = path.as_ref();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config(format!("ground-truth scale must be positive, got {scale}")));
    }
    let pnm = read_pnm(path)?;
    if pnm.channels != 1 {
        return Err(format_err(path, "ground truth must be a P5 graymap"));
    }
    let p = precision.levels_per_pixel() as f64;
    let levels = pnm
        .samples
        .iter()
        .map(|&s| {
            if s == 0 && zero_is_unknown {
                DisparityMap::INVALID
            } else {
                round_half_away(s as f64 / scale * p) as Level
            }
        })
        .collect();
    DisparityMap::new(pnm.width, pnm.height, precision, levels)
}

/// Loads a region mask; only fully white (255) samples are inside.
pub fn load_mask(path: impl AsRef<Path>) -> Result<PixelMask> {
    let pnm = read_pnm(path.as_ref())?;
    let data = pnm.luma_bytes().into_iter().map(|b| b == 255).collect();
    PixelMask::new(pnm.width, pnm.height, data)
}

pub fn save_mask(mask: &PixelMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_pgm(path, mask.width, mask.height, &bytes)
}
