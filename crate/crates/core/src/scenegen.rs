//! Synthetic rectified three-view scenes of fronto-parallel textured
//! rectangles, with exact ground truth and occlusion masks.
//!
//! Rectangles are given in centre-view coordinates. A layer with disparity
//! `d` shows its centre-view column `x` at `x + d` in the left view and at
//! `x - d` in the right view. Rectangles may extend past the frame so that the
//! side views have content to show near the borders.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::imaging::{save_disparity, save_image, save_mask, DisparityMap, LumaImage, PixelMask, Precision};
use crate::num::Scalar;

/// Ground-truth maps are stored as `disparity * GT_SCALE`.
pub const GT_SCALE: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// `[x0, y0, x1, y1]`, half-open, centre-view coordinates.
    pub rect: [i64; 4],
    /// Pixels.
    pub disparity: u32,
    #[serde(default)]
    pub seed: u64,
}

impl Layer {
    #[inline]
    fn contains(&self, x: i64, y: i64) -> bool {
        let [x0, y0, x1, y1] = self.rect;
        x >= x0 && x < x1 && y >= y0 && y < y1
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Back to front; disparities strictly increase.
    #[serde(rename = "layer")]
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Side length of the texture's random lattice cells.
    #[serde(default = "default_cell")]
    pub texture_cell: u32,
    /// Texture amplitude as a fraction of the full 0..255 range.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
}

fn default_cell() -> u32 {
    1
}

fn default_contrast() -> f64 {
    1.0
}

impl SceneSpec {
    /// Background plane over the whole frame (padded so the side views stay
    /// covered) with one foreground rectangle in front.
    pub fn two_layer(
        width: usize,
        height: usize,
        background: u32,
        foreground: u32,
        rect: [i64; 4],
    ) -> Self {
        let pad = foreground as i64 + 1;
        Self {
            width,
            height,
            layers: vec![
                Layer { rect: [-pad, -pad, width as i64 + pad, height as i64 + pad], disparity: background, seed: 1 },
                Layer { rect, disparity: foreground, seed: 2 },
            ],
            noise_sigma: 0.0,
            texture_cell: 1,
            contrast: 1.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec: SceneSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("scene must be at least 1x1"));
        }
        if self.layers.is_empty() {
            return Err(Error::config("scene needs at least one layer"));
        }
        for pair in self.layers.windows(2) {
            if pair[1].disparity <= pair[0].disparity {
                return Err(Error::config(
                    "layer disparities must strictly increase from back to front",
                ));
            }
        }
        if let Some(l) = self.layers.iter().find(|l| l.rect[0] >= l.rect[2] || l.rect[1] >= l.rect[3]) {
            return Err(Error::config(format!("empty layer rectangle {:?}", l.rect)));
        }
        let top = self.layers.last().map_or(0, |l| l.disparity);
        if top as f64 * GT_SCALE > 255.0 {
            return Err(Error::config(format!(
                "disparity {top} does not fit the ground-truth encoding"
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be finite and >= 0"));
        }
        if self.texture_cell == 0 {
            return Err(Error::config("texture_cell must be at least 1"));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::config("contrast must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn max_disparity(&self) -> u32 {
        self.layers.last().map_or(0, |l| l.disparity)
    }

    /// Index of the nearest layer seen at column `x` of the view at camera
    /// offset `s` (+1 left, 0 centre, -1 right).
    fn visible_layer(&self, x: i64, y: i64, s: i64) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| l.contains(x - s * l.disparity as i64, y))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene<T> {
    pub center: LumaImage<T>,
    pub left: LumaImage<T>,
    pub right: LumaImage<T>,
    /// Pixel precision; pixels no layer covers are invalid.
    pub gt_center: DisparityMap,
    /// Centre pixels whose left-view correspondence lies in the frame and is
    /// covered by a nearer layer.
    pub occ_left: PixelMask,
    pub occ_right: PixelMask,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` per lattice point.
#[inline]
fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = mix(seed ^ mix(i as u64 ^ mix(j as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear value noise over a lattice of `cell`-pixel squares, rounded to an
/// integer grey level.
fn texture(seed: u64, cell: u32, contrast: f64, x: i64, y: i64) -> f64 {
    let c = cell as i64;
    let (i, j) = (x.div_euclid(c), y.div_euclid(c));
    let (fx, fy) = (x.rem_euclid(c) as f64 / c as f64, y.rem_euclid(c) as f64 / c as f64);
    let top = lattice(seed, i, j) * (1.0 - fx) + lattice(seed, i + 1, j) * fx;
    let bottom = lattice(seed, i, j + 1) * (1.0 - fx) + lattice(seed, i + 1, j + 1) * fx;
    let v = top * (1.0 - fy) + bottom * fy;
    (127.5 + contrast * 255.0 * (v - 0.5)).round().clamp(0.0, 255.0)
}

impl SceneSpec {
    fn layer_seed(&self, layer: usize, seed: u64) -> u64 {
        mix(seed.wrapping_mul(0x100_0000_01b3) ^ mix(self.layers[layer].seed))
    }

    /// Noise-free rendering of the view at camera offset `s`.
    fn render_clean(&self, s: i64, seed: u64) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (xi, yi) = (x as i64, y as i64);
                if let Some(k) = self.visible_layer(xi, yi, s) {
                    let xc = xi - s * self.layers[k].disparity as i64;
                    out[y * w + x] = texture(self.layer_seed(k, seed), self.texture_cell, self.contrast, xc, yi);
                }
            }
        }
        out
    }

    /// View from the camera `s` neighbour spacings to the left of the centre
    /// (negative `s` is to the right), with this scene's noise.
    pub fn render_view<T: Scalar>(&self, s: i64, seed: u64) -> Result<LumaImage<T>> {
        self.validate()?;
        let mut values = self.render_clean(s, seed);
        if self.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // One independent stream per camera: 0, 1, -1, 2, -2, ...
            rng.set_stream(if s > 0 { 2 * s as u64 - 1 } else { 2 * s.unsigned_abs() });
            let normal = Normal::new(0.0, self.noise_sigma)
                .map_err(|e| Error::config(format!("noise_sigma: {e}")))?;
            for v in &mut values {
                *v = (*v + normal.sample(&mut rng)).round().clamp(0.0, 255.0);
            }
        }
        let w = self.width;
        Ok(LumaImage::from_fn(w, self.height, |x, y| T::of(values[y * w + x])))
    }

    /// Ground-truth disparity (per neighbour spacing) of the camera at `s`.
    pub fn view_disparity(&self, s: i64) -> DisparityMap {
        let (w, h) = (self.width, self.height);
        let mut gt = DisparityMap::invalid(w, h, Precision::Pixel);
        for y in 0..h {
            for x in 0..w {
                if let Some(k) = self.visible_layer(x as i64, y as i64, s) {
                    gt.set(x, y, self.layers[k].disparity as u16);
                }
            }
        }
        gt
    }
}

/// Renders the three views, the centre ground truth and both occlusion masks.
pub fn render_scene<T: Scalar>(spec: &SceneSpec, seed: u64) -> Result<Scene<T>> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut occ_left = PixelMask::filled(w, h, false);
    let mut occ_right = PixelMask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as i64, y as i64);
            let Some(k) = spec.visible_layer(xi, yi, 0) else { continue };
            let d = spec.layers[k].disparity;
            // The same surface point sits at x + s*d in the side view; it is
            // hidden there iff a nearer layer covers that column. Columns off
            // the frame are not occlusions.
            for (s, mask) in [(1i64, &mut occ_left), (-1, &mut occ_right)] {
                let xs = xi + s * d as i64;
                let covered = (0..w as i64).contains(&xs)
                    && spec.layers[k + 1..]
                    .iter()
                    .any(|l| l.contains(xs - s * l.disparity as i64, yi));
                mask.set(x, y, covered);
            }
        }
    }
    Ok(Scene {
        center: spec.render_view(0, seed)?,
        left: spec.render_view(1, seed)?,
        right: spec.render_view(-1, seed)?,
        gt_center: spec.view_disparity(0),
        occ_left,
        occ_right,
    })
}

/// File names written by [`save_scene`].
pub const SCENE_FILES: [&str; 6] = [
    "center.pgm",
    "left.pgm",
    "right.pgm",
    "gt_center.pgm",
    "occ_left.pgm",
    "occ_right.pgm",
];

pub fn save_scene<T: Scalar>(scene: &Scene<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_image(&scene.center, dir.join(SCENE_FILES[0]))?;
    save_image(&scene.left, dir.join(SCENE_FILES[1]))?;
    save_image(&scene.right, dir.join(SCENE_FILES[2]))?;
    save_disparity(&scene.gt_center, dir.join(SCENE_FILES[3]), GT_SCALE)?;
    save_mask(&scene.occ_left, dir.join(SCENE_FILES[4]))?;
    save_mask(&scene.occ_right, dir.join(SCENE_FILES[5]))
}
