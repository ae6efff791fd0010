//! Virtual side-view disparity maps and the per-candidate visibility test.
//!
//! The centre-view estimate is forward-warped into both side views with a
//! z-buffer where the larger disparity (the nearer surface) wins. A candidate
//! displacement `t` of centre pixel `(x, y)` is then considered visible in a
//! side view when `t` is at least the disparity already claimed by that side
//! view at the displaced column.

use std::path::Path;

use rayon::prelude::*;

use crate::error::Result;
use crate::imaging::{write_pgm, DisparityMap, Level};
use crate::similarity::Side;

/// Column reached from `x` by a displacement of `level` levels towards `side`,
/// rounded to the nearest integer with ties away from zero.
#[inline]
pub fn project_column(x: usize, level: u32, side: Side, levels_per_pixel: u32) -> i64 {
    let p = levels_per_pixel as i64;
    let num = x as i64 * p + side.sign() * level as i64;
    if num >= 0 {
        (num + p / 2) / p
    } else {
        -((-num + p / 2) / p)
    }
}

/// Forward-warps a centre disparity map into the left or right view.
///
/// Each valid centre pixel lands on its projected column; when several land on
/// the same target the largest disparity is kept. Targets nobody reaches stay
/// invalid, projections leaving the frame are dropped.
pub fn dibr_warp_disparity(center: &DisparityMap, side: Side) -> DisparityMap {
    let (w, h) = (center.width(), center.height());
    let p = center.precision().levels_per_pixel();
    let mut out = DisparityMap::invalid(w, h, center.precision());
    for y in 0..h {
        for x in 0..w {
            let Some(d) = center.get(x, y) else { continue };
            let c = project_column(x, d as u32, side, p);
            if c < 0 || c >= w as i64 {
                continue;
            }
            let c = c as usize;
            let cur = out.raw(c, y);
            if cur == DisparityMap::INVALID || d > cur {
                out.set(c, y, d);
            }
        }
    }
    out
}

/// Side-view disparity maps synthesized from one centre estimate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SideDisparityPair {
    pub left: DisparityMap,
    pub right: DisparityMap,
}

impl SideDisparityPair {
    pub fn from_center(center: &DisparityMap) -> Self {
        Self {
            left: dibr_warp_disparity(center, Side::Left),
            right: dibr_warp_disparity(center, Side::Right),
        }
    }

    /// Side maps with no information at all, used before any estimate exists.
    pub fn unknown(width: usize, height: usize, precision: crate::imaging::Precision) -> Self {
        Self {
            left: DisparityMap::invalid(width, height, precision),
            right: DisparityMap::invalid(width, height, precision),
        }
    }

    pub fn get(&self, side: Side) -> &DisparityMap {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Whether candidate `t` of centre pixel `(x, y)` is probably visible in the
/// side view described by `side_map`.
///
/// Out-of-frame targets count as occluded, holes as visible.
#[inline]
pub fn not_occluded(side_map: &DisparityMap, x: usize, y: usize, t: Level, side: Side) -> bool {
    let c = project_column(x, t as u32, side, side_map.precision().levels_per_pixel());
    if c < 0 || c >= side_map.width() as i64 {
        return false;
    }
    match side_map.get(c as usize, y) {
        None => true,
        Some(stored) => t >= stored,
    }
}

/// Visibility flags for every `(x, y, t)`, one set per side view.
///
/// Layout is pixel-major: index `(y * width + x) * levels + t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OcclusionVolume {
    width: usize,
    height: usize,
    levels: usize,
    not_occ_left: Vec<bool>,
    not_occ_right: Vec<bool>,
}

impl OcclusionVolume {
    /// Every candidate visible in both views.
    pub fn all_visible(width: usize, height: usize, levels: usize) -> Self {
        let n = width * height * levels;
        Self {
            width,
            height,
            levels,
            not_occ_left: vec![true; n],
            not_occ_right: vec![true; n],
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
    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (y * self.width + x) * self.levels + t
    }

    #[inline]
    pub fn not_occ(&self, side: Side, x: usize, y: usize, t: usize) -> bool {
        let i = self.index(x, y, t);
        match side {
            Side::Left => self.not_occ_left[i],
            Side::Right => self.not_occ_right[i],
        }
    }

    #[inline]
    pub fn pixel_flags(&self, x: usize, y: usize) -> (&[bool], &[bool]) {
        let i = self.index(x, y, 0);
        (
            &self.not_occ_left[i..i + self.levels],
            &self.not_occ_right[i..i + self.levels],
        )
    }

    pub fn set(&mut self, side: Side, x: usize, y: usize, t: usize, visible: bool) {
        let i = self.index(x, y, t);
        match side {
            Side::Left => self.not_occ_left[i] = visible,
            Side::Right => self.not_occ_right[i] = visible,
        }
    }

    pub fn stats(&self) -> OcclusionStats {
        let total = self.not_occ_left.len();
        let mut left = 0;
        let mut right = 0;
        let mut both = 0;
        for (&l, &r) in self.not_occ_left.iter().zip(&self.not_occ_right) {
            left += usize::from(!l);
            right += usize::from(!r);
            both += usize::from(!l && !r);
        }
        let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
        OcclusionStats {
            left_occluded: frac(left),
            right_occluded: frac(right),
            both_occluded: frac(both),
        }
    }

    /// Writes one level of one side as a graymap (255 visible, 0 occluded).
    pub fn save_slice(&self, side: Side, t: usize, path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                bytes.push(if self.not_occ(side, x, y, t) { 255 } else { 0 });
            }
        }
        write_pgm(path, self.width, self.height, &bytes)
    }
}

/// Fractions of candidates flagged occluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct OcclusionStats {
    pub left_occluded: f64,
    pub right_occluded: f64,
    pub both_occluded: f64,
}

/// Evaluates [`not_occluded`] for every pixel and candidate level.
pub fn build_occlusion_volume(pair: &SideDisparityPair, levels: usize) -> OcclusionVolume {
    let (w, h) = (pair.left.width(), pair.left.height());
    let mut vol = OcclusionVolume::all_visible(w, h, levels);
    let row_len = w * levels;
    if row_len == 0 {
        return vol;
    }
    let fill = |side: Side, buf: &mut [bool]| {
        let map = pair.get(side);
        buf.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
            for x in 0..w {
                for t in 0..levels {
                    row[x * levels + t] = not_occluded(map, x, y, t as Level, side);
                }
            }
        });
    };
    fill(Side::Left, &mut vol.not_occ_left);
    fill(Side::Right, &mut vol.not_occ_right);
    vol
}
