//! Block dissimilarity between a centre-view fragment and a horizontally
//! displaced side-view fragment.

use crate::imaging::{LumaImage, Precision};
use crate::num::Scalar;

/// Cost assigned to a fragment with no sample inside both images.
pub const LARGE_COST: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Sad,
    Ssd,
}

/// Which side view a displacement refers to.
///
/// The left view sees a centre pixel `x` with disparity `t` at `x + t`, the
/// right view at `x - t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    #[inline]
    pub fn sign(self) -> i64 {
        match self {
            Side::Left => 1,
            Side::Right => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchParams {
    /// Block is `(2r + 1)^2` pixels.
    pub block_radius: usize,
    pub metric: Metric,
    pub precision: Precision,
    /// Largest disparity searched, in pixels.
    pub d_max: u32,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            block_radius: 1,
            metric: Metric::Sad,
            precision: Precision::Pixel,
            d_max: 16,
        }
    }
}

impl MatchParams {
    /// Number of candidate levels `d_max * precision + 1`.
    #[inline]
    pub fn levels(&self) -> usize {
        (self.d_max * self.precision.levels_per_pixel()) as usize + 1
    }

    #[inline]
    pub fn block_area(&self) -> usize {
        let side = 2 * self.block_radius + 1;
        side * side
    }
}

/// Linear interpolation between horizontally adjacent samples.
///
/// `x` must lie in `[0, width - 1]`; integral coordinates return the stored
/// sample exactly.
#[inline]
pub fn sample_subpixel<T: Scalar>(img: &LumaImage<T>, x: T, y: usize) -> T {
    debug_assert!(x >= T::zero() && x <= T::of((img.width() - 1) as f64), "x = {x}");
    let x0 = x.floor();
    let frac = x - x0;
    let i = x0.to_usize().expect("non-negative coordinate");
    let a = img.get(i, y);
    if frac == T::zero() {
        return a;
    }
    let b = img.get(i + 1, y);
    a + (b - a) * frac
}

#[inline]
pub(crate) fn pair_cost<T: Scalar>(metric: Metric, a: T, b: T) -> T {
    let d = a - b;
    match metric {
        Metric::Sad => d.abs(),
        Metric::Ssd => d * d,
    }
}

/// Rescales a partial block sum to full-block magnitude.
#[inline]
pub(crate) fn normalize_block<T: Scalar>(sum: T, count: usize, area: usize) -> T {
    if count == 0 {
        T::of(LARGE_COST)
    } else if count == area {
        sum
    } else {
        sum * T::of(area as f64) / T::of(count as f64)
    }
}

/// Dissimilarity of the block around centre pixel `(x, y)` and the side-view
/// block displaced by `t` levels.
///
/// Block samples falling outside either image are skipped and the sum is
/// rescaled to full-block magnitude; with no contributing sample the result is
/// [`LARGE_COST`].
pub fn sim<T: Scalar>(
    center: &LumaImage<T>,
    side_img: &LumaImage<T>,
    x: usize,
    y: usize,
    t: usize,
    side: Side,
    p: &MatchParams,
) -> T {
    let r = p.block_radius as i64;
    let prec = p.precision.levels_per_pixel() as i64;
    let w = center.width() as i64;
    let h = center.height() as i64;
    let side_max = (side_img.width() as i64 - 1) * prec;
    let shift = side.sign() * t as i64;
    let mut sum = T::zero();
    let mut count = 0usize;
    for dy in -r..=r {
        let yy = y as i64 + dy;
        if yy < 0 || yy >= h {
            continue;
        }
        for dx in -r..=r {
            let xc = x as i64 + dx;
            if xc < 0 || xc >= w {
                continue;
            }
            // Side coordinate in levels.
            let xs = xc * prec + shift;
            if xs < 0 || xs > side_max {
                continue;
            }
            let s = sample_subpixel(side_img, T::of(xs as f64) / T::of(prec as f64), yy as usize);
            sum = sum + pair_cost(p.metric, center.get(xc as usize, yy as usize), s);
            count += 1;
        }
    }
    normalize_block(sum, count, p.block_area())
}

/// Side image resampled at every level position, so sub-pixel lookups in the
/// cost-volume kernel become plain indexing.
pub(crate) struct LevelGrid<T> {
    pub stride: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> LevelGrid<T> {
    pub fn new(img: &LumaImage<T>, precision: Precision) -> Self {
        let prec = precision.levels_per_pixel() as usize;
        let stride = (img.width() - 1) * prec + 1;
        let mut data = Vec::with_capacity(stride * img.height());
        for y in 0..img.height() {
            for j in 0..stride {
                data.push(sample_subpixel(
                    img,
                    T::of(j as f64) / T::of(prec as f64),
                    y,
                ));
            }
        }
        Self { stride, data }
    }
}
