//! Per-pixel, per-candidate data costs for the three ways of combining the
//! left and right similarity terms.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{write_pgm, LumaImage};
use crate::num::Scalar;
use crate::occlusion::OcclusionVolume;
use crate::similarity::{normalize_block, pair_cost, sim, LevelGrid, MatchParams, Side, LARGE_COST};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostKind {
    /// Sum of both side terms.
    Sum,
    /// The better of the two side terms.
    Min,
    /// Mean over the side views where the candidate is visible; a constant
    /// penalty when it is visible in neither.
    OccAware,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::Sum => "sum",
            CostKind::Min => "min",
            CostKind::OccAware => "occ_aware",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(CostKind::Sum),
            "min" => Ok(CostKind::Min),
            "occ_aware" | "occ-aware" | "occ" => Ok(CostKind::OccAware),
            other => Err(Error::config(format!("unknown cost mode {other:?}"))),
        }
    }

    /// Whether this mode consumes occlusion information at all.
    pub fn uses_occlusion(self) -> bool {
        self == CostKind::OccAware
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostMode<T> {
    pub kind: CostKind,
    pub occlusion_penalty: T,
}

impl<T: Scalar> CostMode<T> {
    pub fn new(kind: CostKind, occlusion_penalty: T) -> Result<Self> {
        if !(occlusion_penalty > T::zero() && occlusion_penalty.is_finite()) {
            return Err(Error::config(format!(
                "occlusion penalty must be positive and finite, got {occlusion_penalty}"
            )));
        }
        Ok(Self {
            kind,
            occlusion_penalty,
        })
    }
}

#[inline]
fn combine<T: Scalar>(mode: &CostMode<T>, sim_l: T, sim_r: T, vis_l: bool, vis_r: bool) -> T {
    match mode.kind {
        CostKind::Sum => sim_l + sim_r,
        CostKind::Min => sim_l.min(sim_r),
        CostKind::OccAware => match (vis_l, vis_r) {
            (true, true) => (sim_l + sim_r) / T::of(2.0),
            (true, false) => sim_l,
            (false, true) => sim_r,
            (false, false) => mode.occlusion_penalty,
        },
    }
}

/// Cost of candidate level `t` at centre pixel `(x, y)`.
#[allow(clippy::too_many_arguments)]
pub fn cost_at<T: Scalar>(
    center: &LumaImage<T>,
    left: &LumaImage<T>,
    right: &LumaImage<T>,
    x: usize,
    y: usize,
    t: usize,
    mode: &CostMode<T>,
    occ: &OcclusionVolume,
    p: &MatchParams,
) -> T {
    let sim_l = sim(center, left, x, y, t, Side::Left, p);
    let sim_r = sim(center, right, x, y, t, Side::Right, p);
    combine(
        mode,
        sim_l,
        sim_r,
        occ.not_occ(Side::Left, x, y, t),
        occ.not_occ(Side::Right, x, y, t),
    )
}

/// Dense `width x height x levels` cost tensor, pixel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVolume<T> {
    width: usize,
    height: usize,
    levels: usize,
    data: Vec<T>,
}

impl<T: Scalar> CostVolume<T> {
    pub fn new(width: usize, height: usize, levels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * levels {
            return Err(Error::config(format!(
                "cost volume holds {} entries, expected {width}x{height}x{levels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|c| !(c.is_finite() && **c >= T::zero())) {
            return Err(Error::config(format!("cost {bad} is negative or not finite")));
        }
        Ok(Self {
            width,
            height,
            levels,
            data,
        })
    }

    /// Builds a volume from a per-entry function without validation.
    pub fn from_fn(
        width: usize,
        height: usize,
        levels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * levels);
        for y in 0..height {
            for x in 0..width {
                for t in 0..levels {
                    data.push(f(x, y, t));
                }
            }
        }
        Self {
            width,
            height,
            levels,
            data,
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
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize) -> T {
        self.data[(y * self.width + x) * self.levels + t]
    }

    /// All candidate costs of one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.levels;
        &self.data[i..i + self.levels]
    }

    pub fn mean(&self) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        let sum: f64 = self.data.iter().map(|c| c.as_f64()).sum();
        T::of(sum / self.data.len() as f64)
    }

    /// Writes one level as a min-max normalized graymap.
    pub fn save_slice(&self, t: usize, path: impl AsRef<Path>) -> Result<()> {
        let values: Vec<f64> = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.get(x, y, t).as_f64())
            .collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let bytes: Vec<u8> = values
            .iter()
            .map(|v| ((v - lo) / span * 255.0).round() as u8)
            .collect();
        write_pgm(path, self.width, self.height, &bytes)
    }
}

fn check_inputs<T: Scalar>(
    center: &LumaImage<T>,
    left: &LumaImage<T>,
    right: &LumaImage<T>,
) -> Result<()> {
    if !center.same_size(left) || !center.same_size(right) {
        return Err(Error::config(format!(
            "view sizes differ: centre {}x{}, left {}x{}, right {}x{}",
            center.width(),
            center.height(),
            left.width(),
            left.height(),
            right.width(),
            right.height()
        )));
    }
    if center.width() == 0 || center.height() == 0 {
        return Err(Error::config("empty input views"));
    }
    Ok(())
}

/// Evaluates both side similarities for every `(x, y, t)` of one image row.
///
/// Same summation order and skipping rules as [`sim`], so each entry is
/// bit-identical to the scalar path.
fn row_similarities<T: Scalar>(
    center: &LumaImage<T>,
    grid: &LevelGrid<T>,
    side: Side,
    y: usize,
    p: &MatchParams,
    out: &mut [T],
) {
    let levels = p.levels();
    let r = p.block_radius as i64;
    let prec = p.precision.levels_per_pixel() as i64;
    let w = center.width() as i64;
    let h = center.height() as i64;
    let side_max = grid.stride as i64 - 1;
    let area = p.block_area();
    for x in 0..center.width() {
        for t in 0..levels {
            let shift = side.sign() * t as i64;
            let mut sum = T::zero();
            let mut count = 0usize;
            for dy in -r..=r {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                let crow = center.row(yy as usize);
                let srow = &grid.data[yy as usize * grid.stride..(yy as usize + 1) * grid.stride];
                for dx in -r..=r {
                    let xc = x as i64 + dx;
                    if xc < 0 || xc >= w {
                        continue;
                    }
                    let xs = xc * prec + shift;
                    if xs < 0 || xs > side_max {
                        continue;
                    }
                    sum = sum + pair_cost(p.metric, crow[xc as usize], srow[xs as usize]);
                    count += 1;
                }
            }
            out[x * levels + t] = normalize_block(sum, count, area);
        }
    }
}

/// Evaluates [`cost_at`] for every pixel and candidate, parallel over rows.
pub fn build_cost_volume<T: Scalar>(
    center: &LumaImage<T>,
    left: &LumaImage<T>,
    right: &LumaImage<T>,
    mode: &CostMode<T>,
    occ: &OcclusionVolume,
    p: &MatchParams,
) -> Result<CostVolume<T>> {
    check_inputs(center, left, right)?;
    let (w, h, levels) = (center.width(), center.height(), p.levels());
    if occ.width() != w || occ.height() != h || occ.levels() != levels {
        return Err(Error::config(format!(
            "occlusion volume is {}x{}x{}, cost volume needs {w}x{h}x{levels}",
            occ.width(),
            occ.height(),
            occ.levels()
        )));
    }
    let grid_l = LevelGrid::new(left, p.precision);
    let grid_r = LevelGrid::new(right, p.precision);
    let row_len = w * levels;
    let mut data = vec![T::zero(); row_len * h];
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each_init(
            || (vec![T::zero(); row_len], vec![T::zero(); row_len]),
            |(sim_l, sim_r), (y, out)| {
                row_similarities(center, &grid_l, Side::Left, y, p, sim_l);
                row_similarities(center, &grid_r, Side::Right, y, p, sim_r);
                for x in 0..w {
                    let (vis_l, vis_r) = occ.pixel_flags(x, y);
                    for t in 0..levels {
                        let i = x * levels + t;
                        out[i] = combine(mode, sim_l[i], sim_r[i], vis_l[t], vis_r[t]);
                    }
                }
            },
        );
    Ok(CostVolume {
        width: w,
        height: h,
        levels,
        data,
    })
}

/// Default penalty for candidates hidden in both side views: twice the mean
/// of the MIN-mode volume, ignoring entries with no block overlap.
pub fn default_occlusion_penalty<T: Scalar>(
    center: &LumaImage<T>,
    left: &LumaImage<T>,
    right: &LumaImage<T>,
    p: &MatchParams,
) -> Result<T> {
    let occ = OcclusionVolume::all_visible(center.width(), center.height(), p.levels());
    // The penalty is not read in MIN mode.
    let mode = CostMode {
        kind: CostKind::Min,
        occlusion_penalty: T::one(),
    };
    let vol = build_cost_volume(center, left, right, &mode, &occ, p)?;
    let (sum, n) = vol
        .data
        .iter()
        .filter(|c| c.as_f64() < LARGE_COST)
        .fold((0.0f64, 0usize), |(s, n), c| (s + c.as_f64(), n + 1));
    let mean = if n == 0 { 0.0 } else { sum / n as f64 };
    // A perfectly matching scene still needs a positive penalty.
    Ok(T::of((2.0 * mean).max(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{DisparityMap, Precision};
    use crate::occlusion::{build_occlusion_volume, SideDisparityPair};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_triple(w: usize, h: usize, seed: u64) -> [LumaImage<f64>; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = || LumaImage::from_fn(w, h, |_, _| rng.random_range(0..=255) as f64);
        [img(), img(), img()]
    }

    fn mode(kind: CostKind) -> CostMode<f64> {
        CostMode::new(kind, 500.0).unwrap()
    }

    /// A 1x1 world where the similarities are dictated by the pixel values.
    fn single(sim_l: f64, sim_r: f64, vis_l: bool, vis_r: bool, kind: CostKind) -> f64 {
        let c = LumaImage::new(1, 1, vec![100.0]).unwrap();
        let l = LumaImage::new(1, 1, vec![100.0 - sim_l]).unwrap();
        let r = LumaImage::new(1, 1, vec![100.0 + sim_r]).unwrap();
        let p = MatchParams { block_radius: 0, d_max: 0, ..Default::default() };
        let mut occ = OcclusionVolume::all_visible(1, 1, 1);
        occ.set(Side::Left, 0, 0, 0, vis_l);
        occ.set(Side::Right, 0, 0, 0, vis_r);
        cost_at(&c, &l, &r, 0, 0, 0, &mode(kind), &occ, &p)
    }

    #[test]
    fn combination_examples() {
        assert_eq!(single(10.0, 20.0, true, true, CostKind::OccAware), 15.0);
        assert_eq!(single(10.0, 20.0, false, true, CostKind::OccAware), 20.0);
        assert_eq!(single(10.0, 20.0, false, false, CostKind::OccAware), 500.0);
        assert_eq!(single(10.0, 20.0, true, true, CostKind::Min), 10.0);
        assert_eq!(single(10.0, 20.0, true, true, CostKind::Sum), 30.0);
    }

    #[test]
    fn penalty_must_be_positive() {
        assert!(CostMode::new(CostKind::OccAware, 0.0f64).is_err());
        assert!(CostMode::new(CostKind::OccAware, f64::INFINITY).is_err());
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let [c, l, _] = random_triple(4, 4, 1);
        let r = LumaImage::filled(5, 4, 0.0);
        let p = MatchParams { d_max: 2, ..Default::default() };
        let occ = OcclusionVolume::all_visible(4, 4, 3);
        let err = build_cost_volume(&c, &l, &r, &mode(CostKind::Sum), &occ, &p).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn small_volume_is_elementwise_cost_at() {
        let [c, l, r] = random_triple(4, 4, 2);
        let p = MatchParams { d_max: 2, ..Default::default() };
        let occ = OcclusionVolume::all_visible(4, 4, 3);
        for kind in [CostKind::Sum, CostKind::Min, CostKind::OccAware] {
            let vol = build_cost_volume(&c, &l, &r, &mode(kind), &occ, &p).unwrap();
            assert_eq!(vol.data().len(), 48);
            for y in 0..4 {
                for x in 0..4 {
                    for t in 0..3 {
                        assert_eq!(vol.get(x, y, t), cost_at(&c, &l, &r, x, y, t, &mode(kind), &occ, &p));
                    }
                }
            }
        }
    }

    #[test]
    fn fast_kernel_matches_scalar_path_with_real_occlusion() {
        let [c, l, r] = random_triple(8, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for precision in [Precision::Pixel, Precision::Half, Precision::Quarter] {
            let p = MatchParams { d_max: 3, precision, ..Default::default() };
            let levels: Vec<u16> = (0..64).map(|_| rng.random_range(0..p.levels() as u16)).collect();
            let center_map = DisparityMap::new(8, 8, precision, levels).unwrap();
            let occ = build_occlusion_volume(&SideDisparityPair::from_center(&center_map), p.levels());
            let m = mode(CostKind::OccAware);
            let vol = build_cost_volume(&c, &l, &r, &m, &occ, &p).unwrap();
            for _ in 0..50 {
                let (x, y, t) = (rng.random_range(0..8), rng.random_range(0..8), rng.random_range(0..p.levels()));
                assert_eq!(vol.get(x, y, t), cost_at(&c, &l, &r, x, y, t, &m, &occ, &p));
            }
        }
    }

    #[test]
    fn all_visible_occ_aware_is_half_sum() {
        let [c, l, r] = random_triple(9, 7, 5);
        let p = MatchParams { d_max: 4, precision: Precision::Half, ..Default::default() };
        let occ = OcclusionVolume::all_visible(9, 7, p.levels());
        let sum = build_cost_volume(&c, &l, &r, &mode(CostKind::Sum), &occ, &p).unwrap();
        let occ_aware = build_cost_volume(&c, &l, &r, &mode(CostKind::OccAware), &occ, &p).unwrap();
        for (a, s) in occ_aware.data().iter().zip(sum.data()) {
            assert_eq!(*a, s / 2.0);
        }
    }

    #[test]
    fn occ_aware_lies_between_side_terms() {
        let [c, l, r] = random_triple(10, 6, 6);
        let p = MatchParams { d_max: 3, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut occ = OcclusionVolume::all_visible(10, 6, p.levels());
        for y in 0..6 {
            for x in 0..10 {
                for t in 0..p.levels() {
                    occ.set(Side::Left, x, y, t, rng.random_bool(0.6));
                    occ.set(Side::Right, x, y, t, rng.random_bool(0.6));
                }
            }
        }
        let m = mode(CostKind::OccAware);
        for y in 0..6 {
            for x in 0..10 {
                for t in 0..p.levels() {
                    if !occ.not_occ(Side::Left, x, y, t) && !occ.not_occ(Side::Right, x, y, t) {
                        continue;
                    }
                    let a = sim(&c, &l, x, y, t, Side::Left, &p);
                    let b = sim(&c, &r, x, y, t, Side::Right, &p);
                    let v = cost_at(&c, &l, &r, x, y, t, &m, &occ, &p);
                    assert!(v >= a.min(b) && v <= a.max(b));
                }
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let [c, l, r] = random_triple(16, 9, 8);
        let p = MatchParams { d_max: 5, precision: Precision::Quarter, ..Default::default() };
        let occ = OcclusionVolume::all_visible(16, 9, p.levels());
        let a = build_cost_volume(&c, &l, &r, &mode(CostKind::Sum), &occ, &p).unwrap();
        let b = build_cost_volume(&c, &l, &r, &mode(CostKind::Sum), &occ, &p).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn default_penalty_is_twice_min_mean() {
        let [c, l, r] = random_triple(6, 5, 9);
        let p = MatchParams { d_max: 2, ..Default::default() };
        let occ = OcclusionVolume::all_visible(6, 5, 3);
        let min_vol = build_cost_volume(&c, &l, &r, &mode(CostKind::Min), &occ, &p).unwrap();
        let expect = 2.0 * min_vol.data().iter().sum::<f64>() / min_vol.data().len() as f64;
        let got = default_occlusion_penalty(&c, &l, &r, &p).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn f32_volume_builds() {
        let c = LumaImage::<f32>::filled(5, 5, 10.0);
        let p = MatchParams { d_max: 1, ..Default::default() };
        let occ = OcclusionVolume::all_visible(5, 5, 2);
        let vol = build_cost_volume(&c, &c, &c, &CostMode::new(CostKind::Sum, 1.0f32).unwrap(), &occ, &p).unwrap();
        assert_eq!(vol.get(2, 2, 1), 0.0);
    }
}
