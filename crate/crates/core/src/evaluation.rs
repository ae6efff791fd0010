//! Quality measures: bad-pixel rates against ground truth, and luma PSNR of a
//! view synthesized between two cameras from their disparity maps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{DisparityMap, LumaImage, PixelMask};
use crate::num::{round_half_away, Scalar};

/// Middlebury convention: more than one pixel off is bad.
pub const DEFAULT_BAD_THRESHOLD: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct EvalMasks {
    pub nonocc: PixelMask,
    pub all: PixelMask,
    pub disc: PixelMask,
}

impl EvalMasks {
    /// Every mask covers the whole frame.
    pub fn full(width: usize, height: usize) -> Self {
        let m = PixelMask::filled(width, height, true);
        Self { nonocc: m.clone(), all: m.clone(), disc: m }
    }
}

/// Percentages of bad pixels per mask.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BadPixelReport {
    pub nonocc: f64,
    pub all: f64,
    pub disc: f64,
    pub threshold: f64,
}

fn bad_rate(est: &DisparityMap, gt: &DisparityMap, mask: &PixelMask, threshold: f64) -> f64 {
    let w = gt.width();
    let (bad, valid) = (0..gt.height())
        .into_par_iter()
        .map(|y| {
            let mut bad = 0usize;
            let mut valid = 0usize;
            for x in 0..w {
                if !mask.get(x, y) {
                    continue;
                }
                let Some(g) = gt.pixels(x, y) else { continue };
                valid += 1;
                // A hole in the estimate counts as wrong.
                match est.pixels(x, y) {
                    Some(e) if (e - g).abs() <= threshold => {}
                    _ => bad += 1,
                }
            }
            (bad, valid)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if valid == 0 {
        0.0
    } else {
        bad as f64 * 100.0 / valid as f64
    }
}

/// Share of ground-truth-valid pixels inside each mask whose estimate is off
/// by more than `threshold` pixels. The maps may use different precisions.
pub fn bad_pixel_rates(
    est: &DisparityMap,
    gt: &DisparityMap,
    masks: &EvalMasks,
    threshold: f64,
) -> Result<BadPixelReport> {
    let (w, h) = (gt.width(), gt.height());
    let sized = |mw: usize, mh: usize| mw == w && mh == h;
    if !sized(est.width(), est.height())
        || !sized(masks.nonocc.width(), masks.nonocc.height())
        || !sized(masks.all.width(), masks.all.height())
        || !sized(masks.disc.width(), masks.disc.height())
    {
        return Err(Error::config(format!(
            "estimate {}x{} and masks must match ground truth {w}x{h}",
            est.width(),
            est.height()
        )));
    }
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::config(format!("bad-pixel threshold must be >= 0, got {threshold}")));
    }
    Ok(BadPixelReport {
        nonocc: bad_rate(est, gt, &masks.nonocc, threshold),
        all: bad_rate(est, gt, &masks.all, threshold),
        disc: bad_rate(est, gt, &masks.disc, threshold),
        threshold,
    })
}

/// `10 log10(255^2 / MSE)`; identical images give `+inf`.
pub fn psnr_luma<T: Scalar>(test: &LumaImage<T>, reference: &LumaImage<T>) -> Result<f64> {
    if !test.same_size(reference) {
        return Err(Error::config(format!(
            "PSNR inputs differ in size: {}x{} vs {}x{}",
            test.width(),
            test.height(),
            reference.width(),
            reference.height()
        )));
    }
    let n = test.data().len();
    if n == 0 {
        return Err(Error::config("PSNR of an empty image"));
    }
    let se: f64 = test
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum();
    let mse = se / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PsnrReport {
    /// Mean over frames.
    pub psnr_luma: f64,
    pub frames: usize,
    pub per_frame: Vec<f64>,
}

impl PsnrReport {
    pub fn from_frames(per_frame: Vec<f64>) -> Self {
        let frames = per_frame.len();
        let psnr_luma = if frames == 0 {
            f64::NAN
        } else {
            per_frame.iter().sum::<f64>() / frames as f64
        };
        Self { psnr_luma, frames, per_frame }
    }
}

/// One camera's contribution to the virtual view: sample value and disparity
/// (in pixels) per target pixel, `None` where nothing lands.
fn forward_warp<T: Scalar>(
    img: &LumaImage<T>,
    disp: &DisparityMap,
    shift: f64,
) -> Vec<Option<(f64, f64)>> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![None; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let Some(d) = disp.pixels(x, y) else { continue };
            let tx = round_half_away(x as f64 + shift * d);
            if tx < 0 || tx >= w as i64 {
                continue;
            }
            let slot = &mut row[tx as usize];
            if slot.is_none_or(|(_, cur)| d > cur) {
                *slot = Some((img.get(x, y).as_f64(), d));
            }
        }
    });
    out
}

/// Fills each hole from the nearest valid pixel to its left or right, taking
/// the one with the smaller disparity (the farther surface).
fn fill_holes_row(row: &mut [Option<(f64, f64)>]) {
    let n = row.len();
    let mut prev = vec![None; n];
    let mut last = None;
    for i in 0..n {
        if row[i].is_some() {
            last = row[i];
        }
        prev[i] = last;
    }
    let mut next = None;
    for i in (0..n).rev() {
        if row[i].is_some() {
            next = row[i];
            continue;
        }
        row[i] = match (prev[i], next) {
            (Some(a), Some(b)) => Some(if b.1 < a.1 { b } else { a }),
            (a, b) => a.or(b),
        };
    }
}

/// Renders the view at fraction `alpha` of the way from camera A (left) to
/// camera B (right).
///
/// `d_a` and `d_b` hold each camera's own disparity towards the other over
/// the full A-B baseline. Both views are forward-warped with a z-buffer that
/// keeps the larger disparity, blended by distance where both land, and the
/// remaining holes are filled from the background side.
pub fn synthesize_view<T: Scalar>(
    view_a: &LumaImage<T>,
    d_a: &DisparityMap,
    view_b: &LumaImage<T>,
    d_b: &DisparityMap,
    alpha: f64,
) -> Result<LumaImage<T>> {
    let (w, h) = (view_a.width(), view_a.height());
    let sized = |mw: usize, mh: usize| mw == w && mh == h;
    if !sized(view_b.width(), view_b.height())
        || !sized(d_a.width(), d_a.height())
        || !sized(d_b.width(), d_b.height())
    {
        return Err(Error::config("views and disparity maps for synthesis differ in size"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("view position must lie in (0, 1), got {alpha}")));
    }
    // A sees a point at x_B + d, so moving towards B shifts left.
    let from_a = forward_warp(view_a, d_a, -alpha);
    let from_b = forward_warp(view_b, d_b, 1.0 - alpha);
    let mut merged: Vec<Option<(f64, f64)>> = from_a
        .iter()
        .zip(&from_b)
        .map(|(a, b)| match (a, b) {
            (Some((va, da)), Some((vb, db))) => {
                Some((va + alpha * (vb - va), da.max(*db)))
            }
            (a, b) => a.or(*b),
        })
        .collect();
    if w > 0 {
        merged.par_chunks_mut(w).for_each(fill_holes_row);
    }
    Ok(LumaImage::from_fn(w, h, |x, y| {
        T::of(merged[y * w + x].map_or(0.0, |(v, _)| v))
    }))
}

/// One sweep cell as written to the results CSV.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub sequence: String,
    pub mode: String,
    pub precision: u32,
    pub lambda: f64,
    pub psnr_db: Option<f64>,
    pub bad_nonocc: Option<f64>,
    pub bad_all: Option<f64>,
    pub bad_disc: Option<f64>,
    pub runtime_ms: Option<u64>,
}

impl SweepRow {
    /// Higher is better: PSNR when present, otherwise negated nonocc rate.
    fn score(&self) -> Option<f64> {
        self.psnr_db.or(self.bad_nonocc.map(|b| -b))
    }
}

pub fn write_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Internal(format!("CSV serialization failed: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(format!("CSV flush failed: {e}")))
}

/// Best row per (sequence, mode, precision), choosing over lambda.
pub fn best_over_lambda(rows: &[SweepRow]) -> Vec<SweepRow> {
    let mut best: BTreeMap<(String, String, u32), &SweepRow> = BTreeMap::new();
    for r in rows {
        let key = (r.sequence.clone(), r.mode.clone(), r.precision);
        let better = match best.get(&key) {
            None => true,
            Some(cur) => match (r.score(), cur.score()) {
                (Some(a), Some(b)) => a > b,
                (Some(_), None) => true,
                _ => false,
            },
        };
        if better {
            best.insert(key, r);
        }
    }
    best.into_values().cloned().collect()
}

/// Aligned text table of the best-over-lambda results: one line per
/// sequence and precision, one column per mode, plus the gain of the
/// occlusion-aware mode over the first other mode.
pub fn summary_table(rows: &[SweepRow], modes: &[String]) -> String {
    let best = best_over_lambda(rows);
    let metric = if best.iter().any(|r| r.psnr_db.is_some()) { "psnr_db" } else { "bad_nonocc" };
    let value = |r: &SweepRow| if metric == "psnr_db" { r.psnr_db } else { r.bad_nonocc };
    let reference = modes.iter().find(|m| m.as_str() != "occ_aware");
    let with_gain = reference.is_some() && modes.iter().any(|m| m == "occ_aware");

    let mut header = vec!["sequence".to_string(), "precision".to_string()];
    for m in modes {
        header.push(format!("{m} {metric}"));
        header.push(format!("{m} lambda"));
    }
    if with_gain {
        header.push("gain".into());
    }
    let mut lines = vec![header];
    let keys: BTreeSet<(String, u32)> = best.iter().map(|r| (r.sequence.clone(), r.precision)).collect();
    for (seq, prec) in keys {
        let mut line = vec![seq.clone(), prec.to_string()];
        let pick = |m: &str| best.iter().find(|r| r.sequence == seq && r.precision == prec && r.mode == m);
        for m in modes {
            match pick(m) {
                Some(r) => {
                    line.push(value(r).map_or("-".into(), |v| format!("{v:.2}")));
                    line.push(format!("{}", r.lambda));
                }
                None => line.extend(["-".to_string(), "-".to_string()]),
            }
        }
        if with_gain {
            let gain = pick("occ_aware")
                .and_then(value)
                .zip(reference.and_then(|m| pick(m)).and_then(value))
                .map(|(a, b)| if metric == "psnr_db" { a - b } else { b - a });
            line.push(gain.map_or("-".into(), |g| format!("{g:+.2}")));
        }
        lines.push(line);
    }
    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (s, &wd))| if i == 0 { format!("{s:<wd$}") } else { format!("{s:>wd$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
