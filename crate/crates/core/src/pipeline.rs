//! The estimation loop: optimize the centre map, warp it into both side
//! views, rebuild the visibility-aware costs, optimize again.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, info};

use crate::cost_volume::{build_cost_volume, default_occlusion_penalty, CostKind, CostMode, CostVolume};
use crate::error::{Error, Result};
use crate::imaging::{save_disparity, DisparityMap, LumaImage};
use crate::num::Scalar;
use crate::occlusion::{build_occlusion_volume, OcclusionStats, OcclusionVolume, SideDisparityPair};
use crate::optimizer::{alpha_expansion, energy, wta_disparity, EnergyParams};
use crate::similarity::MatchParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptimizerKind {
    Wta,
    GraphCut,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Wta => "wta",
            OptimizerKind::GraphCut => "graph_cut",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wta" => Ok(OptimizerKind::Wta),
            "graph_cut" | "graph-cut" | "gc" => Ok(OptimizerKind::GraphCut),
            other => Err(Error::config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Typical per-sample matching cost of one pixel of disparity error, used to
/// put a user-facing smoothing coefficient on the scale of the data term.
pub const DEFAULT_SMOOTHNESS_UNIT: f64 = 4.0;

/// Converts a smoothing coefficient and truncation given in pixel units into
/// level-unit MRF weights for `p`.
///
/// A disparity step of one pixel then costs `lambda * unit * block_area`
/// whatever the precision, so results stay comparable across precisions.
pub fn energy_for_lambda<T: Scalar>(
    lambda: f64,
    truncation_px: f64,
    unit: f64,
    p: &MatchParams,
) -> Result<EnergyParams<T>> {
    if !(truncation_px > 0.0 && truncation_px.is_finite()) {
        return Err(Error::config(format!("truncation must be positive, got {truncation_px}")));
    }
    let lpp = p.precision.levels_per_pixel() as f64;
    let ep = EnergyParams {
        smoothing: T::of(lambda * unit * p.block_area() as f64 / lpp),
        truncation: ((truncation_px * lpp).round() as u32).max(1),
        ..EnergyParams::default()
    };
    ep.validate()?;
    Ok(ep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig<T> {
    pub cost: CostKind,
    /// Cost of a candidate hidden in both side views; derived from the images
    /// when `None`.
    pub occlusion_penalty: Option<T>,
    pub matching: MatchParams,
    pub energy: EnergyParams<T>,
    pub iterations: usize,
    pub optimizer: OptimizerKind,
    /// Per-iteration artifacts go here when set.
    pub debug_dir: Option<PathBuf>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            cost: CostKind::OccAware,
            occlusion_penalty: None,
            matching: MatchParams::default(),
            energy: EnergyParams::default(),
            iterations: 3,
            optimizer: OptimizerKind::GraphCut,
            debug_dir: None,
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::config("at least one iteration is required"));
        }
        if self.matching.d_max == 0 {
            return Err(Error::config("d_max must be at least 1"));
        }
        if self.matching.levels() >= DisparityMap::INVALID as usize {
            return Err(Error::config("too many disparity levels"));
        }
        self.energy.validate()
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// Energy of the resulting map under this iteration's costs.
    pub energy: f64,
    /// Pixels that differ from the previous iteration's map; `None` on the first.
    pub changed_pixels: Option<usize>,
    pub occlusion: OcclusionStats,
    /// Expansion sweeps run; zero for winner-take-all.
    pub sweeps: usize,
    pub accepted_moves: usize,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub map: DisparityMap,
    pub iterations: Vec<IterationDiagnostics>,
    /// The last iteration reproduced its predecessor exactly.
    pub converged: bool,
    /// Penalty actually used for doubly hidden candidates.
    pub occlusion_penalty: f64,
}

fn optimize<T: Scalar>(
    vol: &CostVolume<T>,
    cfg: &PipelineConfig<T>,
    seed: Option<&DisparityMap>,
) -> Result<(DisparityMap, usize, usize)> {
    let wta = wta_disparity(vol, cfg.matching.precision);
    match cfg.optimizer {
        OptimizerKind::Wta => Ok((wta, 0, 0)),
        OptimizerKind::GraphCut => {
            let out = alpha_expansion(vol, &cfg.energy, seed.unwrap_or(&wta))?;
            let accepted = out.moves.iter().filter(|m| m.accepted).count();
            Ok((out.map, out.sweeps, accepted))
        }
    }
}

fn dump_iteration(
    dir: &Path,
    iteration: usize,
    map: &DisparityMap,
    pair: Option<&SideDisparityPair>,
    diag: &IterationDiagnostics,
    d_max: u32,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scale = 255.0 / d_max as f64;
    save_disparity(map, dir.join(format!("iter{iteration}_disparity.pgm")), scale)?;
    if let Some(pair) = pair {
        save_disparity(&pair.left, dir.join(format!("iter{iteration}_warped_left.pgm")), scale)?;
        save_disparity(&pair.right, dir.join(format!("iter{iteration}_warped_right.pgm")), scale)?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "iteration={iteration}");
    let _ = writeln!(s, "energy={}", diag.energy);
    if let Some(c) = diag.changed_pixels {
        let _ = writeln!(s, "changed_pixels={c}");
    }
    let _ = writeln!(s, "left_occluded={}", diag.occlusion.left_occluded);
    let _ = writeln!(s, "right_occluded={}", diag.occlusion.right_occluded);
    let _ = writeln!(s, "both_occluded={}", diag.occlusion.both_occluded);
    let _ = writeln!(s, "sweeps={}", diag.sweeps);
    let _ = writeln!(s, "accepted_moves={}", diag.accepted_moves);
    let path = dir.join(format!("iter{iteration}_stats.txt"));
    std::fs::write(&path, s).map_err(|e| Error::io(path, e))
}

/// Estimates the centre-view disparity from three rectified views.
///
/// The first iteration treats every candidate as visible. Each later
/// iteration warps the previous map into both side views, rebuilds the
/// visibility flags from scratch and re-optimizes starting from the previous
/// map. Modes that ignore visibility run a single iteration. The loop ends
/// early once an iteration reproduces its input map.
pub fn run_pipeline<T: Scalar>(
    center: &LumaImage<T>,
    left: &LumaImage<T>,
    right: &LumaImage<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    if !center.same_size(left) || !center.same_size(right) {
        return Err(Error::config(format!(
            "views differ in size: centre {}x{}, left {}x{}, right {}x{}",
            center.width(),
            center.height(),
            left.width(),
            left.height(),
            right.width(),
            right.height()
        )));
    }
    let (w, h, levels) = (center.width(), center.height(), cfg.matching.levels());
    let penalty = match (cfg.cost.uses_occlusion(), cfg.occlusion_penalty) {
        (true, Some(p)) => p,
        (true, None) => default_occlusion_penalty(center, left, right, &cfg.matching)?,
        // Not read by the other modes.
        (false, _) => T::one(),
    };
    let mode = CostMode::new(cfg.cost, penalty)?;
    let iterations = if cfg.cost.uses_occlusion() { cfg.iterations } else { 1 };

    let mut diags = Vec::with_capacity(iterations);
    let mut current: Option<DisparityMap> = None;
    let mut converged = false;
    for it in 1..=iterations {
        let pair = current.as_ref().map(SideDisparityPair::from_center);
        let occ = match &pair {
            Some(pair) => build_occlusion_volume(pair, levels),
            None => OcclusionVolume::all_visible(w, h, levels),
        };
        let vol = build_cost_volume(center, left, right, &mode, &occ, &cfg.matching)?;
        let (map, sweeps, accepted_moves) = optimize(&vol, cfg, current.as_ref())?;
        let diag = IterationDiagnostics {
            iteration: it,
            energy: energy(&map, &vol, &cfg.energy)?.as_f64(),
            changed_pixels: current.as_ref().map(|prev| prev.count_changed(&map)),
            occlusion: occ.stats(),
            sweeps,
            accepted_moves,
        };
        info!(
            "iteration {it}: energy {:.1}, changed {:?}, both-occluded {:.4}",
            diag.energy, diag.changed_pixels, diag.occlusion.both_occluded
        );
        if let Some(dir) = &cfg.debug_dir {
            dump_iteration(dir, it, &map, pair.as_ref(), &diag, cfg.matching.d_max)?;
        }
        let fixed = diag.changed_pixels == Some(0);
        diags.push(diag);
        current = Some(map);
        if fixed {
            debug!("fixed point after {it} iterations");
            converged = true;
            break;
        }
    }
    let map = current.ok_or_else(|| Error::Internal("pipeline ran no iteration".into()))?;
    Ok(PipelineOutput {
        map,
        iterations: diags,
        converged,
        occlusion_penalty: penalty.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Precision;

    fn texture(w: usize, h: usize, seed: u64) -> LumaImage<f64> {
        LumaImage::from_fn(w, h, |x, y| {
            let mut v = (x as u64 * 0x9e37_79b9 + y as u64 * 0x85eb_ca6b + seed).wrapping_mul(0xc2b2_ae35);
            v ^= v >> 15;
            (v % 256) as f64
        })
    }

    #[test]
    fn sum_mode_runs_once() {
        let img = texture(12, 8, 1);
        let cfg = PipelineConfig {
            cost: CostKind::Sum,
            matching: MatchParams { d_max: 3, ..Default::default() },
            ..Default::default()
        };
        let out = run_pipeline(&img, &img, &img, &cfg).unwrap();
        assert_eq!(out.iterations.len(), 1);
    }

    #[test]
    fn identical_views_give_zero_and_a_fixed_point() {
        let img = texture(16, 10, 2);
        for optimizer in [OptimizerKind::Wta, OptimizerKind::GraphCut] {
            let cfg = PipelineConfig {
                matching: MatchParams { d_max: 4, ..Default::default() },
                optimizer,
                ..Default::default()
            };
            let out = run_pipeline(&img, &img, &img, &cfg).unwrap();
            assert!(out.map.levels().iter().all(|&l| l == 0));
            assert_eq!(out.iterations.len(), 2);
            assert_eq!(out.iterations[1].changed_pixels, Some(0));
            assert!(out.converged);
        }
    }

    #[test]
    fn first_iteration_matches_sum_under_wta() {
        let c = texture(20, 6, 3);
        let l = texture(20, 6, 4);
        let r = texture(20, 6, 5);
        let base = PipelineConfig {
            matching: MatchParams { d_max: 5, precision: Precision::Half, ..Default::default() },
            optimizer: OptimizerKind::Wta,
            iterations: 1,
            ..Default::default()
        };
        let occ = run_pipeline(&c, &l, &r, &base).unwrap();
        let sum = run_pipeline(&c, &l, &r, &PipelineConfig { cost: CostKind::Sum, ..base.clone() }).unwrap();
        assert_eq!(occ.map, sum.map);
    }

    #[test]
    fn rejects_mismatched_views() {
        let a = texture(8, 8, 0);
        let b = texture(9, 8, 0);
        let err = run_pipeline(&a, &b, &a, &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn lambda_conversion_keeps_pixel_step_cost() {
        let px = MatchParams { precision: Precision::Pixel, ..Default::default() };
        let qp = MatchParams { precision: Precision::Quarter, ..Default::default() };
        let a: EnergyParams<f64> = energy_for_lambda(2.0, 2.0, 4.0, &px).unwrap();
        let b: EnergyParams<f64> = energy_for_lambda(2.0, 2.0, 4.0, &qp).unwrap();
        assert_eq!(a.smoothing * 1.0, b.smoothing * 4.0);
        assert_eq!((a.truncation, b.truncation), (2, 8));
        assert_eq!(a.smoothing, 2.0 * 4.0 * 9.0);
    }

    #[test]
    fn debug_dir_receives_artifacts() {
        let img = texture(10, 6, 7);
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            matching: MatchParams { d_max: 2, ..Default::default() },
            debug_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        run_pipeline(&img, &img, &img, &cfg).unwrap();
        for f in ["iter1_disparity.pgm", "iter1_stats.txt", "iter2_warped_left.pgm", "iter2_stats.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let stats = std::fs::read_to_string(dir.path().join("iter2_stats.txt")).unwrap();
        assert!(stats.contains("changed_pixels=0"));
    }
}
