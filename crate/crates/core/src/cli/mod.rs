//! Batch front-end: estimate, evaluate, sweep and scene generation driven by
//! a run manifest.

pub mod manifest;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::cost_volume::CostKind;
use crate::error::{Error, Result};
use crate::evaluation::{
    bad_pixel_rates, psnr_luma, summary_table, synthesize_view, write_csv, BadPixelReport, EvalMasks,
    SweepRow,
};
use crate::imaging::{
    disparity_to_bytes, encode_pgm, load_ground_truth, load_image, load_mask, DisparityMap, LumaImage,
    Precision,
};
use crate::pipeline::{run_pipeline, IterationDiagnostics, PipelineConfig};
use crate::scenegen::{render_scene, save_scene, SceneSpec, SCENE_FILES};

pub use manifest::Manifest;

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_disparity(map: &DisparityMap, path: &Path, scale: f64) -> Result<()> {
    let bytes = encode_pgm(map.width(), map.height(), &disparity_to_bytes(map, scale));
    write_atomic(path, &bytes)
}

fn load_views(m: &Manifest, v: &manifest::ViewSet, frame: Option<u32>) -> Result<[LumaImage<f32>; 3]> {
    Ok([
        load_image(m.path(&v.center, frame))?,
        load_image(m.path(&v.left, frame))?,
        load_image(m.path(&v.right, frame))?,
    ])
}

fn frame_suffix(frame: Option<u32>) -> String {
    frame.map_or(String::new(), |n| format!("_{n}"))
}

#[derive(serde::Serialize)]
struct Diagnostics<'a> {
    frame: Option<u32>,
    mode: &'static str,
    optimizer: &'static str,
    precision: u32,
    occlusion_penalty: f64,
    converged: bool,
    iterations: &'a [IterationDiagnostics],
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| Error::Internal(format!("JSON encoding: {e}")))?;
    s.push(b'\n');
    Ok(s)
}

/// Runs the pipeline once per frame; writes `disparity[_N].pgm` and
/// `diagnostics[_N].json` to the output directory. Returns the written maps.
pub fn cmd_estimate(m: &Manifest) -> Result<Vec<PathBuf>> {
    m.check_inputs(true, false, false)?;
    let views = m.input.as_ref().expect("checked above");
    let out_dir = m.output_dir();
    let mut cfg = m.pipeline_config(None, None, None)?;
    let scale = m.output_scale(cfg.matching.precision);
    let mut written = Vec::new();
    for frame in m.frame_list() {
        let suffix = frame_suffix(frame);
        if m.estimate.debug {
            cfg.debug_dir = Some(out_dir.join(format!("debug{suffix}")));
        }
        let [c, l, r] = load_views(m, views, frame)?;
        let out = run_pipeline(&c, &l, &r, &cfg)?;
        let map_path = out_dir.join(format!("disparity{suffix}.pgm"));
        write_disparity(&out.map, &map_path, scale)?;
        let diag = Diagnostics {
            frame,
            mode: cfg.cost.name(),
            optimizer: cfg.optimizer.name(),
            precision: cfg.matching.precision.levels_per_pixel(),
            occlusion_penalty: out.occlusion_penalty,
            converged: out.converged,
            iterations: &out.iterations,
        };
        write_atomic(&out_dir.join(format!("diagnostics{suffix}.json")), &to_json(&diag)?)?;
        info!("wrote {}", map_path.display());
        written.push(map_path);
    }
    Ok(written)
}

fn load_masks(m: &Manifest, frame: Option<u32>, width: usize, height: usize) -> Result<EvalMasks> {
    let e = m.evaluate.as_ref().ok_or_else(|| Error::config("manifest has no [evaluate] section"))?;
    let full = EvalMasks::full(width, height);
    let load = |p: &Option<PathBuf>, default| match p {
        Some(p) => load_mask(m.path(p, frame)),
        None => Ok(default),
    };
    Ok(EvalMasks {
        nonocc: load(&e.nonocc, full.nonocc)?,
        all: load(&e.all, full.all)?,
        disc: load(&e.disc, full.disc)?,
    })
}

fn load_gt(m: &Manifest, frame: Option<u32>) -> Result<DisparityMap> {
    let e = m.evaluate.as_ref().ok_or_else(|| Error::config("manifest has no [evaluate] section"))?;
    // Quarter-pixel levels hold any ground truth the estimator can resolve.
    load_ground_truth(m.path(&e.gt, frame), e.gt_scale, Precision::Quarter, e.gt_zero_unknown)
}

#[derive(serde::Serialize)]
struct FrameEvaluation {
    frame: Option<u32>,
    report: BadPixelReport,
}

/// Scores the maps written by [`cmd_estimate`] against the ground truth and
/// writes `evaluation.json`.
pub fn cmd_evaluate(m: &Manifest) -> Result<Vec<BadPixelReport>> {
    m.check_inputs(false, true, false)?;
    let e = m.evaluate.as_ref().expect("checked above");
    let cfg = m.pipeline_config(None, None, None)?;
    let precision = cfg.matching.precision;
    let scale = m.output_scale(precision);
    let out_dir = m.output_dir();
    let mut results = Vec::new();
    for frame in m.frame_list() {
        let est_path = out_dir.join(format!("disparity{}.pgm", frame_suffix(frame)));
        let est = load_ground_truth(&est_path, scale, precision, false)?;
        let gt = load_gt(m, frame)?;
        let masks = load_masks(m, frame, gt.width(), gt.height())?;
        let report = bad_pixel_rates(&est, &gt, &masks, e.threshold)?;
        println!(
            "{}{}: nonocc {:.2}%  all {:.2}%  disc {:.2}%",
            m.sequence,
            frame_suffix(frame),
            report.nonocc,
            report.all,
            report.disc
        );
        results.push(FrameEvaluation { frame, report });
    }
    write_atomic(&out_dir.join("evaluation.json"), &to_json(&results)?)?;
    Ok(results.into_iter().map(|r| r.report).collect())
}

#[derive(Clone, Debug)]
struct Cell {
    mode: String,
    lambda: f64,
    precision: u32,
}

impl Cell {
    fn tag(&self) -> String {
        format!("{}_p{}_l{}", self.mode, self.precision, self.lambda)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn run_cell(m: &Manifest, cell: &Cell) -> Result<SweepRow> {
    let start = Instant::now();
    let cfg: PipelineConfig<f32> = m.pipeline_config(Some(&cell.mode), Some(cell.lambda), Some(cell.precision))?;
    let scale = m.output_scale(cfg.matching.precision);
    let maps_dir = m.output_dir().join("maps");
    let (mut psnr, mut nonocc, mut all, mut disc) = (vec![], vec![], vec![], vec![]);
    for frame in m.frame_list() {
        let suffix = frame_suffix(frame);
        if let (Some(views), Some(_)) = (&m.input, &m.evaluate) {
            let [c, l, r] = load_views(m, views, frame)?;
            let map = run_pipeline(&c, &l, &r, &cfg)?.map;
            write_disparity(&map, &maps_dir.join(format!("{}{suffix}.pgm", cell.tag())), scale)?;
            let gt = load_gt(m, frame)?;
            let masks = load_masks(m, frame, gt.width(), gt.height())?;
            let threshold = m.evaluate.as_ref().map_or(1.0, |e| e.threshold);
            let r = bad_pixel_rates(&map, &gt, &masks, threshold)?;
            nonocc.push(r.nonocc);
            all.push(r.all);
            disc.push(r.disc);
        }
        if let Some(syn) = &m.synthesis {
            let [ac, al, ar] = load_views(m, &syn.a, frame)?;
            let [bc, bl, br] = load_views(m, &syn.b, frame)?;
            let da = run_pipeline(&ac, &al, &ar, &cfg)?.map;
            let db = run_pipeline(&bc, &bl, &br, &cfg)?.map;
            write_disparity(&da, &maps_dir.join(format!("{}{suffix}_a.pgm", cell.tag())), scale)?;
            write_disparity(&db, &maps_dir.join(format!("{}{suffix}_b.pgm", cell.tag())), scale)?;
            let da = da.scale_levels(syn.baseline_ratio)?;
            let db = db.scale_levels(syn.baseline_ratio)?;
            let v = synthesize_view(&ac, &da, &bc, &db, syn.alpha)?;
            let reference: LumaImage<f32> = load_image(m.path(&syn.reference, frame))?;
            psnr.push(psnr_luma(&v, &reference)?);
        }
    }
    let runtime = start.elapsed().as_millis() as u64;
    info!("cell {} done in {runtime} ms", cell.tag());
    Ok(SweepRow {
        sequence: m.sequence.clone(),
        mode: cell.mode.clone(),
        precision: cell.precision,
        lambda: cell.lambda,
        psnr_db: mean(&psnr),
        bad_nonocc: mean(&nonocc),
        bad_all: mean(&all),
        bad_disc: mean(&disc),
        runtime_ms: m.sweep.record_runtime.then_some(runtime),
    })
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub summary: String,
}

/// Evaluates every (mode, lambda, precision) cell, writing `results.csv`,
/// `summary.txt` and the per-cell maps under `maps/`.
pub fn cmd_sweep(m: &Manifest, workers: Option<usize>) -> Result<SweepOutput> {
    let has_eval = m.input.is_some() && m.evaluate.is_some();
    if !has_eval && m.synthesis.is_none() {
        return Err(Error::config(
            "sweep needs [input] with [evaluate], or [synthesis], to have something to score",
        ));
    }
    m.check_inputs(has_eval, has_eval, m.synthesis.is_some())?;
    let modes: Vec<String> = m
        .sweep
        .modes
        .iter()
        .map(|s| CostKind::parse(s).map(|k| k.name().to_string()))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for mode in &modes {
        for &precision in &m.sweep.precisions {
            for &lambda in &m.sweep.lambdas {
                cells.push(Cell { mode: mode.clone(), lambda, precision });
            }
        }
    }
    let workers = workers.unwrap_or(m.sweep.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let rows = pool.install(|| cells.par_iter().map(|c| run_cell(m, c)).collect::<Result<Vec<_>>>())?;

    let out_dir = m.output_dir();
    let csv = out_dir.join("results.csv");
    write_atomic(&csv, &write_csv(&rows)?)?;
    let summary = summary_table(&rows, &modes);
    write_atomic(&out_dir.join("summary.txt"), summary.as_bytes())?;
    Ok(SweepOutput { rows, csv, summary })
}

/// Renders a scene spec and writes its six files into `out_dir`.
pub fn cmd_scene(spec_path: &Path, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let spec = SceneSpec::load(spec_path)?;
    let scene = render_scene::<f32>(&spec, seed)?;
    save_scene(&scene, out_dir)?;
    Ok(SCENE_FILES.iter().map(|f| out_dir.join(f)).collect())
}
