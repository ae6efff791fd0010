//! Run manifests: TOML files with sections for inputs, estimation settings,
//! evaluation data, view synthesis and the sweep grid. Relative paths are
//! resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cost_volume::CostKind;
use crate::error::{Error, Result};
use crate::imaging::Precision;
use crate::pipeline::{energy_for_lambda, OptimizerKind, PipelineConfig, DEFAULT_SMOOTHNESS_UNIT};
use crate::similarity::{MatchParams, Metric};

/// Centre view and its two neighbours. Paths may contain `{frame}`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSet {
    pub center: PathBuf,
    pub left: PathBuf,
    pub right: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub mode: String,
    pub optimizer: String,
    pub lambda: f64,
    /// Pixels.
    pub truncation: f64,
    pub smoothness_unit: f64,
    pub iterations: usize,
    pub precision: u32,
    pub d_max: u32,
    pub block_radius: usize,
    pub metric: String,
    pub occlusion_penalty: Option<f64>,
    pub cost_scale: f64,
    pub max_sweeps: usize,
    /// Written disparity PGMs store `disparity * output_scale`; chosen to be
    /// lossless when absent.
    pub output_scale: Option<f64>,
    /// Dump per-iteration artifacts under `<output>/debug`.
    pub debug: bool,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            mode: "occ_aware".into(),
            optimizer: "graph_cut".into(),
            lambda: 2.0,
            truncation: 2.0,
            smoothness_unit: DEFAULT_SMOOTHNESS_UNIT,
            iterations: 3,
            precision: 1,
            d_max: 16,
            block_radius: 1,
            metric: "sad".into(),
            occlusion_penalty: None,
            cost_scale: 64.0,
            max_sweeps: 4,
            output_scale: None,
            debug: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Ground-truth disparity of the centre view.
    pub gt: PathBuf,
    /// Stored sample = disparity * gt_scale.
    #[serde(default = "one")]
    pub gt_scale: f64,
    /// Zero samples mark unknown ground truth.
    #[serde(default)]
    pub gt_zero_unknown: bool,
    pub nonocc: Option<PathBuf>,
    pub all: Option<PathBuf>,
    pub disc: Option<PathBuf>,
    #[serde(default = "one")]
    pub threshold: f64,
}

fn one() -> f64 {
    1.0
}

/// Two estimated views A (left) and B (right) and the real camera between
/// them that the synthesized view is compared against.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub a: ViewSet,
    pub b: ViewSet,
    pub reference: PathBuf,
    /// Distance between A and B in units of the neighbour spacing used for
    /// estimation.
    #[serde(default = "two")]
    pub baseline_ratio: u32,
    #[serde(default = "half")]
    pub alpha: f64,
}

fn two() -> u32 {
    2
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub modes: Vec<String>,
    pub lambdas: Vec<f64>,
    pub precisions: Vec<u32>,
    /// Concurrent cells; 0 uses every core.
    pub workers: usize,
    /// Fill the runtime column. Off makes repeated sweeps byte-identical.
    pub record_runtime: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            modes: vec!["sum".into(), "occ_aware".into()],
            lambdas: vec![1.0, 2.0, 3.0, 4.0],
            precisions: vec![1, 2, 4],
            workers: 0,
            record_runtime: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default = "default_sequence")]
    pub sequence: String,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Substituted for `{frame}` in every input path.
    pub frames: Option<Vec<u32>>,
    /// Zero-padding width for frame numbers.
    #[serde(default)]
    pub frame_digits: usize,
    pub input: Option<ViewSet>,
    #[serde(default)]
    pub estimate: EstimateSection,
    pub evaluate: Option<EvaluateSection>,
    pub synthesis: Option<SynthesisSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_sequence() -> String {
    "sequence".into()
}

fn default_output() -> PathBuf {
    "out".into()
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest =
            toml::from_str(text).map_err(|e| Error::config(format!("manifest: {e}")))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn validate(&self) -> Result<()> {
        if let Some(frames) = &self.frames {
            if frames.is_empty() {
                return Err(Error::config("frames list is empty"));
            }
        }
        let s = &self.sweep;
        if s.modes.is_empty() || s.lambdas.is_empty() || s.precisions.is_empty() {
            return Err(Error::config("sweep grid must not be empty"));
        }
        for m in &s.modes {
            CostKind::parse(m)?;
        }
        for &p in &s.precisions {
            Precision::from_levels_per_pixel(p)?;
        }
        if let Some(syn) = &self.synthesis {
            if syn.baseline_ratio == 0 {
                return Err(Error::config("baseline_ratio must be at least 1"));
            }
        }
        self.pipeline_config(None, None, None).map(|_| ())
    }

    /// Frame numbers to process; `None` for a single unnumbered frame.
    pub fn frame_list(&self) -> Vec<Option<u32>> {
        match &self.frames {
            Some(f) => f.iter().map(|&n| Some(n)).collect(),
            None => vec![None],
        }
    }

    /// Resolves a manifest path for one frame.
    pub fn path(&self, p: &Path, frame: Option<u32>) -> PathBuf {
        let s = p.to_string_lossy();
        let s = match frame {
            Some(n) => s.replace("{frame}", &format!("{n:0w$}", w = self.frame_digits)),
            None => s.into_owned(),
        };
        self.base_dir.join(s)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }

    /// Checks that every input file referenced for every frame exists.
    pub fn check_inputs(&self, need_views: bool, need_eval: bool, need_synthesis: bool) -> Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        if need_views {
            let v = self
                .input
                .as_ref()
                .ok_or_else(|| Error::config("manifest has no [input] section"))?;
            paths.extend([v.center.as_path(), v.left.as_path(), v.right.as_path()]);
        }
        if need_eval {
            let e = self
                .evaluate
                .as_ref()
                .ok_or_else(|| Error::config("manifest has no [evaluate] section"))?;
            paths.push(&e.gt);
            paths.extend([&e.nonocc, &e.all, &e.disc].into_iter().flatten().map(|p| p.as_path()));
        }
        if need_synthesis {
            let s = self
                .synthesis
                .as_ref()
                .ok_or_else(|| Error::config("manifest has no [synthesis] section"))?;
            for v in [&s.a, &s.b] {
                paths.extend([v.center.as_path(), v.left.as_path(), v.right.as_path()]);
            }
            paths.push(&s.reference);
        }
        for frame in self.frame_list() {
            for p in &paths {
                let full = self.path(p, frame);
                if !full.is_file() {
                    return Err(Error::io(
                        full,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pipeline settings from `[estimate]`, optionally overriding the mode,
    /// smoothing coefficient and precision for one sweep cell.
    pub fn pipeline_config(
        &self,
        mode: Option<&str>,
        lambda: Option<f64>,
        precision: Option<u32>,
    ) -> Result<PipelineConfig<f32>> {
        let e = &self.estimate;
        let metric = match e.metric.to_ascii_lowercase().as_str() {
            "sad" => Metric::Sad,
            "ssd" => Metric::Ssd,
            other => return Err(Error::config(format!("unknown metric {other:?}"))),
        };
        let matching = MatchParams {
            block_radius: e.block_radius,
            metric,
            precision: Precision::from_levels_per_pixel(precision.unwrap_or(e.precision))?,
            d_max: e.d_max,
        };
        let mut energy = energy_for_lambda(lambda.unwrap_or(e.lambda), e.truncation, e.smoothness_unit, &matching)?;
        energy.cost_scale = e.cost_scale as f32;
        energy.max_sweeps = e.max_sweeps;
        let cfg = PipelineConfig {
            cost: CostKind::parse(mode.unwrap_or(&e.mode))?,
            occlusion_penalty: e.occlusion_penalty.map(|p| p as f32),
            matching,
            energy,
            iterations: e.iterations,
            optimizer: OptimizerKind::parse(&e.optimizer)?,
            debug_dir: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scale for written disparity maps: the configured one, or the largest
    /// multiple of the precision that keeps `d_max` within a byte.
    pub fn output_scale(&self, precision: Precision) -> f64 {
        if let Some(s) = self.estimate.output_scale {
            return s;
        }
        let p = precision.levels_per_pixel();
        let k = 255 / (self.estimate.d_max.max(1) * p);
        if k > 0 {
            (k * p) as f64
        } else {
            255.0 / self.estimate.d_max.max(1) as f64
        }
    }
}
