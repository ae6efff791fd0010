//! Three-view (left/centre/right) disparity estimation with an
//! occlusion-aware matching cost.
//!
//! The centre-view disparity is estimated iteratively. After each pass the
//! current estimate is forward-warped into both side views; candidates whose
//! correspondence lands behind a nearer surface are dropped from the matching
//! cost of that view, and the estimate is recomputed.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the common instantiations.

pub mod cli;
pub mod cost_volume;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod num;
pub mod occlusion;
pub mod optimizer;
pub mod pipeline;
pub mod scenegen;
pub mod similarity;

pub use error::{Error, Result};
pub use num::Scalar;

pub type LumaImageF32 = imaging::LumaImage<f32>;
pub type LumaImageF64 = imaging::LumaImage<f64>;
pub type CostVolumeF32 = cost_volume::CostVolume<f32>;
pub type CostVolumeF64 = cost_volume::CostVolume<f64>;
pub type PipelineConfigF32 = pipeline::PipelineConfig<f32>;
pub type PipelineConfigF64 = pipeline::PipelineConfig<f64>;
pub type EnergyParamsF32 = optimizer::EnergyParams<f32>;
pub type EnergyParamsF64 = optimizer::EnergyParams<f64>;
