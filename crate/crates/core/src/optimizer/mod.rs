//! Disparity selection: per-pixel winner-take-all and alpha-expansion graph
//! cuts over a truncated-linear MRF.

mod energy;
mod expansion;
mod maxflow;
mod wta;

pub use energy::{energy, integer_energy, to_integer_costs, IntegerCosts};
pub use expansion::{alpha_expansion, Expansion, MoveRecord};
pub use maxflow::{FlowGraph, MinCut, NodeId};
pub use wta::wta_disparity;

use crate::error::{Error, Result};
use crate::num::Scalar;

/// MRF weights in level units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams<T> {
    /// Weight of the smoothness term.
    pub smoothing: T,
    /// Truncation of `|d_p - d_q|`, in levels.
    pub truncation: u32,
    /// Multiplier applied before rounding costs to integer capacities.
    pub cost_scale: T,
    /// Upper bound on full label sweeps in alpha-expansion.
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for EnergyParams<T> {
    fn default() -> Self {
        Self {
            smoothing: T::one(),
            truncation: 2,
            cost_scale: T::of(64.0),
            max_sweeps: 4,
        }
    }
}

impl<T: Scalar> EnergyParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing >= T::zero() && self.smoothing.is_finite()) {
            return Err(Error::config(format!("smoothing must be finite and >= 0, got {}", self.smoothing)));
        }
        if self.truncation < 1 {
            return Err(Error::config("truncation must be at least one level"));
        }
        if !(self.cost_scale > T::zero() && self.cost_scale.is_finite()) {
            return Err(Error::config(format!("cost scale must be positive, got {}", self.cost_scale)));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn pair_penalty(&self, a: u16, b: u16) -> u32 {
        (a.abs_diff(b) as u32).min(self.truncation)
    }
}
