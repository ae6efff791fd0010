use super::EnergyParams;
use crate::cost_volume::CostVolume;
use crate::error::{Error, Result};
use crate::imaging::{DisparityMap, Level};
use crate::num::{round_half_away, Scalar};

/// Largest magnitude an integer cost may take (2^53).
const MAX_EXACT: f64 = 9_007_199_254_740_992.0;

fn check_map<T: Scalar>(map: &DisparityMap, vol: &CostVolume<T>) -> Result<()> {
    if map.width() != vol.width() || map.height() != vol.height() {
        return Err(Error::config(format!(
            "map is {}x{}, volume is {}x{}",
            map.width(),
            map.height(),
            vol.width(),
            vol.height()
        )));
    }
    if let Some(&bad) = map.levels().iter().find(|&&l| l as usize >= vol.levels()) {
        return Err(Error::config(format!(
            "level {bad} outside the {} candidates of the volume",
            vol.levels()
        )));
    }
    Ok(())
}

/// Data cost plus `smoothing * min(|d_p - d_q|, truncation)` over 4-neighbour pairs.
pub fn energy<T: Scalar>(map: &DisparityMap, vol: &CostVolume<T>, ep: &EnergyParams<T>) -> Result<T> {
    check_map(map, vol)?;
    let (w, h) = (map.width(), map.height());
    let mut data = T::zero();
    let mut smooth = 0u64;
    for y in 0..h {
        for x in 0..w {
            let d = map.raw(x, y);
            data = data + vol.get(x, y, d as usize);
            if x + 1 < w {
                smooth += ep.pair_penalty(d, map.raw(x + 1, y)) as u64;
            }
            if y + 1 < h {
                smooth += ep.pair_penalty(d, map.raw(x, y + 1)) as u64;
            }
        }
    }
    Ok(data + ep.smoothing * T::of(smooth as f64))
}

/// Cost volume and smoothness weight rounded to integers after multiplying by
/// the cost scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerCosts {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub data: Vec<i64>,
    pub smoothing: i64,
    pub truncation: u32,
}

impl IntegerCosts {
    #[inline]
    pub fn get(&self, pixel: usize, level: usize) -> i64 {
        self.data[pixel * self.levels + level]
    }

    #[inline]
    pub fn pair(&self, a: Level, b: Level) -> i64 {
        self.smoothing * (a.abs_diff(b) as u32).min(self.truncation) as i64
    }
}

fn scale_to_int(v: f64, what: &str) -> Result<i64> {
    if !v.is_finite() || v.abs() > MAX_EXACT {
        return Err(Error::config(format!(
            "{what} {v} does not fit exactly in integer capacities; lower cost_scale"
        )));
    }
    Ok(round_half_away(v))
}

pub fn to_integer_costs<T: Scalar>(vol: &CostVolume<T>, ep: &EnergyParams<T>) -> Result<IntegerCosts> {
    ep.validate()?;
    let scale = ep.cost_scale.as_f64();
    let data = vol
        .data()
        .iter()
        .map(|c| scale_to_int(c.as_f64() * scale, "scaled cost"))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntegerCosts {
        width: vol.width(),
        height: vol.height(),
        levels: vol.levels(),
        data,
        smoothing: scale_to_int(ep.smoothing.as_f64() * scale, "scaled smoothing")?,
        truncation: ep.truncation,
    })
}

/// Energy of a labeling under integer costs.
pub fn integer_energy(labels: &[Level], costs: &IntegerCosts) -> i64 {
    let (w, h) = (costs.width, costs.height);
    let mut total = 0i64;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let d = labels[i];
            total += costs.get(i, d as usize);
            if x + 1 < w {
                total += costs.pair(d, labels[i + 1]);
            }
            if y + 1 < h {
                total += costs.pair(d, labels[i + w]);
            }
        }
    }
    total
}
