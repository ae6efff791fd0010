use crate::cost_volume::CostVolume;
use crate::imaging::{DisparityMap, Level, Precision};
use crate::num::Scalar;

/// Per-pixel argmin over candidates; ties go to the smallest level.
pub fn wta_disparity<T: Scalar>(vol: &CostVolume<T>, precision: Precision) -> DisparityMap {
    let (w, h) = (vol.width(), vol.height());
    let mut levels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let costs = vol.pixel(x, y);
            let mut best = 0;
            for (t, &c) in costs.iter().enumerate().skip(1) {
                if c < costs[best] {
                    best = t;
                }
            }
            levels.push(best as Level);
        }
    }
    DisparityMap::new(w, h, precision, levels).expect("sized from volume")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(costs: &[f64]) -> Level {
        let vol = CostVolume::new(1, 1, costs.len(), costs.to_vec()).unwrap();
        wta_disparity(&vol, Precision::Pixel).raw(0, 0)
    }

    #[test]
    fn argmin_and_tie_break() {
        assert_eq!(single(&[5.0, 2.0, 9.0]), 1);
        assert_eq!(single(&[3.0, 3.0, 7.0]), 0);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_scan(data in prop::collection::vec(0u8..20, 6 * 6 * 5)) {
            let costs: Vec<f64> = data.iter().map(|&c| c as f64).collect();
            let vol = CostVolume::new(6, 6, 5, costs).unwrap();
            let map = wta_disparity(&vol, Precision::Pixel);
            for y in 0..6 {
                for x in 0..6 {
                    let c = vol.pixel(x, y);
                    let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
                    let first = c.iter().position(|&v| v == min).unwrap();
                    prop_assert_eq!(map.raw(x, y) as usize, first);
                }
            }
        }
    }
}
