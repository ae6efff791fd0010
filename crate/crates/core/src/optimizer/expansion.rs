use log::{debug, trace};

use super::energy::{integer_energy, to_integer_costs, IntegerCosts};
use super::maxflow::FlowGraph;
use super::EnergyParams;
use crate::cost_volume::CostVolume;
use crate::error::{Error, Result};
use crate::imaging::{DisparityMap, Level};
use crate::num::Scalar;

/// One expansion move in the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct MoveRecord {
    pub sweep: usize,
    pub label: Level,
    pub energy_before: i64,
    pub energy_after: i64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct Expansion {
    pub map: DisparityMap,
    /// Final energy in integer (cost-scaled) units.
    pub energy: i64,
    /// Energy of the initial labeling in the same units.
    pub initial_energy: i64,
    pub sweeps: usize,
    pub moves: Vec<MoveRecord>,
}

/// Builds the binary keep/switch problem of one expansion move and returns,
/// per pixel, whether it switches to `alpha`.
fn expansion_move(
    g: &mut FlowGraph,
    costs: &IntegerCosts,
    labels: &[Level],
    alpha: Level,
    switch: &mut [bool],
) {
    let (w, h) = (costs.width, costs.height);
    let n = w * h;
    g.reset(n);
    // Cost of switching minus cost of keeping, per pixel.
    let mut unary: Vec<i64> = (0..n)
        .map(|i| costs.get(i, alpha as usize) - costs.get(i, labels[i] as usize))
        .collect();

    let pair = |g: &mut FlowGraph, unary: &mut [i64], p: usize, q: usize| {
        let (a, b) = (labels[p], labels[q]);
        if a == alpha && b == alpha {
            return;
        }
        // Pairwise table over (x_p, x_q) with 0 = keep, 1 = switch.
        let e00 = costs.pair(a, b);
        let e01 = costs.pair(a, alpha);
        let mut e10 = costs.pair(alpha, b);
        let e11 = 0;
        // Truncated linear is a metric, so this only fires on malformed input;
        // clamp up to the nearest submodular table.
        if e01 + e10 < e00 + e11 {
            e10 = e00 + e11 - e01;
        }
        unary[p] += e10 - e00;
        unary[q] += e11 - e10;
        let w = e01 + e10 - e00 - e11;
        if w > 0 {
            g.add_edge(p, q, w, 0);
        }
    };

    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                pair(g, &mut unary, p, p + 1);
            }
            if y + 1 < h {
                pair(g, &mut unary, p, p + w);
            }
        }
    }
    for (i, &u) in unary.iter().enumerate() {
        if u > 0 {
            g.add_tweights(i, u, 0);
        } else if u < 0 {
            g.add_tweights(i, 0, -u);
        }
    }
    g.max_flow();
    for (i, s) in switch.iter_mut().enumerate() {
        *s = !g.is_source_side(i);
    }
}

/// Minimizes the truncated-linear MRF energy by alpha-expansion, starting
/// from `init`.
///
/// Labels are visited in increasing order; a move is kept only if it strictly
/// lowers the energy. Stops after a sweep without accepted moves or after
/// `ep.max_sweeps` sweeps.
pub fn alpha_expansion<T: Scalar>(
    vol: &CostVolume<T>,
    ep: &EnergyParams<T>,
    init: &DisparityMap,
) -> Result<Expansion> {
    if init.width() != vol.width() || init.height() != vol.height() {
        return Err(Error::config("initial map and cost volume differ in size"));
    }
    if !init.is_total() {
        return Err(Error::config("initial map for expansion must have no holes"));
    }
    if init.levels().iter().any(|&l| l as usize >= vol.levels()) {
        return Err(Error::config("initial map uses levels outside the cost volume"));
    }
    let costs = to_integer_costs(vol, ep)?;
    let mut labels = init.levels().to_vec();
    let initial_energy = integer_energy(&labels, &costs);
    let mut current = initial_energy;
    let mut graph = FlowGraph::new(labels.len());
    let mut switch = vec![false; labels.len()];
    let mut candidate = labels.clone();
    let mut moves = Vec::new();
    let mut sweeps = 0;

    for sweep in 0..ep.max_sweeps {
        sweeps = sweep + 1;
        let mut improved = false;
        for alpha in 0..vol.levels() as Level {
            expansion_move(&mut graph, &costs, &labels, alpha, &mut switch);
            let mut changed = false;
            for ((c, &l), &s) in candidate.iter_mut().zip(&labels).zip(&switch) {
                *c = if s { alpha } else { l };
                changed |= s && l != alpha;
            }
            let after = if changed {
                integer_energy(&candidate, &costs)
            } else {
                current
            };
            let accepted = after < current;
            trace!("sweep {sweep} label {alpha}: {current} -> {after} accepted={accepted}");
            moves.push(MoveRecord {
                sweep,
                label: alpha,
                energy_before: current,
                energy_after: after,
                accepted,
            });
            if accepted {
                std::mem::swap(&mut labels, &mut candidate);
                current = after;
                improved = true;
            }
        }
        debug!("expansion sweep {sweep}: energy {current}");
        if !improved {
            break;
        }
    }

    Ok(Expansion {
        map: DisparityMap::new(init.width(), init.height(), init.precision(), labels)?,
        energy: current,
        initial_energy,
        sweeps,
        moves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Precision;
    use crate::optimizer::{energy, wta_disparity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(w: usize, h: usize, l: usize, rng: &mut ChaCha8Rng) -> CostVolume<f64> {
        CostVolume::from_fn(w, h, l, |_, _, _| rng.random_range(0..100) as f64)
    }

    #[test]
    fn dominant_label_wins_everywhere() {
        let vol = CostVolume::from_fn(5, 4, 3, |_, _, t| if t == 2 { 0.0 } else { 100.0 });
        let ep = EnergyParams { smoothing: 0.01, ..Default::default() };
        let init = DisparityMap::filled(5, 4, Precision::Pixel, 0);
        let out = alpha_expansion(&vol, &ep, &init).unwrap();
        assert!(out.map.levels().iter().all(|&l| l == 2));
    }

    #[test]
    fn smoothing_overrides_a_weak_outlier() {
        // Centre pixel slightly prefers label 1, everything else strongly label 0.
        let vol = CostVolume::from_fn(3, 3, 2, |x, y, t| match (x, y, t) {
            (1, 1, 0) => 5.0,
            (1, 1, 1) => 0.0,
            (_, _, 0) => 0.0,
            _ => 50.0,
        });
        let ep = EnergyParams { smoothing: 2.0, truncation: 1, ..Default::default() };
        let init = wta_disparity(&vol, Precision::Pixel);
        assert_eq!(init.raw(1, 1), 1);
        let out = alpha_expansion(&vol, &ep, &init).unwrap();
        assert!(out.map.levels().iter().all(|&l| l == 0));
        assert!(out.energy < out.initial_energy);
    }

    #[test]
    fn two_pixel_instances_reach_enumerated_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let vol = random_volume(2, 1, 2, &mut rng);
            let ep = EnergyParams { smoothing: rng.random_range(0..60) as f64, truncation: 1, ..Default::default() };
            let mut best = f64::INFINITY;
            for a in 0..2u16 {
                for b in 0..2u16 {
                    let m = DisparityMap::new(2, 1, Precision::Pixel, vec![a, b]).unwrap();
                    best = best.min(energy(&m, &vol, &ep).unwrap());
                }
            }
            let init = DisparityMap::filled(2, 1, Precision::Pixel, rng.random_range(0..2));
            let out = alpha_expansion(&vol, &ep, &init).unwrap();
            assert_eq!(energy(&out.map, &vol, &ep).unwrap(), best);
        }
    }

    #[test]
    fn accepted_moves_never_raise_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let vol = random_volume(8, 8, 4, &mut rng);
            let ep = EnergyParams { smoothing: rng.random_range(1..40) as f64, ..Default::default() };
            let init = DisparityMap::new(8, 8, Precision::Pixel, (0..64).map(|_| rng.random_range(0..4)).collect()).unwrap();
            let out = alpha_expansion(&vol, &ep, &init).unwrap();
            let mut e = out.initial_energy;
            for m in &out.moves {
                assert_eq!(m.energy_before, e);
                if m.accepted {
                    assert!(m.energy_after < m.energy_before);
                    e = m.energy_after;
                }
            }
            assert_eq!(e, out.energy);
            assert!(energy(&out.map, &vol, &ep).unwrap() <= energy(&init, &vol, &ep).unwrap());
        }
    }

    #[test]
    fn zero_smoothing_reproduces_wta() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            // Small integer costs force plenty of ties.
            let vol = CostVolume::from_fn(7, 5, 6, |_, _, _| rng.random_range(0..4) as f64);
            let ep = EnergyParams { smoothing: 0.0, ..Default::default() };
            let wta = wta_disparity(&vol, Precision::Pixel);
            let from_zero = alpha_expansion(&vol, &ep, &DisparityMap::filled(7, 5, Precision::Pixel, 0)).unwrap();
            assert_eq!(from_zero.map, wta);
            let from_wta = alpha_expansion(&vol, &ep, &wta).unwrap();
            assert_eq!(from_wta.map, wta);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let vol = random_volume(12, 9, 5, &mut rng);
        let ep = EnergyParams { smoothing: 10.0, ..Default::default() };
        let init = wta_disparity(&vol, Precision::Pixel);
        let a = alpha_expansion(&vol, &ep, &init).unwrap();
        let b = alpha_expansion(&vol, &ep, &init).unwrap();
        assert_eq!(a.map, b.map);
        assert_eq!(a.moves, b.moves);
    }

    #[test]
    fn rejects_holes_in_init() {
        let vol = CostVolume::from_fn(2, 1, 2, |_, _, _| 0.0);
        let init = DisparityMap::invalid(2, 1, Precision::Pixel);
        assert!(alpha_expansion(&vol, &EnergyParams::default(), &init).is_err());
    }
}
