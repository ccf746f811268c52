//! Per-plant and per-cell subproblems of the price decomposition.

use super::DualPrices;
use crate::dp::{solve_plant_dp, StageCost};
use crate::error::{HydroError, Result};
use crate::lp::ConcaveHull;
use crate::model::ValleyInstance;

/// Price of plant `i`'s releases at step `t`: own balance minus the
/// downstream balance they reach, zero beyond the outlet or the horizon.
pub fn release_price(instance: &ValleyInstance, pi: &DualPrices, i: usize, t: usize) -> f64 {
    let down = instance.arrival(i, t).map_or(0.0, |(j, s)| pi.p[j][s]);
    pi.p[i][t] - down
}

/// Price of `V_i(t+1)`: `pi_i(t) - pi_i(t+1)`, with the end-of-horizon
/// water value replacing `pi_i(H)`.
pub fn storage_price(instance: &ValleyInstance, pi: &DualPrices, i: usize, t: usize) -> f64 {
    let next = if t + 1 < instance.horizon {
        pi.p[i][t + 1]
    } else {
        instance.reservoirs[i].c_wat
    };
    pi.p[i][t] - next
}

/// Discrete discharge sequence minimizing
/// `sum_t -revenue(l, t) + b/2 (l - T_prev(t))^2 + release_price(t) l`
/// over the plant's admissible trajectories.
pub fn discharge_subproblem(
    instance: &ValleyInstance,
    i: usize,
    pi: &DualPrices,
    t_prev: &[f64],
    b: f64,
) -> Result<Vec<f64>> {
    let plant = &instance.plants[i];
    let h = instance.horizon;
    let prices: Vec<f64> = (0..h).map(|t| release_price(instance, pi, i, t)).collect();
    let stage = StageCost::from_fn(h, plant.num_levels(), |t, l| {
        let q = plant.levels[l];
        let dq = q - t_prev[t];
        -instance.revenue(i, t, q) + 0.5 * b * dq * dq + prices[t] * q
    });
    solve_plant_dp(plant, h, &stage, plant.initial_level)
        .map(|path| path.discharge)
        .ok_or(HydroError::InfeasibleSubproblem { plant: i })
}

/// Continuous discharge in `[Tmin, Tmax]` with hull revenue, per step:
/// the same objective as [`discharge_subproblem`] without the discrete
/// domain.
pub fn convex_discharge_subproblem(
    instance: &ValleyInstance,
    i: usize,
    pi: &DualPrices,
    t_prev: &[f64],
    b: f64,
) -> Vec<f64> {
    let hull = ConcaveHull::of(&instance.plants[i]);
    let segments = hull.segments();
    (0..instance.horizon)
        .map(|t| {
            let price = instance.p_gen[t] * instance.step_hours;
            let gamma = release_price(instance, pi, i, t);
            let f = |q: f64| {
                let dq = q - t_prev[t];
                -price * hull.value(q) + 0.5 * b * dq * dq + gamma * q
            };
            let mut best = hull.tmin();
            let mut best_val = f(best);
            for seg in &segments {
                // stationary point of the quadratic on this piece
                let grad_free = -price * seg.slope + gamma;
                let q = if b > 0.0 {
                    (t_prev[t] - grad_free / b).clamp(seg.start, seg.end)
                } else if grad_free < 0.0 {
                    seg.end
                } else {
                    seg.start
                };
                let v = f(q);
                if v < best_val {
                    best = q;
                    best_val = v;
                }
            }
            best
        })
        .collect()
}

/// Which side of the spill exclusion a volume/spill pair lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpillBranch {
    /// `D = 0`, volume free within bounds.
    Dry,
    /// `V = Vmax`, spill free within bounds.
    Full,
}

/// Inputs of one `(V_i(t+1), D_i(t))` subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeCell {
    pub vmin: f64,
    pub vmax: f64,
    pub dmax: f64,
    /// Linear price on the volume.
    pub alpha: f64,
    /// Linear price on the spill.
    pub beta: f64,
    pub v_prev: f64,
    pub d_prev: f64,
    pub b: f64,
}

impl VolumeCell {
    pub fn objective(&self, v: f64, d: f64) -> f64 {
        let dv = v - self.v_prev;
        let dd = d - self.d_prev;
        self.alpha * v + self.beta * d + 0.5 * self.b * (dv * dv + dd * dd)
    }

    fn argmin(&self, prev: f64, price: f64, lo: f64, hi: f64) -> f64 {
        if self.b > 0.0 {
            (prev - price / self.b).clamp(lo, hi)
        } else if price < 0.0 {
            hi
        } else {
            lo
        }
    }
}

/// Minimizes the cell objective over the exclusion set by comparing its
/// two convex branches; ties go to [`SpillBranch::Dry`].
pub fn volume_spillage_subproblem(cell: &VolumeCell) -> (f64, f64, SpillBranch) {
    let v1 = cell.argmin(cell.v_prev, cell.alpha, cell.vmin, cell.vmax);
    let d2 = cell.argmin(cell.d_prev, cell.beta, 0.0, cell.dmax);
    if cell.objective(v1, 0.0) <= cell.objective(cell.vmax, d2) {
        (v1, 0.0, SpillBranch::Dry)
    } else {
        (cell.vmax, d2, SpillBranch::Full)
    }
}

/// Box-constrained version used on the relaxation: volume and spill are
/// minimized independently.
pub fn convex_volume_spillage(cell: &VolumeCell) -> (f64, f64) {
    (
        cell.argmin(cell.v_prev, cell.alpha, cell.vmin, cell.vmax),
        cell.argmin(cell.d_prev, cell.beta, 0.0, cell.dmax),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::oracle::for_each_sequence;
    use crate::model::testutil::*;

    fn cell(alpha: f64, beta: f64, v_prev: f64, d_prev: f64) -> VolumeCell {
        VolumeCell {
            vmin: 0.0,
            vmax: 10.0,
            dmax: 4.0,
            alpha,
            beta,
            v_prev,
            d_prev,
            b: 1.0,
        }
    }

    #[test]
    fn prox_fixed_point_without_prices() {
        let (v, d, br) = volume_spillage_subproblem(&cell(0.0, 0.0, 3.0, 0.0));
        assert_eq!((v, d, br), (3.0, 0.0, SpillBranch::Dry));
    }

    #[test]
    fn negative_volume_price_fills_and_spills() {
        // alpha = -20 pushes V up to Vmax on both branches; beta = -2 makes
        // spilling worth 2 per unit, so branch two spills D = 0 + 2 = 2
        let c = cell(-20.0, -2.0, 10.0, 0.0);
        let (v, d, br) = volume_spillage_subproblem(&c);
        assert_eq!((v, d, br), (10.0, 2.0, SpillBranch::Full));
        assert_eq!(c.objective(10.0, 2.0), -200.0 - 4.0 + 2.0);
    }

    #[test]
    fn tie_goes_to_dry_branch() {
        let c = cell(0.0, 0.0, 10.0, 0.0);
        assert_eq!(volume_spillage_subproblem(&c).2, SpillBranch::Dry);
    }

    #[test]
    fn zero_prices_no_prox_maximize_revenue() {
        let inst = single(&[0.0, 1.0, 2.0], 4, 50.0, 100.0);
        let pi = DualPrices::zeros(1, 4);
        let t = discharge_subproblem(&inst, 0, &pi, &[0.0; 4], 0.0).unwrap();
        assert_eq!(t, vec![2.0; 4]);
    }

    #[test]
    fn large_prox_returns_nearest_sequence() {
        let mut inst = single(&[0.0, 1.0, 2.0], 4, 50.0, 100.0);
        inst.plants[0].smooth_step = 1;
        let pi = DualPrices::zeros(1, 4);
        let prev = [0.0, 2.0, 2.0, 0.0];
        let t = discharge_subproblem(&inst, 0, &pi, &prev, 1e9).unwrap();
        assert_eq!(t, vec![1.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn dp_matches_brute_force_objective() {
        let mut inst = single(&[0.0, 1.5], 3, 50.0, 100.0);
        inst.plants[0].min_dwell = 1;
        inst.p_gen = vec![30.0, 90.0, 10.0];
        let pi = DualPrices {
            p: vec![vec![40.0, 95.0, 5.0]],
        };
        let prev = [1.5, 0.0, 1.5];
        let b = 3.0;
        let obj = |seq: &[usize]| -> f64 {
            seq.iter()
                .enumerate()
                .map(|(t, &l)| {
                    let q = inst.plants[0].levels[l];
                    -inst.revenue(0, t, q) + 0.5 * b * (q - prev[t]).powi(2) + pi.p[0][t] * q
                })
                .sum()
        };
        let mut best = f64::INFINITY;
        for_each_sequence(&inst.plants[0], 3, None, &mut |s| best = best.min(obj(s)));
        let t = discharge_subproblem(&inst, 0, &pi, &prev, b).unwrap();
        let levels: Vec<usize> = t.iter().map(|&q| usize::from(q > 0.0)).collect();
        assert!((obj(&levels) - best).abs() < 1e-9);
    }

    #[test]
    fn convex_discharge_picks_kink_or_interior() {
        let inst = single(&[0.0, 1.0, 2.0], 1, 50.0, 100.0);
        let pi = DualPrices::zeros(1, 1);
        // price 100 per unit; release price 100 makes every level neutral,
        // prox toward 0.5 keeps 0.5
        let pi_neutral = DualPrices { p: vec![vec![100.0]] };
        assert_eq!(convex_discharge_subproblem(&inst, 0, &pi_neutral, &[0.5], 1.0), vec![0.5]);
        assert_eq!(convex_discharge_subproblem(&inst, 0, &pi, &[0.5], 1.0), vec![2.0]);
    }
}
