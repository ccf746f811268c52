//! DP with a reservoir volume in the state.
//!
//! Volumes are tracked exactly along each path. A uniform grid over
//! `[Vmin, Vmax]` only identifies states: two paths reaching the same
//! `(level, dwell, bucket)` are merged, keeping the one with the lower cost
//! so far plus terminal value of its current volume. Returned trajectories
//! are re-simulated from the chosen levels.

use super::{for_each_successor, StageCost, StateSpace};
use crate::model::{PlantConstraints, Reservoir};

/// Per-step cost of running level `level` (discharge `discharge`) while
/// spilling `spill`.
pub trait VolumeStageCost {
    fn cost(&self, t: usize, level: usize, discharge: f64, spill: f64) -> f64;
}

impl VolumeStageCost for StageCost {
    fn cost(&self, t: usize, level: usize, _discharge: f64, _spill: f64) -> f64 {
        self.get(t, level)
    }
}

impl<F> VolumeStageCost for F
where
    F: Fn(usize, usize, f64, f64) -> f64,
{
    fn cost(&self, t: usize, level: usize, discharge: f64, spill: f64) -> f64 {
        self(t, level, discharge, spill)
    }
}

/// Uniform grid of `buckets` points over `[vmin, vmax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeGrid {
    pub vmin: f64,
    pub vmax: f64,
    pub buckets: usize,
}

impl VolumeGrid {
    pub const DEFAULT_BUCKETS: usize = 101;

    pub fn new(vmin: f64, vmax: f64, buckets: usize) -> Self {
        VolumeGrid {
            vmin,
            vmax,
            buckets: buckets.max(1),
        }
    }

    pub fn for_reservoir(res: &Reservoir, buckets: usize) -> Self {
        Self::new(res.vmin, res.vmax, buckets)
    }

    pub fn width(&self) -> f64 {
        if self.buckets <= 1 {
            0.0
        } else {
            (self.vmax - self.vmin) / (self.buckets - 1) as f64
        }
    }

    pub fn bucket(&self, volume: f64) -> usize {
        let w = self.width();
        if w <= 0.0 {
            return 0;
        }
        let b = ((volume - self.vmin) / w).round();
        (b.max(0.0) as usize).min(self.buckets - 1)
    }

    pub fn point(&self, bucket: usize) -> f64 {
        self.vmin + bucket as f64 * self.width()
    }
}

/// Everything a single-plant volume-aware subproblem needs besides its costs.
#[derive(Debug, Clone, Copy)]
pub struct VolumeSubproblem<'a> {
    pub plant: &'a PlantConstraints,
    pub reservoir: &'a Reservoir,
    pub horizon: usize,
    /// Total inflow of each step (natural plus routed upstream releases).
    pub inflow: &'a [f64],
    pub grid: VolumeGrid,
}

impl VolumeSubproblem<'_> {
    fn slack(&self) -> f64 {
        1e-9 * self.reservoir.vmax.abs().max(self.reservoir.vmin.abs()).max(1.0)
    }

    /// Applies discharge `q` at step `t` from volume `v`. Spills only the
    /// excess above `Vmax` (capped at `Dmax`); returns `(spill, next volume)`
    /// or `None` when a bound is violated.
    #[inline]
    pub fn step(&self, t: usize, v: f64, q: f64) -> Option<(f64, f64)> {
        let res = self.reservoir;
        let raw = v + self.inflow[t] - q;
        let spill = if raw > res.vmax {
            (raw - res.vmax).min(res.dmax)
        } else {
            0.0
        };
        let next = raw - spill;
        let eps = self.slack();
        (next >= res.vmin - eps && next <= res.vmax + eps).then_some((spill, next))
    }
}

/// Optimal plant trajectory with its water balance.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumePath {
    pub levels: Vec<usize>,
    pub discharge: Vec<f64>,
    pub spill: Vec<f64>,
    /// Volumes over `0..=H`, starting at `V0`.
    pub volume: Vec<f64>,
    /// Stage costs plus terminal cost of the final volume.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
struct Label {
    score: f64,
    cost: f64,
    volume: f64,
    prev: u32,
}

const EMPTY: Label = Label {
    score: f64::INFINITY,
    cost: f64::INFINITY,
    volume: 0.0,
    prev: u32::MAX,
};

/// Minimum-cost admissible trajectory of one plant with volume bounds.
///
/// `terminal` is the cost of ending with a given volume (for a water value
/// `c`, `|v| -c * v`). Returns `None` when every admissible level sequence
/// drives the reservoir outside its bounds.
pub fn solve_plant_dp_volume(
    sub: &VolumeSubproblem<'_>,
    stage: &impl VolumeStageCost,
    terminal: &impl Fn(f64) -> f64,
    initial_level: Option<usize>,
) -> Option<VolumePath> {
    let plant = sub.plant;
    let h = sub.horizon;
    let space = StateSpace::of(plant);
    let nb = sub.grid.buckets;
    let layer = space.len() * nb;
    let v0 = sub.reservoir.v0;

    if h == 0 {
        return Some(VolumePath {
            levels: vec![],
            discharge: vec![],
            spill: vec![],
            volume: vec![v0],
            cost: terminal(v0),
        });
    }

    // layers[t] holds labels after choosing the discharge of step t
    let mut layers: Vec<Vec<Label>> = Vec::with_capacity(h);

    let relax = |row: &mut Vec<Label>, t: usize, from_cost: f64, v: f64, l: usize, d: usize, prev: u32| {
        let q = plant.levels[l];
        let Some((spill, next)) = sub.step(t, v, q) else {
            return;
        };
        let c = stage.cost(t, l, q, spill);
        if !(c < f64::INFINITY) {
            return;
        }
        let cost = from_cost + c;
        let score = cost + terminal(next);
        let idx = space.index(l, d) * nb + sub.grid.bucket(next);
        if score < row[idx].score {
            row[idx] = Label {
                score,
                cost,
                volume: next,
                prev,
            };
        }
    };

    let mut first = vec![EMPTY; layer];
    match initial_level {
        Some(l0) => for_each_successor(plant, l0, plant.min_dwell, |l, d| {
            relax(&mut first, 0, 0.0, v0, l, d, u32::MAX)
        }),
        None => (0..space.levels).for_each(|l| relax(&mut first, 0, 0.0, v0, l, plant.min_dwell, u32::MAX)),
    }
    layers.push(first);

    for t in 1..h {
        let mut row = vec![EMPTY; layer];
        let prev_row = &layers[t - 1];
        for (idx, lab) in prev_row.iter().enumerate() {
            if !(lab.cost < f64::INFINITY) {
                continue;
            }
            let s = idx / nb;
            for_each_successor(plant, space.level(s), space.dwell(s), |l, d| {
                relax(&mut row, t, lab.cost, lab.volume, l, d, idx as u32)
            });
        }
        layers.push(row);
    }

    let last = &layers[h - 1];
    let mut best: Option<usize> = None;
    for (idx, lab) in last.iter().enumerate() {
        if lab.score < f64::INFINITY && best.is_none_or(|b| lab.score < last[b].score) {
            best = Some(idx);
        }
    }
    let mut idx = best?;
    let mut levels = vec![0; h];
    for t in (0..h).rev() {
        levels[t] = space.level(idx / nb);
        idx = layers[t][idx].prev as usize;
    }
    Some(resimulate(sub, stage, terminal, levels))
}

/// Exact water balance and cost of a level sequence under the spill-when-full
/// policy. Volumes may leave the bounds; callers that need feasibility use
/// the result of the DP, whose bound checks ran on the same arithmetic.
pub(crate) fn resimulate(
    sub: &VolumeSubproblem<'_>,
    stage: &impl VolumeStageCost,
    terminal: &impl Fn(f64) -> f64,
    levels: Vec<usize>,
) -> VolumePath {
    let h = sub.horizon;
    let res = sub.reservoir;
    let mut volume = Vec::with_capacity(h + 1);
    let mut spill = Vec::with_capacity(h);
    let mut discharge = Vec::with_capacity(h);
    let mut cost = 0.0;
    let mut v = res.v0;
    volume.push(v);
    for (t, &l) in levels.iter().enumerate() {
        let q = sub.plant.levels[l];
        let raw = v + sub.inflow[t] - q;
        let d = if raw > res.vmax {
            (raw - res.vmax).min(res.dmax)
        } else {
            0.0
        };
        v = raw - d;
        cost += stage.cost(t, l, q, d);
        discharge.push(q);
        spill.push(d);
        volume.push(v);
    }
    cost += terminal(v);
    VolumePath {
        levels,
        discharge,
        spill,
        volume,
        cost,
    }
}

/// Cost-to-go on the volume grid, computed backward with linear
/// interpolation between grid points. Used for marginal water values.
#[derive(Debug, Clone)]
pub struct ValueTable {
    grid: VolumeGrid,
    space: StateSpace,
    /// values[t] for t in 0..=H, indexed `state * buckets + bucket`.
    values: Vec<Vec<f64>>,
    slack: f64,
}

impl ValueTable {
    /// Builds the table for steps `1..=H` (row 0 is left infinite).
    pub fn compute(
        sub: &VolumeSubproblem<'_>,
        stage: &impl VolumeStageCost,
        terminal: &impl Fn(f64) -> f64,
    ) -> Self {
        let plant = sub.plant;
        let space = StateSpace::of(plant);
        let grid = sub.grid;
        let nb = grid.buckets;
        let h = sub.horizon;
        let mut values = vec![vec![f64::INFINITY; space.len() * nb]; h + 1];
        for s in 0..space.len() {
            for b in 0..nb {
                values[h][s * nb + b] = terminal(grid.point(b));
            }
        }
        let mut table = ValueTable {
            grid,
            space,
            values,
            slack: sub.slack(),
        };
        for t in (1..h).rev() {
            let mut row = vec![f64::INFINITY; space.len() * nb];
            for s in 0..space.len() {
                for b in 0..nb {
                    let v = grid.point(b);
                    let mut best = f64::INFINITY;
                    for_each_successor(plant, space.level(s), space.dwell(s), |l, d| {
                        let q = plant.levels[l];
                        if let Some((spill, next)) = sub.step(t, v, q) {
                            let c = stage.cost(t, l, q, spill)
                                + table.value(t + 1, space.index(l, d), next);
                            if c < best {
                                best = c;
                            }
                        }
                    });
                    row[s * nb + b] = best;
                }
            }
            table.values[t] = row;
        }
        table
    }

    fn value(&self, t: usize, state: usize, volume: f64) -> f64 {
        let nb = self.grid.buckets;
        let row = &self.values[t][state * nb..(state + 1) * nb];
        let w = self.grid.width();
        if w <= 0.0 || nb == 1 {
            return row[0];
        }
        let pos = ((volume - self.grid.vmin) / w).clamp(0.0, (nb - 1) as f64);
        let lo = (pos.floor() as usize).min(nb - 2);
        let frac = pos - lo as f64;
        let (a, b) = (row[lo], row[lo + 1]);
        match (a.is_finite(), b.is_finite()) {
            (true, true) => a + frac * (b - a),
            _ => {
                if frac < 0.5 {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// Cost-to-go from step `t` in state `(level, dwell)` holding `volume`.
    pub fn cost_to_go(&self, t: usize, level: usize, dwell: usize, volume: f64) -> f64 {
        self.value(t, self.space.index(level, dwell), volume)
    }

    /// Marginal value of one more m³ in store at the start of step `t`,
    /// `-(dW/dV)`, by a one-bucket finite difference. The difference is
    /// taken upward when room remains below `Vmax` and downward otherwise;
    /// an infinite side falls back to the other one, and to zero when both
    /// are infinite.
    pub fn marginal_value(&self, t: usize, level: usize, dwell: usize, volume: f64) -> f64 {
        let w = self.grid.width();
        if w <= 0.0 {
            return 0.0;
        }
        let s = self.space.index(level, dwell);
        let here = self.value(t, s, volume);
        let up = (volume + w <= self.grid.vmax + self.slack).then(|| self.value(t, s, volume + w));
        let down = (volume - w >= self.grid.vmin - self.slack).then(|| self.value(t, s, volume - w));
        let upward = up.filter(|u| u.is_finite() && here.is_finite()).map(|u| (here - u) / w);
        let downward = down.filter(|d| d.is_finite() && here.is_finite()).map(|d| (d - here) / w);
        upward.or(downward).unwrap_or(0.0)
    }
}
