//! Exact dynamic programming over a plant's admissible discharge sequences.
//!
//! The state before choosing the discharge of step `t` is the level held at
//! `t - 1` and the number of unchanged steps since the last variation,
//! saturated at `min_dwell`. Keeping the level increments the dwell counter;
//! changing it needs `dwell >= min_dwell` and a jump of at most
//! `smooth_step` indices, and resets the counter to zero.

mod volume;

pub use volume::{solve_plant_dp_volume, ValueTable, VolumeGrid, VolumePath, VolumeStageCost, VolumeSubproblem};

use crate::model::PlantConstraints;

/// DP state over the plant's generating domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DpState {
    pub level_index: usize,
    pub dwell: usize,
    pub volume_bucket: Option<usize>,
}

impl DpState {
    pub fn new(level_index: usize, dwell: usize) -> Self {
        DpState {
            level_index,
            dwell,
            volume_bucket: None,
        }
    }
}

/// States reachable in one step, in increasing level order. The volume
/// bucket, if any, is carried over unchanged.
pub fn enumerate_transitions(plant: &PlantConstraints, state: DpState) -> Vec<DpState> {
    let mut out = Vec::new();
    for_each_successor(plant, state.level_index, state.dwell, |level, dwell| {
        out.push(DpState {
            level_index: level,
            dwell,
            volume_bucket: state.volume_bucket,
        })
    });
    out
}

#[inline]
pub(crate) fn for_each_successor(
    plant: &PlantConstraints,
    level: usize,
    dwell: usize,
    mut f: impl FnMut(usize, usize),
) {
    let m = plant.num_levels();
    let stay_dwell = (dwell + 1).min(plant.min_dwell);
    if dwell < plant.min_dwell {
        f(level, stay_dwell);
        return;
    }
    let lo = level.saturating_sub(plant.smooth_step);
    let hi = (level + plant.smooth_step).min(m - 1);
    for next in lo..=hi {
        if next == level {
            f(level, stay_dwell);
        } else {
            f(next, 0);
        }
    }
}

/// `(level, dwell)` state after each step of a level sequence, following
/// the same counting as the DP. `initial_level` is the level held before
/// step 0, if any.
pub fn dwell_trace(plant: &PlantConstraints, levels: &[usize], initial_level: Option<usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(levels.len());
    let mut state: Option<(usize, usize)> = initial_level.map(|l| (l, plant.min_dwell));
    for &l in levels {
        let next = match state {
            Some((prev, d)) if prev == l => (l, (d + 1).min(plant.min_dwell)),
            Some(_) => (l, 0),
            None => (l, plant.min_dwell),
        };
        out.push(next);
        state = Some(next);
    }
    out
}

/// Compact index of `(level, dwell)` pairs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StateSpace {
    pub dwell_states: usize,
    pub levels: usize,
}

impl StateSpace {
    pub fn of(plant: &PlantConstraints) -> Self {
        StateSpace {
            dwell_states: plant.min_dwell + 1,
            levels: plant.num_levels(),
        }
    }

    pub fn len(&self) -> usize {
        self.dwell_states * self.levels
    }

    #[inline]
    pub fn index(&self, level: usize, dwell: usize) -> usize {
        level * self.dwell_states + dwell
    }

    #[inline]
    pub fn level(&self, index: usize) -> usize {
        index / self.dwell_states
    }

    #[inline]
    pub fn dwell(&self, index: usize) -> usize {
        index % self.dwell_states
    }
}

/// Additive cost `cost[t][level]`; `+inf` forbids a (step, level) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCost {
    costs: Vec<Vec<f64>>,
}

impl StageCost {
    pub fn zeros(horizon: usize, levels: usize) -> Self {
        StageCost {
            costs: vec![vec![0.0; levels]; horizon],
        }
    }

    pub fn from_fn(horizon: usize, levels: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        StageCost {
            costs: (0..horizon)
                .map(|t| (0..levels).map(|l| f(t, l)).collect())
                .collect(),
        }
    }

    pub fn from_rows(costs: Vec<Vec<f64>>) -> Self {
        StageCost { costs }
    }

    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    #[inline]
    pub fn get(&self, t: usize, level: usize) -> f64 {
        self.costs[t][level]
    }

    pub fn set(&mut self, t: usize, level: usize, value: f64) {
        self.costs[t][level] = value;
    }
}

/// Optimal level sequence of a plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantPath {
    pub levels: Vec<usize>,
    pub discharge: Vec<f64>,
    /// Sum of the chosen stage costs, accumulated in time order.
    pub cost: f64,
}

/// Minimum-cost admissible level sequence over `horizon` steps.
///
/// Returns `None` when every admissible sequence crosses a `+inf` cost.
/// Among equal-cost choices the lowest level index at the earliest step
/// wins.
///
/// # Panics
///
/// Panics if `stage_cost` does not cover `horizon` steps and all levels.
pub fn solve_plant_dp(
    plant: &PlantConstraints,
    horizon: usize,
    stage_cost: &StageCost,
    initial_level: Option<usize>,
) -> Option<PlantPath> {
    assert!(stage_cost.horizon() >= horizon, "stage cost horizon too short");
    let space = StateSpace::of(plant);
    let ns = space.len();
    let full = plant.min_dwell;

    // cost_to_go[t][s]: best cost of steps t..H starting from state s
    let mut cost_to_go = vec![vec![0.0; ns]; horizon + 1];
    for t in (1..horizon).rev() {
        let (head, tail) = cost_to_go.split_at_mut(t + 1);
        let next = &tail[0];
        let row = &mut head[t];
        for (s, slot) in row.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for_each_successor(plant, space.level(s), space.dwell(s), |l, d| {
                let c = stage_cost.get(t, l) + next[space.index(l, d)];
                if c < best {
                    best = c;
                }
            });
            *slot = best;
        }
    }

    let mut levels = Vec::with_capacity(horizon);
    if horizon == 0 {
        return Some(PlantPath {
            levels,
            discharge: Vec::new(),
            cost: 0.0,
        });
    }

    let mut state = {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut consider = |l: usize, d: usize| {
            let c = stage_cost.get(0, l) + cost_to_go[1][space.index(l, d)];
            if c < f64::INFINITY && best.is_none_or(|(b, _, _)| c < b) {
                best = Some((c, l, d));
            }
        };
        match initial_level {
            Some(l0) => for_each_successor(plant, l0, full, &mut consider),
            None => (0..space.levels).for_each(|l| consider(l, full)),
        }
        let (_, l, d) = best?;
        levels.push(l);
        (l, d)
    };

    for t in 1..horizon {
        let next = &cost_to_go[t + 1];
        let mut best: Option<(f64, usize, usize)> = None;
        for_each_successor(plant, state.0, state.1, |l, d| {
            let c = stage_cost.get(t, l) + next[space.index(l, d)];
            if c < f64::INFINITY && best.is_none_or(|(b, _, _)| c < b) {
                best = Some((c, l, d));
            }
        });
        let (_, l, d) = best?;
        levels.push(l);
        state = (l, d);
    }

    let cost = levels
        .iter()
        .enumerate()
        .map(|(t, &l)| stage_cost.get(t, l))
        .sum();
    let discharge = levels.iter().map(|&l| plant.levels[l]).collect();
    Some(PlantPath {
        levels,
        discharge,
        cost,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive enumeration of admissible level sequences.
    use crate::model::PlantConstraints;

    /// Calls `f` on every admissible level sequence of length `horizon`,
    /// checking dwell and smoothness directly on the sequence.
    pub fn for_each_sequence(
        plant: &PlantConstraints,
        horizon: usize,
        initial_level: Option<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        let mut seq = Vec::with_capacity(horizon);
        rec(plant, horizon, initial_level, None, &mut seq, f);
    }

    fn rec(
        plant: &PlantConstraints,
        horizon: usize,
        prev: Option<usize>,
        last_change: Option<usize>,
        seq: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        let t = seq.len();
        if t == horizon {
            f(seq);
            return;
        }
        for l in 0..plant.num_levels() {
            let mut lc = last_change;
            if let Some(p) = prev {
                if p != l {
                    if p.abs_diff(l) > plant.smooth_step {
                        continue;
                    }
                    if let Some(c) = last_change {
                        if t - c - 1 < plant.min_dwell {
                            continue;
                        }
                    }
                    lc = Some(t);
                }
            }
            seq.push(l);
            rec(plant, horizon, Some(l), lc, seq, f);
            seq.pop();
        }
    }
}
