//! Two-step baseline: solve the relaxation, then follow the river and give
//! each plant the admissible schedule closest to its relaxed discharge.
//!
//! Nothing here looks ahead at downstream capacity, so a plant can pick a
//! schedule that leaves a downstream reservoir with no admissible one.

use crate::dp::{solve_plant_dp_volume, VolumeGrid, VolumeSubproblem};
use crate::error::Result;
use crate::lp::{build_network, solve_lp, LpSolution};
use crate::model::{check_feasibility, evaluate_gain, Schedule, ValleyInstance, DEFAULT_FEASIBILITY_TOL};

/// Weight of the gain tie-break relative to `volume_scale / price_scale`.
/// Small enough that it only orders paths at equal distance.
const TIE_BREAK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HeuristicResult {
    pub schedule: Option<Schedule>,
    pub gain: Option<f64>,
    /// First plant, in sweep order, left without an admissible schedule.
    pub failed_plant: Option<usize>,
    pub lp: LpSolution,
}

/// Plant-by-plant projection of `target` discharges onto the admissible
/// schedules, upstream first. `Err(plant)` names the first plant whose DP
/// has no admissible path given what arrives from upstream.
pub fn sweep(instance: &ValleyInstance, target: &[Vec<f64>], buckets: usize) -> Result<Schedule, usize> {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let eta = TIE_BREAK * instance.volume_scale() / instance.price_scale().max(f64::MIN_POSITIVE);
    let mut inflow = instance.inflows.clone();
    let mut discharge = vec![vec![0.0; h]; n];
    let mut spillage = vec![vec![0.0; h]; n];
    for i in instance.topology.topological_order() {
        let res = &instance.reservoirs[i];
        let sub = VolumeSubproblem {
            plant: &instance.plants[i],
            reservoir: res,
            horizon: h,
            inflow: &inflow[i],
            grid: VolumeGrid::for_reservoir(res, buckets),
        };
        let stage = |t: usize, _l: usize, q: f64, _d: f64| {
            let gap = q - target[i][t];
            gap * gap - eta * instance.revenue(i, t, q)
        };
        let terminal = |v: f64| -eta * res.c_wat * v;
        let path = solve_plant_dp_volume(&sub, &stage, &terminal, instance.plants[i].initial_level).ok_or(i)?;
        for t in 0..h {
            if let Some((j, s)) = instance.arrival(i, t) {
                inflow[j][s] += path.discharge[t] + path.spill[t];
            }
        }
        discharge[i] = path.discharge;
        spillage[i] = path.spill;
    }
    Ok(Schedule::from_releases(instance, discharge, spillage).expect("sweep builds full-size arrays"))
}

/// Relaxation followed by [`sweep`] toward its discharges. The schedule is
/// `None` when a plant had no admissible path or the assembled schedule
/// fails the feasibility check.
pub fn run(instance: &ValleyInstance) -> Result<HeuristicResult> {
    instance.validate()?;
    let lp = solve_lp(instance, &build_network(instance))?;
    let (schedule, failed_plant) = match sweep(instance, &lp.schedule.discharge, VolumeGrid::DEFAULT_BUCKETS) {
        Ok(s) => (Some(s), None),
        Err(plant) => {
            log::info!("{}: heuristic found no schedule for plant {plant}", instance.name);
            (None, Some(plant))
        }
    };
    let mut gain = None;
    let schedule = match schedule {
        Some(s) if check_feasibility(instance, &s, DEFAULT_FEASIBILITY_TOL)?.feasible => {
            gain = Some(evaluate_gain(instance, &s)?);
            Some(s)
        }
        _ => None,
    };
    Ok(HeuristicResult {
        schedule,
        gain,
        failed_plant,
        lp,
    })
}
